//! Linear algebra over GF(2) on bit vectors stored as `0`/`1` bytes.

/// Reduced row echelon form in place; returns the pivot columns.
fn rref(rows: &mut [Vec<u8>], width: usize) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..width {
        let Some(p) = (r..rows.len()).find(|&i| rows[i][col] == 1) else {
            continue;
        };
        rows.swap(r, p);
        for i in 0..rows.len() {
            if i != r && rows[i][col] == 1 {
                let pivot = rows[r].clone();
                rows[i].iter_mut().zip(&pivot).for_each(|(a, b)| *a ^= b);
            }
        }
        pivots.push(col);
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    pivots
}

/// Basis of `{v : row·v = 0 mod 2 for every row}`, one vector per free
/// column. Panics if a row is not `width` long.
pub fn gf2_nullspace(rows: &[Vec<u8>], width: usize) -> Vec<Vec<u8>> {
    let mut m: Vec<Vec<u8>> = rows
        .iter()
        .map(|r| {
            assert_eq!(r.len(), width, "row width");
            r.iter().map(|b| b & 1).collect()
        })
        .collect();
    let pivots = rref(&mut m, width);
    (0..width)
        .filter(|c| !pivots.contains(c))
        .map(|free| {
            let mut v = vec![0u8; width];
            v[free] = 1;
            for (row, &p) in m.iter().zip(&pivots) {
                v[p] = row[free];
            }
            v
        })
        .collect()
}

pub fn gf2_rank(rows: &[Vec<u8>], width: usize) -> usize {
    let mut m = rows.to_vec();
    rref(&mut m, width).len()
}

pub fn dot(a: &[u8], b: &[u8]) -> u8 {
    a.iter().zip(b).fold(0, |acc, (x, y)| acc ^ (x & y))
}

/// `"101"` for `[1, 0, 1]`.
pub fn bits_to_string(bits: &[u8]) -> String {
    bits.iter().map(|b| if *b == 1 { '1' } else { '0' }).collect()
}

pub fn parse_bits(s: &str) -> Option<Vec<u8>> {
    s.chars()
        .map(|c| match c {
            '0' => Some(0),
            '1' => Some(1),
            _ => None,
        })
        .collect()
}

/// Bits of `index` with site 0 as the most significant bit.
pub fn index_to_bits(index: usize, width: usize) -> Vec<u8> {
    (0..width).map(|i| ((index >> (width - 1 - i)) & 1) as u8).collect()
}

pub fn bits_to_index(bits: &[u8]) -> usize {
    bits.iter().fold(0, |acc, b| (acc << 1) | usize::from(*b & 1))
}
