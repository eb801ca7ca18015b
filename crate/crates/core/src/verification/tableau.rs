use std::fmt;

use rand::{Rng, RngCore};

use super::gf2::gf2_rank;
use super::{Result, VerifyError};
use crate::compiler::{Gate, GateKind};

/// CHP stabilizer tableau: rows `0..n` are destabilizers, `n..2n`
/// stabilizers, row `2n` is scratch space for deterministic measurements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StabilizerTableau {
    n: usize,
    x: Vec<Vec<u8>>,
    z: Vec<Vec<u8>>,
    r: Vec<u8>,
}

fn g(x1: u8, z1: u8, x2: u8, z2: u8) -> i32 {
    let (x2, z2) = (i32::from(x2), i32::from(z2));
    match (x1, z1) {
        (0, 0) => 0,
        (1, 1) => z2 - x2,
        (1, 0) => z2 * (2 * x2 - 1),
        _ => x2 * (1 - 2 * z2),
    }
}

impl StabilizerTableau {
    /// `|0…0⟩`.
    pub fn new(n: usize) -> Self {
        let rows = 2 * n + 1;
        let mut t = Self {
            n,
            x: vec![vec![0; n]; rows],
            z: vec![vec![0; n]; rows],
            r: vec![0; rows],
        };
        for i in 0..n {
            t.x[i][i] = 1;
            t.z[i + n][i] = 1;
        }
        t
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn check(&self, q: usize) -> Result<()> {
        if q >= self.n {
            return Err(VerifyError::QubitOutOfRange { qubit: q, width: self.n });
        }
        Ok(())
    }

    fn rowsum(&mut self, h: usize, i: usize) {
        let mut sum = 2 * i32::from(self.r[h]) + 2 * i32::from(self.r[i]);
        for j in 0..self.n {
            sum += g(self.x[i][j], self.z[i][j], self.x[h][j], self.z[h][j]);
        }
        self.r[h] = u8::from(sum.rem_euclid(4) == 2);
        for j in 0..self.n {
            self.x[h][j] ^= self.x[i][j];
            self.z[h][j] ^= self.z[i][j];
        }
    }

    pub fn h(&mut self, a: usize) -> Result<()> {
        self.check(a)?;
        for i in 0..2 * self.n {
            self.r[i] ^= self.x[i][a] & self.z[i][a];
            std::mem::swap(&mut self.x[i][a], &mut self.z[i][a]);
        }
        Ok(())
    }

    pub fn s(&mut self, a: usize) -> Result<()> {
        self.check(a)?;
        for i in 0..2 * self.n {
            self.r[i] ^= self.x[i][a] & self.z[i][a];
            self.z[i][a] ^= self.x[i][a];
        }
        Ok(())
    }

    pub fn x(&mut self, a: usize) -> Result<()> {
        self.check(a)?;
        for i in 0..2 * self.n {
            self.r[i] ^= self.z[i][a];
        }
        Ok(())
    }

    pub fn z(&mut self, a: usize) -> Result<()> {
        self.check(a)?;
        for i in 0..2 * self.n {
            self.r[i] ^= self.x[i][a];
        }
        Ok(())
    }

    pub fn cnot(&mut self, a: usize, b: usize) -> Result<()> {
        self.check(a)?;
        self.check(b)?;
        if a == b {
            return Err(VerifyError::SameQubit(a));
        }
        for i in 0..2 * self.n {
            self.r[i] ^= self.x[i][a] & self.z[i][b] & (self.x[i][b] ^ self.z[i][a] ^ 1);
            self.x[i][b] ^= self.x[i][a];
            self.z[i][a] ^= self.z[i][b];
        }
        Ok(())
    }

    /// Applies a Clifford gate; SWAP is three CNOTs.
    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        let t = gate.targets();
        match gate.kind {
            GateKind::H => self.h(t[0]),
            GateKind::S => self.s(t[0]),
            GateKind::X => self.x(t[0]),
            GateKind::Z => self.z(t[0]),
            GateKind::Cnot => self.cnot(t[0], t[1]),
            GateKind::Swap => {
                self.cnot(t[0], t[1])?;
                self.cnot(t[1], t[0])?;
                self.cnot(t[0], t[1])
            }
            other => Err(VerifyError::NonClifford(other.mnemonic().to_string())),
        }
    }

    /// Outcome of a Z measurement of `a` if it is determined.
    pub fn deterministic_outcome(&self, a: usize) -> Result<Option<u8>> {
        self.check(a)?;
        if (self.n..2 * self.n).any(|p| self.x[p][a] == 1) {
            return Ok(None);
        }
        let mut t = self.clone();
        Ok(Some(t.deterministic(a)))
    }

    fn deterministic(&mut self, a: usize) -> u8 {
        let s = 2 * self.n;
        self.x[s].fill(0);
        self.z[s].fill(0);
        self.r[s] = 0;
        for i in 0..self.n {
            if self.x[i][a] == 1 {
                self.rowsum(s, i + self.n);
            }
        }
        self.r[s]
    }

    /// Z measurement of `a`; a random outcome is taken from `choose`.
    /// Returns the outcome and whether it was random.
    pub fn measure_with(&mut self, a: usize, choose: impl FnOnce() -> u8) -> Result<(u8, bool)> {
        self.check(a)?;
        let n = self.n;
        let Some(p) = (n..2 * n).find(|&p| self.x[p][a] == 1) else {
            return Ok((self.deterministic(a), false));
        };
        for i in 0..2 * n {
            if i != p && self.x[i][a] == 1 {
                self.rowsum(i, p);
            }
        }
        self.x[p - n] = self.x[p].clone();
        self.z[p - n] = self.z[p].clone();
        self.r[p - n] = self.r[p];
        self.x[p].fill(0);
        self.z[p].fill(0);
        self.z[p][a] = 1;
        let bit = choose() & 1;
        self.r[p] = bit;
        Ok((bit, true))
    }

    pub fn measure(&mut self, a: usize, rng: &mut dyn RngCore) -> Result<u8> {
        Ok(self.measure_with(a, || u8::from(rng.random_bool(0.5)))?.0)
    }

    /// Stabilizer generators as signed Pauli strings, e.g. `+XX`.
    pub fn stabilizers(&self) -> Vec<String> {
        (self.n..2 * self.n).map(|i| self.row_string(i)).collect()
    }

    fn row_string(&self, i: usize) -> String {
        let sign = if self.r[i] == 1 { '-' } else { '+' };
        let ops = (0..self.n).map(|j| match (self.x[i][j], self.z[i][j]) {
            (0, 0) => 'I',
            (1, 0) => 'X',
            (0, _) => 'Z',
            _ => 'Y',
        });
        std::iter::once(sign).chain(ops).collect()
    }

    /// Rows `0..2n` are independent and have the canonical commutation
    /// pattern (stabilizers commute; destabilizer `i` anticommutes only with
    /// stabilizer `i`).
    pub fn is_valid(&self) -> bool {
        let n = self.n;
        let rows: Vec<Vec<u8>> = (0..2 * n).map(|i| [self.x[i].clone(), self.z[i].clone()].concat()).collect();
        if gf2_rank(&rows, 2 * n) != 2 * n {
            return false;
        }
        let anti = |a: usize, b: usize| {
            (0..n).fold(0u8, |acc, j| acc ^ (self.x[a][j] & self.z[b][j]) ^ (self.z[a][j] & self.x[b][j]))
        };
        (0..n).all(|i| {
            (0..n).all(|j| anti(n + i, n + j) == 0 && anti(i, n + j) == u8::from(i == j))
        })
    }
}

impl fmt::Display for StabilizerTableau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.stabilizers().join(" "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bell_stabilizers() {
        let mut t = StabilizerTableau::new(2);
        t.h(0).unwrap();
        t.cnot(0, 1).unwrap();
        assert_eq!(t.stabilizers(), vec!["+XX", "+ZZ"]);
        assert!(t.is_valid());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..200 {
            let mut u = t.clone();
            let a = u.measure(0, &mut rng).unwrap();
            let b = u.measure(1, &mut rng).unwrap();
            assert_eq!(a, b);
            assert!(u.is_valid());
        }
    }

    #[test]
    fn basis_states_measure_deterministically() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut t = StabilizerTableau::new(1);
        assert_eq!(t.deterministic_outcome(0).unwrap(), Some(0));
        assert_eq!(t.clone().measure(0, &mut rng).unwrap(), 0);
        t.x(0).unwrap();
        assert_eq!(t.measure(0, &mut rng).unwrap(), 1);
        assert_eq!(t.stabilizers(), vec!["-Z"]);
    }

    #[test]
    fn plus_state_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut t = StabilizerTableau::new(1);
        t.h(0).unwrap();
        assert_eq!(t.deterministic_outcome(0).unwrap(), None);
        let n = 10_000;
        let ones: u32 = (0..n).map(|_| u32::from(t.clone().measure(0, &mut rng).unwrap())).sum();
        let sigma = (0.25 / f64::from(n)).sqrt();
        assert!((f64::from(ones) / f64::from(n) - 0.5).abs() < 5.0 * sigma);
    }

    #[test]
    fn s_squared_is_z() {
        let mut a = StabilizerTableau::new(1);
        a.h(0).unwrap();
        let mut b = a.clone();
        a.s(0).unwrap();
        a.s(0).unwrap();
        b.z(0).unwrap();
        assert_eq!(a.stabilizers(), vec!["-X"]);
        assert_eq!(a.stabilizers(), b.stabilizers());
        a.s(0).unwrap();
        assert_eq!(a.stabilizers(), vec!["-Y"]);
    }

    #[test]
    fn rejects_bad_gates() {
        let mut t = StabilizerTableau::new(2);
        assert!(matches!(t.h(2), Err(VerifyError::QubitOutOfRange { qubit: 2, width: 2 })));
        assert!(t.cnot(1, 1).is_err());
        let tg = Gate::new(GateKind::T, &[0]).unwrap();
        assert!(matches!(t.apply(&tg), Err(VerifyError::NonClifford(_))));
        let sw = Gate::new(GateKind::Swap, &[0, 1]).unwrap();
        t.x(0).unwrap();
        t.apply(&sw).unwrap();
        assert_eq!(t.deterministic_outcome(0).unwrap(), Some(0));
        assert_eq!(t.deterministic_outcome(1).unwrap(), Some(1));
    }
}
