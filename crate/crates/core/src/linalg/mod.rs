//! Dense complex linear algebra over registers of spin-1/2 sites.
//!
//! Basis-state indices use the convention that site 0 is the most
//! significant bit: for a register of `q` sites, site `s` is bit `q - 1 - s`
//! of the index. The central spin always sits on site 0.

mod state;

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Complex, ComplexField, DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

use crate::num::Real;

pub use state::{DensityMatrix, StateVector};

pub type C<T> = Complex<T>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("dimension {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("non-finite entry")]
    NonFinite,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("target site {target} out of range for a {sites}-site register")]
    TargetOutOfRange { target: usize, sites: usize },
    #[error("duplicate target site {0}")]
    DuplicateTarget(usize),
    #[error("operator acts on {op_sites} sites but {targets} targets were given")]
    TargetCountMismatch { op_sites: usize, targets: usize },
    #[error("operator is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("state is not normalized (norm² = {0:.12})")]
    NotNormalized(f64),
    #[error("density matrix is invalid: {0}")]
    InvalidDensity(&'static str),
    #[error("partial trace needs at least one kept site")]
    EmptyKeep,
}

pub type Result<T, E = LinalgError> = std::result::Result<T, E>;

/// Number of sites `q` such that `dim == 2^q`.
pub fn sites_for_dim(dim: usize) -> Result<usize> {
    if dim.is_power_of_two() {
        Ok(dim.trailing_zeros() as usize)
    } else {
        Err(LinalgError::NotPowerOfTwo(dim))
    }
}

fn finite<T: Real>(z: &C<T>) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

/// A square complex matrix acting on a register of `2^q` amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator<T: Real> {
    m: DMatrix<C<T>>,
}

impl<T: Real> Operator<T> {
    pub fn from_matrix(m: DMatrix<C<T>>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(LinalgError::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        sites_for_dim(m.nrows())?;
        if !m.iter().all(finite) {
            return Err(LinalgError::NonFinite);
        }
        Ok(Self { m })
    }

    /// Builds a `dim x dim` operator from row-major entries.
    pub fn from_rows(dim: usize, entries: &[C<T>]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(LinalgError::DimensionMismatch(entries.len(), dim * dim));
        }
        Self::from_matrix(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn from_real_rows(dim: usize, entries: &[f64]) -> Result<Self> {
        let c: Vec<C<T>> = entries.iter().map(|&x| C::new(T::lit(x), T::zero())).collect();
        Self::from_rows(dim, &c)
    }

    pub fn identity(dim: usize) -> Self {
        assert!(dim.is_power_of_two(), "dimension must be a power of two");
        Self {
            m: DMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim.is_power_of_two(), "dimension must be a power of two");
        Self {
            m: DMatrix::zeros(dim, dim),
        }
    }

    pub fn diagonal(entries: &[C<T>]) -> Result<Self> {
        Self::from_matrix(DMatrix::from_diagonal(&DVector::from_column_slice(entries)))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn num_sites(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn matrix(&self) -> &DMatrix<C<T>> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<C<T>> {
        self.m
    }

    pub fn get(&self, row: usize, col: usize) -> C<T> {
        self.m[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        Self {
            m: self.m.adjoint(),
        }
    }

    pub fn trace(&self) -> C<T> {
        self.m.trace()
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            m: self.m.map(|z| z * s),
        }
    }

    pub fn scale_complex(&self, s: C<T>) -> Self {
        Self { m: &self.m * s }
    }

    /// Removes the identity-proportional part, leaving a traceless operator.
    pub fn traceless(&self) -> Self {
        let d = T::lit(self.dim() as f64);
        let shift = self.trace() / C::new(d, T::zero());
        let mut m = self.m.clone();
        for i in 0..self.dim() {
            m[(i, i)] -= shift;
        }
        Self { m }
    }

    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    /// Largest entrywise modulus.
    pub fn max_abs(&self) -> T {
        self.m.iter().fold(T::zero(), |acc, z| acc.max(z.modulus()))
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermiticity_defect(&self) -> T {
        let n = self.dim();
        let mut worst = T::zero();
        for i in 0..n {
            for j in i..n {
                let d = (self.m[(i, j)] - self.m[(j, i)].conj()).modulus();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: T) -> bool {
        self.hermiticity_defect() <= tol * T::one().max(self.max_abs())
    }

    pub fn is_unitary(&self, tol: T) -> bool {
        let prod = &self.adjoint() * self;
        (&prod - &Self::identity(self.dim())).max_abs() <= tol
    }

    pub fn apply(&self, psi: &StateVector<T>) -> Result<StateVector<T>> {
        if psi.dim() != self.dim() {
            return Err(LinalgError::DimensionMismatch(self.dim(), psi.dim()));
        }
        Ok(StateVector::from_raw(&self.m * psi.amplitudes()))
    }

    /// Sub-block `rows x cols` starting at `(row0, col0)`; both extents must be
    /// the same power of two.
    pub fn block(&self, row0: usize, col0: usize, size: usize) -> Result<Self> {
        Self::from_matrix(self.m.view((row0, col0), (size, size)).into_owned())
    }

    /// Block-diagonal operator `diag(a, b)`.
    pub fn direct_sum(a: &Self, b: &Self) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(LinalgError::DimensionMismatch(a.dim(), b.dim()));
        }
        let d = a.dim();
        let mut m = DMatrix::zeros(2 * d, 2 * d);
        m.view_mut((0, 0), (d, d)).copy_from(&a.m);
        m.view_mut((d, d), (d, d)).copy_from(&b.m);
        Ok(Self { m })
    }
}

impl<'a, T: Real> Mul<&'a Operator<T>> for &'a Operator<T> {
    type Output = Operator<T>;
    fn mul(self, rhs: &'a Operator<T>) -> Operator<T> {
        assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch");
        Operator { m: &self.m * &rhs.m }
    }
}

impl<'a, T: Real> Add<&'a Operator<T>> for &'a Operator<T> {
    type Output = Operator<T>;
    fn add(self, rhs: &'a Operator<T>) -> Operator<T> {
        assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch");
        Operator { m: &self.m + &rhs.m }
    }
}

impl<'a, T: Real> Sub<&'a Operator<T>> for &'a Operator<T> {
    type Output = Operator<T>;
    fn sub(self, rhs: &'a Operator<T>) -> Operator<T> {
        assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch");
        Operator { m: &self.m - &rhs.m }
    }
}

impl<T: Real> Neg for &Operator<T> {
    type Output = Operator<T>;
    fn neg(self) -> Operator<T> {
        Operator { m: -&self.m }
    }
}

fn c<T: Real>(re: f64, im: f64) -> C<T> {
    C::new(T::lit(re), T::lit(im))
}

pub fn pauli_x<T: Real>() -> Operator<T> {
    Operator {
        m: DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]),
    }
}

pub fn pauli_y<T: Real>() -> Operator<T> {
    Operator {
        m: DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]),
    }
}

pub fn pauli_z<T: Real>() -> Operator<T> {
    Operator {
        m: DMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)]),
    }
}

pub fn hadamard<T: Real>() -> Operator<T> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Operator {
        m: DMatrix::from_row_slice(2, 2, &[c(s, 0.), c(s, 0.), c(s, 0.), c(-s, 0.)]),
    }
}

/// Raising operator `S⁺ = Sˣ + iSʸ = |0⟩⟨1|` (|0⟩ is spin up).
pub fn spin_plus<T: Real>() -> Operator<T> {
    Operator {
        m: DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)]),
    }
}

/// Lowering operator `S⁻ = Sˣ − iSʸ = |1⟩⟨0|`.
pub fn spin_minus<T: Real>() -> Operator<T> {
    spin_plus::<T>().adjoint()
}

/// Projector `|b⟩⟨b|` for a single site.
pub fn projector<T: Real>(bit: bool) -> Operator<T> {
    let (a, b) = if bit { (0., 1.) } else { (1., 0.) };
    Operator {
        m: DMatrix::from_row_slice(2, 2, &[c(a, 0.), c(0., 0.), c(0., 0.), c(b, 0.)]),
    }
}

/// Kronecker product; entry `(i·db + k, j·db + l)` is `a[i,j]·b[k,l]`.
pub fn kron<T: Real>(a: &Operator<T>, b: &Operator<T>) -> Operator<T> {
    Operator {
        m: a.m.kronecker(&b.m),
    }
}

fn check_targets(targets: &[usize], sites: usize) -> Result<()> {
    for (i, &t) in targets.iter().enumerate() {
        if t >= sites {
            return Err(LinalgError::TargetOutOfRange { target: t, sites });
        }
        if targets[..i].contains(&t) {
            return Err(LinalgError::DuplicateTarget(t));
        }
    }
    Ok(())
}

#[inline]
fn bit_of(index: usize, site: usize, sites: usize) -> usize {
    (index >> (sites - 1 - site)) & 1
}

/// Lifts `op` (acting on `targets.len()` sites, `targets[0]` most
/// significant) to a `q`-site register, identity elsewhere.
pub fn embed<T: Real>(op: &Operator<T>, targets: &[usize], q: usize) -> Result<Operator<T>> {
    let k = op.num_sites();
    if k != targets.len() {
        return Err(LinalgError::TargetCountMismatch {
            op_sites: k,
            targets: targets.len(),
        });
    }
    check_targets(targets, q)?;
    let dim = 1usize << q;
    let target_mask: usize = targets.iter().map(|&t| 1usize << (q - 1 - t)).sum();
    let sub = |idx: usize| -> usize {
        targets
            .iter()
            .fold(0usize, |acc, &t| (acc << 1) | bit_of(idx, t, q))
    };
    let mut m = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        let rest = i & !target_mask;
        let si = sub(i);
        // walk all j sharing the untouched bits of i
        for sj in 0..(1usize << k) {
            let mut j = rest;
            for (pos, &t) in targets.iter().enumerate() {
                if (sj >> (k - 1 - pos)) & 1 == 1 {
                    j |= 1usize << (q - 1 - t);
                }
            }
            m[(i, j)] = op.m[(si, sj)];
        }
    }
    Ok(Operator { m })
}

/// Eigendecomposition of a Hermitian operator, reusable for many evolution
/// times.
#[derive(Debug, Clone)]
pub struct Spectrum<T: Real> {
    pub values: DVector<T>,
    pub vectors: DMatrix<C<T>>,
}

impl<T: Real> Spectrum<T> {
    pub fn of(h: &Operator<T>) -> Result<Self> {
        let defect = h.hermiticity_defect();
        if defect > T::tol() * T::one().max(h.max_abs()) {
            return Err(LinalgError::NotHermitian(defect.as_f64()));
        }
        // symmetrize so the solver sees an exactly Hermitian input
        let herm = (&h.m + h.m.adjoint()) * C::new(T::lit(0.5), T::zero());
        let eig = SymmetricEigen::new(herm);
        Ok(Self {
            values: eig.eigenvalues,
            vectors: eig.eigenvectors,
        })
    }

    /// `e^{-iHt}` assembled from the stored eigenpairs.
    pub fn evolve(&self, t: T) -> Operator<T> {
        let phases = self.values.map(|e| {
            let arg = -(e * t);
            C::new(arg.cos(), arg.sin())
        });
        let mut scaled = self.vectors.clone();
        for (mut col, ph) in scaled.column_iter_mut().zip(phases.iter()) {
            col *= *ph;
        }
        Operator {
            m: scaled * self.vectors.adjoint(),
        }
    }

    /// Eigenpair indices sorted by ascending eigenvalue.
    pub fn ascending_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        idx.sort_by(|&a, &b| {
            self.values[a]
                .partial_cmp(&self.values[b])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        idx
    }
}

/// `e^{-iht}` by exact Hermitian eigendecomposition.
pub fn expm_hermitian<T: Real>(h: &Operator<T>, t: T) -> Result<Operator<T>> {
    Ok(Spectrum::of(h)?.evolve(t))
}

/// Largest singular value.
pub fn operator_norm<T: Real>(a: &Operator<T>) -> T {
    if a.max_abs() == T::zero() {
        return T::zero();
    }
    let svd = a.m.clone().svd(false, false);
    svd.singular_values.iter().fold(T::zero(), |acc, &s| acc.max(s))
}

/// Phase-insensitive overlap `|tr(u†v)| / d`.
pub fn fidelity_unitary<T: Real>(u: &Operator<T>, v: &Operator<T>) -> Result<T> {
    if u.dim() != v.dim() {
        return Err(LinalgError::DimensionMismatch(u.dim(), v.dim()));
    }
    let d = T::lit(u.dim() as f64);
    let overlap = (u.m.adjoint() * &v.m).trace().modulus() / d;
    Ok(overlap.min(T::one()))
}

/// Reduced density matrix on `keep` (order of sites preserved as given,
/// each kept site keeps its relative significance).
pub fn partial_trace<T: Real>(
    rho: &DensityMatrix<T>,
    keep: &[usize],
    q: usize,
) -> Result<DensityMatrix<T>> {
    if keep.is_empty() {
        return Err(LinalgError::EmptyKeep);
    }
    check_targets(keep, q)?;
    if rho.dim() != 1usize << q {
        return Err(LinalgError::DimensionMismatch(rho.dim(), 1usize << q));
    }
    let traced: Vec<usize> = (0..q).filter(|s| !keep.contains(s)).collect();
    let compose = |kept_bits: usize, traced_bits: usize| -> usize {
        let mut idx = 0usize;
        for (pos, &s) in keep.iter().enumerate() {
            if (kept_bits >> (keep.len() - 1 - pos)) & 1 == 1 {
                idx |= 1usize << (q - 1 - s);
            }
        }
        for (pos, &s) in traced.iter().enumerate() {
            if (traced_bits >> (traced.len() - 1 - pos)) & 1 == 1 {
                idx |= 1usize << (q - 1 - s);
            }
        }
        idx
    };
    let dk = 1usize << keep.len();
    let de = 1usize << traced.len();
    let full = rho.matrix();
    let mut out = DMatrix::zeros(dk, dk);
    for a in 0..dk {
        for b in 0..dk {
            let mut acc = C::new(T::zero(), T::zero());
            for e in 0..de {
                acc += full[(compose(a, e), compose(b, e))];
            }
            out[(a, b)] = acc;
        }
    }
    DensityMatrix::from_matrix_unchecked(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    type Op = Operator<f64>;

    fn random_hermitian(dim: usize, seed: &[f64]) -> Op {
        let mut m = DMatrix::zeros(dim, dim);
        let mut k = 0;
        let mut next = || {
            let v = seed[k % seed.len()] * (1.0 + (k as f64 * 0.37).sin());
            k += 1;
            v
        };
        for i in 0..dim {
            m[(i, i)] = C::new(next(), 0.0);
            for j in (i + 1)..dim {
                let z = C::new(next(), next());
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        Op::from_matrix(m).unwrap()
    }

    #[test]
    fn kron_identity_and_pauli_z() {
        let i2 = Op::identity(2);
        assert_eq!(kron(&i2, &i2), Op::identity(4));
        let zi = kron(&pauli_z(), &i2);
        let expected = Op::from_real_rows(4, &[
            1., 0., 0., 0., //
            0., 1., 0., 0., //
            0., 0., -1., 0., //
            0., 0., 0., -1.,
        ])
        .unwrap();
        assert_eq!(zi, expected);
    }

    #[test]
    fn kron_xx_flips_both_bits() {
        let xx = kron(&pauli_x::<f64>(), &pauli_x());
        let out = xx.apply(&StateVector::basis(2, 0b00)).unwrap();
        assert_eq!(out, StateVector::basis(2, 0b11));
    }

    #[test]
    fn embed_examples() {
        let z0 = embed(&pauli_z::<f64>(), &[0], 2).unwrap();
        assert_eq!(z0, kron(&pauli_z(), &Op::identity(2)));
        let x1 = embed(&pauli_x::<f64>(), &[1], 2).unwrap();
        assert_eq!(x1.apply(&StateVector::basis(2, 0b00)).unwrap(), StateVector::basis(2, 0b01));
        assert_eq!(embed(&pauli_z::<f64>(), &[0], 1).unwrap(), pauli_z());
    }

    #[test]
    fn embed_two_site_reversed_targets() {
        // CNOT with control on site 2 and target on site 0 of a 3-site register
        let cnot = Op::from_real_rows(4, &[
            1., 0., 0., 0., //
            0., 1., 0., 0., //
            0., 0., 0., 1., //
            0., 0., 1., 0.,
        ])
        .unwrap();
        let full = embed(&cnot, &[2, 0], 3).unwrap();
        let out = full.apply(&StateVector::basis(3, 0b001)).unwrap();
        assert_eq!(out, StateVector::basis(3, 0b101));
        let untouched = full.apply(&StateVector::basis(3, 0b110)).unwrap();
        assert_eq!(untouched, StateVector::basis(3, 0b110));
    }

    #[test]
    fn embed_rejects_bad_targets() {
        let x = pauli_x::<f64>();
        assert_eq!(
            embed(&x, &[2], 2),
            Err(LinalgError::TargetOutOfRange { target: 2, sites: 2 })
        );
        let xx = kron(&x, &x);
        assert_eq!(embed(&xx, &[1, 1], 3), Err(LinalgError::DuplicateTarget(1)));
    }

    #[test]
    fn expm_examples() {
        let u = expm_hermitian(&pauli_z::<f64>(), PI / 2.0).unwrap();
        assert_abs_diff_eq!(u.get(0, 0).im, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(u.get(1, 1).im, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(u.get(0, 0).re, 0.0, epsilon = 1e-12);

        let h = random_hermitian(8, &[0.3, -1.2, 0.7, 2.1]);
        let id = expm_hermitian(&h, 0.0).unwrap();
        assert!((&id - &Op::identity(8)).max_abs() < 1e-12);

        let minus = expm_hermitian(&pauli_x::<f64>(), PI).unwrap();
        assert!((&minus + &Op::identity(2)).max_abs() < 1e-12);
    }

    #[test]
    fn expm_rejects_non_hermitian() {
        let m = Op::from_real_rows(2, &[0., 1., 0., 0.]).unwrap();
        assert!(matches!(expm_hermitian(&m, 1.0), Err(LinalgError::NotHermitian(_))));
    }

    #[test]
    fn norm_examples() {
        assert_abs_diff_eq!(operator_norm(&Op::identity(4)), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(operator_norm(&pauli_z::<f64>().scale(2.0)), 2.0, epsilon = 1e-12);
        assert_eq!(operator_norm(&Op::zeros(4)), 0.0);
    }

    #[test]
    fn fidelity_examples() {
        let h = random_hermitian(4, &[0.5, 1.5, -0.25]);
        let u = expm_hermitian(&h, 0.8).unwrap();
        assert_abs_diff_eq!(fidelity_unitary(&u, &u).unwrap(), 1.0, epsilon = 1e-12);
        let phased = u.scale_complex(C::new(0.3f64.cos(), 0.3f64.sin()));
        assert_abs_diff_eq!(fidelity_unitary(&u, &phased).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            fidelity_unitary(&Op::identity(2), &pauli_x()).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        assert!(fidelity_unitary(&Op::identity(2), &Op::identity(4)).is_err());
    }

    #[test]
    fn partial_trace_examples() {
        let q00 = DensityMatrix::from_pure(&StateVector::<f64>::basis(2, 0));
        let r = partial_trace(&q00, &[0], 2).unwrap();
        assert_eq!(r, DensityMatrix::from_pure(&StateVector::basis(1, 0)));

        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = StateVector::from_amplitudes(vec![
            C::new(s, 0.),
            C::new(0., 0.),
            C::new(0., 0.),
            C::new(s, 0.),
        ])
        .unwrap();
        let r = partial_trace(&DensityMatrix::from_pure(&bell), &[0], 2).unwrap();
        assert!(r.max_abs_diff(&DensityMatrix::maximally_mixed(1)) < 1e-12);

        let a = DensityMatrix::from_pure(&StateVector::<f64>::plus());
        let b = DensityMatrix::from_pure(&StateVector::<f64>::basis(1, 1));
        let prod = a.kron(&b);
        let back = partial_trace(&prod, &[0], 2).unwrap();
        assert!(back.max_abs_diff(&a) < 1e-12);
        let other = partial_trace(&prod, &[1], 2).unwrap();
        assert!(other.max_abs_diff(&b) < 1e-12);
        assert_eq!(partial_trace(&prod, &[], 2), Err(LinalgError::EmptyKeep));
    }

    #[test]
    fn ladder_operators_match_spin_components() {
        let sx = pauli_x::<f64>().scale(0.5);
        let sy = pauli_y::<f64>().scale(0.5);
        let plus = &sx + &sy.scale_complex(C::new(0., 1.));
        assert_eq!(plus, spin_plus());
        let minus = &sx - &sy.scale_complex(C::new(0., 1.));
        assert_eq!(minus, spin_minus());
    }

    #[test]
    fn single_precision_kernels_work() {
        let u = expm_hermitian(&pauli_x::<f32>(), std::f32::consts::PI).unwrap();
        assert!((&u + &Operator::<f32>::identity(2)).max_abs() < 1e-5);
        assert!(u.is_unitary(f32::tol()));
    }

    fn hermitian_strategy() -> impl Strategy<Value = Op> {
        (1usize..=6, proptest::collection::vec(-2.0f64..2.0, 8..32))
            .prop_map(|(q, seed)| random_hermitian(1 << q, &seed))
    }

    fn integer_strategy() -> impl Strategy<Value = Op> {
        (0usize..=2)
            .prop_flat_map(|q| {
                let d = 1usize << q;
                proptest::collection::vec((-8i32..8, -8i32..8), d * d)
                    .prop_map(move |v| {
                        let e: Vec<C<f64>> =
                            v.iter().map(|&(r, i)| C::new(r as f64, i as f64)).collect();
                        Op::from_rows(d, &e).unwrap()
                    })
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn expm_inverse_and_group_law(h in hermitian_strategy(), s in -3.0f64..3.0, t in -3.0f64..3.0) {
            let dim = h.dim();
            let fwd = expm_hermitian(&h, t).unwrap();
            let back = expm_hermitian(&h, -t).unwrap();
            prop_assert!((&(&fwd * &back) - &Op::identity(dim)).max_abs() < 1e-9);
            let us = expm_hermitian(&h, s).unwrap();
            let ust = expm_hermitian(&h, s + t).unwrap();
            prop_assert!((&(&us * &fwd) - &ust).max_abs() < 1e-9);
            prop_assert!((operator_norm(&fwd) - 1.0).abs() < 1e-9);
        }

        #[test]
        fn kron_is_associative(a in integer_strategy(), b in integer_strategy(), c in integer_strategy()) {
            let left = kron(&kron(&a, &b), &c);
            let right = kron(&a, &kron(&b, &c));
            prop_assert_eq!(left, right);
        }

        #[test]
        fn partial_trace_preserves_trace_and_positivity(
            amps in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 8),
            keep in proptest::sample::subsequence(vec![0usize, 1, 2], 1..=2),
        ) {
            let raw: Vec<C<f64>> = amps.iter().map(|&(r, i)| C::new(r, i)).collect();
            let norm: f64 = raw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            prop_assume!(norm > 1e-3);
            let psi = StateVector::from_amplitudes(raw.iter().map(|z| z / norm).collect()).unwrap();
            let rho = DensityMatrix::from_pure(&psi);
            let red = partial_trace(&rho, &keep, 3).unwrap();
            prop_assert!((red.trace() - 1.0).abs() < 1e-10);
            prop_assert!(red.min_eigenvalue() > -1e-9);
        }
    }
}
