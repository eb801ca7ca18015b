use nalgebra::{ComplexField, DMatrix, DVector, SymmetricEigen};

use super::{sites_for_dim, LinalgError, Operator, Result, C};
use crate::num::Real;

/// Normalized pure state of a spin register.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<T: Real> {
    amps: DVector<C<T>>,
}

impl<T: Real> StateVector<T> {
    pub fn from_amplitudes(amps: Vec<C<T>>) -> Result<Self> {
        sites_for_dim(amps.len())?;
        if !amps.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        let norm_sqr: T = amps.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr());
        if (norm_sqr - T::one()).abs() > T::tol() {
            return Err(LinalgError::NotNormalized(norm_sqr.as_f64()));
        }
        Ok(Self {
            amps: DVector::from_vec(amps),
        })
    }

    /// Wraps amplitudes without the normalization check (used after unitary
    /// application).
    pub(crate) fn from_raw(amps: DVector<C<T>>) -> Self {
        Self { amps }
    }

    /// Rescales arbitrary nonzero amplitudes to unit norm.
    pub fn normalized(amps: DVector<C<T>>) -> Result<Self> {
        sites_for_dim(amps.len())?;
        let n = amps.norm();
        if n <= T::zero() || !n.is_finite() {
            return Err(LinalgError::NotNormalized(0.0));
        }
        Ok(Self {
            amps: amps.map(|z| z / n),
        })
    }

    /// Computational basis state `|index⟩` of a `q`-site register.
    pub fn basis(q: usize, index: usize) -> Self {
        let dim = 1usize << q;
        assert!(index < dim, "basis index out of range");
        let mut amps = DVector::zeros(dim);
        amps[index] = C::new(T::one(), T::zero());
        Self { amps }
    }

    /// Product state with site `s` in `|bits[s]⟩`.
    pub fn from_bits(bits: &[bool]) -> Self {
        let q = bits.len();
        let index = bits
            .iter()
            .enumerate()
            .fold(0usize, |acc, (s, &b)| acc | (usize::from(b) << (q - 1 - s)));
        Self::basis(q, index)
    }

    /// Single-site `|+⟩`.
    pub fn plus() -> Self {
        let s = T::lit(std::f64::consts::FRAC_1_SQRT_2);
        Self {
            amps: DVector::from_vec(vec![C::new(s, T::zero()), C::new(s, T::zero())]),
        }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn num_sites(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn amplitudes(&self) -> &DVector<C<T>> {
        &self.amps
    }

    pub fn norm_sqr(&self) -> T {
        self.amps.norm_squared()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Result<C<T>> {
        if self.dim() != other.dim() {
            return Err(LinalgError::DimensionMismatch(self.dim(), other.dim()));
        }
        Ok(self.amps.dotc(&other.amps))
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &Self) -> Result<T> {
        Ok(self.inner(other)?.norm_sqr())
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self {
            amps: self.amps.kronecker(&other.amps),
        }
    }

    pub fn probabilities(&self) -> Vec<T> {
        self.amps.iter().map(|z| z.norm_sqr()).collect()
    }

    /// Applies a unitary; errors on a dimension mismatch.
    pub fn evolve(&self, u: &Operator<T>) -> Result<Self> {
        u.apply(self)
    }
}

/// Mixed state of a spin register.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<T: Real> {
    m: DMatrix<C<T>>,
}

impl<T: Real> DensityMatrix<T> {
    /// Validates Hermiticity, unit trace and positivity within tolerance.
    pub fn from_matrix(m: DMatrix<C<T>>) -> Result<Self> {
        let rho = Self::from_matrix_unchecked(m)?;
        let op = Operator::from_matrix(rho.m.clone())?;
        if !op.is_hermitian(T::tol()) {
            return Err(LinalgError::InvalidDensity("not Hermitian"));
        }
        if (rho.trace() - T::one()).abs() > T::tol() {
            return Err(LinalgError::InvalidDensity("trace differs from one"));
        }
        if rho.min_eigenvalue() < -T::tol() {
            return Err(LinalgError::InvalidDensity("negative eigenvalue"));
        }
        Ok(rho)
    }

    pub(crate) fn from_matrix_unchecked(m: DMatrix<C<T>>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(LinalgError::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        sites_for_dim(m.nrows())?;
        Ok(Self { m })
    }

    pub fn from_pure(psi: &StateVector<T>) -> Self {
        let a = psi.amplitudes();
        Self { m: a * a.adjoint() }
    }

    /// Convex combination of pure states with nonnegative weights summing
    /// to one.
    pub fn mixture(weighted: &[(T, StateVector<T>)]) -> Result<Self> {
        let first = weighted
            .first()
            .ok_or(LinalgError::InvalidDensity("empty mixture"))?;
        let dim = first.1.dim();
        let mut m = DMatrix::zeros(dim, dim);
        for (w, psi) in weighted {
            if psi.dim() != dim {
                return Err(LinalgError::DimensionMismatch(dim, psi.dim()));
            }
            let a = psi.amplitudes();
            m += (a * a.adjoint()) * C::new(*w, T::zero());
        }
        Self::from_matrix(m)
    }

    pub fn maximally_mixed(q: usize) -> Self {
        let dim = 1usize << q;
        let w = T::one() / T::lit(dim as f64);
        Self {
            m: DMatrix::identity(dim, dim) * C::new(w, T::zero()),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C<T>> {
        &self.m
    }

    pub fn trace(&self) -> T {
        self.m.trace().re
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self {
            m: self.m.kronecker(&other.m),
        }
    }

    fn hermitian_part_eigenvalues(m: &DMatrix<C<T>>) -> DVector<T> {
        let herm = (m + m.adjoint()) * C::new(T::lit(0.5), T::zero());
        SymmetricEigen::new(herm).eigenvalues
    }

    pub fn min_eigenvalue(&self) -> T {
        Self::hermitian_part_eigenvalues(&self.m)
            .iter()
            .fold(T::max_value().unwrap_or_else(T::one), |acc, &x| acc.min(x))
    }

    /// `½‖ρ − σ‖₁`.
    pub fn trace_distance(&self, other: &Self) -> Result<T> {
        if self.dim() != other.dim() {
            return Err(LinalgError::DimensionMismatch(self.dim(), other.dim()));
        }
        let diff = &self.m - &other.m;
        let sum = Self::hermitian_part_eigenvalues(&diff)
            .iter()
            .fold(T::zero(), |acc, x| acc + x.abs());
        Ok(sum * T::lit(0.5))
    }

    /// Largest entrywise deviation from another density matrix.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        (&self.m - &other.m)
            .iter()
            .fold(T::zero(), |acc, z| acc.max(z.modulus()))
    }
}
