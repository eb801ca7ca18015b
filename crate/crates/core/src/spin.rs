//! Central spin Hamiltonian and its effective bath Hamiltonians.
//!
//! Site 0 is the central spin and the most significant bit of every basis
//! index; bath spin `j` (0-based) lives on site `j + 1` of the joint register
//! and on site `j` of the bath-only register. Spin operators are Pauli/2 and
//! `ħ = 1`.
//!
//! Sign convention for the effective field terms, fixed by the numerical
//! Schrieffer-Wolff evaluation in [`build_effective_numeric`]:
//!
//! ```text
//! H_up   = -(1/2h0) Σ_{j<k} γ_j γ_k (S_j^x S_k^x + S_j^y S_k^y) - Σ_j (h_j - γ_j/2 - γ_j²/4h0) S_j^z
//! H_down = +(1/2h0) Σ_{j<k} γ_j γ_k (S_j^x S_k^x + S_j^y S_k^y) - Σ_j (h_j + γ_j/2 - γ_j²/4h0) S_j^z
//! ```
//!
//! so the branches are exact negatives of each other when `h_j = +γ_j²/4h0`.

use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

use crate::linalg::{
    embed, hadamard, kron, pauli_x, pauli_y, pauli_z, spin_minus, spin_plus, LinalgError,
    Operator, Spectrum, C,
};
use crate::num::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpinError {
    #[error("at least one bath spin is required")]
    NoBathSpins,
    #[error("{gamma} couplings but {fields} bath fields")]
    LengthMismatch { gamma: usize, fields: usize },
    #[error("parameters must be finite")]
    NonFinite,
    #[error("closed-form effective Hamiltonians are defined for the z-axis field only")]
    AxisNotZ,
    #[error("central field h0 must be nonzero")]
    DegenerateField,
    #[error("branch subspace is not separated from its complement (overlap {0:.3})")]
    BranchNotSeparated(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T, E = SpinError> = std::result::Result<T, E>;

/// Direction of the central and bath magnetic fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Z,
    X,
}

/// Central-spin subspace: `Up` is `|0⟩` (projector P₀), `Down` is `|1⟩` (Q₀).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Up,
    Down,
}

impl Branch {
    pub fn opposite(self) -> Self {
        match self {
            Branch::Up => Branch::Down,
            Branch::Down => Branch::Up,
        }
    }
}

/// Every symbol of the central spin Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralSpinParams<T: Real> {
    gamma: Vec<T>,
    h_bath: Vec<T>,
    h0: T,
    axis: Axis,
}

impl<T: Real> CentralSpinParams<T> {
    /// Validates the parameters; logs a warning when `η > 0.3·|h0|`.
    pub fn new(gamma: Vec<T>, h_bath: Vec<T>, h0: T, axis: Axis) -> Result<Self> {
        if gamma.is_empty() {
            return Err(SpinError::NoBathSpins);
        }
        if gamma.len() != h_bath.len() {
            return Err(SpinError::LengthMismatch {
                gamma: gamma.len(),
                fields: h_bath.len(),
            });
        }
        if !gamma.iter().chain(&h_bath).chain([&h0]).all(|x| x.is_finite()) {
            return Err(SpinError::NonFinite);
        }
        let p = Self {
            gamma,
            h_bath,
            h0,
            axis,
        };
        if p.eta() > T::lit(0.3) * h0.abs() {
            warn!(
                "eta = {} exceeds 0.3*h0 = {}; perturbative regime not guaranteed",
                p.eta(),
                T::lit(0.3) * h0.abs()
            );
        }
        Ok(p)
    }

    /// Parameters with bath fields from [`choose_antisymmetric_fields`].
    pub fn antisymmetric(gamma: Vec<T>, h0: T, axis: Axis) -> Result<Self> {
        let h = choose_antisymmetric_fields(&gamma, h0);
        Self::new(gamma, h, h0, axis)
    }

    pub fn n(&self) -> usize {
        self.gamma.len()
    }

    pub fn gamma(&self) -> &[T] {
        &self.gamma
    }

    pub fn h_bath(&self) -> &[T] {
        &self.h_bath
    }

    pub fn h0(&self) -> T {
        self.h0
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    /// `η = n·mean(|γ_j|)`.
    pub fn eta(&self) -> T {
        self.gamma.iter().fold(T::zero(), |acc, g| acc + g.abs())
    }

    pub fn with_axis(&self, axis: Axis) -> Self {
        Self {
            axis,
            ..self.clone()
        }
    }
}

/// `h_j = +γ_j²/(4h0)`; zero when `h0 = 0`.
pub fn choose_antisymmetric_fields<T: Real>(gamma: &[T], h0: T) -> Vec<T> {
    if h0 == T::zero() {
        return vec![T::zero(); gamma.len()];
    }
    gamma
        .iter()
        .map(|&g| g * g / (T::lit(4.0) * h0))
        .collect()
}

#[derive(Clone, Copy)]
enum Comp {
    X,
    Y,
    Z,
}

fn spin_op<T: Real>(c: Comp, site: usize, q: usize) -> Operator<T> {
    let p = match c {
        Comp::X => pauli_x(),
        Comp::Y => pauli_y(),
        Comp::Z => pauli_z(),
    };
    embed(&p, &[site], q)
        .expect("site index within register")
        .scale(T::lit(0.5))
}

fn axis_comp(a: Axis) -> Comp {
    match a {
        Axis::Z => Comp::Z,
        Axis::X => Comp::X,
    }
}

fn heisenberg<T: Real>(a: usize, b: usize, q: usize, xy_only: bool) -> Operator<T> {
    let mut h = &(&spin_op::<T>(Comp::X, a, q) * &spin_op(Comp::X, b, q))
        + &(&spin_op::<T>(Comp::Y, a, q) * &spin_op(Comp::Y, b, q));
    if !xy_only {
        h = &h + &(&spin_op::<T>(Comp::Z, a, q) * &spin_op(Comp::Z, b, q));
    }
    h
}

/// `H^{⊗q}`, the basis change mapping z-axis constructions to x-axis ones.
pub fn hadamard_all<T: Real>(q: usize) -> Operator<T> {
    (0..q).fold(Operator::identity(1), |acc, _| kron(&acc, &hadamard()))
}

/// `H_c = Σ γ_j S₀·S_j − h0 S₀^a − Σ h_j S_j^a` on `n + 1` sites.
pub fn build_central_hamiltonian<T: Real>(p: &CentralSpinParams<T>) -> Operator<T> {
    let q = p.n() + 1;
    let a = axis_comp(p.axis);
    let mut h = spin_op::<T>(a, 0, q).scale(-p.h0);
    for (j, (&g, &hj)) in p.gamma.iter().zip(&p.h_bath).enumerate() {
        if g != T::zero() {
            h = &h + &heisenberg::<T>(0, j + 1, q, false).scale(g);
        }
        if hj != T::zero() {
            h = &h - &spin_op::<T>(a, j + 1, q).scale(hj);
        }
    }
    h
}

/// Closed-form second-order bath Hamiltonian on the given branch, without
/// its constant part.
pub fn build_effective_closed<T: Real>(p: &CentralSpinParams<T>, b: Branch) -> Result<Operator<T>> {
    if p.axis != Axis::Z {
        return Err(SpinError::AxisNotZ);
    }
    if p.h0 == T::zero() {
        return Err(SpinError::DegenerateField);
    }
    let n = p.n();
    let s = match b {
        Branch::Up => T::one(),
        Branch::Down => -T::one(),
    };
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    let mut h = Operator::zeros(1 << n);
    for j in 0..n {
        for k in (j + 1)..n {
            let c = -s * p.gamma[j] * p.gamma[k] / (two * p.h0);
            if c != T::zero() {
                h = &h + &heisenberg::<T>(j, k, n, true).scale(c);
            }
        }
        let g = p.gamma[j];
        let zc = -(p.h_bath[j] - s * g / two - g * g / (four * p.h0));
        if zc != T::zero() {
            h = &h + &spin_op::<T>(Comp::Z, j, n).scale(zc);
        }
    }
    Ok(h)
}

/// Anti-Hermitian first-order generator
/// `T₁ = −(1/2h0) Σ γ_j (S₀⁺S_j⁻ − S₀⁻S_j⁺)`.
pub fn t1_generator<T: Real>(p: &CentralSpinParams<T>) -> Result<Operator<T>> {
    if p.h0 == T::zero() {
        return Err(SpinError::DegenerateField);
    }
    let q = p.n() + 1;
    let sp = spin_plus::<T>();
    let sm = spin_minus::<T>();
    let mut t = Operator::zeros(1 << q);
    for (j, &g) in p.gamma.iter().enumerate() {
        if g == T::zero() {
            continue;
        }
        let a = embed(&kron(&sp, &sm), &[0, j + 1], q)?;
        let b = embed(&kron(&sm, &sp), &[0, j + 1], q)?;
        t = &t + &(&a - &b).scale(g);
    }
    Ok(t.scale(-T::one() / (T::lit(2.0) * p.h0)))
}

fn branch_block<T: Real>(op: &Operator<T>, b: Branch) -> Result<Operator<T>> {
    let d = op.dim() / 2;
    let start = match b {
        Branch::Up => 0,
        Branch::Down => d,
    };
    Ok(op.block(start, start, d)?)
}

/// Second-order Schrieffer-Wolff effective Hamiltonian evaluated from explicit
/// matrices: `P H₀ P + P (H_d + H_od) P + ½ P [T₁, H_od] P`, restricted to the
/// branch and made traceless.
pub fn build_effective_numeric<T: Real>(p: &CentralSpinParams<T>, b: Branch) -> Result<Operator<T>> {
    if p.axis != Axis::Z {
        return Err(SpinError::AxisNotZ);
    }
    let t1 = t1_generator(p)?;
    let q = p.n() + 1;
    let h0 = spin_op::<T>(Comp::Z, 0, q).scale(-p.h0);
    let mut hd = Operator::zeros(1 << q);
    let mut hod = Operator::zeros(1 << q);
    for (j, (&g, &hj)) in p.gamma.iter().zip(&p.h_bath).enumerate() {
        hd = &hd - &spin_op::<T>(Comp::Z, j + 1, q).scale(hj);
        hd = &hd + &(&spin_op::<T>(Comp::Z, 0, q) * &spin_op(Comp::Z, j + 1, q)).scale(g);
        hod = &hod + &heisenberg::<T>(0, j + 1, q, true).scale(g);
    }
    let second = t1.commutator(&hod).scale(T::lit(0.5));
    let full = &(&h0 + &(&hd + &hod)) + &second;
    Ok(branch_block(&full, b)?.traceless())
}

/// Effective Hamiltonian from exact block diagonalization: the branch's
/// `2^n` eigenvectors of `H_c` are projected onto the branch and
/// orthonormalized symmetrically (`M^{-1/2} A E A† M^{-1/2}`).
///
/// The up branch takes the lowest `2^n` levels when `h0 > 0` and the highest
/// otherwise.
pub fn build_effective_exact<T: Real>(p: &CentralSpinParams<T>, b: Branch) -> Result<Operator<T>> {
    if p.axis != Axis::Z {
        return Err(SpinError::AxisNotZ);
    }
    if p.h0 == T::zero() {
        return Err(SpinError::DegenerateField);
    }
    let hc = build_central_hamiltonian(p);
    let spec = Spectrum::of(&hc)?;
    let d = 1usize << p.n();
    let order = spec.ascending_order();
    let low = (b == Branch::Up) == (p.h0 > T::zero());
    let chosen: Vec<usize> = if low {
        order[..d].to_vec()
    } else {
        order[d..].to_vec()
    };
    let row0 = match b {
        Branch::Up => 0,
        Branch::Down => d,
    };
    let mut a = DMatrix::<C<T>>::zeros(d, d);
    let mut e = DMatrix::<C<T>>::zeros(d, d);
    for (col, &k) in chosen.iter().enumerate() {
        for row in 0..d {
            a[(row, col)] = spec.vectors[(row0 + row, k)];
        }
        e[(col, col)] = C::new(spec.values[k], T::zero());
    }
    let m = &a * a.adjoint();
    let herm = (&m + m.adjoint()) * C::new(T::lit(0.5), T::zero());
    let eig = SymmetricEigen::new(herm);
    let min = eig
        .eigenvalues
        .iter()
        .fold(T::max_value().unwrap_or_else(T::one), |acc, &x| acc.min(x));
    if min < T::lit(0.5) {
        return Err(SpinError::BranchNotSeparated(min.as_f64()));
    }
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|x| C::new(T::one() / x.sqrt(), T::zero())));
    let m_inv_half = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.adjoint();
    let heff = &m_inv_half * &a * e * a.adjoint() * &m_inv_half;
    Ok(Operator::from_matrix(heff)?.traceless())
}

/// Constant energy shift of the up branch (the down branch has the opposite
/// sign): `−(h0/2 + Σ γ_j²/8h0)`.
fn branch_offset<T: Real>(p: &CentralSpinParams<T>) -> T {
    let s = p.gamma.iter().fold(T::zero(), |acc, &g| acc + g * g);
    -(p.h0 / T::lit(2.0) + s / (T::lit(8.0) * p.h0))
}

/// Block-diagonal generator `|0⟩⟨0| ⊗ (H_up + c) + |1⟩⟨1| ⊗ (H_down − c)` of
/// the controlled evolution, where `c = −(h0/2 + Σ γ_j²/8h0)` is the branch
/// energy offset that sets the relative phase of central-spin
/// superpositions. For the x-axis field the z construction is conjugated by
/// `H^{⊗(n+1)}`.
pub fn effective_generator<T: Real>(p: &CentralSpinParams<T>) -> Result<Operator<T>> {
    if p.h0 == T::zero() {
        return Err(SpinError::DegenerateField);
    }
    let pz = p.with_axis(Axis::Z);
    let d = 1usize << p.n();
    let off = branch_offset(&pz);
    let shift = |h: Operator<T>, c: T| &h + &Operator::identity(d).scale(c);
    let up = shift(build_effective_closed(&pz, Branch::Up)?, off);
    let down = shift(build_effective_closed(&pz, Branch::Down)?, -off);
    let g = Operator::direct_sum(&up, &down)?;
    Ok(match p.axis {
        Axis::Z => g,
        Axis::X => {
            let w = hadamard_all(p.n() + 1);
            &(&w * &g) * &w
        }
    })
}

/// `|0⟩⟨0| ⊗ e^{−iH_up t} + |1⟩⟨1| ⊗ e^{−iH_down t}` with the branch offsets
/// of [`effective_generator`].
pub fn approx_controlled_evolution<T: Real>(p: &CentralSpinParams<T>, t: T) -> Result<Operator<T>> {
    Ok(Spectrum::of(&effective_generator(p)?)?.evolve(t))
}

/// `‖e^{−iH_c t} − approx_controlled_evolution(p, t)‖`.
pub fn evolution_error<T: Real>(p: &CentralSpinParams<T>, t: T) -> Result<T> {
    let exact = Spectrum::of(&build_central_hamiltonian(p))?.evolve(t);
    let approx = approx_controlled_evolution(p, t)?;
    Ok(crate::linalg::operator_norm(&(&exact - &approx)))
}
