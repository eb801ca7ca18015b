//! Simulation of blind quantum computation driven by the central spin
//! Hamiltonian.
//!
//! The numerical kernels ([`linalg`], [`spin`]) are generic over the scalar
//! type; the aliases below fix it to `f64`, which is what the protocol and
//! verification layers use.

pub mod linalg;
pub mod num;
pub mod compiler;
pub mod protocol;
pub mod seeds;
pub mod spin;
pub mod verification;

pub use num::Real;

pub type Operator = linalg::Operator<f64>;
pub type StateVector = linalg::StateVector<f64>;
pub type DensityMatrix = linalg::DensityMatrix<f64>;
pub type CentralSpinParams = spin::CentralSpinParams<f64>;

pub type Operator32 = linalg::Operator<f32>;
pub type StateVector32 = linalg::StateVector<f32>;
pub type DensityMatrix32 = linalg::DensityMatrix<f32>;
pub type CentralSpinParams32 = spin::CentralSpinParams<f32>;
