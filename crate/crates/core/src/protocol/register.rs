use nalgebra::DVector;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{ProtocolError, Result};
use crate::linalg::C;
use crate::{Operator, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Owner {
    Client,
    Server,
}

/// Central spin (site 0) plus bath, with the current holder of site 0.
#[derive(Debug, Clone, PartialEq)]
pub struct JointRegister {
    amps: DVector<C<f64>>,
    owner: Owner,
}

impl JointRegister {
    /// `central ⊗ bath`, held by the client.
    pub fn new(central: &StateVector, bath: &StateVector) -> Result<Self> {
        if central.dim() != 2 {
            return Err(ProtocolError::BadBasis);
        }
        Ok(Self {
            amps: central.kron(bath).amplitudes().clone(),
            owner: Owner::Client,
        })
    }

    pub fn owner(&self) -> Owner {
        self.owner
    }

    pub fn send_to(&mut self, to: Owner) {
        self.owner = to;
    }

    pub fn state(&self) -> StateVector {
        StateVector::from_raw(self.amps.clone())
    }

    pub fn bath_dim(&self) -> usize {
        self.amps.len() / 2
    }

    fn require(&self, actor: Owner) -> Result<()> {
        if actor != self.owner {
            return Err(ProtocolError::NotOwner {
                actor,
                owner: self.owner,
            });
        }
        Ok(())
    }

    /// Joint unitary (the server's evolution).
    pub fn apply(&mut self, actor: Owner, u: &Operator) -> Result<()> {
        self.require(actor)?;
        if u.dim() != self.amps.len() {
            return Err(crate::linalg::LinalgError::DimensionMismatch(u.dim(), self.amps.len()).into());
        }
        self.amps = u.matrix() * &self.amps;
        Ok(())
    }

    /// Single-qubit unitary on the central spin.
    pub fn apply_central(&mut self, actor: Owner, u: &Operator) -> Result<()> {
        self.require(actor)?;
        if u.dim() != 2 {
            return Err(ProtocolError::BadBasis);
        }
        let d = self.bath_dim();
        let (u00, u01, u10, u11) = (u.get(0, 0), u.get(0, 1), u.get(1, 0), u.get(1, 1));
        for i in 0..d {
            let (a, b) = (self.amps[i], self.amps[i + d]);
            self.amps[i] = u00 * a + u01 * b;
            self.amps[i + d] = u10 * a + u11 * b;
        }
        Ok(())
    }

    /// Unnormalized `(⟨c| ⊗ I)|ψ⟩`.
    fn project(&self, c: &StateVector) -> DVector<C<f64>> {
        let d = self.bath_dim();
        let (c0, c1) = (c.amplitudes()[0].conj(), c.amplitudes()[1].conj());
        DVector::from_fn(d, |i, _| c0 * self.amps[i] + c1 * self.amps[i + d])
    }

    /// Projective measurement of the central spin in `{basis[0], basis[1]}`;
    /// collapses the register and returns the outcome index.
    pub fn measure_central(&mut self, actor: Owner, basis: &[StateVector; 2], rng: &mut dyn RngCore) -> Result<usize> {
        self.require(actor)?;
        let overlap = basis[0].inner(&basis[1])?.norm();
        if basis.iter().any(|b| b.dim() != 2) || overlap > 1e-9 {
            return Err(ProtocolError::BadBasis);
        }
        let v0 = self.project(&basis[0]);
        let p0 = v0.norm_squared() / self.amps.norm_squared();
        let outcome = usize::from(rng.random::<f64>() >= p0);
        let v = if outcome == 0 {
            v0
        } else {
            self.project(&basis[1])
        };
        let norm = v.norm();
        let b = basis[outcome].amplitudes();
        let d = self.bath_dim();
        for i in 0..d {
            self.amps[i] = b[0] * v[i] / norm;
            self.amps[i + d] = b[1] * v[i] / norm;
        }
        Ok(outcome)
    }

    /// Normalized bath state conditioned on the central spin being `c`.
    pub fn bath_given_central(&self, c: &StateVector) -> Result<StateVector> {
        Ok(StateVector::normalized(self.project(c))?)
    }
}
