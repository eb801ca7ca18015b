//! Client/server execution of the blind simulation protocols.
//!
//! The central spin (site 0) and the bath share one [`JointRegister`];
//! sending the spin transfers ownership of site 0, and only the owner may
//! act on it. Each round runs in its frame `F` (`I` for z-axis rounds, `H`
//! for x-axis rounds): the client prepares `F|α⟩`, pulses with `F P F` and
//! checks against `F|β⟩`, and the server's measurement attacks use bases
//! relative to the same frame.

mod register;
mod server;

use std::collections::HashMap;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use register::{JointRegister, Owner};
pub use server::{AttackAction, MeasBasis, Server, ServerBehavior, SimulatedServer};

use crate::compiler::{
    compile, role_of, Circuit, CompileError, Embedding, KeySymbol, Role, RoundParams, Schedule, SynthConfig,
};
use crate::linalg::{hadamard, pauli_x, pauli_y, LinalgError, Spectrum};
use crate::seeds::{stream, Component};
use crate::spin::{build_central_hamiltonian, effective_generator, Axis, SpinError};
use crate::{DensityMatrix, Operator, StateVector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("round {round}: protocol 1 runs compute rounds only, found a {role:?} round")]
    UnsupportedRound { round: usize, role: Role },
    #[error("bath state has {got} amplitudes, schedule needs {expected}")]
    BathDimension { expected: usize, got: usize },
    #[error("{actor:?} acted on the central spin while {owner:?} holds it")]
    NotOwner { actor: Owner, owner: Owner },
    #[error("measurement basis states must be orthonormal single-qubit states")]
    BadBasis,
    #[error("sample count must be at least 1")]
    NoSamples,
    #[error("unknown server behavior '{0}'")]
    UnknownBehavior(String),
    #[error("unknown mode '{0}' (expected effective or full)")]
    UnknownMode(String),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Spin(#[from] SpinError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T, E = ProtocolError> = std::result::Result<T, E>;

/// Which dynamics the server applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// `approx_controlled_evolution`: exact protocol semantics.
    Effective,
    /// `e^{−iH_c t}`: physical dynamics including leakage.
    Full,
}

impl FromStr for Mode {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "effective" => Ok(Mode::Effective),
            "full" => Ok(Mode::Full),
            other => Err(ProtocolError::UnknownMode(other.to_string())),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Effective => "effective",
            Mode::Full => "full",
        })
    }
}

/// Mid-round client operation on the central spin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pulse {
    Identity,
    PiX,
    PiY,
}

impl Pulse {
    pub fn matrix(self) -> Operator {
        match self {
            Pulse::Identity => Operator::identity(2),
            Pulse::PiX => pauli_x(),
            Pulse::PiY => pauli_y(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckOutcome {
    Pass,
    Fail,
    NotChecked,
}

/// One line of the audit log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based round index.
    pub index: usize,
    pub role: Role,
    pub params: RoundParams,
    /// `None` in protocol 1, which has no mid-round pulse.
    pub pulse: Option<Pulse>,
    pub attacks: Vec<AttackAction>,
    pub check: CheckOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Status {
    Completed,
    Aborted { round: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolOutcome {
    pub status: Status,
    /// Bath state after the last round (completed runs only).
    pub final_bath: Option<StateVector>,
    pub transcript: Vec<RoundRecord>,
}

impl ProtocolOutcome {
    pub fn completed(&self) -> bool {
        self.status == Status::Completed
    }
}

/// Writes one JSON object per round record.
pub fn write_transcript<W: Write>(records: &[RoundRecord], mut out: W) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// `|0⟩, |1⟩, |+⟩, |−⟩`.
pub fn prepare_key_state(a: KeySymbol) -> StateVector {
    match a {
        KeySymbol::K0 => StateVector::basis(1, 0),
        KeySymbol::K1 => StateVector::basis(1, 1),
        KeySymbol::KPlus => StateVector::plus(),
        KeySymbol::KMinus => hadamard().apply(&StateVector::basis(1, 1)).expect("2x2 on qubit"),
    }
}

/// Identity for compute rounds, π about x for pads, π about y for
/// honeypots.
pub fn client_pulse_for(a: KeySymbol, b: KeySymbol) -> Result<Pulse, CompileError> {
    Ok(match role_of(a, b)? {
        Role::Compute => Pulse::Identity,
        Role::Pad => Pulse::PiX,
        Role::Honeypot => Pulse::PiY,
    })
}

/// Basis change of a round's frame.
pub fn frame(axis: Axis) -> Operator {
    match axis {
        Axis::Z => Operator::identity(2),
        Axis::X => hadamard(),
    }
}

fn in_frame(axis: Axis, psi: &StateVector) -> StateVector {
    frame(axis).apply(psi).expect("2x2 on qubit")
}

type ParamKey = (Vec<u64>, Axis);

fn param_key(p: &RoundParams) -> ParamKey {
    (p.gamma.iter().map(|g| g.to_bits()).collect(), p.axis)
}

/// Server-side propagator with spectra and unitaries cached per round
/// parameters. Safe to share between threads.
#[derive(Debug)]
pub struct Evolver {
    mode: Mode,
    spectra: Mutex<HashMap<ParamKey, Arc<Spectrum<f64>>>>,
    unitaries: Mutex<HashMap<(ParamKey, u64), Arc<Operator>>>,
}

impl Evolver {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            spectra: Mutex::new(HashMap::new()),
            unitaries: Mutex::new(HashMap::new()),
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    fn spectrum(&self, p: &RoundParams) -> Result<Arc<Spectrum<f64>>> {
        let key = param_key(p);
        if let Some(s) = self.spectra.lock().expect("cache lock").get(&key) {
            return Ok(s.clone());
        }
        let sp = p.spin_params()?;
        let h = match self.mode {
            Mode::Full => build_central_hamiltonian(&sp),
            Mode::Effective => effective_generator(&sp)?,
        };
        let s = Arc::new(Spectrum::of(&h)?);
        self.spectra.lock().expect("cache lock").insert(key, s.clone());
        Ok(s)
    }

    /// Joint-register propagator for time `t`.
    pub fn unitary(&self, p: &RoundParams, t: f64) -> Result<Arc<Operator>> {
        let key = (param_key(p), t.to_bits());
        if let Some(u) = self.unitaries.lock().expect("cache lock").get(&key) {
            return Ok(u.clone());
        }
        let u = Arc::new(self.spectrum(p)?.evolve(t));
        self.unitaries.lock().expect("cache lock").insert(key, u.clone());
        Ok(u)
    }
}

/// Runs protocols against any [`Server`].
#[derive(Debug)]
pub struct Engine {
    evolver: Evolver,
}

impl Engine {
    pub fn new(mode: Mode) -> Self {
        Self {
            evolver: Evolver::new(mode),
        }
    }

    pub fn mode(&self) -> Mode {
        self.evolver.mode
    }

    pub fn evolver(&self) -> &Evolver {
        &self.evolver
    }

    /// Simulated server drawing from its own generator.
    pub fn server<R: RngCore>(&self, behavior: ServerBehavior, rng: R) -> SimulatedServer<'_, R> {
        SimulatedServer::new(behavior, rng, &self.evolver)
    }

    fn check_bath(s: &Schedule, bath: &StateVector) -> Result<()> {
        let expected = 1usize << s.width();
        if bath.dim() != expected {
            return Err(ProtocolError::BathDimension {
                expected,
                got: bath.dim(),
            });
        }
        Ok(())
    }

    /// Blind simulation without honeypots: prepare `|α_k⟩`, let the server
    /// evolve for `t_k`, measure the returned spin in the frame basis (the
    /// outcome is not checked).
    pub fn run_protocol1(
        &self,
        s: &Schedule,
        bath: &StateVector,
        server: &mut dyn Server,
        rng: &mut dyn RngCore,
    ) -> Result<ProtocolOutcome> {
        Self::check_bath(s, bath)?;
        for (k, r) in s.rounds().iter().enumerate() {
            if r.role() != Role::Compute {
                return Err(ProtocolError::UnsupportedRound {
                    round: k + 1,
                    role: r.role(),
                });
            }
        }
        let mut bath = bath.clone();
        let mut transcript = Vec::with_capacity(s.len());
        for (k, r) in s.rounds().iter().enumerate() {
            let axis = r.params().axis;
            let mut reg = JointRegister::new(&in_frame(axis, &prepare_key_state(r.alpha())), &bath)?;
            reg.send_to(Owner::Server);
            let attacks = server.handle(&mut reg, k + 1, r.params(), r.params().t)?;
            reg.send_to(Owner::Client);
            let basis = [
                in_frame(axis, &prepare_key_state(r.alpha())),
                in_frame(axis, &prepare_key_state(r.alpha().flipped())),
            ];
            let outcome = reg.measure_central(Owner::Client, &basis, rng)?;
            bath = reg.bath_given_central(&basis[outcome])?;
            transcript.push(RoundRecord {
                index: k + 1,
                role: r.role(),
                params: r.params().clone(),
                pulse: None,
                attacks,
                check: CheckOutcome::NotChecked,
            });
        }
        Ok(ProtocolOutcome {
            status: Status::Completed,
            final_bath: Some(bath),
            transcript,
        })
    }

    /// Secured simulation: two half-evolutions around the client pulse and a
    /// projective check against `F|β_k⟩`; the first failed check aborts.
    pub fn run_protocol2(
        &self,
        s: &Schedule,
        bath: &StateVector,
        server: &mut dyn Server,
        rng: &mut dyn RngCore,
    ) -> Result<ProtocolOutcome> {
        Self::check_bath(s, bath)?;
        let mut bath = bath.clone();
        let mut transcript = Vec::with_capacity(s.len());
        for (k, r) in s.rounds().iter().enumerate() {
            let index = k + 1;
            let p = r.params();
            let f = frame(p.axis);
            let pulse = client_pulse_for(r.alpha(), r.beta())?;
            let mut reg = JointRegister::new(&in_frame(p.axis, &prepare_key_state(r.alpha())), &bath)?;
            reg.send_to(Owner::Server);
            let mut attacks = server.handle(&mut reg, index, p, p.t / 2.0)?;
            reg.send_to(Owner::Client);
            reg.apply_central(Owner::Client, &(&(&f * &pulse.matrix()) * &f))?;
            reg.send_to(Owner::Server);
            attacks.extend(server.handle(&mut reg, index, p, p.t / 2.0)?);
            reg.send_to(Owner::Client);
            let basis = [
                in_frame(p.axis, &prepare_key_state(r.beta())),
                in_frame(p.axis, &prepare_key_state(r.beta().flipped())),
            ];
            let outcome = reg.measure_central(Owner::Client, &basis, rng)?;
            let passed = outcome == 0;
            transcript.push(RoundRecord {
                index,
                role: r.role(),
                params: p.clone(),
                pulse: Some(pulse),
                attacks,
                check: if passed {
                    CheckOutcome::Pass
                } else {
                    CheckOutcome::Fail
                },
            });
            if !passed {
                return Ok(ProtocolOutcome {
                    status: Status::Aborted { round: index },
                    final_bath: None,
                    transcript,
                });
            }
            bath = reg.bath_given_central(&basis[0])?;
        }
        Ok(ProtocolOutcome {
            status: Status::Completed,
            final_bath: Some(bath),
            transcript,
        })
    }

    /// Universal blind computation: compile with `rng`, then protocol 2 with
    /// the same generator.
    #[allow(clippy::too_many_arguments)]
    pub fn run_protocol3(
        &self,
        circuit: &Circuit,
        embedding: Embedding,
        cfg: &SynthConfig,
        bath: &StateVector,
        server: &mut dyn Server,
        rng: &mut dyn RngCore,
    ) -> Result<(Schedule, ProtocolOutcome)> {
        let s = compile(circuit, embedding, cfg, rng)?;
        let out = self.run_protocol2(&s, bath, server, rng)?;
        Ok((s, out))
    }

    /// Protocol-2 run number `trial` with the documented seed streams.
    pub fn run_trial(
        &self,
        s: &Schedule,
        bath: &StateVector,
        behavior: ServerBehavior,
        seed: u64,
        trial: u64,
    ) -> Result<ProtocolOutcome> {
        let mut server = self.server(behavior, stream(seed, Component::Server, trial));
        let mut client = stream(seed, Component::Client, trial);
        self.run_protocol2(s, bath, &mut server, &mut client)
    }

    /// Fraction of `trials` protocol-2 runs from `|0…0⟩` that complete,
    /// i.e. in which the server evades detection.
    pub fn detection_probability(
        &self,
        behavior: ServerBehavior,
        s: &Schedule,
        trials: u64,
        seed: u64,
    ) -> Result<f64> {
        if trials == 0 {
            return Err(ProtocolError::NoSamples);
        }
        let bath = StateVector::basis(s.width(), 0);
        let completed = (0..trials)
            .into_par_iter()
            .map(|i| self.run_trial(s, &bath, behavior, seed, i).map(|o| u64::from(o.completed())))
            .try_reduce(|| 0, |a, b| Ok(a + b))?;
        Ok(completed as f64 / trials as f64)
    }
}

/// Exact average of the key-state density matrices under `dist` (weights
/// need not be normalized).
pub fn exact_server_view(dist: &[(KeySymbol, f64)]) -> Result<DensityMatrix> {
    let total: f64 = dist.iter().map(|(_, w)| w).sum();
    if dist.is_empty() || total <= 0.0 || total.is_nan() {
        return Err(ProtocolError::NoSamples);
    }
    let weighted: Vec<(f64, StateVector)> = dist.iter().map(|&(a, w)| (w / total, prepare_key_state(a))).collect();
    Ok(DensityMatrix::mixture(&weighted)?)
}

/// Empirical average of `samples` key states drawn from `dist`.
pub fn server_view_density(dist: &[(KeySymbol, f64)], samples: usize, rng: &mut dyn RngCore) -> Result<DensityMatrix> {
    use rand::distr::{weighted::WeightedIndex, Distribution};
    if samples == 0 || dist.is_empty() {
        return Err(ProtocolError::NoSamples);
    }
    let w = WeightedIndex::new(dist.iter().map(|(_, w)| *w)).map_err(|_| ProtocolError::NoSamples)?;
    let mut counts = [0usize; 4];
    for _ in 0..samples {
        let a = dist[w.sample(rng)].0;
        counts[KeySymbol::ALL.iter().position(|&k| k == a).expect("listed")] += 1;
    }
    let weighted: Vec<(f64, StateVector)> = KeySymbol::ALL
        .iter()
        .zip(counts)
        .filter(|(_, c)| *c > 0)
        .map(|(&a, c)| (c as f64 / samples as f64, prepare_key_state(a)))
        .collect();
    Ok(DensityMatrix::mixture(&weighted)?)
}

/// `|⟨expected|actual⟩|²` for a completed run against `U·ψ₀`.
pub fn output_fidelity(out: &ProtocolOutcome, u: &Operator, initial: &StateVector) -> Result<Option<f64>> {
    let Some(bath) = &out.final_bath else {
        return Ok(None);
    };
    let expected = u.apply(initial)?;
    Ok(Some(expected.fidelity(bath)?))
}
