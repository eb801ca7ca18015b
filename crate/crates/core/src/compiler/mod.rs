//! Compilation of circuits into keyed schedules of central-spin rounds.
//!
//! A round is realized at the effective level as `e^{−iH_branch t}` on the
//! bath with `H_branch` from [`build_effective_closed`] and antisymmetric
//! fields (`h0 = 1`). The branch is fixed by the key `α`: `K0` runs the up
//! branch, `K1` the down branch. Because the branches are exact negatives,
//! the compiler emits parameters for the primitive on the up branch when
//! `α = K0` and for its inverse when `α = K1`, so every compute round applies
//! the intended gate.

mod circuit;

use std::f64::consts::PI;
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use circuit::{Circuit, Gate, GateError, GateKind, ParseError};

use crate::linalg::{fidelity_unitary, Spectrum};
use crate::spin::{build_effective_closed, hadamard_all, Axis, Branch, SpinError};
use crate::{CentralSpinParams, Operator};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompileError {
    #[error("invalid key pairing ({0}, {1})")]
    InvalidPairing(KeySymbol, KeySymbol),
    #[error("qubit {qubit} outside width {width}")]
    QubitOutOfRange { qubit: usize, width: usize },
    #[error("U_XY needs two distinct qubits, got {0} twice")]
    SameQubit(usize),
    #[error("coupling must be positive and finite, got {0}")]
    BadCoupling(f64),
    #[error("U_XY integer c must be at least 1")]
    ZeroC,
    #[error("no up-branch U_XY time exists for odd c = {0}")]
    OddC(u32),
    #[error("fractions must be in [0, 1) with sum below 1, got {0} and {1}")]
    BadFractions(f64, f64),
    #[error("{0} is not a primitive gate")]
    NotPrimitive(&'static str),
    #[error("{0} keys given for a schedule of {1} rounds")]
    KeyCount(usize, usize),
    #[error(transparent)]
    Gate(#[from] GateError),
    #[error(transparent)]
    Spin(#[from] SpinError),
}

pub type Result<T, E = CompileError> = std::result::Result<T, E>;

/// Central-spin preparation and check states `|0⟩, |1⟩, |+⟩, |−⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KeySymbol {
    #[serde(rename = "0")]
    K0,
    #[serde(rename = "1")]
    K1,
    #[serde(rename = "+")]
    KPlus,
    #[serde(rename = "-")]
    KMinus,
}

impl KeySymbol {
    pub const ALL: [KeySymbol; 4] = [KeySymbol::K0, KeySymbol::K1, KeySymbol::KPlus, KeySymbol::KMinus];

    pub fn is_computational(self) -> bool {
        matches!(self, KeySymbol::K0 | KeySymbol::K1)
    }

    /// Branch selected by a computational key.
    pub fn branch(self) -> Option<Branch> {
        match self {
            KeySymbol::K0 => Some(Branch::Up),
            KeySymbol::K1 => Some(Branch::Down),
            _ => None,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            KeySymbol::K0 => KeySymbol::K1,
            KeySymbol::K1 => KeySymbol::K0,
            KeySymbol::KPlus => KeySymbol::KMinus,
            KeySymbol::KMinus => KeySymbol::KPlus,
        }
    }
}

impl fmt::Display for KeySymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KeySymbol::K0 => "0",
            KeySymbol::K1 => "1",
            KeySymbol::KPlus => "+",
            KeySymbol::KMinus => "-",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Compute,
    Pad,
    Honeypot,
}

/// Role implied by a key pair, or an error for pairings no round may carry.
pub fn role_of(a: KeySymbol, b: KeySymbol) -> Result<Role> {
    use KeySymbol::*;
    match (a, b) {
        (K0, K0) | (K1, K1) => Ok(Role::Compute),
        (K0, K1) | (K1, K0) => Ok(Role::Pad),
        (KPlus, KMinus) | (KMinus, KPlus) => Ok(Role::Honeypot),
        _ => Err(CompileError::InvalidPairing(a, b)),
    }
}

/// 1 iff the round contributes its gate to the net unitary.
pub fn omega(a: KeySymbol, b: KeySymbol) -> Result<u8> {
    Ok(u8::from(role_of(a, b)? == Role::Compute))
}

/// Classical data sent to the server for one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundParams {
    pub gamma: Vec<f64>,
    pub t: f64,
    pub axis: Axis,
}

impl RoundParams {
    /// Hamiltonian parameters with `h0 = 1` and antisymmetric bath fields.
    pub fn spin_params(&self) -> Result<CentralSpinParams> {
        Ok(CentralSpinParams::antisymmetric(self.gamma.clone(), 1.0, self.axis)?)
    }

    /// Effective bath unitary `e^{−iH_branch t}` (x-axis rounds conjugated
    /// by `H^{⊗n}`).
    pub fn effective_unitary(&self, b: Branch) -> Result<Operator> {
        let p = self.spin_params()?.with_axis(Axis::Z);
        let h = build_effective_closed(&p, b)?;
        let u = Spectrum::of(&h).map_err(SpinError::from)?.evolve(self.t);
        Ok(match self.axis {
            Axis::Z => u,
            Axis::X => {
                let w = hadamard_all(self.gamma.len());
                &(&w * &u) * &w
            }
        })
    }
}

/// One protocol round: parameters plus secret keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Round {
    params: RoundParams,
    alpha: KeySymbol,
    beta: KeySymbol,
    role: Role,
    gate_ref: Option<usize>,
}

impl Round {
    pub fn new(params: RoundParams, alpha: KeySymbol, beta: KeySymbol, gate_ref: Option<usize>) -> Result<Self> {
        let role = role_of(alpha, beta)?;
        Ok(Self {
            params,
            alpha,
            beta,
            role,
            gate_ref,
        })
    }

    pub fn params(&self) -> &RoundParams {
        &self.params
    }

    pub fn alpha(&self) -> KeySymbol {
        self.alpha
    }

    pub fn beta(&self) -> KeySymbol {
        self.beta
    }

    pub fn role(&self) -> Role {
        self.role
    }

    /// Index of the circuit gate this round belongs to (compute rounds only).
    pub fn gate_ref(&self) -> Option<usize> {
        self.gate_ref
    }

    /// `G_k^{ω(α_k, β_k)}` at the effective level.
    pub fn net_unitary(&self) -> Result<Operator> {
        match (self.role, self.alpha.branch()) {
            (Role::Compute, Some(b)) => self.params.effective_unitary(b),
            _ => Ok(Operator::identity(1 << self.params.gamma.len())),
        }
    }
}

/// Compiled, keyed program on `width` bath qubits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    width: usize,
    rounds: Vec<Round>,
}

impl Schedule {
    pub fn new(width: usize, rounds: Vec<Round>) -> Result<Self> {
        for r in &rounds {
            if r.params.gamma.len() != width {
                return Err(CompileError::QubitOutOfRange {
                    qubit: r.params.gamma.len(),
                    width,
                });
            }
        }
        Ok(Self { width, rounds })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn rounds(&self) -> &[Round] {
        &self.rounds
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn count(&self, role: Role) -> usize {
        self.rounds.iter().filter(|r| r.role == role).count()
    }

    /// Classical messages only, as seen by the server.
    pub fn public_params(&self) -> Vec<RoundParams> {
        self.rounds.iter().map(|r| r.params.clone()).collect()
    }

    /// Same parameters with new keys.
    pub fn rekey(&self, keys: &[(KeySymbol, KeySymbol)]) -> Result<Self> {
        if keys.len() != self.rounds.len() {
            return Err(CompileError::KeyCount(keys.len(), self.rounds.len()));
        }
        let rounds = self
            .rounds
            .iter()
            .zip(keys)
            .map(|(r, &(a, b))| Round::new(r.params.clone(), a, b, r.gate_ref))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            width: self.width,
            rounds,
        })
    }
}

/// Coupling scales used for synthesis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    /// `g` for single-qubit rounds (units of h0).
    pub coupling: f64,
    /// Integer `c` of the U_XY constants `γ = 7/(2c)`.
    pub uxy_c: u32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            coupling: 0.1,
            uxy_c: 36,
        }
    }
}

impl SynthConfig {
    /// Keeps every round well inside the perturbative regime of `eta`:
    /// `g = eta/8` (capped at 0.1) and `c = 14m` with `γ = 1/(4m) ≤ eta/32`.
    pub fn for_eta(eta: f64) -> Self {
        let m = (8.0 / eta).ceil().max(1.0) as u32;
        Self {
            coupling: (eta / 8.0).min(0.1),
            uxy_c: 14 * m,
        }
    }
}

fn wrap_angle(theta: f64) -> f64 {
    let mut a = theta.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

fn single_qubit(theta: f64, qubit: usize, n: usize, g: f64, axis: Axis) -> Result<RoundParams> {
    if qubit >= n {
        return Err(CompileError::QubitOutOfRange { qubit, width: n });
    }
    if g <= 0.0 || !g.is_finite() {
        return Err(CompileError::BadCoupling(g));
    }
    let th = wrap_angle(theta);
    let mut gamma = vec![0.0; n];
    gamma[qubit] = if th < 0.0 { -g } else { g };
    Ok(RoundParams {
        gamma,
        t: 2.0 * th.abs() / g,
        axis,
    })
}

/// Up-branch `RZ(θ)` on `qubit`: `γ_qubit = ±g`, `t = 2|θ|/g` (θ wrapped to
/// (−π, π]).
pub fn synth_rz_with(theta: f64, qubit: usize, n: usize, g: f64) -> Result<RoundParams> {
    single_qubit(theta, qubit, n, g, Axis::Z)
}

/// [`synth_rz_with`] at the default coupling `g = 0.1`.
pub fn synth_rz(theta: f64, qubit: usize, n: usize) -> Result<RoundParams> {
    synth_rz_with(theta, qubit, n, SynthConfig::default().coupling)
}

/// Up-branch `RX(θ)` on `qubit` using the x-axis field.
pub fn synth_rx_with(theta: f64, qubit: usize, n: usize, g: f64) -> Result<RoundParams> {
    single_qubit(theta, qubit, n, g, Axis::X)
}

pub fn synth_rx(theta: f64, qubit: usize, n: usize) -> Result<RoundParams> {
    synth_rx_with(theta, qubit, n, SynthConfig::default().coupling)
}

fn uxy_common(q1: usize, q2: usize, c: u32, n: usize) -> Result<(Vec<f64>, f64)> {
    if q1 == q2 {
        return Err(CompileError::SameQubit(q1));
    }
    for q in [q1, q2] {
        if q >= n {
            return Err(CompileError::QubitOutOfRange { qubit: q, width: n });
        }
    }
    if c == 0 {
        return Err(CompileError::ZeroC);
    }
    let g = 7.0 / (2.0 * f64::from(c));
    let mut gamma = vec![0.0; n];
    gamma[q1] = g;
    gamma[q2] = g;
    Ok((gamma, g))
}

/// `γ_{q1} = γ_{q2} = 7/(2c)`, `t = 7π/γ²`. Realizes U_XY on the down
/// branch when `c` is even.
pub fn synth_uxy(q1: usize, q2: usize, c: u32, n: usize) -> Result<RoundParams> {
    let (gamma, g) = uxy_common(q1, q2, c, n)?;
    Ok(RoundParams {
        gamma,
        t: 7.0 * PI / (g * g),
        axis: Axis::Z,
    })
}

/// Same couplings as [`synth_uxy`] with the shortest `t = (1+8k)π/γ²`
/// realizing U_XY on the up branch; requires even `c`.
pub fn synth_uxy_up(q1: usize, q2: usize, c: u32, n: usize) -> Result<RoundParams> {
    let (gamma, g) = uxy_common(q1, q2, c, n)?;
    let k = (0u64..=6)
        .find(|k| ((1 + 8 * k) * u64::from(c)) % 14 == 0)
        .ok_or(CompileError::OddC(c))?;
    Ok(RoundParams {
        gamma,
        t: (1 + 8 * k) as f64 * PI / (g * g),
        axis: Axis::Z,
    })
}

/// Parameters realizing a primitive on the given branch.
pub fn realize(prim: &Gate, b: Branch, n: usize, cfg: &SynthConfig) -> Result<RoundParams> {
    let sign = match b {
        Branch::Up => 1.0,
        Branch::Down => -1.0,
    };
    let t = prim.targets();
    match prim.kind {
        GateKind::Rz(th) => synth_rz_with(sign * th, t[0], n, cfg.coupling),
        GateKind::Rx(th) => synth_rx_with(sign * th, t[0], n, cfg.coupling),
        GateKind::Uxy => match b {
            Branch::Up => synth_uxy_up(t[0], t[1], cfg.uxy_c, n),
            Branch::Down => synth_uxy(t[0], t[1], cfg.uxy_c, n),
        },
        k => Err(CompileError::NotPrimitive(k.mnemonic())),
    }
}

/// Rewrites a gate over the primitives {RZ, RX, UXY}, in application order.
pub fn decompose(g: &Gate) -> Vec<Gate> {
    let t = g.targets();
    let one = |k: GateKind, q: usize| Gate::new(k, &[q]).expect("single target");
    let uxy = |a: usize, b: usize| Gate::new(GateKind::Uxy, &[a, b]).expect("distinct targets");
    let h = PI / 2.0;
    match g.kind {
        GateKind::Rz(_) | GateKind::Rx(_) | GateKind::Uxy => vec![g.clone()],
        GateKind::T => vec![one(GateKind::Rz(PI / 4.0), t[0])],
        GateKind::S => vec![one(GateKind::Rz(h), t[0])],
        GateKind::Z => vec![one(GateKind::Rz(PI), t[0])],
        GateKind::X => vec![one(GateKind::Rx(PI), t[0])],
        GateKind::H => vec![
            one(GateKind::Rx(h), t[0]),
            one(GateKind::Rz(h), t[0]),
            one(GateKind::Rx(h), t[0]),
        ],
        GateKind::Iswap => vec![uxy(t[0], t[1]), uxy(t[0], t[1])],
        GateKind::Cnot => {
            let (c, x) = (t[0], t[1]);
            vec![
                one(GateKind::Rx(h), c),
                one(GateKind::Rz(h), c),
                uxy(c, x),
                one(GateKind::Rx(PI), c),
                uxy(c, x),
                one(GateKind::Rz(h), c),
                one(GateKind::Rx(h), c),
                one(GateKind::Rz(h), c),
                one(GateKind::Rx(h), x),
            ]
        }
        GateKind::Swap => {
            let (a, b) = (t[0], t[1]);
            [(a, b), (b, a), (a, b)]
                .iter()
                .flat_map(|&(c, x)| decompose(&Gate::new(GateKind::Cnot, &[c, x]).expect("distinct")))
                .collect()
        }
    }
}

/// How many decoy rounds to add around the compute rounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Embedding {
    /// Fractions of the final round count.
    Fractions { honeypot: f64, pad: f64 },
    /// Exact counts.
    Counts { honeypots: usize, pads: usize },
}

impl Embedding {
    pub fn none() -> Self {
        Embedding::Counts { honeypots: 0, pads: 0 }
    }

    /// `(honeypots, pads)` for `m0` compute rounds. With fractions `(f, g)`
    /// the total is `round(m0 / (1 − f − g))` and honeypots take
    /// `round(f·m)` of the extra rounds.
    pub fn counts(&self, m0: usize) -> Result<(usize, usize)> {
        match *self {
            Embedding::Counts { honeypots, pads } => Ok((honeypots, pads)),
            Embedding::Fractions { honeypot: f, pad: g } => {
                let ok = |x: f64| (0.0..1.0).contains(&x);
                if !ok(f) || !ok(g) || f + g >= 1.0 {
                    return Err(CompileError::BadFractions(f, g));
                }
                let m = (m0 as f64 / (1.0 - f - g)).round() as usize;
                let extras = m.saturating_sub(m0);
                let h = if f == 0.0 {
                    0
                } else if g == 0.0 {
                    extras
                } else {
                    ((f * m as f64).round() as usize).min(extras)
                };
                Ok((h, extras - h))
            }
        }
    }
}

/// Decomposes the circuit, keys every primitive as a compute round and
/// hides the result among honeypot and pad rounds at random positions.
/// Decoys copy the parameters of a uniformly chosen compute round.
pub fn compile<R: Rng + ?Sized>(
    circuit: &Circuit,
    embedding: Embedding,
    cfg: &SynthConfig,
    rng: &mut R,
) -> Result<Schedule> {
    let n = circuit.width();
    let mut compute = Vec::new();
    for (gi, g) in circuit.gates().iter().enumerate() {
        for prim in decompose(g) {
            let alpha = if rng.random_bool(0.5) {
                KeySymbol::K1
            } else {
                KeySymbol::K0
            };
            let params = realize(&prim, alpha.branch().expect("computational"), n, cfg)?;
            compute.push(Round::new(params, alpha, alpha, Some(gi))?);
        }
    }
    let m0 = compute.len();
    let (h, p) = embedding.counts(m0)?;
    let m = m0 + h + p;
    let mut decoy_roles: Vec<Role> = std::iter::repeat_n(Role::Honeypot, h)
        .chain(std::iter::repeat_n(Role::Pad, p))
        .collect();
    decoy_roles.shuffle(rng);
    let mut slots = rand::seq::index::sample(rng, m, m0).into_vec();
    slots.sort_unstable();
    let mut is_compute = vec![false; m];
    for &s in &slots {
        is_compute[s] = true;
    }
    let mut compute_iter = compute.iter();
    let mut decoy_iter = decoy_roles.into_iter();
    let mut rounds = Vec::with_capacity(m);
    for flag in is_compute {
        if flag {
            rounds.push(compute_iter.next().expect("slot count").clone());
            continue;
        }
        let role = decoy_iter.next().expect("decoy count");
        let params = match compute.get(rng.random_range(0..m0.max(1))) {
            Some(r) if m0 > 0 => r.params.clone(),
            _ => {
                let theta = rng.random_range(-PI..PI);
                let q = rng.random_range(0..n);
                synth_rz_with(theta, q, n, cfg.coupling)?
            }
        };
        let (a, b) = match role {
            Role::Honeypot => {
                let a = if rng.random_bool(0.5) {
                    KeySymbol::KMinus
                } else {
                    KeySymbol::KPlus
                };
                (a, a.flipped())
            }
            _ => {
                let a = if rng.random_bool(0.5) {
                    KeySymbol::K1
                } else {
                    KeySymbol::K0
                };
                (a, a.flipped())
            }
        };
        rounds.push(Round::new(params, a, b, None)?);
    }
    Schedule::new(n, rounds)
}

/// `U_m = Π_k G_k^{ω(α_k, β_k)}` at the effective level, first round applied
/// first.
pub fn expected_unitary(s: &Schedule) -> Result<Operator> {
    let mut u = Operator::identity(1 << s.width);
    for r in &s.rounds {
        if r.role == Role::Compute {
            u = &r.net_unitary()? * &u;
        }
    }
    Ok(u)
}

/// Phase-insensitive agreement of a gate list with a target unitary.
pub fn sequence_fidelity(gates: &[Gate], width: usize, target: &Operator) -> Result<f64> {
    let c = Circuit::new(width, gates.to_vec())?;
    Ok(fidelity_unitary(&c.unitary(), target).map_err(SpinError::from)?)
}
