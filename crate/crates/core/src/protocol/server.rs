use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{in_frame, prepare_key_state, Evolver, JointRegister, Owner, ProtocolError, Result};
use crate::compiler::{KeySymbol, RoundParams};
use crate::linalg::C;
use crate::StateVector;

/// Server strategies. Measurement bases are relative to the round frame, so
/// `MeasureZ` always measures along the field axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "behavior", content = "factor", rename_all = "snake_case")]
pub enum ServerBehavior {
    Honest,
    MeasureZ,
    MeasureX,
    /// Uniformly random X, Y or Z basis at every arrival.
    MeasureRandom,
    /// Uniformly random Z or X basis per round, used at both arrivals.
    InterceptResend,
    /// Evolves for `factor × t`.
    TamperTime(f64),
    SkipEvolution,
}

impl FromStr for ServerBehavior {
    type Err = ProtocolError;

    /// `honest`, `measure-z`, `measure-x`, `measure-random`,
    /// `intercept-resend`, `skip-evolution`, `tamper-time` (factor 1.5) or
    /// `tamper-time:<factor>`.
    fn from_str(s: &str) -> Result<Self> {
        let unknown = || ProtocolError::UnknownBehavior(s.to_string());
        Ok(match s {
            "honest" => ServerBehavior::Honest,
            "measure-z" => ServerBehavior::MeasureZ,
            "measure-x" => ServerBehavior::MeasureX,
            "measure-random" => ServerBehavior::MeasureRandom,
            "intercept-resend" => ServerBehavior::InterceptResend,
            "skip-evolution" => ServerBehavior::SkipEvolution,
            "tamper-time" => ServerBehavior::TamperTime(1.5),
            other => {
                let f = other.strip_prefix("tamper-time:").ok_or_else(unknown)?;
                let f: f64 = f.parse().map_err(|_| unknown())?;
                if !f.is_finite() {
                    return Err(unknown());
                }
                ServerBehavior::TamperTime(f)
            }
        })
    }
}

impl fmt::Display for ServerBehavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ServerBehavior::Honest => f.write_str("honest"),
            ServerBehavior::MeasureZ => f.write_str("measure-z"),
            ServerBehavior::MeasureX => f.write_str("measure-x"),
            ServerBehavior::MeasureRandom => f.write_str("measure-random"),
            ServerBehavior::InterceptResend => f.write_str("intercept-resend"),
            ServerBehavior::TamperTime(x) => write!(f, "tamper-time:{x}"),
            ServerBehavior::SkipEvolution => f.write_str("skip-evolution"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasBasis {
    X,
    Y,
    Z,
}

impl MeasBasis {
    /// Eigenstates (+1 first) in the computational frame.
    pub fn states(self) -> [StateVector; 2] {
        match self {
            MeasBasis::Z => [prepare_key_state(KeySymbol::K0), prepare_key_state(KeySymbol::K1)],
            MeasBasis::X => [prepare_key_state(KeySymbol::KPlus), prepare_key_state(KeySymbol::KMinus)],
            MeasBasis::Y => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                let st = |im: f64| {
                    StateVector::from_amplitudes(vec![C::new(s, 0.0), C::new(0.0, im * s)]).expect("normalized")
                };
                [st(1.0), st(-1.0)]
            }
        }
    }
}

/// What the server did while holding the spin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum AttackAction {
    Measure { basis: MeasBasis, outcome: u8 },
    TamperTime { factor: f64 },
    SkipEvolution,
}

/// The remote party. Called every time the central spin arrives; it owns
/// the register for the duration of the call and is expected to evolve it
/// for time `t` under the round parameters.
pub trait Server {
    fn handle(
        &mut self,
        reg: &mut JointRegister,
        round: usize,
        params: &RoundParams,
        t: f64,
    ) -> Result<Vec<AttackAction>>;
}

/// Server following a [`ServerBehavior`] with its own generator.
#[derive(Debug)]
pub struct SimulatedServer<'e, R> {
    behavior: ServerBehavior,
    rng: R,
    evolver: &'e Evolver,
    round_basis: Option<(usize, MeasBasis)>,
}

impl<'e, R: RngCore> SimulatedServer<'e, R> {
    pub fn new(behavior: ServerBehavior, rng: R, evolver: &'e Evolver) -> Self {
        Self {
            behavior,
            rng,
            evolver,
            round_basis: None,
        }
    }

    pub fn behavior(&self) -> ServerBehavior {
        self.behavior
    }

    fn measure(&mut self, reg: &mut JointRegister, params: &RoundParams, basis: MeasBasis) -> Result<AttackAction> {
        let states = basis.states().map(|s| in_frame(params.axis, &s));
        let outcome = reg.measure_central(Owner::Server, &states, &mut self.rng)?;
        Ok(AttackAction::Measure {
            basis,
            outcome: outcome as u8,
        })
    }
}

impl<R: RngCore> Server for SimulatedServer<'_, R> {
    fn handle(
        &mut self,
        reg: &mut JointRegister,
        round: usize,
        params: &RoundParams,
        t: f64,
    ) -> Result<Vec<AttackAction>> {
        let mut actions = Vec::new();
        let mut time = t;
        match self.behavior {
            ServerBehavior::Honest => {}
            ServerBehavior::MeasureZ => actions.push(self.measure(reg, params, MeasBasis::Z)?),
            ServerBehavior::MeasureX => actions.push(self.measure(reg, params, MeasBasis::X)?),
            ServerBehavior::MeasureRandom => {
                let b = [MeasBasis::X, MeasBasis::Y, MeasBasis::Z][self.rng.random_range(0..3)];
                actions.push(self.measure(reg, params, b)?);
            }
            ServerBehavior::InterceptResend => {
                let b = match self.round_basis {
                    Some((r, b)) if r == round => b,
                    _ => {
                        let b = if self.rng.random_bool(0.5) {
                            MeasBasis::X
                        } else {
                            MeasBasis::Z
                        };
                        self.round_basis = Some((round, b));
                        b
                    }
                };
                actions.push(self.measure(reg, params, b)?);
            }
            ServerBehavior::TamperTime(f) => {
                time = t * f;
                actions.push(AttackAction::TamperTime { factor: f });
            }
            ServerBehavior::SkipEvolution => {
                actions.push(AttackAction::SkipEvolution);
                return Ok(actions);
            }
        }
        let u = self.evolver.unitary(params, time)?;
        reg.apply(Owner::Server, &u)?;
        Ok(actions)
    }
}
