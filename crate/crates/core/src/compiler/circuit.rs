use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{embed, Operator as Op, C};

type Operator = Op<f64>;

/// Gate kinds accepted in circuits. `Rz`, `Rx` and `Uxy` are the primitives
/// every other kind is decomposed into.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "theta", rename_all = "lowercase")]
pub enum GateKind {
    Rz(f64),
    Rx(f64),
    H,
    T,
    S,
    X,
    Z,
    Uxy,
    Iswap,
    Cnot,
    Swap,
}

impl GateKind {
    pub fn arity(self) -> usize {
        match self {
            GateKind::Uxy | GateKind::Iswap | GateKind::Cnot | GateKind::Swap => 2,
            _ => 1,
        }
    }

    pub fn mnemonic(self) -> &'static str {
        match self {
            GateKind::Rz(_) => "rz",
            GateKind::Rx(_) => "rx",
            GateKind::H => "h",
            GateKind::T => "t",
            GateKind::S => "s",
            GateKind::X => "x",
            GateKind::Z => "z",
            GateKind::Uxy => "uxy",
            GateKind::Iswap => "iswap",
            GateKind::Cnot => "cnot",
            GateKind::Swap => "swap",
        }
    }

    pub fn is_primitive(self) -> bool {
        matches!(self, GateKind::Rz(_) | GateKind::Rx(_) | GateKind::Uxy)
    }

    /// Kinds the stabilizer tableau can simulate (after SWAP → 3 CNOT).
    pub fn is_clifford(self) -> bool {
        matches!(
            self,
            GateKind::H | GateKind::S | GateKind::X | GateKind::Z | GateKind::Cnot | GateKind::Swap
        )
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GateError {
    #[error("{kind} takes {expected} target(s), got {got}")]
    Arity {
        kind: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("duplicate target {0}")]
    DuplicateTarget(usize),
    #[error("target {target} outside circuit width {width}")]
    TargetOutOfRange { target: usize, width: usize },
    #[error("rotation angle must be finite")]
    NonFiniteAngle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    targets: Vec<usize>,
}

impl Gate {
    pub fn new(kind: GateKind, targets: &[usize]) -> Result<Self, GateError> {
        if targets.len() != kind.arity() {
            return Err(GateError::Arity {
                kind: kind.mnemonic(),
                expected: kind.arity(),
                got: targets.len(),
            });
        }
        if targets.len() == 2 && targets[0] == targets[1] {
            return Err(GateError::DuplicateTarget(targets[0]));
        }
        if let GateKind::Rz(t) | GateKind::Rx(t) = kind {
            if !t.is_finite() {
                return Err(GateError::NonFiniteAngle);
            }
        }
        Ok(Self {
            kind,
            targets: targets.to_vec(),
        })
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    /// Defining 2×2 or 4×4 matrix; the first target is the more significant
    /// bit.
    pub fn local_matrix(&self) -> Operator {
        let z0 = C::new(0.0, 0.0);
        let one = C::new(1.0, 0.0);
        let s = FRAC_1_SQRT_2;
        let rows = |d: usize, e: &[f64]| Operator::from_real_rows(d, e).expect("static matrix");
        match self.kind {
            GateKind::Rz(t) => Operator::diagonal(&[C::from_polar(1.0, -t / 2.0), C::from_polar(1.0, t / 2.0)])
                .expect("2x2"),
            GateKind::Rx(t) => {
                let (c, sn) = ((t / 2.0).cos(), (t / 2.0).sin());
                Operator::from_rows(2, &[C::new(c, 0.0), C::new(0.0, -sn), C::new(0.0, -sn), C::new(c, 0.0)])
                    .expect("2x2")
            }
            GateKind::H => rows(2, &[s, s, s, -s]),
            GateKind::T => Operator::diagonal(&[one, C::from_polar(1.0, PI / 4.0)]).expect("2x2"),
            GateKind::S => Operator::diagonal(&[one, C::new(0.0, 1.0)]).expect("2x2"),
            GateKind::X => rows(2, &[0., 1., 1., 0.]),
            GateKind::Z => rows(2, &[1., 0., 0., -1.]),
            GateKind::Uxy => Operator::from_rows(4, &[
                one, z0, z0, z0, //
                z0, C::new(s, 0.0), C::new(0.0, s), z0, //
                z0, C::new(0.0, s), C::new(s, 0.0), z0, //
                z0, z0, z0, one,
            ])
            .expect("4x4"),
            GateKind::Iswap => Operator::from_rows(4, &[
                one, z0, z0, z0, //
                z0, z0, C::new(0.0, 1.0), z0, //
                z0, C::new(0.0, 1.0), z0, z0, //
                z0, z0, z0, one,
            ])
            .expect("4x4"),
            GateKind::Cnot => rows(4, &[
                1., 0., 0., 0., //
                0., 1., 0., 0., //
                0., 0., 0., 1., //
                0., 0., 1., 0.,
            ]),
            GateKind::Swap => rows(4, &[
                1., 0., 0., 0., //
                0., 0., 1., 0., //
                0., 1., 0., 0., //
                0., 0., 0., 1.,
            ]),
        }
    }

    /// The gate embedded in a `width`-qubit register.
    pub fn matrix(&self, width: usize) -> Result<Operator, GateError> {
        for &t in &self.targets {
            if t >= width {
                return Err(GateError::TargetOutOfRange { target: t, width });
            }
        }
        Ok(embed(&self.local_matrix(), &self.targets, width).expect("validated targets"))
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind.mnemonic())?;
        for t in &self.targets {
            write!(f, " {t}")?;
        }
        if let GateKind::Rz(a) | GateKind::Rx(a) = self.kind {
            write!(f, " {a:?}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

/// Ordered gate list on `width` qubits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    width: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(width: usize, gates: Vec<Gate>) -> Result<Self, GateError> {
        for g in &gates {
            for &t in g.targets() {
                if t >= width {
                    return Err(GateError::TargetOutOfRange { target: t, width });
                }
            }
        }
        Ok(Self { width, gates })
    }

    pub fn empty(width: usize) -> Self {
        Self {
            width,
            gates: Vec::new(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn push(&mut self, g: Gate) -> Result<(), GateError> {
        for &t in g.targets() {
            if t >= self.width {
                return Err(GateError::TargetOutOfRange {
                    target: t,
                    width: self.width,
                });
            }
        }
        self.gates.push(g);
        Ok(())
    }

    /// Product of the gate matrices, first gate applied first.
    pub fn unitary(&self) -> Operator {
        self.gates.iter().fold(Operator::identity(1 << self.width), |acc, g| {
            &g.matrix(self.width).expect("validated circuit") * &acc
        })
    }

    /// Parses the line-oriented text format:
    ///
    /// ```text
    /// # comment
    /// qubits 3          (optional; otherwise width = largest target + 1)
    /// h 0
    /// cnot 0 1
    /// rz 1 0.7853981634
    /// ```
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut declared: Option<(usize, usize)> = None;
        let mut gates = Vec::new();
        let mut max_target: Option<usize> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |message: String| ParseError { line, message };
            let mut tok = content.split_whitespace();
            let head = tok.next().expect("nonempty line");
            let rest: Vec<&str> = tok.collect();
            if head == "qubits" {
                if declared.is_some() || !gates.is_empty() {
                    return Err(err("'qubits' must appear once, before any gate".into()));
                }
                let [w] = rest.as_slice() else {
                    return Err(err("'qubits' takes one integer".into()));
                };
                let w: usize = w.parse().map_err(|_| err(format!("invalid qubit count '{w}'")))?;
                if w == 0 {
                    return Err(err("qubit count must be positive".into()));
                }
                declared = Some((w, line));
                continue;
            }
            let (proto, has_angle) = match head {
                "rz" => (GateKind::Rz(0.0), true),
                "rx" => (GateKind::Rx(0.0), true),
                "h" => (GateKind::H, false),
                "t" => (GateKind::T, false),
                "s" => (GateKind::S, false),
                "x" => (GateKind::X, false),
                "z" => (GateKind::Z, false),
                "uxy" => (GateKind::Uxy, false),
                "iswap" => (GateKind::Iswap, false),
                "cnot" => (GateKind::Cnot, false),
                "swap" => (GateKind::Swap, false),
                other => return Err(err(format!("unknown gate '{other}'"))),
            };
            let arity = proto.arity();
            let expected = arity + usize::from(has_angle);
            if rest.len() != expected {
                return Err(err(format!(
                    "'{head}' expects {arity} target(s){}, got {} argument(s)",
                    if has_angle { " and an angle" } else { "" },
                    rest.len()
                )));
            }
            let mut targets = Vec::with_capacity(arity);
            for t in &rest[..arity] {
                targets.push(t.parse::<usize>().map_err(|_| err(format!("invalid target '{t}'")))?);
            }
            let kind = if has_angle {
                let a = rest[arity];
                let theta: f64 = a.parse().map_err(|_| err(format!("invalid angle '{a}'")))?;
                match proto {
                    GateKind::Rz(_) => GateKind::Rz(theta),
                    _ => GateKind::Rx(theta),
                }
            } else {
                proto
            };
            let gate = Gate::new(kind, &targets).map_err(|e| err(e.to_string()))?;
            for &t in gate.targets() {
                if let Some((w, _)) = declared {
                    if t >= w {
                        return Err(err(format!("target {t} outside declared width {w}")));
                    }
                }
                max_target = Some(max_target.map_or(t, |m: usize| m.max(t)));
            }
            gates.push(gate);
        }
        let width = match declared {
            Some((w, _)) => w,
            None => max_target.map_or(1, |m| m + 1),
        };
        Ok(Self { width, gates })
    }

    /// Text form accepted by [`Circuit::parse`].
    pub fn to_text(&self) -> String {
        let mut s = format!("qubits {}\n", self.width);
        for g in &self.gates {
            s.push_str(&g.to_string());
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::fidelity_unitary;
    use crate::StateVector;

    #[test]
    fn parses_sample_circuit() {
        let c = Circuit::parse("# bell\nh 0\ncnot 0 1  # entangle\n\nrz 1 0.75\n").unwrap();
        assert_eq!(c.width(), 2);
        assert_eq!(c.len(), 3);
        assert_eq!(c.gates()[2].kind, GateKind::Rz(0.75));
    }

    #[test]
    fn parse_errors_name_the_line() {
        let e = Circuit::parse("uxy 0").unwrap_err();
        assert_eq!(e.line, 1);
        let e = Circuit::parse("h 0\n\nfoo 1").unwrap_err();
        assert_eq!(e.line, 3);
        assert!(e.message.contains("foo"));
        let e = Circuit::parse("qubits 2\nh 0\ncnot 1 1").unwrap_err();
        assert_eq!(e.line, 3);
        let e = Circuit::parse("qubits 2\ncnot 0 2").unwrap_err();
        assert_eq!(e.line, 2);
        let e = Circuit::parse("rz 0 abc").unwrap_err();
        assert!(e.message.contains("abc"));
    }

    #[test]
    fn declared_width_is_kept() {
        let c = Circuit::parse("qubits 3\nh 0").unwrap();
        assert_eq!(c.width(), 3);
        assert_eq!(Circuit::parse("").unwrap().width(), 1);
    }

    #[test]
    fn text_round_trip() {
        let c = Circuit::parse("qubits 3\nrx 2 -1.25\nswap 0 2\nt 1\nuxy 1 0").unwrap();
        assert_eq!(Circuit::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn gate_validation() {
        assert!(matches!(Gate::new(GateKind::Cnot, &[0]), Err(GateError::Arity { .. })));
        assert_eq!(Gate::new(GateKind::Swap, &[1, 1]), Err(GateError::DuplicateTarget(1)));
        assert_eq!(Gate::new(GateKind::Rz(f64::NAN), &[0]), Err(GateError::NonFiniteAngle));
        let g = Gate::new(GateKind::H, &[3]).unwrap();
        assert!(Circuit::new(2, vec![g]).is_err());
    }

    #[test]
    fn cnot_acts_on_control_then_target() {
        let c = Circuit::parse("x 0\ncnot 0 1").unwrap();
        let out = c.unitary().apply(&StateVector::basis(2, 0)).unwrap();
        assert!((out.fidelity(&StateVector::basis(2, 0b11)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uxy_squared_is_iswap() {
        let u = Gate::new(GateKind::Uxy, &[0, 1]).unwrap().local_matrix();
        let i = Gate::new(GateKind::Iswap, &[0, 1]).unwrap().local_matrix();
        assert!((fidelity_unitary(&(&u * &u), &i).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_gate_matrices_are_unitary() {
        for k in [
            GateKind::Rz(0.3),
            GateKind::Rx(-1.1),
            GateKind::H,
            GateKind::T,
            GateKind::S,
            GateKind::X,
            GateKind::Z,
            GateKind::Uxy,
            GateKind::Iswap,
            GateKind::Cnot,
            GateKind::Swap,
        ] {
            let t: Vec<usize> = (0..k.arity()).collect();
            assert!(Gate::new(k, &t).unwrap().local_matrix().is_unitary(1e-12), "{k:?}");
        }
    }
}
