//! Checks a client can run against the server: SWAP permutations with a
//! classical answer, Clifford circuits cross-checked against a stabilizer
//! tableau, and Simon's problem with a hidden string known to the client.

mod gf2;
mod tableau;

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

pub use gf2::{bits_to_index, bits_to_string, dot, gf2_nullspace, gf2_rank, index_to_bits, parse_bits};
pub use tableau::StabilizerTableau;

use crate::compiler::{Circuit, CompileError, Embedding, Gate, GateError, GateKind, SynthConfig};
use crate::protocol::{Engine, ProtocolError, ProtocolOutcome, ServerBehavior, Status};
use crate::StateVector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("gate '{0}' is not a Clifford gate")]
    NonClifford(String),
    #[error("qubit {qubit} out of range for width {width}")]
    QubitOutOfRange { qubit: usize, width: usize },
    #[error("two-qubit gate on qubit {0} twice")]
    SameQubit(usize),
    #[error("expected {expected} bits, got {got}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("hidden string must be nonzero")]
    ZeroSecret,
    #[error("simon runs support 1 to 3 input bits, got {0}")]
    SimonWidth(usize),
    #[error("truth table violates the promise at inputs {0} and {1}")]
    PromiseViolated(String, String),
    #[error("truth table is not affine over GF(2), no CNOT/X oracle exists")]
    NotAffine,
    #[error("run aborted at round {round} of query {query}")]
    Aborted { query: usize, round: usize },
    #[error("no nonzero candidate after {queries} queries")]
    InsufficientSamples { queries: usize },
    #[error("samples admit no nonzero hidden string")]
    InconsistentSamples,
    #[error("shot count must be at least 1")]
    NoShots,
    #[error(transparent)]
    Gate(#[from] GateError),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

pub type Result<T, E = VerifyError> = std::result::Result<T, E>;

/// How circuits reach the server.
#[derive(Debug, Clone, Copy)]
pub struct Harness<'e> {
    pub engine: &'e Engine,
    pub cfg: SynthConfig,
    pub embedding: Embedding,
    pub behavior: ServerBehavior,
}

impl<'e> Harness<'e> {
    pub fn new(engine: &'e Engine, embedding: Embedding, behavior: ServerBehavior) -> Self {
        Self {
            engine,
            cfg: SynthConfig::default(),
            embedding,
            behavior,
        }
    }

    pub fn with_config(mut self, cfg: SynthConfig) -> Self {
        self.cfg = cfg;
        self
    }

    /// One protocol-3 run with fresh keys; the server's generator is seeded
    /// from `rng`.
    pub fn execute(&self, circuit: &Circuit, bath: &StateVector, rng: &mut dyn RngCore) -> Result<ProtocolOutcome> {
        let mut server = self.engine.server(self.behavior, ChaCha8Rng::seed_from_u64(rng.next_u64()));
        let (_, out) = self
            .engine
            .run_protocol3(circuit, self.embedding, &self.cfg, bath, &mut server, rng)?;
        Ok(out)
    }
}

/// Z-basis measurement of every site of `state`.
pub fn sample_bits(state: &StateVector, rng: &mut dyn RngCore) -> Vec<u8> {
    let w = WeightedIndex::new(state.probabilities()).expect("normalized state");
    index_to_bits(w.sample(rng), state.num_sites())
}

fn to_bools(bits: &[u8]) -> Vec<bool> {
    bits.iter().map(|b| *b == 1).collect()
}

/// Applies the transpositions in order to a bit string.
pub fn permute_bits(bits: &[u8], swaps: &[(usize, usize)]) -> Vec<u8> {
    let mut out = bits.to_vec();
    for &(a, b) in swaps {
        out.swap(a, b);
    }
    out
}

/// Uniform initial bits that the permutation moves, or `None` when every
/// string is a fixed point.
pub fn distinguishing_bits(n: usize, swaps: &[(usize, usize)], rng: &mut dyn RngCore) -> Option<Vec<u8>> {
    let moved: Vec<usize> = (0..1usize << n)
        .filter(|&i| {
            let b = index_to_bits(i, n);
            permute_bits(&b, swaps) != b
        })
        .collect();
    if moved.is_empty() {
        return None;
    }
    Some(index_to_bits(moved[rng.random_range(0..moved.len())], n))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PermutationReport {
    pub initial: String,
    pub expected: String,
    /// `None` when the run aborted.
    pub measured: Option<String>,
    pub aborted_at: Option<usize>,
    pub pass: bool,
}

/// Runs the SWAP word through protocol 3 from `|initial⟩`, measures every
/// bath qubit and compares with the classically permuted string.
pub fn verify_permutation(
    n: usize,
    swaps: &[(usize, usize)],
    initial: &[u8],
    harness: &Harness<'_>,
    rng: &mut dyn RngCore,
) -> Result<PermutationReport> {
    if initial.len() != n {
        return Err(VerifyError::WidthMismatch {
            expected: n,
            got: initial.len(),
        });
    }
    let gates = swaps
        .iter()
        .map(|&(a, b)| Gate::new(GateKind::Swap, &[a, b]))
        .collect::<Result<Vec<_>, _>>()?;
    let circuit = Circuit::new(n, gates)?;
    let expected = permute_bits(initial, swaps);
    let out = harness.execute(&circuit, &StateVector::from_bits(&to_bools(initial)), rng)?;
    let (measured, aborted_at) = match (&out.status, &out.final_bath) {
        (Status::Completed, Some(bath)) => (Some(sample_bits(bath, rng)), None),
        (Status::Aborted { round }, _) => (None, Some(*round)),
        (Status::Completed, None) => unreachable!("completed runs carry the bath"),
    };
    Ok(PermutationReport {
        initial: bits_to_string(initial),
        expected: bits_to_string(&expected),
        pass: measured.as_deref() == Some(&expected[..]),
        measured: measured.map(|m| bits_to_string(&m)),
        aborted_at,
    })
}

/// Significance level of the stabilizer chi-square test.
pub const STABILIZER_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilizerReport {
    pub shots: usize,
    pub aborted: usize,
    /// Outcomes fixed by the tableau given the earlier bits of the shot.
    pub deterministic_checks: usize,
    pub deterministic_agreements: usize,
    /// Per qubit `[zeros, ones]` over outcomes the tableau leaves random.
    pub random_counts: Vec<[usize; 2]>,
    pub chi_square: f64,
    pub dof: usize,
    pub p_value: f64,
    pub pass: bool,
}

impl StabilizerReport {
    pub fn agreement_rate(&self) -> f64 {
        if self.deterministic_checks == 0 {
            1.0
        } else {
            self.deterministic_agreements as f64 / self.deterministic_checks as f64
        }
    }
}

/// Tableau of `circuit` applied to `|0…0⟩`.
pub fn tableau_of(circuit: &Circuit) -> Result<StabilizerTableau> {
    let mut t = StabilizerTableau::new(circuit.width());
    for g in circuit.gates() {
        t.apply(g)?;
    }
    Ok(t)
}

/// Runs a Clifford circuit `shots` times through protocol 3 and checks each
/// measured bit string against the tableau, qubit by qubit: outcomes the
/// tableau fixes must match exactly, the remaining ones are pooled into a
/// chi-square test against the uniform distribution.
pub fn verify_stabilizer(
    circuit: &Circuit,
    shots: usize,
    harness: &Harness<'_>,
    rng: &mut dyn RngCore,
) -> Result<StabilizerReport> {
    if shots == 0 {
        return Err(VerifyError::NoShots);
    }
    if let Some(g) = circuit.gates().iter().find(|g| !g.kind.is_clifford()) {
        return Err(VerifyError::NonClifford(g.kind.mnemonic().to_string()));
    }
    let reference = tableau_of(circuit)?;
    let n = circuit.width();
    let bath = StateVector::basis(n, 0);
    let (mut aborted, mut checks, mut agree) = (0, 0, 0);
    let mut counts = vec![[0usize; 2]; n];
    for _ in 0..shots {
        let out = harness.execute(circuit, &bath, rng)?;
        let Some(state) = &out.final_bath else {
            aborted += 1;
            continue;
        };
        let bits = sample_bits(state, rng);
        let mut t = reference.clone();
        for (q, &b) in bits.iter().enumerate() {
            let (predicted, random) = t.measure_with(q, || b)?;
            if random {
                counts[q][usize::from(b)] += 1;
            } else {
                checks += 1;
                agree += usize::from(predicted == b);
            }
        }
    }
    let mut chi_square = 0.0;
    let mut dof = 0;
    for c in &counts {
        let m = (c[0] + c[1]) as f64;
        if m > 0.0 {
            let e = m / 2.0;
            chi_square += ((c[0] as f64 - e).powi(2) + (c[1] as f64 - e).powi(2)) / e;
            dof += 1;
        }
    }
    let p_value = if dof == 0 {
        1.0
    } else {
        ChiSquared::new(dof as f64).expect("positive dof").sf(chi_square)
    };
    Ok(StabilizerReport {
        shots,
        aborted,
        deterministic_checks: checks,
        deterministic_agreements: agree,
        random_counts: counts,
        chi_square,
        dof,
        p_value,
        pass: aborted == 0 && agree == checks && p_value >= STABILIZER_ALPHA,
    })
}

/// Promise problem `f(x) = f(y) ⟺ x = y or x ⊕ y = s`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimonInstance {
    nbits: usize,
    s: Vec<u8>,
    table: Vec<Vec<u8>>,
}

impl SimonInstance {
    /// `f(x) = x ⊕ x_p·s` with `p` the first set bit of `s`.
    pub fn linear(s: &[u8]) -> Result<Self> {
        let p = s.iter().position(|b| *b == 1).ok_or(VerifyError::ZeroSecret)?;
        let nbits = s.len();
        let table = (0..1usize << nbits)
            .map(|i| {
                let x = index_to_bits(i, nbits);
                x.iter().zip(s).map(|(xi, si)| xi ^ (x[p] & si)).collect()
            })
            .collect();
        Self::from_table(s, table)
    }

    /// Checks the promise exhaustively. `table[i]` is `f` of the input whose
    /// bits are `index_to_bits(i)`.
    pub fn from_table(s: &[u8], table: Vec<Vec<u8>>) -> Result<Self> {
        let nbits = s.len();
        if nbits == 0 || s.iter().all(|b| *b == 0) {
            return Err(VerifyError::ZeroSecret);
        }
        if table.len() != 1 << nbits {
            return Err(VerifyError::WidthMismatch {
                expected: 1 << nbits,
                got: table.len(),
            });
        }
        if let Some(row) = table.iter().find(|r| r.len() != nbits) {
            return Err(VerifyError::WidthMismatch {
                expected: nbits,
                got: row.len(),
            });
        }
        let si = bits_to_index(s);
        for x in 0..table.len() {
            for y in x + 1..table.len() {
                if (table[x] == table[y]) != (x ^ y == si) {
                    return Err(VerifyError::PromiseViolated(
                        bits_to_string(&index_to_bits(x, nbits)),
                        bits_to_string(&index_to_bits(y, nbits)),
                    ));
                }
            }
        }
        Ok(Self {
            nbits,
            s: s.to_vec(),
            table,
        })
    }

    pub fn nbits(&self) -> usize {
        self.nbits
    }

    pub fn secret(&self) -> &[u8] {
        &self.s
    }

    pub fn f(&self, x: &[u8]) -> &[u8] {
        &self.table[bits_to_index(x)]
    }

    /// `|x⟩|y⟩ ↦ |x⟩|y ⊕ f(x)⟩` as a CNOT/X network on `2·nbits` qubits.
    pub fn oracle_circuit(&self) -> Result<Circuit> {
        let n = self.nbits;
        let b = &self.table[0];
        let cols: Vec<Vec<u8>> = (0..n)
            .map(|i| {
                let e = index_to_bits(1 << (n - 1 - i), n);
                self.f(&e).iter().zip(b).map(|(u, v)| u ^ v).collect()
            })
            .collect();
        for (x, fx) in self.table.iter().enumerate() {
            let bits = index_to_bits(x, n);
            let mut v = b.clone();
            for (i, col) in cols.iter().enumerate() {
                if bits[i] == 1 {
                    v.iter_mut().zip(col).for_each(|(a, c)| *a ^= c);
                }
            }
            if &v != fx {
                return Err(VerifyError::NotAffine);
            }
        }
        let mut gates = Vec::new();
        for (i, col) in cols.iter().enumerate() {
            for (j, &c) in col.iter().enumerate() {
                if c == 1 {
                    gates.push(Gate::new(GateKind::Cnot, &[i, n + j])?);
                }
            }
        }
        for (j, &bj) in b.iter().enumerate() {
            if bj == 1 {
                gates.push(Gate::new(GateKind::X, &[n + j])?);
            }
        }
        Ok(Circuit::new(2 * n, gates)?)
    }

    /// Hadamards on the input register, the oracle, Hadamards again.
    pub fn circuit(&self) -> Result<Circuit> {
        let n = self.nbits;
        let mut c = Circuit::empty(2 * n);
        for q in 0..n {
            c.push(Gate::new(GateKind::H, &[q])?)?;
        }
        for g in self.oracle_circuit()?.gates() {
            c.push(g.clone())?;
        }
        for q in 0..n {
            c.push(Gate::new(GateKind::H, &[q])?)?;
        }
        Ok(c)
    }
}

/// Default query cap of [`simon_run`].
pub fn simon_query_cap(nbits: usize) -> usize {
    16 * nbits.max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimonReport {
    pub secret: String,
    pub recovered: String,
    pub samples: Vec<String>,
    pub queries: usize,
    pub matches: bool,
}

/// Queries the Simon circuit through protocol 3 until the samples fix a
/// single nonzero candidate, at most `max_queries` times.
pub fn simon_run(
    inst: &SimonInstance,
    harness: &Harness<'_>,
    max_queries: usize,
    rng: &mut dyn RngCore,
) -> Result<SimonReport> {
    let n = inst.nbits();
    if !(1..=3).contains(&n) {
        return Err(VerifyError::SimonWidth(n));
    }
    let circuit = inst.circuit()?;
    let bath = StateVector::basis(2 * n, 0);
    let mut samples: Vec<Vec<u8>> = Vec::new();
    for query in 1..=max_queries {
        let out = harness.execute(&circuit, &bath, rng)?;
        let state = match (out.status, &out.final_bath) {
            (Status::Completed, Some(s)) => s,
            (Status::Aborted { round }, _) => return Err(VerifyError::Aborted { query, round }),
            (Status::Completed, None) => unreachable!("completed runs carry the bath"),
        };
        let y = sample_bits(state, rng)[..n].to_vec();
        samples.push(y);
        let null = gf2_nullspace(&samples, n);
        match null.len() {
            0 => return Err(VerifyError::InconsistentSamples),
            1 => {
                let recovered = null.into_iter().next().expect("one vector");
                return Ok(SimonReport {
                    secret: bits_to_string(inst.secret()),
                    recovered: bits_to_string(&recovered),
                    samples: samples.iter().map(|y| bits_to_string(y)).collect(),
                    queries: query,
                    matches: recovered == inst.secret(),
                });
            }
            _ => {}
        }
    }
    Err(VerifyError::InsufficientSamples { queries: max_queries })
}
