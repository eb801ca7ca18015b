//! `spinblind`: spin-model checks, protocol runs and verification
//! experiments, reported as JSON lines.

mod report;

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use spinblind::compiler::{compile, Circuit, Embedding, Gate, GateKind, SynthConfig};
use spinblind::linalg::operator_norm;
use spinblind::protocol::{output_fidelity, write_transcript, Engine, Mode, RoundRecord, ServerBehavior, Status};
use spinblind::seeds::{stream, Component};
use spinblind::spin::{
    build_effective_closed, build_effective_exact, build_effective_numeric, evolution_error, Axis, Branch,
};
use spinblind::verification::{
    bits_to_string, distinguishing_bits, parse_bits, simon_query_cap, simon_run, verify_permutation,
    verify_stabilizer, Harness, SimonInstance,
};
use spinblind::{CentralSpinParams, StateVector};

use report::{rate_stats, Report};

const EXIT_OTHER: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_PARSE: u8 = 3;
const EXIT_VERIFY_FAILED: u8 = 4;
const EXIT_IO: u8 = 5;

#[derive(Parser)]
#[command(name = "spinblind", version, about = "Blind computation with a central spin: simulations and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Global seed; every component derives its own stream from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Bath spin count.
    #[arg(long, default_value_t = 3)]
    n: usize,
    /// Perturbation scale.
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    #[arg(long, default_value = "effective", value_parser = parse_mode)]
    mode: Mode,
    #[arg(long, default_value_t = 1)]
    trials: u64,
    /// Honeypot fraction of the final round count.
    #[arg(long, default_value_t = 0.2)]
    honeypots: f64,
    /// Pad fraction of the final round count.
    #[arg(long, default_value_t = 0.1)]
    pads: f64,
    /// honest, measure-z, measure-x, measure-random, intercept-resend,
    /// skip-evolution or tamper-time[:factor].
    #[arg(long, default_value = "honest", value_parser = parse_behavior)]
    behavior: ServerBehavior,
    /// Report path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Effective-Hamiltonian residuals and convergence in eta.
    SwCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1.0)]
        h0: f64,
        /// Evolution time of the controlled-evolution check.
        #[arg(long, default_value_t = 1.0)]
        time: f64,
    },
    /// Runs a circuit file through the honeypot protocol.
    Run {
        circuit: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Exact honeypot count (overrides the fractions).
        #[arg(long)]
        honeypot_count: Option<usize>,
        /// Exact pad count, used with --honeypot-count.
        #[arg(long, default_value_t = 0)]
        pad_count: usize,
    },
    /// Server verification procedures.
    Verify {
        kind: VerifyKind,
        #[command(flatten)]
        common: Common,
        /// Clifford circuit for `stabilizer` (GHZ on --n qubits by default).
        #[arg(long)]
        circuit: Option<PathBuf>,
        /// Transpositions for `permutation`, e.g. `0:1,1:2` (random 5-swap
        /// word by default).
        #[arg(long)]
        swaps: Option<String>,
        /// Hidden string for `simon`.
        #[arg(long, default_value = "11")]
        secret: String,
        /// Shots for `stabilizer`.
        #[arg(long, default_value_t = 200)]
        shots: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum VerifyKind {
    Permutation,
    Stabilizer,
    Simon,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_behavior(s: &str) -> Result<ServerBehavior, String> {
    s.parse().map_err(|e| format!("{e}"))
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Parse(String),
    Io(String),
    Other(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Parse(_) => EXIT_PARSE,
            CliError::Io(_) => EXIT_IO,
            CliError::Other(_) => EXIT_OTHER,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Parse(m) | CliError::Io(m) | CliError::Other(m) => m,
        }
    }
}

fn other<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Other(e.to_string())
}

fn io_err(path: &Path, e: io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

impl Common {
    fn validate(&self) -> Result<(), CliError> {
        if self.n == 0 {
            return Err(CliError::Usage("--n must be at least 1".into()));
        }
        if self.trials == 0 {
            return Err(CliError::Usage("--trials must be at least 1".into()));
        }
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(CliError::Usage("--eta must be finite and non-negative".into()));
        }
        let ok = |f: f64| (0.0..1.0).contains(&f);
        if !ok(self.honeypots) || !ok(self.pads) || self.honeypots + self.pads >= 1.0 {
            return Err(CliError::Usage("--honeypots and --pads must lie in [0, 1) with sum below 1".into()));
        }
        Ok(())
    }

    fn echo(&self) -> Value {
        json!({
            "seed": self.seed,
            "n": self.n,
            "eta": self.eta,
            "mode": self.mode.to_string(),
            "trials": self.trials,
            "honeypot_fraction": self.honeypots,
            "pad_fraction": self.pads,
            "behavior": self.behavior.to_string(),
            "out": self.out.as_ref().map(|p| p.display().to_string()),
        })
    }

    fn embedding(&self) -> Embedding {
        Embedding::Fractions {
            honeypot: self.honeypots,
            pad: self.pads,
        }
    }

    fn synth(&self) -> SynthConfig {
        if self.eta > 0.0 {
            SynthConfig::for_eta(self.eta)
        } else {
            SynthConfig::default()
        }
    }
}

fn with_fields(mut base: Value, extra: Value) -> Value {
    if let (Value::Object(b), Value::Object(e)) = (&mut base, extra) {
        b.extend(e);
    }
    base
}

fn emit(report: &Report, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(p) => {
            let f = File::create(p).map_err(|e| io_err(p, e))?;
            let mut w = BufWriter::new(f);
            report.write(&mut w).and_then(|_| w.flush()).map_err(|e| io_err(p, e))
        }
        None => report
            .write(io::stdout().lock())
            .map_err(|e| CliError::Io(format!("stdout: {e}"))),
    }
}

fn load_circuit(path: &Path) -> Result<Circuit, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Circuit::parse(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

fn sw_check(c: &Common, h0: f64, time: f64) -> Result<bool, CliError> {
    c.validate()?;
    if h0 == 0.0 || !h0.is_finite() {
        return Err(CliError::Usage("--h0 must be finite and nonzero".into()));
    }
    if !time.is_finite() {
        return Err(CliError::Usage("--time must be finite".into()));
    }
    let mut cfg = c.echo();
    cfg = with_fields(cfg, json!({ "h0": h0, "time": time }));
    let mut report = Report::new("sw-check", &cfg, c.seed);
    let mut rng = stream(c.seed, Component::Parameters, 0);
    let weights: Vec<f64> = (0..c.n).map(|_| rng.random_range(0.5..1.5)).collect();
    let total: f64 = weights.iter().sum();
    report.line("weights", json!({ "gamma_weights": weights }));

    let ladder = [c.eta, c.eta / 2.0, c.eta / 4.0];
    let mut rows = Vec::new();
    for &eta in &ladder {
        let gamma: Vec<f64> = weights.iter().map(|w| eta * h0.abs() * w / total).collect();
        let p = CentralSpinParams::antisymmetric(gamma, h0, Axis::Z).map_err(other)?;
        let up = build_effective_closed(&p, Branch::Up).map_err(other)?;
        let down = build_effective_closed(&p, Branch::Down).map_err(other)?;
        let antisym = operator_norm(&(&up + &down));
        let mut numeric = 0.0f64;
        let mut exact = 0.0f64;
        for (b, closed) in [(Branch::Up, &up), (Branch::Down, &down)] {
            let nm = build_effective_numeric(&p, b).map_err(other)?;
            numeric = numeric.max(operator_norm(&(closed - &nm)));
            let ex = build_effective_exact(&p, b).map_err(other)?;
            exact = exact.max(operator_norm(&(closed - &ex)));
        }
        let evo = evolution_error(&p, time).map_err(other)?;
        rows.push((eta, antisym, numeric, exact, evo));
        for (name, v) in [
            ("antisymmetry_residual", antisym),
            ("closed_vs_numeric", numeric),
            ("closed_vs_exact", exact),
            ("evolution_error", evo),
        ] {
            report.metric(name, v, 1, json!({ "eta": eta }));
        }
    }
    for w in rows.windows(2) {
        let (a, b) = (w[0], w[1]);
        let extra = json!({ "eta": a.0, "eta_half": b.0 });
        report.metric("closed_vs_exact_ratio", a.3 / b.3, 1, extra.clone());
        report.metric("evolution_order", order(a.4, b.4), 1, extra);
    }
    emit(&report, c.out.as_deref())?;
    Ok(true)
}

struct TrialResult {
    completed: bool,
    abort_round: Option<usize>,
    fidelity: Option<f64>,
    rounds: usize,
    transcript: Option<Vec<RoundRecord>>,
}

fn run(c: &Common, path: &Path, honeypot_count: Option<usize>, pad_count: usize) -> Result<bool, CliError> {
    c.validate()?;
    let circuit = load_circuit(path)?;
    let embedding = match honeypot_count {
        Some(h) => Embedding::Counts {
            honeypots: h,
            pads: pad_count,
        },
        None => c.embedding(),
    };
    let cfg = with_fields(
        c.echo(),
        json!({
            "circuit": path.display().to_string(),
            "width": circuit.width(),
            "gates": circuit.len(),
            "honeypot_count": honeypot_count,
            "pad_count": honeypot_count.map(|_| pad_count),
        }),
    );
    let mut report = Report::new("run", &cfg, c.seed);
    let engine = Engine::new(c.mode);
    let synth = c.synth();
    let target = circuit.unitary();
    let bath = StateVector::basis(circuit.width(), 0);
    let results: Vec<TrialResult> = (0..c.trials)
        .into_par_iter()
        .map(|i| {
            let mut crng = stream(c.seed, Component::Compile, i);
            let s = compile(&circuit, embedding, &synth, &mut crng).map_err(other)?;
            let out = engine.run_trial(&s, &bath, c.behavior, c.seed, i).map_err(other)?;
            let fidelity = output_fidelity(&out, &target, &bath).map_err(other)?;
            Ok(TrialResult {
                completed: out.completed(),
                abort_round: match out.status {
                    Status::Aborted { round } => Some(round),
                    Status::Completed => None,
                },
                fidelity,
                rounds: s.len(),
                transcript: (i == 0).then_some(out.transcript),
            })
        })
        .collect::<Result<_, CliError>>()?;

    let n = c.trials;
    let done = results.iter().filter(|r| r.completed).count() as u64;
    report.metric("completion_rate", done as f64 / n as f64, n, rate_stats(done, n));
    let fids: Vec<f64> = results.iter().filter_map(|r| r.fidelity).collect();
    if !fids.is_empty() {
        let mean = fids.iter().sum::<f64>() / fids.len() as f64;
        let min = fids.iter().copied().fold(f64::INFINITY, f64::min);
        report.metric("fidelity_mean", mean, fids.len() as u64, json!({ "oracle": "circuit_unitary" }));
        report.metric("fidelity_min", min, fids.len() as u64, json!({}));
    }
    let aborts: Vec<usize> = results.iter().filter_map(|r| r.abort_round).collect();
    if !aborts.is_empty() {
        let mean = aborts.iter().sum::<usize>() as f64 / aborts.len() as f64;
        report.metric("abort_round_mean", mean, aborts.len() as u64, json!({}));
    }
    let rounds = results.iter().map(|r| r.rounds).sum::<usize>() as f64 / n as f64;
    report.metric("rounds_mean", rounds, n, json!({}));

    if let Some(out) = &c.out {
        let tpath = PathBuf::from(format!("{}.transcript.jsonl", out.display()));
        let f = File::create(&tpath).map_err(|e| io_err(&tpath, e))?;
        let mut w = BufWriter::new(f);
        let records = results[0].transcript.as_deref().unwrap_or(&[]);
        write_transcript(records, &mut w)
            .and_then(|_| w.flush())
            .map_err(|e| io_err(&tpath, e))?;
        report.line("transcript", json!({ "path": tpath.display().to_string(), "trial": 0 }));
    }
    emit(&report, c.out.as_deref())?;
    Ok(true)
}

fn parse_swaps(s: &str, n: usize) -> Result<Vec<(usize, usize)>, CliError> {
    let bad = || CliError::Usage(format!("--swaps: expected a:b pairs below {n}, got '{s}'"));
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (a, b) = p.trim().split_once(':').ok_or_else(bad)?;
            let a: usize = a.parse().map_err(|_| bad())?;
            let b: usize = b.parse().map_err(|_| bad())?;
            if a >= n || b >= n || a == b {
                return Err(bad());
            }
            Ok((a, b))
        })
        .collect()
}

fn ghz(n: usize) -> Circuit {
    let mut c = Circuit::empty(n);
    c.push(Gate::new(GateKind::H, &[0]).expect("arity")).expect("in range");
    for q in 1..n {
        c.push(Gate::new(GateKind::Cnot, &[q - 1, q]).expect("arity")).expect("in range");
    }
    c
}

#[allow(clippy::too_many_arguments)]
fn verify(
    kind: VerifyKind,
    c: &Common,
    circuit: Option<&Path>,
    swaps: Option<&str>,
    secret: &str,
    shots: usize,
) -> Result<bool, CliError> {
    c.validate()?;
    let engine = Engine::new(c.mode);
    let harness = Harness::new(&engine, c.embedding(), c.behavior).with_config(c.synth());
    match kind {
        VerifyKind::Permutation => {
            if c.n < 2 {
                return Err(CliError::Usage("permutation needs --n of at least 2".into()));
            }
            let word = match swaps {
                Some(s) => parse_swaps(s, c.n)?,
                None => {
                    let mut r = stream(c.seed, Component::Parameters, 0);
                    (0..5)
                        .map(|_| {
                            let a = r.random_range(0..c.n);
                            (a, (a + r.random_range(1..c.n)) % c.n)
                        })
                        .collect()
                }
            };
            let word_text: Vec<String> = word.iter().map(|(a, b)| format!("{a}:{b}")).collect();
            let cfg = with_fields(c.echo(), json!({ "kind": "permutation", "swaps": word_text.join(",") }));
            let mut report = Report::new("verify", &cfg, c.seed);
            let reports = (0..c.trials)
                .into_par_iter()
                .map(|i| {
                    let mut r = stream(c.seed, Component::Verification, i);
                    let init = distinguishing_bits(c.n, &word, &mut r)
                        .unwrap_or_else(|| (0..c.n).map(|_| u8::from(r.random_bool(0.5))).collect());
                    verify_permutation(c.n, &word, &init, &harness, &mut r).map_err(other)
                })
                .collect::<Result<Vec<_>, _>>()?;
            let passed = reports.iter().filter(|r| r.pass).count() as u64;
            report.metric("pass_rate", passed as f64 / c.trials as f64, c.trials, rate_stats(passed, c.trials));
            let first = serde_json::to_value(&reports[0]).expect("report serializes");
            report.line("example", first);
            let pass = passed == c.trials;
            report.line("result", json!({ "kind": "permutation", "pass": pass }));
            emit(&report, c.out.as_deref())?;
            Ok(pass)
        }
        VerifyKind::Stabilizer => {
            let circ = match circuit {
                Some(p) => load_circuit(p)?,
                None => ghz(c.n),
            };
            if shots == 0 {
                return Err(CliError::Usage("--shots must be at least 1".into()));
            }
            let cfg = with_fields(
                c.echo(),
                json!({
                    "kind": "stabilizer",
                    "circuit": circuit.map(|p| p.display().to_string()),
                    "width": circ.width(),
                    "shots": shots,
                }),
            );
            let mut report = Report::new("verify", &cfg, c.seed);
            let mut r = stream(c.seed, Component::Verification, 0);
            let rep = verify_stabilizer(&circ, shots, &harness, &mut r).map_err(|e| match e {
                spinblind::verification::VerifyError::NonClifford(_) => CliError::Usage(e.to_string()),
                e => other(e),
            })?;
            report.metric(
                "deterministic_agreement",
                rep.agreement_rate(),
                shots as u64,
                json!({ "checks": rep.deterministic_checks, "agreements": rep.deterministic_agreements }),
            );
            report.metric(
                "chi_square_p_value",
                rep.p_value,
                shots as u64,
                json!({ "chi_square": rep.chi_square, "dof": rep.dof, "alpha": spinblind::verification::STABILIZER_ALPHA }),
            );
            report.line(
                "result",
                json!({ "kind": "stabilizer", "pass": rep.pass, "aborted": rep.aborted, "random_counts": rep.random_counts }),
            );
            emit(&report, c.out.as_deref())?;
            Ok(rep.pass)
        }
        VerifyKind::Simon => {
            let s = parse_bits(secret)
                .filter(|s| !s.is_empty())
                .ok_or_else(|| CliError::Usage(format!("--secret must be a bit string, got '{secret}'")))?;
            let inst = SimonInstance::linear(&s).map_err(|e| CliError::Usage(e.to_string()))?;
            if !(1..=3).contains(&inst.nbits()) {
                return Err(CliError::Usage("--secret must have 1 to 3 bits".into()));
            }
            let cfg = with_fields(c.echo(), json!({ "kind": "simon", "secret": secret, "query_cap": simon_query_cap(s.len()) }));
            let mut report = Report::new("verify", &cfg, c.seed);
            let runs: Vec<Option<(String, usize)>> = (0..c.trials)
                .into_par_iter()
                .map(|i| {
                    let mut r = stream(c.seed, Component::Verification, i);
                    simon_run(&inst, &harness, simon_query_cap(inst.nbits()), &mut r)
                        .ok()
                        .map(|rep| (rep.recovered, rep.queries))
                })
                .collect();
            let hits = runs.iter().flatten().filter(|(rec, _)| rec == secret).count() as u64;
            report.metric("recovery_rate", hits as f64 / c.trials as f64, c.trials, rate_stats(hits, c.trials));
            let solved: Vec<usize> = runs.iter().flatten().map(|(_, q)| *q).collect();
            if !solved.is_empty() {
                let mean = solved.iter().sum::<usize>() as f64 / solved.len() as f64;
                report.metric("queries_mean", mean, solved.len() as u64, json!({}));
            }
            let recovered = runs[0].as_ref().map(|(rec, _)| rec.clone());
            let pass = hits == c.trials;
            report.line(
                "result",
                json!({ "kind": "simon", "secret": bits_to_string(&s), "recovered": recovered, "matches": pass, "pass": pass }),
            );
            emit(&report, c.out.as_deref())?;
            Ok(pass)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::SwCheck { common, h0, time } => sw_check(common, *h0, *time),
        Command::Run {
            circuit,
            common,
            honeypot_count,
            pad_count,
        } => run(common, circuit, *honeypot_count, *pad_count),
        Command::Verify {
            kind,
            common,
            circuit,
            swaps,
            secret,
            shots,
        } => verify(*kind, common, circuit.as_deref(), swaps.as_deref(), secret, *shots),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("spinblind: verification failed");
            ExitCode::from(EXIT_VERIFY_FAILED)
        }
        Err(e) => {
            eprintln!("spinblind: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
