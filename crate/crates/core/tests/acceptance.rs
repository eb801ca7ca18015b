//! Acceptance checks. Every test prints one `PASS`/`FAIL` line with the
//! measured quantity before asserting, so `cargo test --test acceptance --
//! --nocapture` doubles as a summary table.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spinblind::compiler::{
    compile, decompose, expected_unitary, synth_uxy, Circuit, Embedding, Gate, GateKind, SynthConfig,
};
use spinblind::linalg::{fidelity_unitary, operator_norm, Spectrum, C};
use spinblind::protocol::{
    exact_server_view, output_fidelity, server_view_density, Engine, Mode, ServerBehavior,
};
use spinblind::spin::{
    build_central_hamiltonian, build_effective_closed, build_effective_exact, build_effective_numeric,
    evolution_error, Axis, Branch,
};
use spinblind::verification::{
    distinguishing_bits, index_to_bits, simon_query_cap, simon_run, tableau_of, verify_permutation,
    verify_stabilizer, Harness, SimonInstance,
};
use spinblind::{CentralSpinParams, DensityMatrix, StateVector};

fn verdict(id: u32, name: &str, pass: bool, detail: &str, started: Instant) -> bool {
    println!(
        "[{id:02}] {:<4} {name}: {detail} ({:.1} s)",
        if pass { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64()
    );
    pass
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Fixed relative weights, scaled so that `Σγ = eta`.
fn ladder_params(weights: &[f64], eta: f64) -> CentralSpinParams {
    let s: f64 = weights.iter().sum();
    CentralSpinParams::antisymmetric(weights.iter().map(|w| eta * w / s).collect(), 1.0, Axis::Z).unwrap()
}

#[test]
fn c01_antisymmetry() {
    let started = Instant::now();
    let mut r = rng(101);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = r.random_range(1..=5);
        let h0 = r.random_range(0.5..2.0) * if r.random_bool(0.5) { 1.0 } else { -1.0 };
        let gamma: Vec<f64> = (0..n).map(|_| r.random_range(-0.05..0.05)).collect();
        let p = CentralSpinParams::antisymmetric(gamma, h0, Axis::Z).unwrap();
        let up = build_effective_closed(&p, Branch::Up).unwrap();
        let down = build_effective_closed(&p, Branch::Down).unwrap();
        worst = worst.max(operator_norm(&(&up + &down)));
    }
    let pass = worst <= 1e-12 && started.elapsed().as_secs_f64() < 10.0;
    assert!(verdict(1, "H_up + H_down = 0", pass, &format!("max residual {worst:.2e} over 50 sets"), started));
}

#[test]
fn c02_schrieffer_wolff_consistency() {
    let started = Instant::now();
    let w = [1.0, 1.37, 1.74];
    let mut numeric = 0.0f64;
    let mut exact = Vec::new();
    for eta in [0.2, 0.1, 0.05] {
        let p = ladder_params(&w, eta);
        let mut e = 0.0f64;
        for b in [Branch::Up, Branch::Down] {
            let closed = build_effective_closed(&p, b).unwrap();
            numeric = numeric.max(operator_norm(&(&closed - &build_effective_numeric(&p, b).unwrap())));
            e = e.max(operator_norm(&(&closed - &build_effective_exact(&p, b).unwrap())));
        }
        exact.push(e);
    }
    let ratios = [exact[0] / exact[1], exact[1] / exact[2]];
    let pass = numeric < 1e-12 && ratios.iter().all(|&q| q >= 6.0) && started.elapsed().as_secs_f64() < 30.0;
    let detail = format!(
        "closed-numeric {numeric:.1e}; closed-exact {:.2e}, {:.2e}, {:.2e}; ratios {:.2}, {:.2} (need >= 6)",
        exact[0], exact[1], exact[2], ratios[0], ratios[1]
    );
    assert!(verdict(2, "effective Hamiltonian residual scaling", pass, &detail, started));
}

#[test]
fn c03_controlled_evolution_order() {
    let started = Instant::now();
    let w = [1.0, 1.37, 1.74, 2.11];
    let errs: Vec<f64> = [0.2, 0.1, 0.05]
        .iter()
        .map(|&eta| evolution_error(&ladder_params(&w, eta), 1.0).unwrap())
        .collect();
    let orders = [(errs[0] / errs[1]).log2(), (errs[1] / errs[2]).log2()];
    let pass = orders.iter().all(|&o| o >= 2.0) && started.elapsed().as_secs_f64() < 60.0;
    let detail = format!(
        "errors {:.3e}, {:.3e}, {:.3e}; orders {:.3}, {:.3} (need >= 2)",
        errs[0], errs[1], errs[2], orders[0], orders[1]
    );
    assert!(verdict(3, "controlled-evolution convergence in eta", pass, &detail, started));
}

#[test]
fn c04_uxy_synthesis() {
    let started = Instant::now();
    let target = Gate::new(GateKind::Uxy, &[0, 1]).unwrap().local_matrix();
    let mut effective = Vec::new();
    for c in [1u32, 2, 10, 50] {
        let p = synth_uxy(0, 1, c, 2).unwrap();
        let u = p.effective_unitary(Branch::Down).unwrap();
        effective.push((c, fidelity_unitary(&u, &target).unwrap()));
    }
    let eff_ok = effective.iter().all(|(_, f)| (f - 1.0).abs() <= 1e-10);

    let p = synth_uxy(0, 1, 50, 2).unwrap();
    let sp = p.spin_params().unwrap();
    let full = Spectrum::of(&build_central_hamiltonian(&sp)).unwrap().evolve(p.t);
    let down = full.block(4, 4, 4).unwrap();
    let f_full = fidelity_unitary(&down, &target).unwrap();
    let bound = 1.0 - evolution_error(&sp, p.t).unwrap();
    let pass = eff_ok && f_full > bound && started.elapsed().as_secs_f64() < 60.0;
    let eff: Vec<String> = effective.iter().map(|(c, f)| format!("c={c}: {f:.12}")).collect();
    let detail = format!("effective {}; full c=50 {f_full:.6} vs bound {bound:.6}", eff.join(", "));
    assert!(verdict(4, "U_XY synthesis", pass, &detail, started));
}

/// Random circuits of width ≤ 3 with at most 10 primitive gates after
/// decomposition.
fn random_circuits(count: usize, seed: u64) -> Vec<Circuit> {
    let mut r = rng(seed);
    (0..count)
        .map(|_| {
            let n = r.random_range(1..=3);
            let mut c = Circuit::empty(n);
            let mut budget = r.random_range(0..=10usize);
            let mut attempts = 0;
            while budget > 0 && attempts < 50 {
                attempts += 1;
                let q = r.random_range(0..n);
                let other = if n > 1 { (q + r.random_range(1..n)) % n } else { q };
                let kind = match r.random_range(0..11) {
                    0 => GateKind::Rz(r.random_range(-3.1..3.1)),
                    1 => GateKind::Rx(r.random_range(-3.1..3.1)),
                    2 => GateKind::H,
                    3 => GateKind::T,
                    4 => GateKind::S,
                    5 => GateKind::X,
                    6 => GateKind::Z,
                    7 => GateKind::Uxy,
                    8 => GateKind::Iswap,
                    9 => GateKind::Cnot,
                    _ => GateKind::Swap,
                };
                if kind.arity() == 2 && n < 2 {
                    continue;
                }
                let g = if kind.arity() == 2 {
                    Gate::new(kind, &[q, other]).unwrap()
                } else {
                    Gate::new(kind, &[q]).unwrap()
                };
                let cost = decompose(&g).len();
                if cost <= budget {
                    budget -= cost;
                    c.push(g).unwrap();
                }
            }
            c
        })
        .collect()
}

fn random_fractions(r: &mut ChaCha8Rng) -> Embedding {
    let f = r.random_range(0.0..0.5);
    let g = r.random_range(0.0..(0.9 - f));
    Embedding::Fractions { honeypot: f, pad: g }
}

fn random_state(n: usize, r: &mut ChaCha8Rng) -> StateVector {
    let amps = (0..1usize << n)
        .map(|_| C::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)))
        .collect();
    StateVector::normalized(nalgebra::DVector::from_vec(amps)).unwrap()
}

#[test]
fn c05_embedding_invariance() {
    let started = Instant::now();
    let mut r = rng(505);
    let cfg = SynthConfig::default();
    let mut worst = 0.0f64;
    for c in random_circuits(100, 55) {
        let bare = expected_unitary(&compile(&c, Embedding::none(), &cfg, &mut r).unwrap()).unwrap();
        let e = random_fractions(&mut r);
        let embedded = expected_unitary(&compile(&c, e, &cfg, &mut r).unwrap()).unwrap();
        worst = worst.max((fidelity_unitary(&embedded, &bare).unwrap() - 1.0).abs());
        worst = worst.max((fidelity_unitary(&bare, &c.unitary()).unwrap() - 1.0).abs());
    }
    let pass = worst <= 1e-9 && started.elapsed().as_secs_f64() < 60.0;
    assert!(verdict(5, "honeypots and pads leave the net unitary unchanged", pass, &format!("max |1 - F| {worst:.2e} over 100 circuits"), started));
}

#[test]
fn c06_honest_execution() {
    let started = Instant::now();
    let circuits = random_circuits(100, 55);
    let mut r = rng(606);
    let effective = Engine::new(Mode::Effective);
    let full = Engine::new(Mode::Full);
    let mut worst_eff = 0.0f64;
    let mut min_full = 1.0f64;
    let mut full_aborts = 0;
    for (i, c) in circuits.iter().enumerate() {
        let bath = random_state(c.width(), &mut r);
        let e = random_fractions(&mut r);
        let s = compile(c, e, &SynthConfig::default(), &mut r).unwrap();
        let out = effective.run_trial(&s, &bath, ServerBehavior::Honest, 6, i as u64).unwrap();
        let f = output_fidelity(&out, &expected_unitary(&s).unwrap(), &bath).unwrap();
        worst_eff = worst_eff.max(f.map_or(1.0, |f| (f - 1.0).abs()));

        let s = compile(c, e, &SynthConfig::for_eta(0.05), &mut r).unwrap();
        let out = full.run_trial(&s, &bath, ServerBehavior::Honest, 6, i as u64).unwrap();
        match output_fidelity(&out, &c.unitary(), &bath).unwrap() {
            Some(f) => min_full = min_full.min(f),
            None => full_aborts += 1,
        }
    }
    let pass = worst_eff <= 1e-9 && min_full >= 0.99 && full_aborts == 0 && started.elapsed().as_secs_f64() < 300.0;
    let detail = format!(
        "effective max |1 - F| {worst_eff:.2e}; full (eta 0.05) min F {min_full:.5}, honest aborts {full_aborts}"
    );
    assert!(verdict(6, "end-to-end honest execution", pass, &detail, started));
}

#[test]
fn c07_measure_z_detection() {
    let started = Instant::now();
    let bell = Circuit::parse("h 0\ncnot 0 1").unwrap();
    let e = Embedding::Counts { honeypots: 8, pads: 0 };
    let s = compile(&bell, e, &SynthConfig::default(), &mut rng(7)).unwrap();
    let trials = 10_000u64;
    let engine = Engine::new(Mode::Effective);
    let rate = engine.detection_probability(ServerBehavior::MeasureZ, &s, trials, 77).unwrap();
    let p = 0.5f64.powi(8);
    let sigma = (p * (1.0 - p) / trials as f64).sqrt();
    let z = (rate - p) / sigma;
    let pass = z.abs() <= 3.0 && started.elapsed().as_secs_f64() < 300.0;
    let detail = format!("completion {rate:.5} vs {p:.5} ({z:+.2} sigma, {trials} trials)");
    assert!(verdict(7, "measure-z attack detection", pass, &detail, started));
}

#[test]
fn c08_blindness_marginal() {
    let started = Instant::now();
    let uniform: Vec<_> = spinblind::compiler::KeySymbol::ALL.iter().map(|&a| (a, 1.0)).collect();
    let mixed = DensityMatrix::maximally_mixed(1);
    let exact = exact_server_view(&uniform).unwrap().max_abs_diff(&mixed);
    let sampled = server_view_density(&uniform, 10_000, &mut rng(8)).unwrap().trace_distance(&mixed).unwrap();
    let pass = exact <= 1e-12 && sampled <= 0.05;
    let detail = format!("exact max entry deviation {exact:.1e}; sampled trace distance {sampled:.4}");
    assert!(verdict(8, "server view of the central spin", pass, &detail, started));
}

#[test]
fn c09_verification_procedures() {
    let started = Instant::now();
    let engine = Engine::new(Mode::Effective);
    let e = Embedding::Fractions { honeypot: 0.25, pad: 0.15 };
    let honest = Harness::new(&engine, e, ServerBehavior::Honest);
    let lazy = Harness::new(&engine, e, ServerBehavior::SkipEvolution);

    let mut r = rng(909);
    let (mut honest_pass, mut lazy_fail, mut trials) = (0, 0, 0);
    while trials < 100 {
        let swaps: Vec<(usize, usize)> = (0..5)
            .map(|_| {
                let a = r.random_range(0..4);
                (a, (a + r.random_range(1..4)) % 4)
            })
            .collect();
        let Some(init) = distinguishing_bits(4, &swaps, &mut r) else {
            continue;
        };
        trials += 1;
        honest_pass += usize::from(verify_permutation(4, &swaps, &init, &honest, &mut r).unwrap().pass);
        lazy_fail += usize::from(!verify_permutation(4, &swaps, &init, &lazy, &mut r).unwrap().pass);
    }

    let ghz = Circuit::parse("h 0\ncnot 0 1\ncnot 1 2").unwrap();
    let rep = verify_stabilizer(&ghz, 200, &honest, &mut r).unwrap();
    let ghz_ok = rep.agreement_rate() == 1.0 && rep.deterministic_checks == 400;

    let mut simon = Vec::new();
    for si in 1..4usize {
        let inst = SimonInstance::linear(&index_to_bits(si, 2)).unwrap();
        let hits = (0..100)
            .filter(|_| {
                simon_run(&inst, &honest, simon_query_cap(2), &mut r)
                    .map(|rep| rep.matches)
                    .unwrap_or(false)
            })
            .count();
        simon.push(hits);
    }
    let pass = honest_pass == 100
        && lazy_fail >= 95
        && ghz_ok
        && simon.iter().all(|&h| h >= 99)
        && started.elapsed().as_secs_f64() < 600.0;
    let detail = format!(
        "permutation honest {honest_pass}/100, skip-evolution caught {lazy_fail}/100; GHZ3 agreement {}/{}; simon s=01,10,11 recovered {:?}/100",
        rep.deterministic_agreements, rep.deterministic_checks, simon
    );
    assert!(verdict(9, "verification procedures", pass, &detail, started));
}

fn random_clifford(r: &mut ChaCha8Rng) -> Circuit {
    let n = r.random_range(1..=4);
    let mut c = Circuit::empty(n);
    for _ in 0..r.random_range(0..=20) {
        let q = r.random_range(0..n);
        let g = match r.random_range(0..6) {
            0 => Gate::new(GateKind::H, &[q]),
            1 => Gate::new(GateKind::S, &[q]),
            2 => Gate::new(GateKind::X, &[q]),
            3 => Gate::new(GateKind::Z, &[q]),
            k if n > 1 => {
                let p = (q + r.random_range(1..n)) % n;
                Gate::new(if k == 4 { GateKind::Cnot } else { GateKind::Swap }, &[q, p])
            }
            _ => Gate::new(GateKind::H, &[q]),
        };
        c.push(g.unwrap()).unwrap();
    }
    c
}

/// Probability that site `q` reads 1, and the state collapsed on `bit`.
fn marginal_and_collapse(psi: &StateVector, q: usize, bit: u8) -> (f64, StateVector) {
    let n = psi.num_sites();
    let set = |i: usize| (i >> (n - 1 - q)) & 1 == 1;
    let p1: f64 = psi.probabilities().iter().enumerate().filter(|(i, _)| set(*i)).map(|(_, p)| p).sum();
    let amps = psi
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(i, a)| if set(i) == (bit == 1) { *a } else { C::new(0.0, 0.0) })
        .collect();
    (p1, StateVector::normalized(nalgebra::DVector::from_vec(amps)).unwrap())
}

#[test]
fn c10_tableau_soundness() {
    let started = Instant::now();
    let mut r = rng(1010);
    let (mut det, mut det_ok, mut random, mut random_ok, mut freq_ok, mut freq) = (0, 0, 0, 0, 0, 0);
    for _ in 0..200 {
        let c = random_clifford(&mut r);
        let mut t = tableau_of(&c).unwrap();
        let mut psi = c.unitary().apply(&StateVector::basis(c.width(), 0)).unwrap();
        for q in 0..c.width() {
            if t.deterministic_outcome(q).unwrap().is_none() {
                let shots = 400;
                let ones: u32 = (0..shots).map(|_| u32::from(t.clone().measure(q, &mut r).unwrap())).sum();
                let sigma = (0.25 / f64::from(shots)).sqrt();
                freq += 1;
                freq_ok += usize::from((f64::from(ones) / f64::from(shots) - 0.5).abs() <= 5.0 * sigma);
            }
            let (bit, was_random) = {
                let mut pick = || u8::from(r.random_bool(0.5));
                t.measure_with(q, &mut pick).unwrap()
            };
            let (p1, collapsed) = marginal_and_collapse(&psi, q, bit);
            if was_random {
                random += 1;
                random_ok += usize::from((p1 - 0.5).abs() < 1e-9);
            } else {
                det += 1;
                det_ok += usize::from((p1 - f64::from(bit)).abs() < 1e-9);
            }
            psi = collapsed;
        }
    }
    let pass = det == det_ok && random == random_ok && freq == freq_ok && started.elapsed().as_secs_f64() < 120.0;
    let detail = format!(
        "deterministic {det_ok}/{det} exact; random {random_ok}/{random} at p=1/2; sampled frequencies within 5 sigma {freq_ok}/{freq}"
    );
    assert!(verdict(10, "stabilizer tableau vs statevector", pass, &detail, started));
}
