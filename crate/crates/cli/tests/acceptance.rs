//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Tolerances are fixed below.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use flexprot_cli::config::SweepSpec;
use flexprot_cli::output::{encode, Format};
use flexprot_cli::sweep::run_sweep;
use flexprot_core::availability::*;
use flexprot_core::fault::inject_single_failures;
use flexprot_core::metrics::{blocking_probability, capacity_used_for_protection, restorability};
use flexprot_core::rsa::ProtectionMode;
use flexprot_core::sim::{run, Scenario, Simulator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ORACLE_SYSTEMS: usize = 200;
const ORACLE_SAMPLES: u64 = 1_000_000;
const ORACLE_SIGMAS: f64 = 3.0;
const ORACLE_BUDGET: Duration = Duration::from_secs(60);
const IDENTITY_TRIPLES: usize = 10_000;
const IDENTITY_TOL: f64 = 1e-12;
const FULL_RUN_REQUESTS: u64 = 100_000;
const FAULT_PREFIXES: u64 = 100;
const FAULT_PREFIX_LEN: u64 = 500;
const FAULT_BUDGET: Duration = Duration::from_secs(600);
const TREND_SEEDS: u64 = 5;
const TREND_LOADS: [f64; 3] = [15.0, 20.0, 25.0];
const TREND_AVG_AVAIL: f64 = 0.99;
const TREND_A_TH: f64 = 0.999;
const RUN_BUDGET: Duration = Duration::from_secs(300);

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let started = Instant::now();
    let o = f();
    println!(
        "{} {name}: {} [{:.1}s]",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail,
        started.elapsed().as_secs_f64()
    );
    o.pass
}

/// A random series, parallel or series-parallel system with its closed form.
fn random_system(rng: &mut ChaCha8Rng) -> (System, f64) {
    let link = |rng: &mut ChaCha8Rng| rng.random_range(0.5..0.999);
    match rng.random_range(0..3) {
        0 => {
            let n = rng.random_range(1..=6);
            let links: Vec<f64> = (0..n).map(|_| link(rng)).collect();
            (System::series_of(&links), series_availability(&links))
        }
        1 => {
            let width = rng.random_range(2..=4);
            let branches: Vec<Vec<f64>> = (0..width)
                .map(|_| {
                    let len = rng.random_range(1..=3);
                    (0..len).map(|_| link(rng)).collect()
                })
                .collect();
            let closed = parallel_availability(&branches.iter().map(|b| series_availability(b)).collect::<Vec<_>>());
            (System::parallel_of(&branches), closed)
        }
        _ => {
            let protected: Vec<(f64, Vec<f64>)> = (0..rng.random_range(1..=3))
                .map(|_| {
                    let a = link(rng);
                    let len = rng.random_range(1..=3);
                    (a, (0..len).map(|_| link(rng)).collect())
                })
                .collect();
            let unprotected: Vec<f64> = (0..rng.random_range(0..=3)).map(|_| link(rng)).collect();
            let pairs: Vec<(f64, f64)> = protected.iter().map(|(a, b)| (*a, series_availability(b))).collect();
            (
                System::series_parallel_of(&protected, &unprotected),
                series_parallel_availability(&pairs, &unprotected),
            )
        }
    }
}

fn oracle() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let mut misses = Vec::new();
    for i in 0..ORACLE_SYSTEMS {
        let (sys, closed) = random_system(&mut rng);
        let est = monte_carlo_availability(&sys, ORACLE_SAMPLES, i as u64);
        // Standard error of the estimator under the analytical value.
        let se = (closed * (1.0 - closed) / ORACLE_SAMPLES as f64).sqrt();
        let z = if se > 0.0 { (est.estimate - closed).abs() / se } else { 0.0 };
        worst = worst.max(z);
        if z > ORACLE_SIGMAS {
            misses.push((i, z));
        }
    }
    let elapsed = started.elapsed();
    Outcome {
        pass: misses.is_empty() && elapsed < ORACLE_BUDGET,
        detail: format!(
            "{ORACLE_SYSTEMS} systems x {ORACLE_SAMPLES} samples, max |z| = {worst:.2} (limit {ORACLE_SIGMAS}), \
             outside: {misses:?}, {:.1}s (limit {}s)",
            elapsed.as_secs_f64(),
            ORACLE_BUDGET.as_secs()
        ),
    }
}

fn state_table() -> Outcome {
    // Rows of the three-link state table: (x1, x2, x3) -> path up.
    let table = [
        ([false, false, false], false),
        ([false, false, true], false),
        ([false, true, false], false),
        ([false, true, true], false),
        ([true, false, false], false),
        ([true, false, true], false),
        ([true, true, false], false),
        ([true, true, true], true),
    ];
    let sys = System::series_of(&[0.5, 0.5, 0.5]);
    let ok = table
        .iter()
        .filter(|(x, up)| structure_series(x) == *up && sys.structure(x) == *up)
        .count();
    Outcome { pass: ok == 8, detail: format!("{ok}/8 rows reproduced") }
}

fn update_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst_dcyc = 0.0f64;
    let mut worst_stacked = 0.0f64;
    for _ in 0..IDENTITY_TRIPLES {
        let a_l: f64 = rng.random_range(1e-3..=1.0);
        let a_pp = a_l * rng.random_range(0.0..=1.0);
        let a_bp: f64 = rng.random_range(0.0..=1.0);
        let (new_pp, a_pl) = ava_dcyc_update(a_pp, a_l, a_bp).unwrap();
        worst_dcyc = worst_dcyc.max((new_pp * a_l - a_pp * a_pl).abs());

        let start: f64 = rng.random_range(0.0..=1.0);
        let backups: Vec<f64> = (0..rng.random_range(1..=5)).map(|_| rng.random_range(0.0..=1.0)).collect();
        let folded = backups.iter().fold(start, |acc, &b| ava_dsbpss_update(acc, b));
        let mut all = vec![start];
        all.extend(&backups);
        let direct = 1.0 - all.iter().fold(1.0, |acc, a| acc * (1.0 - a));
        worst_stacked = worst_stacked.max((folded - direct).abs());
    }
    Outcome {
        pass: worst_stacked <= IDENTITY_TOL && worst_dcyc <= IDENTITY_TOL,
        detail: format!(
            "{IDENTITY_TRIPLES} triples: max |stacked - direct| = {worst_stacked:.2e}, \
             max |a_pp'*a_l - a_pp*a_pl| = {worst_dcyc:.2e} (limit {IDENTITY_TOL:.0e})"
        ),
    }
}

fn threshold_gating() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for (avg, a_th) in [(0.999999, 0.9), (0.9999, 0.99)] {
        for mode in [ProtectionMode::Dsbpss, ProtectionMode::Dcycles] {
            let sc = Scenario {
                mode,
                avg_link_availability: avg,
                a_th,
                load_erlang: 15.0,
                n_requests: FULL_RUN_REQUESTS,
                ..Scenario::default()
            };
            let r = run(&sc).expect("valid scenario");
            let cap = capacity_used_for_protection(&r);
            let rest = restorability(&r);
            pass &= cap == 0.0 && rest.is_none();
            lines.push(format!("{mode} avg={avg} a_th={a_th}: capacity={cap} restorability={rest:?}"));
        }
    }
    Outcome { pass, detail: lines.join("; ") }
}

fn fault_soundness() -> Outcome {
    let started = Instant::now();
    let mut conflicts = 0;
    let mut unrestorable = 0;
    let mut protected_paths = 0;
    let mut failures = 0;
    for mode in [ProtectionMode::Dsbpss, ProtectionMode::Dcycles] {
        for seed in 0..FAULT_PREFIXES {
            let sc = Scenario { mode, seed, n_requests: FAULT_PREFIX_LEN, a_th: 0.999, ..Scenario::default() };
            let mut sim = Simulator::new(&sc).expect("valid scenario");
            sim.run_until_arrivals(FAULT_PREFIX_LEN).unwrap();
            let st = sim.state();
            protected_paths += st.connections().filter(|c| c.protected).count();
            let report = inject_single_failures(st);
            failures += report.per_link.len();
            conflicts += report.total_conflicts;
            unrestorable += report.protected_unrestorable.len();
        }
    }
    let elapsed = started.elapsed();
    Outcome {
        pass: conflicts == 0 && unrestorable == 0 && elapsed < FAULT_BUDGET,
        detail: format!(
            "{} prefixes, {failures} single-link failures, {protected_paths} protected live paths: \
             conflicts={conflicts}, protected-but-unrestorable={unrestorable}, {:.1}s (limit {}s)",
            2 * FAULT_PREFIXES,
            elapsed.as_secs_f64(),
            FAULT_BUDGET.as_secs()
        ),
    }
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs the trend grid and returns (trend outcome, slowest single run).
fn trends() -> (Outcome, Duration) {
    let mut slowest = Duration::ZERO;
    let mut bp = |mode, load| -> Vec<f64> {
        (1..=TREND_SEEDS)
            .map(|seed| {
                let sc = Scenario {
                    mode,
                    seed,
                    load_erlang: load,
                    avg_link_availability: TREND_AVG_AVAIL,
                    a_th: TREND_A_TH,
                    n_requests: FULL_RUN_REQUESTS,
                    ..Scenario::default()
                };
                let t = Instant::now();
                let r = run(&sc).expect("valid scenario");
                slowest = slowest.max(t.elapsed());
                blocking_probability(&r).unwrap()
            })
            .collect()
    };
    let mut pass = true;
    let mut lines = Vec::new();
    let mut none_means = Vec::new();
    for &load in &TREND_LOADS {
        none_means.push(mean_sd(&bp(ProtectionMode::None, load)).0);
    }
    for mode in [ProtectionMode::Dsbpss, ProtectionMode::Dcycles] {
        let stats: Vec<(f64, f64)> = TREND_LOADS.iter().map(|&l| mean_sd(&bp(mode, l))).collect();
        for w in stats.windows(2) {
            let pooled = ((w[0].1.powi(2) + w[1].1.powi(2)) / 2.0).sqrt();
            pass &= w[1].0 >= w[0].0 - pooled;
        }
        for (i, (m, _)) in stats.iter().enumerate() {
            pass &= *m > none_means[i];
        }
        let shown: Vec<String> = stats.iter().map(|(m, s)| format!("{m:.4}±{s:.4}")).collect();
        lines.push(format!("{mode} BP {}", shown.join(" -> ")));
    }
    let shown: Vec<String> = none_means.iter().map(|m| format!("{m:.4}")).collect();
    lines.push(format!("none BP {}", shown.join(" -> ")));
    let detail = format!(
        "loads {TREND_LOADS:?} E/node, avg={TREND_AVG_AVAIL} a_th={TREND_A_TH}, {TREND_SEEDS} seeds: {}",
        lines.join("; ")
    );
    (Outcome { pass, detail }, slowest)
}

fn conservation_and_replay() -> Outcome {
    let mut idle = true;
    for mode in [ProtectionMode::None, ProtectionMode::Dsbpss, ProtectionMode::Dcycles] {
        let sc = Scenario { mode, n_requests: 20_000, a_th: 0.999, load_erlang: 25.0, ..Scenario::default() };
        let mut sim = Simulator::new(&sc).unwrap();
        sim.finish().unwrap();
        let st = sim.state();
        let all_free = st.graph.links().all(|l| l.bitmap.count_free() == 320) && st.graph.link_count() == 22;
        idle &= all_free && st.is_idle();
    }
    let mut spec = SweepSpec::default();
    spec.scenario.n_requests = 5_000;
    spec.grid.modes = vec![ProtectionMode::Dsbpss, ProtectionMode::Dcycles, ProtectionMode::None];
    spec.grid.load = vec![15.0, 25.0];
    spec.repetitions = 2;
    let a = encode(&run_sweep(&spec, false).unwrap().rows, Format::Csv).unwrap();
    let b = encode(&run_sweep(&spec, false).unwrap().rows, Format::Csv).unwrap();
    let identical = a == b && !a.is_empty();
    Outcome {
        pass: idle && identical,
        detail: format!("all 22x320 slots free and registries empty = {idle}; {}-byte CSV replay identical = {identical}", a.len()),
    }
}

fn main() -> ExitCode {
    let mut all = true;
    all &= check("availability-vs-oracle", oracle);
    all &= check("structure-function-table", state_table);
    all &= check("update-identities", update_identities);
    all &= check("threshold-gating", threshold_gating);
    all &= check("single-fault-soundness", fault_soundness);
    let (trend, slowest) = trends();
    all &= check("blocking-trends", || trend);
    all &= check("conservation-and-replay", conservation_and_replay);
    all &= check("full-run-performance", || Outcome {
        pass: slowest < RUN_BUDGET,
        detail: format!(
            "slowest {FULL_RUN_REQUESTS}-request run {:.1}s (limit {}s)",
            slowest.as_secs_f64(),
            RUN_BUDGET.as_secs()
        ),
    });
    println!("acceptance: {}", if all { "all criteria passed" } else { "FAILURES" });
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
