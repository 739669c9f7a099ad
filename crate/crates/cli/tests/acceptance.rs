//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use cohsmix::inference::{fit_multi_restart_with, EmConfig, FitMode};
use cohsmix::metrics::ari_labels;
use cohsmix::{
    adjusted_rand_index, exact_log_marginal, generate, lower_bound_j, m_step, select_q,
    AffiliationSpec, FeatureMatrix, Setting,
};
use cohsmix_cli::harness::{median, run_grid, ExperimentRecord, GridOptions};
use common::*;
use rand::Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn within(limit_secs: u64, elapsed: Duration, passed: bool, detail: String) -> Outcome {
    let in_time = elapsed <= Duration::from_secs(limit_secs);
    outcome(
        passed && in_time,
        format!("{detail}; {:.1}s of {limit_secs}s allowed", elapsed.as_secs_f64()),
    )
}

fn bound_correctness() -> Outcome {
    let start = Instant::now();
    let mut r = rng(101);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..50 {
        let n = r.random_range(2..=8);
        let p = r.random_range(0..=2);
        let g = random_graph(&mut r, n, 0.4);
        let f = random_features(&mut r, n, p);
        let th = random_params(&mut r, 2, p);
        let marginal = exact_log_marginal(&g, &f, &th).unwrap();
        for _ in 0..20 {
            let tau = random_tau(&mut r, n, 2);
            let j = lower_bound_j(&g, &f, &tau, &th).unwrap();
            worst = worst.max(j - marginal);
        }
    }
    within(10, start.elapsed(), worst <= 1e-9, format!("max J - log marginal = {worst:.3e} over 1000 pairs"))
}

fn m_step_optimality() -> Outcome {
    let start = Instant::now();
    let mut r = rng(202);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let g = random_graph(&mut r, 10, 0.4);
        let f = random_features(&mut r, 10, 2);
        let tau = random_tau(&mut r, 10, 2);
        let closed = m_step(&g, &f, &tau).unwrap();
        let j_closed = lower_bound_j(&g, &f, &tau, &closed).unwrap();
        let (j_numeric, _) = numeric_max_bound(&g, &f, &rows(&tau), 2);
        worst = worst.max(j_numeric - j_closed).max((j_closed - j_numeric).abs());
    }
    within(30, start.elapsed(), worst <= 1e-6, format!("max |J closed - J numeric| = {worst:.3e}"))
}

fn monotonicity(records: &[ExperimentRecord]) -> Outcome {
    let ok: Vec<_> = records.iter().filter(|r| r.is_ok()).collect();
    let failed = records.len() - ok.len();
    let bad = ok.iter().filter(|r| r.monotone != Some(true)).count();
    outcome(
        failed == 0 && bad == 0 && !ok.is_empty(),
        format!("{} grid replicates, {bad} with a decreasing trace, {failed} failed", records.len()),
    )
}

fn recovery() -> Outcome {
    let start = Instant::now();
    let cfg = EmConfig::default();
    assert_eq!(cfg.n_restarts, 10);
    let mut aris = Vec::new();
    let mut hits = 0;
    for rep in 0..20u64 {
        let d = generate(&AffiliationSpec {
            n: 150,
            q: 3,
            p: 3,
            lambda: 0.5,
            epsilon: 0.1,
            mean_gap: 4.0,
            sigma_sim: 1.0,
            seed: 4000 + rep,
        })
        .unwrap();
        let scan = select_q(&d.graph, &d.features, 2, 6, &EmConfig { rng_seed: rep, ..cfg.clone() }).unwrap();
        let three = scan.entries.iter().find(|e| e.q == 3).unwrap();
        let fit = three.outcome.as_ref().unwrap();
        aris.push(adjusted_rand_index(&fit.partition, &d.truth).unwrap());
        hits += usize::from(scan.selected_q == 3);
    }
    let m = median(&aris).unwrap();
    within(
        300,
        start.elapsed(),
        m >= 0.9 && hits >= 12,
        format!("median ARI {m:.4} (need >= 0.9), Q=3 selected {hits}/20 (need >= 12)"),
    )
}

fn median_ari(records: &[ExperimentRecord], spec_index: usize) -> f64 {
    let aris: Vec<f64> = records.iter().filter(|r| r.spec_index == spec_index).filter_map(|r| r.ari).collect();
    median(&aris).unwrap_or(f64::NAN)
}

fn trends() -> (Outcome, Vec<ExperimentRecord>) {
    let start = Instant::now();
    let a = run_grid(
        Setting::A,
        &GridOptions {
            replicates: 5,
            spec_indices: Some(vec![0, 10]),
            ..GridOptions::ci()
        },
    )
    .unwrap();
    let d = run_grid(
        Setting::D,
        &GridOptions {
            replicates: 5,
            spec_indices: Some(vec![0, 6]),
            ..GridOptions::ci()
        },
    )
    .unwrap();
    let (a2, a12) = (median_ari(&a, 0), median_ari(&a, 10));
    let (d4, d85) = (median_ari(&d, 0), median_ari(&d, 6));
    assert_eq!((a[0].spec.q, a[a.len() - 1].spec.q), (2, 12));
    assert_eq!((d[0].varied, d[d.len() - 1].varied), (4.0, 8.5));
    let result = within(
        900,
        start.elapsed(),
        a2 >= a12 && d85 >= d4,
        format!("setting a median ARI Q=2 {a2:.4} vs Q=12 {a12:.4}; setting d gap 4 {d4:.4} vs gap 8.5 {d85:.4}"),
    );
    (result, a.into_iter().chain(d).collect())
}

/// Relabels classes in order of first appearance.
fn canonical(labels: &[usize]) -> Vec<usize> {
    let mut seen = std::collections::HashMap::new();
    labels
        .iter()
        .map(|&c| {
            let next = seen.len();
            *seen.entry(c).or_insert(next)
        })
        .collect()
}

fn ari_oracle() -> Outcome {
    let mut r = rng(606);
    let mut worst = 0.0f64;
    let mut identity = true;
    for _ in 0..100 {
        let n = r.random_range(2..=30);
        let (ka, kb) = (r.random_range(1..=6), r.random_range(1..=6));
        let a = random_labels(&mut r, n, ka);
        let b = random_labels(&mut r, n, kb);
        let oracle = ari_pair_counting(&a, &b);
        let value = ari_labels(&a, &b).unwrap();
        if oracle.is_nan() {
            // degenerate denominator: 1 for identical partitions, else 0
            let expected = if canonical(&a) == canonical(&b) { 1.0 } else { 0.0 };
            worst = worst.max((value - expected).abs());
        } else {
            worst = worst.max((value - oracle).abs());
        }
        identity &= ari_labels(&a, &a).unwrap() == 1.0;
    }
    outcome(
        worst <= 1e-12 && identity,
        format!("max deviation {worst:.3e} over 100 pairs, ARI(a,a) = 1 exactly: {identity}"),
    )
}

fn grid_c(out: &Path, threads: &str) -> Result<Vec<u8>, String> {
    let bin = env!("CARGO_BIN_EXE_cohsmix");
    let status = Command::new(bin)
        .args(["grid", "--setting", "c", "--seed", "7", "--replicates", "3", "--restarts", "2", "--out"])
        .arg(out)
        .env("COHSMIX_THREADS", threads)
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(String::from_utf8_lossy(&status.stderr).into_owned());
    }
    std::fs::read(out.join("results.csv")).map_err(|e| e.to_string())
}

fn determinism() -> (Outcome, Vec<u8>) {
    let dir = tempfile::tempdir().unwrap();
    let first = grid_c(&dir.path().join("run1"), "1");
    let second = grid_c(&dir.path().join("run2"), "4");
    match (first, second) {
        (Ok(a), Ok(b)) => {
            let rows = a.iter().filter(|&&c| c == b'\n').count();
            let same = a == b;
            (
                outcome(same && rows == 1 + 11 * 3, format!("{rows} lines, byte-identical: {same}")),
                a,
            )
        }
        (Err(e), _) | (_, Err(e)) => (outcome(false, format!("grid run failed: {e}")), Vec::new()),
    }
}

/// Counts replicates in a results.csv whose monotone column is not `true`.
fn non_monotone_rows(results: &[u8]) -> (usize, usize) {
    let mut reader = csv::Reader::from_reader(results);
    let column = reader.headers().unwrap().iter().position(|h| h == "monotone").unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    let bad = rows.iter().filter(|r| &r[column] != "true").count();
    (rows.len(), bad)
}

fn degenerate_inputs() -> Outcome {
    let cfg = EmConfig {
        n_restarts: 3,
        ..EmConfig::default()
    };
    let hits = (0..20u64)
        .filter(|&rep| {
            let d = generate(&AffiliationSpec {
                lambda: 0.3,
                epsilon: 0.3,
                mean_gap: 0.0,
                seed: 8000 + rep,
                ..AffiliationSpec::default()
            })
            .unwrap();
            let c = EmConfig { rng_seed: rep, ..cfg.clone() };
            select_q(&d.graph, &d.features, 2, 5, &c).unwrap().selected_q == 2
        })
        .count();

    let mut identical = true;
    for rep in 0..5u64 {
        let d = generate(&AffiliationSpec {
            seed: 8100 + rep,
            ..AffiliationSpec::default()
        })
        .unwrap();
        let empty = FeatureMatrix::empty(d.graph.n());
        let c = EmConfig { rng_seed: rep, ..cfg.clone() };
        let joint = fit_multi_restart_with(&d.graph, &empty, 3, &c, FitMode::Joint).unwrap();
        let graph = fit_multi_restart_with(&d.graph, &empty, 3, &c, FitMode::GraphOnly).unwrap();
        identical &= joint.j_trace == graph.j_trace && joint.tau == graph.tau && joint.params == graph.params;
    }
    outcome(
        hits >= 16 && identical,
        format!("pure noise picks q_min {hits}/20 (need >= 16); p=0 joint == graph-only: {identical}"),
    )
}

fn guarded<T>(name: &str, f: impl FnOnce() -> T) -> Option<T> {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(v) => Some(v),
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            eprintln!("{name} panicked: {msg}");
            None
        }
    }
}

fn panicked() -> Outcome {
    outcome(false, "panicked".into())
}

fn main() -> ExitCode {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    results.push((1, "bound correctness", guarded("1", bound_correctness).unwrap_or_else(panicked)));
    results.push((2, "m-step optimality", guarded("2", m_step_optimality).unwrap_or_else(panicked)));

    let (trend, grid_records) = guarded("5", trends).unwrap_or_else(|| (panicked(), Vec::new()));
    let (det, results_c) = guarded("7", determinism).unwrap_or_else(|| (panicked(), Vec::new()));

    let mut mono = monotonicity(&grid_records);
    if results_c.is_empty() {
        mono = outcome(false, format!("{}; setting c grid missing", mono.detail));
    } else {
        let (rows, bad) = non_monotone_rows(&results_c);
        mono.passed &= bad == 0;
        mono.detail = format!("{}; setting c: {rows} replicates, {bad} not monotone", mono.detail);
    }
    results.push((3, "EM monotonicity", mono));
    results.push((4, "recovery", guarded("4", recovery).unwrap_or_else(panicked)));
    results.push((5, "qualitative trends", trend));
    results.push((6, "ARI oracle", guarded("6", ari_oracle).unwrap_or_else(panicked)));
    results.push((7, "determinism", det));
    results.push((8, "degenerate inputs", guarded("8", degenerate_inputs).unwrap_or_else(panicked)));

    results.sort_by_key(|r| r.0);
    let mut all = true;
    for (k, name, o) in &results {
        all &= o.passed;
        println!("{} {k} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
