//! The simulation study: generate every spec of a setting several times,
//! pick `Q` by ICL, and score the chosen partition against the truth.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use cohsmix::inference::EmConfig;
use cohsmix::seed::derive_seed_path;
use cohsmix::simulator::{grid_specs_with, GridSpec, DEFAULT_CENTER};
use cohsmix::{adjusted_rand_index, generate, select_q, AffiliationSpec, Setting};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{HarnessError, Result};
use crate::io::ensure_dir;

/// Slack below the monotonicity check on the bound trace.
pub const MONOTONE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct GridOptions {
    pub replicates: usize,
    pub em: EmConfig,
    pub seed: u64,
    /// Smallest `Q` in the ICL scan.
    pub q_min: usize,
    /// The scan runs up to the true `Q` plus this margin.
    pub q_margin: usize,
    pub center: f64,
    /// Only run these spec indices; `None` runs the whole setting.
    pub spec_indices: Option<Vec<usize>>,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            replicates: 20,
            em: EmConfig::default(),
            seed: 0,
            q_min: 2,
            q_margin: 2,
            center: DEFAULT_CENTER,
            spec_indices: None,
        }
    }
}

impl GridOptions {
    /// Three replicates with two restarts, for quick runs.
    pub fn ci() -> Self {
        GridOptions {
            replicates: 3,
            em: EmConfig {
                n_restarts: 2,
                ..EmConfig::default()
            },
            ..GridOptions::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(HarnessError::Usage("replicates must be at least 1".into()));
        }
        if self.q_min == 0 {
            return Err(HarnessError::Usage("q_min must be at least 1".into()));
        }
        self.em.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub setting: Setting,
    pub spec_index: usize,
    pub varied: f64,
    pub spec: AffiliationSpec,
    pub replicate: usize,
    pub status: Status,
    pub message: String,
    pub fitted_q: Option<usize>,
    pub final_j: Option<f64>,
    pub icl: Option<f64>,
    pub ari: Option<f64>,
    /// Whether every fit in the scan had a non-decreasing bound trace.
    pub monotone: Option<bool>,
    pub elapsed: Duration,
}

impl ExperimentRecord {
    pub fn is_ok(&self) -> bool {
        self.status == Status::Ok
    }
}

fn run_replicate(grid: &GridSpec, replicate: usize, opts: &GridOptions) -> ExperimentRecord {
    let start = Instant::now();
    let setting_id = grid.setting as u64;
    let data_seed = derive_seed_path(opts.seed, &[setting_id, grid.index as u64, replicate as u64]);
    let spec = AffiliationSpec {
        seed: data_seed,
        ..grid.spec.clone()
    };
    let em = EmConfig {
        rng_seed: derive_seed_path(data_seed, &[1]),
        ..opts.em.clone()
    };
    let q_max = (spec.q + opts.q_margin).max(opts.q_min);
    let outcome = generate(&spec).and_then(|data| {
        let scan = select_q(&data.graph, &data.features, opts.q_min, q_max, &em)?;
        let monotone = scan
            .entries
            .iter()
            .filter_map(|e| e.outcome.as_ref().ok())
            .all(|fit| fit.is_monotone(MONOTONE_TOL));
        let best = scan.selected();
        let ari = adjusted_rand_index(&best.partition, &data.truth)?;
        Ok((scan.selected_q, best.lower_bound, best.icl, ari, monotone))
    });
    let mut record = ExperimentRecord {
        setting: grid.setting,
        spec_index: grid.index,
        varied: grid.varied,
        spec,
        replicate,
        status: Status::Ok,
        message: String::new(),
        fitted_q: None,
        final_j: None,
        icl: None,
        ari: None,
        monotone: None,
        elapsed: Duration::ZERO,
    };
    match outcome {
        Ok((q, j, icl, ari, monotone)) => {
            record.fitted_q = Some(q);
            record.final_j = Some(j);
            record.icl = icl;
            record.ari = Some(ari);
            record.monotone = Some(monotone);
        }
        Err(e) => {
            record.status = Status::Failed;
            record.message = e.to_string();
        }
    }
    record.elapsed = start.elapsed();
    record
}

pub fn selected_specs(setting: Setting, opts: &GridOptions) -> Result<Vec<GridSpec>> {
    let specs = grid_specs_with(setting, opts.center);
    match &opts.spec_indices {
        None => Ok(specs),
        Some(indices) => indices
            .iter()
            .map(|&k| {
                specs.get(k).cloned().ok_or_else(|| {
                    HarnessError::Usage(format!(
                        "setting {setting} has {} specs, no index {k}",
                        specs.len()
                    ))
                })
            })
            .collect(),
    }
}

/// Runs every (spec, replicate) pair of a setting. Records come back sorted
/// by spec index then replicate, whatever the scheduling; failures are
/// recorded, not raised.
pub fn run_grid(setting: Setting, opts: &GridOptions) -> Result<Vec<ExperimentRecord>> {
    opts.validate()?;
    let specs = selected_specs(setting, opts)?;
    for grid in &specs {
        grid.spec.validate()?;
    }
    let jobs: Vec<(&GridSpec, usize)> = specs
        .iter()
        .flat_map(|g| (0..opts.replicates).map(move |r| (g, r)))
        .collect();
    Ok(jobs
        .into_par_iter()
        .map(|(grid, r)| run_replicate(grid, r, opts))
        .collect())
}

#[derive(Debug, Serialize)]
struct ResultRow<'a> {
    setting: String,
    spec_index: usize,
    varied_parameter: &'static str,
    varied: f64,
    q_true: usize,
    n: usize,
    p: usize,
    lambda: f64,
    epsilon: f64,
    mean_gap: f64,
    sigma_sim: f64,
    replicate: usize,
    data_seed: u64,
    status: &'a Status,
    fitted_q: Option<usize>,
    final_j: Option<f64>,
    icl: Option<f64>,
    ari: Option<f64>,
    monotone: Option<bool>,
    message: &'a str,
}

impl<'a> From<&'a ExperimentRecord> for ResultRow<'a> {
    fn from(r: &'a ExperimentRecord) -> Self {
        ResultRow {
            setting: r.setting.to_string(),
            spec_index: r.spec_index,
            varied_parameter: r.setting.varied_parameter(),
            varied: r.varied,
            q_true: r.spec.q,
            n: r.spec.n,
            p: r.spec.p,
            lambda: r.spec.lambda,
            epsilon: r.spec.epsilon,
            mean_gap: r.spec.mean_gap,
            sigma_sim: r.spec.sigma_sim,
            replicate: r.replicate,
            data_seed: r.spec.seed,
            status: &r.status,
            fitted_q: r.fitted_q,
            final_j: r.final_j,
            icl: r.icl,
            ari: r.ari,
            monotone: r.monotone,
            message: &r.message,
        }
    }
}

/// Per-spec summary of the replicates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub setting: String,
    pub spec_index: usize,
    pub varied_parameter: &'static str,
    pub varied: f64,
    pub replicates: usize,
    pub failed: usize,
    pub median_ari: Option<f64>,
    pub mean_ari: Option<f64>,
    /// Fraction of successful replicates where ICL picked the true `Q`.
    pub true_q_rate: Option<f64>,
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    Some(if sorted.len().is_multiple_of(2) {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    } else {
        sorted[mid]
    })
}

pub fn aggregate(records: &[ExperimentRecord]) -> Vec<AggregateRow> {
    let mut rows: Vec<AggregateRow> = Vec::new();
    for group in records.chunk_by(|a, b| a.setting == b.setting && a.spec_index == b.spec_index) {
        let first = &group[0];
        let aris: Vec<f64> = group.iter().filter_map(|r| r.ari).collect();
        let ok: Vec<&ExperimentRecord> = group.iter().filter(|r| r.is_ok()).collect();
        let hits = ok.iter().filter(|r| r.fitted_q == Some(r.spec.q)).count();
        rows.push(AggregateRow {
            setting: first.setting.to_string(),
            spec_index: first.spec_index,
            varied_parameter: first.setting.varied_parameter(),
            varied: first.varied,
            replicates: group.len(),
            failed: group.len() - ok.len(),
            median_ari: median(&aris),
            mean_ari: (!aris.is_empty()).then(|| aris.iter().sum::<f64>() / aris.len() as f64),
            true_q_rate: (!ok.is_empty()).then(|| hits as f64 / ok.len() as f64),
        });
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridPaths {
    pub results: PathBuf,
    pub aggregate: PathBuf,
    pub timings: PathBuf,
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let csv_err = |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut writer = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        writer.serialize(row).map_err(csv_err)?;
    }
    writer.flush().map_err(|e| HarnessError::io(path, e))
}

/// Writes `results.csv`, `aggregate.csv` and `timings.csv`. Wall times live
/// only in the last file so the other two are reproducible byte for byte.
pub fn write_grid(records: &[ExperimentRecord], dir: &Path) -> Result<GridPaths> {
    ensure_dir(dir)?;
    let paths = GridPaths {
        results: dir.join("results.csv"),
        aggregate: dir.join("aggregate.csv"),
        timings: dir.join("timings.csv"),
    };
    write_rows(&paths.results, records.iter().map(ResultRow::from))?;
    write_rows(&paths.aggregate, aggregate(records))?;

    let mut out = File::create(&paths.timings)
        .map(BufWriter::new)
        .map_err(|e| HarnessError::io(&paths.timings, e))?;
    let io = |e| HarnessError::io(&paths.timings, e);
    writeln!(out, "setting,spec_index,replicate,seconds").map_err(io)?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{:.6}",
            r.setting,
            r.spec_index,
            r.replicate,
            r.elapsed.as_secs_f64()
        )
        .map_err(io)?;
    }
    out.flush().map_err(io)?;
    Ok(paths)
}
