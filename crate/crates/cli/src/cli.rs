use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use cohsmix::inference::{fit_multi_restart_with, FitMode};
use cohsmix::selection::icl_score;
use cohsmix::seed::derive_seed;
use cohsmix::simulator::{grid_specs_with, DEFAULT_CENTER, DEFAULT_N};
use cohsmix::{generate, select_q, AffiliationSpec, Setting, SimulatedData};

use crate::error::{HarnessError, Result};
use crate::harness::{run_grid, write_grid, GridOptions};
use crate::io::{ensure_dir, load_data, write_features, write_graph, write_partition, write_result};
use crate::manifest::{EmOverrides, Mode, RunManifest};

/// Clustering of graphs with vertex features.
#[derive(Debug, Parser)]
#[command(name = "cohsmix", version)]
pub struct Cli {
    /// Base random seed.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// EM restarts per number of classes.
    #[arg(long, global = true)]
    pub restarts: Option<usize>,
    /// Maximum EM iterations per restart.
    #[arg(long, global = true)]
    pub max_iters: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "cohsmix-out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Edge list (`i<TAB>j`) or dense 0/1 adjacency `.csv`.
    #[arg(long)]
    pub graph: PathBuf,
    /// Feature CSV, one row per vertex; omit for a graph-only model.
    #[arg(long)]
    pub features: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a fixed number of classes.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        q: usize,
        /// joint, graph-only or features-only.
        #[arg(long, default_value = "joint")]
        mode: FitMode,
    },
    /// Choose the number of classes by ICL.
    SelectQ {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 2)]
        qmin: usize,
        #[arg(long)]
        qmax: usize,
    },
    /// Write synthetic affiliation graphs with features and true labels.
    Simulate(SimulateArgs),
    /// Run the simulation study for one setting.
    Grid {
        #[arg(long)]
        setting: Setting,
        #[arg(long, default_value_t = 20)]
        replicates: usize,
        /// Midpoint of the within and between connection probabilities.
        #[arg(long, default_value_t = DEFAULT_CENTER)]
        center: f64,
        /// Scan classes from 2 up to the true count plus this margin.
        #[arg(long, default_value_t = 2)]
        q_margin: usize,
    },
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Write every spec of this setting instead of a single graph.
    #[arg(long, conflicts_with_all = ["q", "lambda", "epsilon", "gap", "p"])]
    pub setting: Option<Setting>,
    #[arg(long, default_value_t = DEFAULT_N)]
    pub n: usize,
    #[arg(long)]
    pub q: Option<usize>,
    /// Within-class connection probability.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Between-class connection probability.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Per-coordinate distance between adjacent class means.
    #[arg(long)]
    pub gap: Option<f64>,
    #[arg(long)]
    pub p: Option<usize>,
    /// Feature noise standard deviation.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
}

impl Cli {
    pub fn manifest(&self) -> RunManifest {
        let (mode, data) = match &self.command {
            Command::Fit { data, .. } => (Mode::Fit, Some(data)),
            Command::SelectQ { data, .. } => (Mode::SelectQ, Some(data)),
            Command::Simulate(_) => (Mode::Simulate, None),
            Command::Grid { .. } => (Mode::Grid, None),
        };
        RunManifest {
            mode,
            graph: data.map(|d| d.graph.clone()),
            features: data.and_then(|d| d.features.clone()),
            overrides: EmOverrides {
                restarts: self.restarts,
                max_iters: self.max_iters,
            },
            out: self.out.clone(),
            seed: self.seed,
        }
    }
}

/// Runs a parsed command line; diagnostics go to stderr.
pub fn run(cli: &Cli) -> Result<()> {
    let manifest = cli.manifest();
    manifest.validate()?;
    manifest.write(&manifest.out)?;
    let cfg = manifest.em_config();
    match &cli.command {
        Command::Fit { data, q, mode } => {
            let (read, features) = load_data(&data.graph, data.features.as_deref())?;
            warn_self_loops(read.self_loops_dropped);
            let mut fit = fit_multi_restart_with(&read.graph, &features, *q, &cfg, *mode)?;
            fit.icl = Some(icl_score(&fit, &read.graph, &features)?);
            write_result(&fit, &manifest.out)?;
            eprintln!("fit Q={q} ({mode}): lower bound {}", fit.lower_bound);
        }
        Command::SelectQ { data, qmin, qmax } => {
            let (read, features) = load_data(&data.graph, data.features.as_deref())?;
            warn_self_loops(read.self_loops_dropped);
            let scan = select_q(&read.graph, &features, *qmin, *qmax, &cfg)?;
            let mut table = String::from("q,status,icl,lower_bound\n");
            for entry in &scan.entries {
                match &entry.outcome {
                    Ok(fit) => table.push_str(&format!(
                        "{},ok,{},{}\n",
                        entry.q,
                        fit.icl.unwrap_or(f64::NAN),
                        fit.lower_bound
                    )),
                    Err(message) => {
                        eprintln!("warning: Q={} failed: {message}", entry.q);
                        table.push_str(&format!("{},failed,,\n", entry.q));
                    }
                }
            }
            let path = manifest.out.join("icl.csv");
            fs::write(&path, table).map_err(|e| HarnessError::io(&path, e))?;
            write_result(scan.selected(), &manifest.out)?;
            eprintln!("selected Q={}", scan.selected_q);
        }
        Command::Simulate(args) => simulate(args, cli.seed, &manifest.out)?,
        Command::Grid {
            setting,
            replicates,
            center,
            q_margin,
        } => {
            let opts = GridOptions {
                replicates: *replicates,
                em: cfg,
                seed: cli.seed,
                q_margin: *q_margin,
                center: *center,
                ..GridOptions::default()
            };
            let records = run_grid(*setting, &opts)?;
            let failed = records.iter().filter(|r| !r.is_ok()).count();
            write_grid(&records, &manifest.out)?;
            if failed > 0 {
                eprintln!("warning: {failed} of {} replicates failed", records.len());
            }
        }
    }
    Ok(())
}

fn warn_self_loops(count: usize) {
    if count > 0 {
        eprintln!("warning: dropped {count} self-loops");
    }
}

fn write_simulated(data: &SimulatedData, dir: &Path) -> Result<()> {
    ensure_dir(dir)?;
    write_graph(&dir.join("graph.tsv"), &data.graph)?;
    write_features(&dir.join("features.csv"), &data.features)?;
    write_partition(&dir.join("truth.csv"), &data.truth)
}

fn simulate(args: &SimulateArgs, seed: u64, out: &Path) -> Result<()> {
    if let Some(setting) = args.setting {
        for (k, grid) in grid_specs_with(setting, DEFAULT_CENTER).into_iter().enumerate() {
            let spec = AffiliationSpec {
                n: args.n,
                sigma_sim: args.sigma,
                seed: derive_seed(seed, k as u64),
                ..grid.spec
            };
            write_simulated(&generate(&spec)?, &out.join(format!("{setting}-{k:02}")))?;
        }
        return Ok(());
    }
    let defaults = AffiliationSpec::default();
    let spec = AffiliationSpec {
        n: args.n,
        q: args.q.unwrap_or(defaults.q),
        p: args.p.unwrap_or(defaults.p),
        lambda: args.lambda.unwrap_or(defaults.lambda),
        epsilon: args.epsilon.unwrap_or(defaults.epsilon),
        mean_gap: args.gap.unwrap_or(defaults.mean_gap),
        sigma_sim: args.sigma,
        seed,
    };
    write_simulated(&generate(&spec)?, out)
}

