//! Variational EM: fixed-point E-step, closed-form M-step, initialization and
//! the restart driver.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Zip};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{
    check_data, check_tau, clamp_probability, lower_bound_with, neighbor_mass, squared_distances,
    FeatureMatrix, Graph, ModelParams, Partition, Responsibilities, Terms, SIGMA2_FLOOR,
};
use crate::seed::derive_seed;

/// Classes whose total responsibility falls below this are treated as empty.
pub const EMPTY_CLASS_MASS: f64 = 1e-10;
const INIT_SMOOTHING: f64 = 0.1;
const KMEANS_ITERS: usize = 20;
const RESEED_WEIGHT: f64 = 0.9;
const MAX_RESEEDS: usize = 3;
const MAX_BACKTRACK: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InitStrategy {
    RandomDirichlet,
    FeatureKmeans,
    GraphDegreeQuantile,
}

impl InitStrategy {
    pub const ALL: [InitStrategy; 3] = [
        InitStrategy::FeatureKmeans,
        InitStrategy::GraphDegreeQuantile,
        InitStrategy::RandomDirichlet,
    ];

    fn rotated(self, k: usize) -> InitStrategy {
        let start = Self::ALL.iter().position(|&s| s == self).unwrap_or(0);
        Self::ALL[(start + k) % Self::ALL.len()]
    }
}

impl fmt::Display for InitStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitStrategy::RandomDirichlet => "random-dirichlet",
            InitStrategy::FeatureKmeans => "feature-kmeans",
            InitStrategy::GraphDegreeQuantile => "graph-degree-quantile",
        })
    }
}

impl FromStr for InitStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random-dirichlet" => Ok(InitStrategy::RandomDirichlet),
            "feature-kmeans" => Ok(InitStrategy::FeatureKmeans),
            "graph-degree-quantile" => Ok(InitStrategy::GraphDegreeQuantile),
            _ => Err(Error::Unknown {
                what: "init strategy",
                value: s.to_string(),
            }),
        }
    }
}

/// Which observations drive the fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum FitMode {
    #[default]
    Joint,
    /// Edges only: a plain stochastic block model.
    GraphOnly,
    /// Features only: a spherical Gaussian mixture.
    FeaturesOnly,
}

impl FitMode {
    pub(crate) fn terms(self) -> Terms {
        match self {
            FitMode::Joint => Terms::ALL,
            FitMode::GraphOnly => Terms {
                graph: true,
                features: false,
            },
            FitMode::FeaturesOnly => Terms {
                graph: false,
                features: true,
            },
        }
    }
}

impl fmt::Display for FitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FitMode::Joint => "joint",
            FitMode::GraphOnly => "graph-only",
            FitMode::FeaturesOnly => "features-only",
        })
    }
}

impl FromStr for FitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "joint" => Ok(FitMode::Joint),
            "graph-only" => Ok(FitMode::GraphOnly),
            "features-only" => Ok(FitMode::FeaturesOnly),
            _ => Err(Error::Unknown {
                what: "fit mode",
                value: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmConfig {
    pub max_em_iters: usize,
    pub max_fixedpoint_sweeps: usize,
    /// Stop the E-step once the sup-norm fixed-point residual is below this.
    pub tau_tol: f64,
    /// Stop EM once the relative change of the lower bound is below this.
    pub j_rel_tol: f64,
    /// Weight kept on the previous responsibilities in each sweep.
    pub damping: f64,
    pub n_restarts: usize,
    pub rng_seed: u64,
    pub init_strategy: InitStrategy,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            max_em_iters: 100,
            max_fixedpoint_sweeps: 50,
            tau_tol: 1e-4,
            j_rel_tol: 1e-6,
            damping: 0.5,
            n_restarts: 10,
            rng_seed: 0,
            init_strategy: InitStrategy::FeatureKmeans,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.max_em_iters == 0 || self.max_fixedpoint_sweeps == 0 || self.n_restarts == 0 {
            return bad("iteration caps and restart count must be at least 1");
        }
        if !(self.tau_tol > 0.0) || !(self.j_rel_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(0.0..1.0).contains(&self.damping) {
            return bad("damping must lie in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: ModelParams,
    pub tau: Responsibilities,
    pub partition: Partition,
    /// Lower bound after each M-step.
    pub j_trace: Vec<f64>,
    /// Lower bound at the returned `(params, tau)`.
    pub lower_bound: f64,
    pub converged: bool,
    /// Filled in by model selection.
    pub icl: Option<f64>,
    /// Number of empty-class rescues performed.
    pub reseeds: usize,
    /// Index of the restart that produced this result.
    pub restart: usize,
}

impl FitResult {
    pub fn q(&self) -> usize {
        self.params.q()
    }

    /// Whether consecutive trace entries never drop by more than `tol`.
    pub fn is_monotone(&self, tol: f64) -> bool {
        self.j_trace.windows(2).all(|w| w[1] >= w[0] - tol)
    }
}

/// Log-domain fixed-point map: each row is recomputed from the current
/// parameters and every other row, then normalized with log-sum-exp.
pub(crate) fn fixed_point_update(
    g: &Graph,
    f: &FeatureMatrix,
    params: &ModelParams,
    tau: &Array2<f64>,
    terms: Terms,
) -> Array2<f64> {
    let (n, q) = tau.dim();
    let log_alpha: Vec<f64> = params.alpha().iter().map(|a| a.ln()).collect();
    let mut scores = Array2::from_shape_fn((n, q), |(_, c)| log_alpha[c]);

    if terms.graph {
        let pi = params.pi();
        let log_absent = pi.mapv(|p| (1.0 - p).ln());
        let log_odds = pi.mapv(|p| p.ln() - (1.0 - p).ln());
        let adjacent = neighbor_mass(g, tau);
        let mass: Vec<f64> = tau.columns().into_iter().map(|c| c.sum()).collect();
        for i in 0..n {
            for c in 0..q {
                let mut s = 0.0;
                for l in 0..q {
                    s += adjacent[[i, l]] * log_odds[[c, l]]
                        + (mass[l] - tau[[i, l]]) * log_absent[[c, l]];
                }
                scores[[i, c]] += s;
            }
        }
    }

    if terms.features {
        let dist = squared_distances(f, params.mu());
        let scale = 2.0 * params.sigma2();
        Zip::from(&mut scores)
            .and(&dist)
            .for_each(|s, &d| *s -= d / scale);
    }

    for mut row in scores.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|s| (s - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|t| t / sum);
    }
    scores
}

/// Fixed-point E-step at fixed parameters.
///
/// Runs damped Jacobi sweeps until the sup-norm residual `|update(tau) - tau|`
/// is at most `cfg.tau_tol` or `cfg.max_fixedpoint_sweeps` is reached. A sweep
/// that would lower the bound, or drain a class below [`EMPTY_CLASS_MASS`],
/// has its step halved until it does not. The returned responsibilities never
/// have a lower bound below the input, and classes stay non-empty.
pub fn e_step(
    g: &Graph,
    f: &FeatureMatrix,
    params: &ModelParams,
    tau_init: &Responsibilities,
    cfg: &EmConfig,
) -> Result<Responsibilities> {
    e_step_with(g, f, params, tau_init, cfg, Terms::ALL)
}

pub(crate) fn e_step_with(
    g: &Graph,
    f: &FeatureMatrix,
    params: &ModelParams,
    tau_init: &Responsibilities,
    cfg: &EmConfig,
    terms: Terms,
) -> Result<Responsibilities> {
    check_data(g, f)?;
    check_tau(g, tau_init, params.q())?;
    let mut tau = tau_init.clone();
    let mut current = lower_bound_with(g, f, &tau, params, terms)?;
    let occupied: Vec<bool> = tau.class_mass().iter().map(|&m| m >= EMPTY_CLASS_MASS).collect();

    for _ in 0..cfg.max_fixedpoint_sweeps {
        let update = fixed_point_update(g, f, params, tau.values(), terms);
        let mut residual = 0.0f64;
        for (u, t) in update.iter().zip(tau.values()) {
            let d = (u - t).abs();
            if !d.is_finite() {
                return Err(Error::NonFinite("fixed-point update"));
            }
            residual = residual.max(d);
        }
        if residual <= cfg.tau_tol {
            break;
        }

        let mut step = 1.0 - cfg.damping;
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACK {
            let blended = tau.values() * (1.0 - step) + &update * step;
            let candidate = Responsibilities::from_unnormalized(blended);
            let drains = candidate
                .class_mass()
                .iter()
                .zip(&occupied)
                .any(|(&m, &o)| o && m < EMPTY_CLASS_MASS);
            if drains {
                step *= 0.5;
                continue;
            }
            let value = lower_bound_with(g, f, &candidate, params, terms)?;
            if value >= current {
                tau = candidate;
                current = value;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(tau)
}

/// Closed-form maximizer of the lower bound over the parameters at fixed
/// responsibilities.
pub fn m_step(g: &Graph, f: &FeatureMatrix, tau: &Responsibilities) -> Result<ModelParams> {
    check_data(g, f)?;
    let q = tau.q();
    check_tau(g, tau, q)?;
    let t = tau.values();
    let mass = tau.class_mass();
    if let Some((class, &m)) = mass
        .iter()
        .enumerate()
        .find(|(_, &m)| !(m >= EMPTY_CLASS_MASS))
    {
        return Err(Error::EmptyClass { class, mass: m });
    }
    let total: f64 = mass.iter().sum();
    let alpha: Vec<f64> = mass.iter().map(|m| m / total).collect();

    let adjacent = neighbor_mass(g, t);
    let mut ratio = Array2::zeros((q, q));
    for a in 0..q {
        for b in 0..q {
            let (mut edges, mut same_vertex) = (0.0, 0.0);
            for i in 0..g.n() {
                edges += t[[i, a]] * adjacent[[i, b]];
                same_vertex += t[[i, a]] * t[[i, b]];
            }
            let pairs = mass[a] * mass[b] - same_vertex;
            ratio[[a, b]] = if pairs > 0.0 {
                (edges / pairs).clamp(0.0, 1.0)
            } else {
                0.5
            };
        }
    }
    let pi = Array2::from_shape_fn((q, q), |(a, b)| {
        clamp_probability(0.5 * (ratio[[a, b]] + ratio[[b, a]]))
    });

    let p = f.p();
    let mut mu = t.t().dot(f.values());
    for (mut row, m) in mu.rows_mut().into_iter().zip(&mass) {
        row.mapv_inplace(|v| v / m);
    }
    let sigma2 = if p == 0 {
        1.0
    } else {
        let dist = squared_distances(f, &mu);
        let scatter: f64 = Zip::from(t).and(&dist).fold(0.0, |acc, &w, &d| acc + w * d);
        (scatter / (p as f64 * total)).max(SIGMA2_FLOOR)
    };
    ModelParams::new(alpha, pi, mu, sigma2)
}

/// Initial responsibilities. Smoothed one-hot strategies put `0.9` on the
/// chosen class plus `0.1 / q` on every class.
pub fn init_responsibilities<R: Rng + ?Sized>(
    g: &Graph,
    f: &FeatureMatrix,
    q: usize,
    strategy: InitStrategy,
    rng: &mut R,
) -> Result<Responsibilities> {
    check_data(g, f)?;
    if q == 0 {
        return Err(Error::InvalidConfig("class count must be at least 1".into()));
    }
    let n = g.n();
    if q == 1 {
        return Ok(Responsibilities::uniform(n, 1));
    }
    let strategy = if strategy == InitStrategy::FeatureKmeans && f.p() == 0 {
        InitStrategy::RandomDirichlet
    } else {
        strategy
    };
    let labels = match strategy {
        InitStrategy::RandomDirichlet => {
            let draws = Array2::from_shape_fn((n, q), |_| {
                let e: f64 = rng.sample(Exp1);
                e.max(f64::MIN_POSITIVE)
            });
            return Ok(Responsibilities::from_unnormalized(draws));
        }
        InitStrategy::FeatureKmeans => kmeans_labels(f, q, rng),
        InitStrategy::GraphDegreeQuantile => degree_quantile_labels(g, q),
    };
    Ok(smoothed_one_hot(&labels, q))
}

fn smoothed_one_hot(labels: &[usize], q: usize) -> Responsibilities {
    let base = INIT_SMOOTHING / q as f64;
    let mut values = Array2::from_elem((labels.len(), q), base);
    for (i, &c) in labels.iter().enumerate() {
        values[[i, c]] += 1.0 - INIT_SMOOTHING;
    }
    Responsibilities::from_unnormalized(values)
}

fn kmeans_labels<R: Rng + ?Sized>(f: &FeatureMatrix, q: usize, rng: &mut R) -> Vec<usize> {
    let n = f.n();
    if n == 0 {
        return Vec::new();
    }
    let seeds: Vec<usize> = if n >= q {
        index::sample(rng, n, q).into_vec()
    } else {
        (0..q).map(|_| rng.random_range(0..n)).collect()
    };
    let mut centroids = Array2::zeros((q, f.p()));
    for (c, &i) in seeds.iter().enumerate() {
        centroids.row_mut(c).assign(&f.row(i));
    }
    let mut labels = vec![0; n];
    for _ in 0..KMEANS_ITERS {
        let dist = squared_distances(f, &centroids);
        let mut changed = false;
        for (i, label) in labels.iter_mut().enumerate() {
            let best = (0..q)
                .min_by(|&a, &b| dist[[i, a]].total_cmp(&dist[[i, b]]))
                .unwrap_or(0);
            changed |= best != *label;
            *label = best;
        }
        let mut sums = Array2::<f64>::zeros((q, f.p()));
        let mut counts = vec![0usize; q];
        for (i, &c) in labels.iter().enumerate() {
            counts[c] += 1;
            let mut row = sums.row_mut(c);
            row += &f.row(i);
        }
        for c in 0..q {
            if counts[c] > 0 {
                let count = counts[c] as f64;
                centroids
                    .row_mut(c)
                    .assign(&sums.row(c).mapv(|v| v / count));
            }
        }
        if !changed {
            break;
        }
    }
    labels
}

fn degree_quantile_labels(g: &Graph, q: usize) -> Vec<usize> {
    let n = g.n();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (g.degree(i), i));
    let mut labels = vec![0; n];
    for (rank, &i) in order.iter().enumerate() {
        labels[i] = rank * q / n;
    }
    labels
}

/// Moves the vertex with the least confident assignment into `class`.
fn reseed_class(tau: &Responsibilities, class: usize) -> Responsibilities {
    let mut values = tau.values().clone();
    let vertex = (0..values.nrows())
        .map(|i| (i, values.row(i).fold(0.0f64, |m, &t| m.max(t))))
        .fold((0, f64::INFINITY), |best, (i, m)| if m < best.1 { (i, m) } else { best })
        .0;
    let mut row = values.row_mut(vertex);
    let others: f64 = row.sum() - row[class];
    for (c, t) in row.iter_mut().enumerate() {
        *t = if c == class {
            RESEED_WEIGHT
        } else if others > 0.0 {
            *t / others * (1.0 - RESEED_WEIGHT)
        } else {
            0.0
        };
    }
    Responsibilities::from_unnormalized(values)
}

fn m_step_with_rescue(
    g: &Graph,
    f: &FeatureMatrix,
    tau: &mut Responsibilities,
    reseeds: &mut usize,
) -> Result<ModelParams> {
    let mut attempts = 0;
    loop {
        match m_step(g, f, tau) {
            Err(Error::EmptyClass { class, mass }) => {
                if attempts == MAX_RESEEDS {
                    return Err(Error::EmptyClass { class, mass });
                }
                *tau = reseed_class(tau, class);
                attempts += 1;
                *reseeds += 1;
            }
            other => return other,
        }
    }
}

/// Strategy actually used for a mode: strategies that read an ignored block
/// of the data fall back to random Dirichlet draws.
fn effective_strategy(strategy: InitStrategy, mode: FitMode, p: usize) -> InitStrategy {
    match (strategy, mode) {
        (InitStrategy::FeatureKmeans, FitMode::GraphOnly) => InitStrategy::RandomDirichlet,
        (InitStrategy::FeatureKmeans, _) if p == 0 => InitStrategy::RandomDirichlet,
        (InitStrategy::GraphDegreeQuantile, FitMode::FeaturesOnly) => {
            InitStrategy::RandomDirichlet
        }
        (s, _) => s,
    }
}

/// One variational EM run of the joint model.
pub fn fit(g: &Graph, f: &FeatureMatrix, q: usize, cfg: &EmConfig) -> Result<FitResult> {
    fit_ablation(g, f, q, cfg, FitMode::Joint)
}

/// One variational EM run using only the blocks of the likelihood selected by
/// `mode`. All parameters are still estimated; the unused ones have no effect
/// on the responsibilities.
pub fn fit_ablation(
    g: &Graph,
    f: &FeatureMatrix,
    q: usize,
    cfg: &EmConfig,
    mode: FitMode,
) -> Result<FitResult> {
    cfg.validate()?;
    check_data(g, f)?;
    let terms = mode.terms();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let strategy = effective_strategy(cfg.init_strategy, mode, f.p());
    let mut tau = init_responsibilities(g, f, q, strategy, &mut rng)?;

    let mut reseeds = 0;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut best: Option<(ModelParams, Responsibilities, f64)> = None;
    for iter in 1..=cfg.max_em_iters {
        let params = m_step_with_rescue(g, f, &mut tau, &mut reseeds)?;
        let j = lower_bound_with(g, f, &tau, &params, terms)?;
        if best.as_ref().is_none_or(|b| j > b.2) {
            best = Some((params.clone(), tau.clone(), j));
        }
        if let Some(&prev) = trace.last() {
            trace.push(j);
            if (j - prev).abs() <= cfg.j_rel_tol * f64::abs(prev) {
                converged = true;
                break;
            }
        } else {
            trace.push(j);
        }
        if iter == cfg.max_em_iters {
            break;
        }
        tau = e_step_with(g, f, &params, &tau, cfg, terms)?;
    }

    let (params, tau, lower_bound) = best.ok_or(Error::InvalidConfig(
        "no EM iteration was run".into(),
    ))?;
    Ok(FitResult {
        partition: tau.partition(),
        params,
        tau,
        j_trace: trace,
        lower_bound,
        converged,
        icl: None,
        reseeds,
        restart: 0,
    })
}

/// Configuration used by restart `k`: restart 0 is `cfg` itself, later ones
/// derive a fresh seed and rotate through the initialization strategies.
pub fn restart_config(cfg: &EmConfig, k: usize) -> EmConfig {
    let mut c = cfg.clone();
    if k > 0 {
        c.rng_seed = derive_seed(cfg.rng_seed, k as u64);
        c.init_strategy = cfg.init_strategy.rotated(k);
    }
    c.n_restarts = 1;
    c
}

/// Runs `cfg.n_restarts` independent fits and keeps the one with the highest
/// lower bound (earliest restart on ties).
pub fn fit_multi_restart(
    g: &Graph,
    f: &FeatureMatrix,
    q: usize,
    cfg: &EmConfig,
) -> Result<FitResult> {
    fit_multi_restart_with(g, f, q, cfg, FitMode::Joint)
}

pub fn fit_multi_restart_with(
    g: &Graph,
    f: &FeatureMatrix,
    q: usize,
    cfg: &EmConfig,
    mode: FitMode,
) -> Result<FitResult> {
    cfg.validate()?;
    let runs: Vec<Result<FitResult>> = (0..cfg.n_restarts)
        .into_par_iter()
        .map(|k| {
            fit_ablation(g, f, q, &restart_config(cfg, k), mode).map(|mut r| {
                r.restart = k;
                r
            })
        })
        .collect();

    let mut best: Option<FitResult> = None;
    let mut last_error = None;
    for run in runs {
        match run {
            Ok(r) => {
                if best.as_ref().is_none_or(|b| r.lower_bound > b.lower_bound) {
                    best = Some(r);
                }
            }
            Err(e) => last_error = Some(e),
        }
    }
    best.ok_or_else(|| Error::AllFailed {
        attempts: cfg.n_restarts,
        last: last_error.map_or_else(String::new, |e| e.to_string()),
    })
}
