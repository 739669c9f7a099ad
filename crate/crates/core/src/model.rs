//! Observed data, model parameters and the likelihood / lower-bound evaluators.
//!
//! Edges are summed over unordered pairs `{i, j}` with `i < j`; the graph is
//! undirected and has no self-loops. The Gaussian term uses the full
//! `p`-dimensional log-density with per-coordinate variance `sigma2`.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

/// Lower clamp for connection probabilities; the upper clamp is `1 - PI_CLAMP`.
pub const PI_CLAMP: f64 = 1e-6;
/// Floor applied to the shared feature variance.
pub const SIGMA2_FLOOR: f64 = 1e-8;

const ROW_SUM_TOL: f64 = 1e-8;
const MAX_ENUMERATION: u64 = 1_000_000;

/// Undirected simple graph stored as sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    neighbors: Vec<Vec<usize>>,
    edge_count: usize,
}

impl Graph {
    /// Graph with `n` isolated vertices.
    pub fn empty(n: usize) -> Self {
        Graph {
            neighbors: vec![Vec::new(); n],
            edge_count: 0,
        }
    }

    /// Builds a graph from unordered vertex pairs. Duplicate pairs (in either
    /// orientation) collapse into one edge; self-loops are rejected.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut neighbors = vec![Vec::new(); n];
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({i}, {j}) out of range for {n} vertices"
                )));
            }
            if i == j {
                return Err(Error::InvalidGraph(format!("self-loop on vertex {i}")));
            }
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        let mut degree_sum = 0;
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
            degree_sum += list.len();
        }
        Ok(Graph {
            neighbors,
            edge_count: degree_sum / 2,
        })
    }

    /// Builds a graph from a dense 0/1 adjacency matrix, which must be
    /// square, symmetric and have a zero diagonal.
    pub fn from_dense(adjacency: &Array2<u8>) -> Result<Self> {
        let (rows, cols) = adjacency.dim();
        if rows != cols {
            return Err(Error::InvalidGraph(format!(
                "adjacency matrix is {rows}x{cols}, expected square"
            )));
        }
        let mut edges = Vec::new();
        for i in 0..rows {
            for j in 0..rows {
                let x = adjacency[[i, j]];
                if x > 1 {
                    return Err(Error::InvalidGraph(format!(
                        "entry ({i}, {j}) = {x} is not binary"
                    )));
                }
                if x != adjacency[[j, i]] {
                    return Err(Error::InvalidGraph(format!(
                        "adjacency is not symmetric at ({i}, {j})"
                    )));
                }
                if i == j && x != 0 {
                    return Err(Error::InvalidGraph(format!("self-loop on vertex {i}")));
                }
                if i < j && x == 1 {
                    edges.push((i, j));
                }
            }
        }
        Graph::from_edges(rows, edges)
    }

    pub fn to_dense(&self) -> Array2<u8> {
        let n = self.n();
        let mut dense = Array2::zeros((n, n));
        for (i, list) in self.neighbors.iter().enumerate() {
            for &j in list {
                dense[[i, j]] = 1;
            }
        }
        dense
    }

    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    /// Edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors.iter().enumerate().flat_map(|(i, list)| {
            list.iter()
                .copied()
                .filter(move |&j| j > i)
                .map(move |j| (i, j))
        })
    }

    /// Returns the graph with vertex `i` renamed to `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n() {
            return Err(Error::DimensionMismatch {
                what: "vertex permutation",
                expected: self.n(),
                got: perm.len(),
            });
        }
        Graph::from_edges(self.n(), self.edges().map(|(i, j)| (perm[i], perm[j])))
    }
}

/// `n x p` matrix of finite vertex features; row `i` belongs to vertex `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Array2<f64>,
}

impl FeatureMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if let Some(((i, k), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidFeatures(format!(
                "entry ({i}, {k}) = {v} is not finite"
            )));
        }
        Ok(FeatureMatrix { values })
    }

    /// Features with zero columns, for graph-only data.
    pub fn empty(n: usize) -> Self {
        FeatureMatrix {
            values: Array2::zeros((n, 0)),
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != p) {
            return Err(Error::InvalidFeatures(format!(
                "row {i} has {} columns, expected {p}",
                rows[i].len()
            )));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let values = Array2::from_shape_vec((rows.len(), p), flat)
            .map_err(|e| Error::InvalidFeatures(e.to_string()))?;
        FeatureMatrix::new(values)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.row(i)
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }
}

/// Parameters of the joint model: class proportions, symmetric connection
/// probabilities, class means and the shared per-coordinate variance.
///
/// Construction clamps `pi` into `[PI_CLAMP, 1 - PI_CLAMP]` and `sigma2` to at
/// least [`SIGMA2_FLOOR`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    alpha: Vec<f64>,
    pi: Array2<f64>,
    mu: Array2<f64>,
    sigma2: f64,
}

impl ModelParams {
    pub fn new(alpha: Vec<f64>, pi: Array2<f64>, mu: Array2<f64>, sigma2: f64) -> Result<Self> {
        let q = alpha.len();
        if q == 0 {
            return Err(Error::InvalidParams("at least one class is required".into()));
        }
        if alpha.iter().any(|&a| !(a >= 0.0 && a.is_finite())) {
            return Err(Error::InvalidParams(format!(
                "proportions must be finite and non-negative: {alpha:?}"
            )));
        }
        let total: f64 = alpha.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParams(format!(
                "proportions sum to {total}, expected 1"
            )));
        }
        if pi.dim() != (q, q) {
            return Err(Error::DimensionMismatch {
                what: "connection matrix rows",
                expected: q,
                got: pi.nrows(),
            });
        }
        if mu.nrows() != q {
            return Err(Error::DimensionMismatch {
                what: "class mean rows",
                expected: q,
                got: mu.nrows(),
            });
        }
        for a in 0..q {
            for b in 0..q {
                let v = pi[[a, b]];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidParams(format!(
                        "pi[{a},{b}] = {v} is not a probability"
                    )));
                }
                if (v - pi[[b, a]]).abs() > 1e-12 {
                    return Err(Error::InvalidParams(format!(
                        "pi is not symmetric at ({a}, {b})"
                    )));
                }
            }
        }
        if mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("class means must be finite".into()));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "variance must be positive, got {sigma2}"
            )));
        }
        Ok(ModelParams {
            alpha,
            pi: pi.mapv(clamp_probability),
            mu,
            sigma2: sigma2.max(SIGMA2_FLOOR),
        })
    }

    pub fn q(&self) -> usize {
        self.alpha.len()
    }

    pub fn p(&self) -> usize {
        self.mu.ncols()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn pi(&self) -> &Array2<f64> {
        &self.pi
    }

    pub fn mu(&self) -> &Array2<f64> {
        &self.mu
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Relabels classes so that new class `perm[q]` carries old class `q`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let q = self.q();
        check_permutation(perm, q)?;
        let mut alpha = vec![0.0; q];
        let mut pi = Array2::zeros((q, q));
        let mut mu = Array2::zeros(self.mu.dim());
        for a in 0..q {
            alpha[perm[a]] = self.alpha[a];
            mu.row_mut(perm[a]).assign(&self.mu.row(a));
            for b in 0..q {
                pi[[perm[a], perm[b]]] = self.pi[[a, b]];
            }
        }
        Ok(ModelParams {
            alpha,
            pi,
            mu,
            sigma2: self.sigma2,
        })
    }
}

pub(crate) fn clamp_probability(v: f64) -> f64 {
    v.clamp(PI_CLAMP, 1.0 - PI_CLAMP)
}

fn check_permutation(perm: &[usize], q: usize) -> Result<()> {
    let mut seen = vec![false; q];
    if perm.len() != q {
        return Err(Error::DimensionMismatch {
            what: "class permutation",
            expected: q,
            got: perm.len(),
        });
    }
    for &c in perm {
        if c >= q || seen[c] {
            return Err(Error::InvalidParams(format!("{perm:?} is not a permutation")));
        }
        seen[c] = true;
    }
    Ok(())
}

/// Row-stochastic `n x Q` matrix of variational class-membership probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    values: Array2<f64>,
}

impl Responsibilities {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.ncols() == 0 {
            return Err(Error::InvalidResponsibilities(
                "at least one class is required".into(),
            ));
        }
        for (i, row) in values.rows().into_iter().enumerate() {
            if row.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
                return Err(Error::InvalidResponsibilities(format!(
                    "row {i} has a negative or non-finite entry"
                )));
            }
            let sum = row.sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidResponsibilities(format!(
                    "row {i} sums to {sum}"
                )));
            }
        }
        Ok(Responsibilities { values })
    }

    /// Normalizes each row of a non-negative matrix. Rows are assumed to have
    /// positive mass.
    pub(crate) fn from_unnormalized(mut values: Array2<f64>) -> Self {
        for mut row in values.rows_mut() {
            let sum = row.sum();
            row.mapv_inplace(|t| t / sum);
        }
        Responsibilities { values }
    }

    pub fn uniform(n: usize, q: usize) -> Self {
        Responsibilities {
            values: Array2::from_elem((n, q), 1.0 / q as f64),
        }
    }

    /// One-hot rows for a hard partition with `q` classes.
    pub fn one_hot(partition: &Partition, q: usize) -> Result<Self> {
        let mut values = Array2::zeros((partition.len(), q));
        for (i, &c) in partition.labels().iter().enumerate() {
            if c >= q {
                return Err(Error::InvalidResponsibilities(format!(
                    "label {c} of vertex {i} out of range for {q} classes"
                )));
            }
            values[[i, c]] = 1.0;
        }
        Ok(Responsibilities { values })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn q(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn class_mass(&self) -> Vec<f64> {
        self.values
            .columns()
            .into_iter()
            .map(|c| c.sum())
            .collect()
    }

    /// Row-wise argmax; the lowest class index wins ties.
    pub fn partition(&self) -> Partition {
        let labels = self
            .values
            .rows()
            .into_iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (c, &t)| {
                        if t > best.1 {
                            (c, t)
                        } else {
                            best
                        }
                    })
                    .0
            })
            .collect();
        Partition { labels }
    }

    /// `-sum_iq tau_iq ln tau_iq`, with `0 ln 0 = 0`.
    pub fn entropy(&self) -> f64 {
        -self
            .values
            .iter()
            .filter(|&&t| t > 0.0)
            .map(|&t| t * t.ln())
            .sum::<f64>()
    }

    /// Relabels classes so that new column `perm[q]` holds old column `q`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.q())?;
        let mut values = Array2::zeros(self.values.dim());
        for (q, &target) in perm.iter().enumerate() {
            values.column_mut(target).assign(&self.values.column(q));
        }
        Ok(Responsibilities { values })
    }
}

/// Hard class assignment, zero-based labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    labels: Vec<usize>,
}

impl Partition {
    pub fn new(labels: Vec<usize>) -> Self {
        Partition { labels }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// One more than the largest label (0 for an empty partition).
    pub fn num_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |&m| m + 1)
    }

    pub fn class_sizes(&self, q: usize) -> Vec<usize> {
        let mut sizes = vec![0; q.max(self.num_classes())];
        for &c in &self.labels {
            sizes[c] += 1;
        }
        sizes
    }
}

/// Latent labels plugged into the complete log-likelihood.
#[derive(Debug, Clone, Copy)]
pub enum Assignment<'a> {
    Hard(&'a Partition),
    /// Expectation of the complete log-likelihood under the factorized
    /// distribution with these responsibilities.
    Soft(&'a Responsibilities),
}

/// Which blocks of the likelihood are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Terms {
    pub graph: bool,
    pub features: bool,
}

impl Terms {
    pub const ALL: Terms = Terms {
        graph: true,
        features: true,
    };
}

pub(crate) fn check_data(g: &Graph, f: &FeatureMatrix) -> Result<()> {
    if f.n() != g.n() {
        return Err(Error::DimensionMismatch {
            what: "feature rows",
            expected: g.n(),
            got: f.n(),
        });
    }
    Ok(())
}

fn check_params(g: &Graph, f: &FeatureMatrix, params: &ModelParams) -> Result<()> {
    check_data(g, f)?;
    if params.p() != f.p() {
        return Err(Error::DimensionMismatch {
            what: "feature dimension",
            expected: f.p(),
            got: params.p(),
        });
    }
    Ok(())
}

pub(crate) fn check_tau(g: &Graph, tau: &Responsibilities, q: usize) -> Result<()> {
    if tau.n() != g.n() {
        return Err(Error::DimensionMismatch {
            what: "responsibility rows",
            expected: g.n(),
            got: tau.n(),
        });
    }
    if tau.q() != q {
        return Err(Error::DimensionMismatch {
            what: "responsibility columns",
            expected: q,
            got: tau.q(),
        });
    }
    Ok(())
}

/// `-(p/2) ln(2 pi sigma2)`.
pub(crate) fn gaussian_log_normalizer(p: usize, sigma2: f64) -> f64 {
    -0.5 * p as f64 * (2.0 * PI * sigma2).ln()
}

/// `||Y_i - mu_q||^2` for every vertex and class.
pub(crate) fn squared_distances(f: &FeatureMatrix, mu: &Array2<f64>) -> Array2<f64> {
    let (n, q) = (f.n(), mu.nrows());
    let mut d = Array2::zeros((n, q));
    for i in 0..n {
        let y = f.row(i);
        for c in 0..q {
            d[[i, c]] = y
                .iter()
                .zip(mu.row(c))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
        }
    }
    d
}

/// `A = X tau`, i.e. `A_il = sum_{j ~ i} tau_jl`.
pub(crate) fn neighbor_mass(g: &Graph, tau: &Array2<f64>) -> Array2<f64> {
    let (n, q) = tau.dim();
    let tau = tau.as_standard_layout();
    let t = tau.as_slice().expect("standard layout");
    let mut a = vec![0.0; n * q];
    for (i, row) in a.chunks_exact_mut(q.max(1)).enumerate().take(n) {
        for &j in g.neighbors(i) {
            for (acc, v) in row.iter_mut().zip(&t[j * q..(j + 1) * q]) {
                *acc += v;
            }
        }
    }
    Array2::from_shape_vec((n, q), a).expect("shape matches")
}

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn finite(value: f64, what: &'static str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(what))
    }
}

/// `log P(X, Y, Z; params)` for a hard partition, or its expectation under
/// the factorized distribution for soft responsibilities.
pub fn complete_log_likelihood(
    g: &Graph,
    f: &FeatureMatrix,
    z: Assignment<'_>,
    params: &ModelParams,
) -> Result<f64> {
    check_params(g, f, params)?;
    let value = match z {
        Assignment::Hard(partition) => {
            if partition.len() != g.n() {
                return Err(Error::DimensionMismatch {
                    what: "partition length",
                    expected: g.n(),
                    got: partition.len(),
                });
            }
            if partition.num_classes() > params.q() {
                return Err(Error::InvalidParams(format!(
                    "partition uses {} classes but parameters have {}",
                    partition.num_classes(),
                    params.q()
                )));
            }
            hard_log_likelihood(g, f, partition.labels(), params)
        }
        Assignment::Soft(tau) => {
            check_tau(g, tau, params.q())?;
            expected_log_likelihood(g, f, tau.values(), params, Terms::ALL)
        }
    };
    finite(value, "complete log-likelihood")
}

/// Variational lower bound: expected complete log-likelihood plus the
/// entropy of the factorized distribution.
pub fn lower_bound_j(
    g: &Graph,
    f: &FeatureMatrix,
    tau: &Responsibilities,
    params: &ModelParams,
) -> Result<f64> {
    lower_bound_with(g, f, tau, params, Terms::ALL)
}

pub(crate) fn lower_bound_with(
    g: &Graph,
    f: &FeatureMatrix,
    tau: &Responsibilities,
    params: &ModelParams,
    terms: Terms,
) -> Result<f64> {
    check_params(g, f, params)?;
    check_tau(g, tau, params.q())?;
    let value = expected_log_likelihood(g, f, tau.values(), params, terms) + tau.entropy();
    finite(value, "lower bound")
}

/// `log sum_Z P(X, Y, Z; params)` by exhaustive enumeration of all `Q^n`
/// assignments.
pub fn exact_log_marginal(g: &Graph, f: &FeatureMatrix, params: &ModelParams) -> Result<f64> {
    check_params(g, f, params)?;
    let (n, q) = (g.n(), params.q());
    let too_large = Error::TooLarge {
        classes: q,
        vertices: n,
        limit: MAX_ENUMERATION,
    };
    let count = u32::try_from(n)
        .ok()
        .and_then(|e| (q as u64).checked_pow(e))
        .ok_or_else(|| too_large.clone())?;
    if count > MAX_ENUMERATION {
        return Err(too_large);
    }
    let mut labels = vec![0usize; n];
    let mut terms = Vec::with_capacity(count as usize);
    loop {
        terms.push(hard_log_likelihood(g, f, &labels, params));
        // odometer increment
        let mut pos = 0;
        while pos < n {
            labels[pos] += 1;
            if labels[pos] < q {
                break;
            }
            labels[pos] = 0;
            pos += 1;
        }
        if pos == n {
            break;
        }
    }
    finite(log_sum_exp(&terms), "log marginal")
}

fn hard_log_likelihood(g: &Graph, f: &FeatureMatrix, labels: &[usize], params: &ModelParams) -> f64 {
    let q = params.q();
    let mut sizes = vec![0usize; q];
    for &c in labels {
        sizes[c] += 1;
    }
    let proportions: f64 = labels.iter().map(|&c| params.alpha[c].ln()).sum();

    // edge and non-edge counts per unordered class pair
    let mut edges = Array2::<usize>::zeros((q, q));
    for (i, j) in g.edges() {
        let (a, b) = ordered(labels[i], labels[j]);
        edges[[a, b]] += 1;
    }
    let mut graph = 0.0;
    for a in 0..q {
        for b in a..q {
            let pairs = if a == b {
                sizes[a] * sizes[a].saturating_sub(1) / 2
            } else {
                sizes[a] * sizes[b]
            };
            let e = edges[[a, b]];
            let pi = params.pi[[a, b]];
            graph += e as f64 * pi.ln() + (pairs - e) as f64 * (1.0 - pi).ln();
        }
    }

    let normalizer = gaussian_log_normalizer(f.p(), params.sigma2);
    let features: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let d: f64 = f
                .row(i)
                .iter()
                .zip(params.mu.row(c))
                .map(|(y, m)| (y - m) * (y - m))
                .sum();
            normalizer - d / (2.0 * params.sigma2)
        })
        .sum();
    proportions + graph + features
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

pub(crate) fn expected_log_likelihood(
    g: &Graph,
    f: &FeatureMatrix,
    tau: &Array2<f64>,
    params: &ModelParams,
    terms: Terms,
) -> f64 {
    let (n, q) = tau.dim();
    let mut total = 0.0;
    for i in 0..n {
        for c in 0..q {
            let t = tau[[i, c]];
            if t > 0.0 {
                total += t * params.alpha[c].ln();
            }
        }
    }

    if terms.graph {
        let log_absent = params.pi.mapv(|p| (1.0 - p).ln());
        let log_odds = params.pi.mapv(|p| p.ln() - (1.0 - p).ln());
        let mass: Vec<f64> = tau.columns().into_iter().map(|c| c.sum()).collect();
        // sum over i != j of tau_ia tau_jb, halved for unordered pairs
        let mut absent = 0.0;
        for a in 0..q {
            for b in 0..q {
                let same_vertex: f64 = (0..n).map(|i| tau[[i, a]] * tau[[i, b]]).sum();
                absent += (mass[a] * mass[b] - same_vertex) * log_absent[[a, b]];
            }
        }
        total += 0.5 * absent;
        // each edge appears twice in sum_i tau_i . (log_odds A_i)
        let adjacent = neighbor_mass(g, tau);
        let mut present = 0.0;
        for i in 0..n {
            for a in 0..q {
                let ta = tau[[i, a]];
                if ta == 0.0 {
                    continue;
                }
                let s: f64 = (0..q).map(|b| adjacent[[i, b]] * log_odds[[a, b]]).sum();
                present += ta * s;
            }
        }
        total += 0.5 * present;
    }

    if terms.features {
        let normalizer = gaussian_log_normalizer(f.p(), params.sigma2);
        let dist = squared_distances(f, &params.mu);
        for i in 0..n {
            for c in 0..q {
                let t = tau[[i, c]];
                if t > 0.0 {
                    total += t * (normalizer - dist[[i, c]] / (2.0 * params.sigma2));
                }
            }
        }
    }
    total
}
