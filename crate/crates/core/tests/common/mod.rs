//! Random instances and brute-force oracles shared by the integration tests.
//!
//! Everything here is written directly from the model definition with plain
//! nested loops over vertex pairs and classes; nothing calls into the
//! library's likelihood code.
#![allow(dead_code)]

use std::f64::consts::PI;

use cohsmix::{FeatureMatrix, Graph, ModelParams, Partition, Responsibilities};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, density: f64) -> Graph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random_bool(density) {
                edges.push((i, j));
            }
        }
    }
    Graph::from_edges(n, edges).unwrap()
}

pub fn random_features(rng: &mut ChaCha8Rng, n: usize, p: usize) -> FeatureMatrix {
    FeatureMatrix::new(Array2::from_shape_fn((n, p), |_| rng.random_range(-2.0..2.0))).unwrap()
}

pub fn random_params(rng: &mut ChaCha8Rng, q: usize, p: usize) -> ModelParams {
    let raw: Vec<f64> = (0..q).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let alpha = raw.iter().map(|a| a / total).collect();
    let mut pi = Array2::zeros((q, q));
    for a in 0..q {
        for b in a..q {
            let v = rng.random_range(0.05..0.95);
            pi[[a, b]] = v;
            pi[[b, a]] = v;
        }
    }
    let mu = Array2::from_shape_fn((q, p), |_| rng.random_range(-1.5..1.5));
    let sigma2 = rng.random_range(0.3..2.0);
    ModelParams::new(alpha, pi, mu, sigma2).unwrap()
}

pub fn random_tau(rng: &mut ChaCha8Rng, n: usize, q: usize) -> Responsibilities {
    let mut values = Array2::from_shape_fn((n, q), |_| rng.random_range(0.01..1.0f64).powi(3));
    for mut row in values.rows_mut() {
        let s = row.sum();
        row.mapv_inplace(|t| t / s);
    }
    Responsibilities::new(values).unwrap()
}

pub fn random_labels(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..k)).collect()
}

/// Plain parameter bundle so the oracle can evaluate points that are not
/// valid `ModelParams` during a search.
#[derive(Debug, Clone)]
pub struct RawParams {
    pub alpha: Vec<f64>,
    pub pi: Vec<Vec<f64>>,
    pub mu: Vec<Vec<f64>>,
    pub sigma2: f64,
}

impl From<&ModelParams> for RawParams {
    fn from(p: &ModelParams) -> Self {
        RawParams {
            alpha: p.alpha().to_vec(),
            pi: p.pi().rows().into_iter().map(|r| r.to_vec()).collect(),
            mu: p.mu().rows().into_iter().map(|r| r.to_vec()).collect(),
            sigma2: p.sigma2(),
        }
    }
}

fn x(g: &Graph, i: usize, j: usize) -> f64 {
    if g.has_edge(i, j) {
        1.0
    } else {
        0.0
    }
}

fn log_gauss(y: &[f64], mu: &[f64], sigma2: f64) -> f64 {
    let mut acc = 0.0;
    for k in 0..y.len() {
        acc += -0.5 * (2.0 * PI * sigma2).ln() - (y[k] - mu[k]).powi(2) / (2.0 * sigma2);
    }
    acc
}

/// Expected complete log-likelihood, term by term, for an arbitrary weight
/// matrix (one-hot rows give the hard version).
pub fn expected_loglik_oracle(g: &Graph, f: &FeatureMatrix, tau: &[Vec<f64>], th: &RawParams) -> f64 {
    let n = g.n();
    let q = th.alpha.len();
    let dense = g.to_dense();
    let mut total = 0.0;
    for i in 0..n {
        for a in 0..q {
            if tau[i][a] > 0.0 {
                total += tau[i][a] * th.alpha[a].ln();
            }
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let xij = f64::from(dense[[i, j]]);
            for a in 0..q {
                for b in 0..q {
                    let w = tau[i][a] * tau[j][b];
                    if w > 0.0 {
                        let p = th.pi[a][b];
                        total += w * (xij * p.ln() + (1.0 - xij) * (1.0 - p).ln());
                    }
                }
            }
        }
    }
    for i in 0..n {
        let y: Vec<f64> = f.row(i).to_vec();
        for a in 0..q {
            if tau[i][a] > 0.0 {
                total += tau[i][a] * log_gauss(&y, &th.mu[a], th.sigma2);
            }
        }
    }
    total
}

pub fn rows(tau: &Responsibilities) -> Vec<Vec<f64>> {
    tau.values().rows().into_iter().map(|r| r.to_vec()).collect()
}

pub fn one_hot_rows(labels: &[usize], q: usize) -> Vec<Vec<f64>> {
    labels
        .iter()
        .map(|&c| (0..q).map(|a| if a == c { 1.0 } else { 0.0 }).collect())
        .collect()
}

pub fn entropy_oracle(tau: &[Vec<f64>]) -> f64 {
    let mut h = 0.0;
    for row in tau {
        for &t in row {
            if t > 0.0 {
                h -= t * t.ln();
            }
        }
    }
    h
}

pub fn bound_oracle(g: &Graph, f: &FeatureMatrix, tau: &[Vec<f64>], th: &RawParams) -> f64 {
    expected_loglik_oracle(g, f, tau, th) + entropy_oracle(tau)
}

/// `log sum_Z P(X, Y, Z)` by enumerating every labeling.
pub fn marginal_oracle(g: &Graph, f: &FeatureMatrix, th: &RawParams) -> f64 {
    let n = g.n();
    let q = th.alpha.len();
    let total = q.pow(n as u32);
    let mut values = Vec::with_capacity(total);
    for code in 0..total {
        let mut c = code;
        let labels: Vec<usize> = (0..n)
            .map(|_| {
                let l = c % q;
                c /= q;
                l
            })
            .collect();
        values.push(expected_loglik_oracle(g, f, &one_hot_rows(&labels, q), th));
    }
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// One undamped application of the fixed-point map, straight from its
/// definition with a double sum over all other vertices and classes.
pub fn fixed_point_oracle(g: &Graph, f: &FeatureMatrix, tau: &[Vec<f64>], th: &RawParams) -> Vec<Vec<f64>> {
    let n = g.n();
    let q = th.alpha.len();
    let mut out = vec![vec![0.0; q]; n];
    for i in 0..n {
        let mut logs = vec![0.0; q];
        for a in 0..q {
            let mut s = th.alpha[a].ln();
            for j in 0..n {
                if j == i {
                    continue;
                }
                let xij = x(g, i, j);
                for b in 0..q {
                    let p = th.pi[a][b];
                    s += tau[j][b] * (xij * p.ln() + (1.0 - xij) * (1.0 - p).ln());
                }
            }
            for k in 0..f.p() {
                s -= (f.row(i)[k] - th.mu[a][k]).powi(2) / (2.0 * th.sigma2);
            }
            logs[a] = s;
        }
        let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = logs.iter().map(|l| (l - m).exp()).sum();
        for a in 0..q {
            out[i][a] = (logs[a] - m).exp() / z;
        }
    }
    out
}

fn golden_max(mut lo: f64, mut hi: f64, mut h: impl FnMut(f64) -> f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (h(x1), h(x2));
    for _ in 0..200 {
        if hi - lo < 1e-11 {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = h(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = h(x1);
        }
    }
    0.5 * (lo + hi)
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Numerical maximizer of the bound over all parameters at fixed `tau`, by
/// cyclic golden-section coordinate ascent on (class logits, each `pi_ab`,
/// each mean coordinate, `ln sigma2`). Returns the best bound found.
pub fn numeric_max_bound(g: &Graph, f: &FeatureMatrix, tau: &[Vec<f64>], q: usize) -> (f64, RawParams) {
    let p = f.p();
    let (ymin, ymax) = f
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let mut logits = vec![0.0; q];
    let mut th = RawParams {
        alpha: softmax(&logits),
        pi: vec![vec![0.5; q]; q],
        mu: vec![vec![0.0; p]; q],
        sigma2: 1.0,
    };
    let eval = |th: &RawParams| bound_oracle(g, f, tau, th);
    let mut best = eval(&th);
    for _round in 0..100 {
        let before = best;
        for a in 0..q.saturating_sub(1) {
            let v = golden_max(-30.0, 30.0, |v| {
                let mut l = logits.clone();
                l[a] = v;
                let mut t = th.clone();
                t.alpha = softmax(&l);
                eval(&t)
            });
            logits[a] = v;
            th.alpha = softmax(&logits);
        }
        for a in 0..q {
            for b in a..q {
                let v = golden_max(1e-6, 1.0 - 1e-6, |v| {
                    let mut t = th.clone();
                    t.pi[a][b] = v;
                    t.pi[b][a] = v;
                    eval(&t)
                });
                th.pi[a][b] = v;
                th.pi[b][a] = v;
            }
        }
        for a in 0..q {
            for k in 0..p {
                let v = golden_max(ymin - 5.0, ymax + 5.0, |v| {
                    let mut t = th.clone();
                    t.mu[a][k] = v;
                    eval(&t)
                });
                th.mu[a][k] = v;
            }
        }
        if p > 0 {
            let v = golden_max(-12.0, 8.0, |v| {
                let mut t = th.clone();
                t.sigma2 = v.exp();
                eval(&t)
            });
            th.sigma2 = v.exp();
        }
        best = eval(&th);
        if (best - before).abs() < 1e-12 {
            break;
        }
    }
    (best, th)
}

/// Adjusted Rand index from explicit pair counting over all `n(n-1)/2` pairs.
pub fn ari_pair_counting(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let (mut both, mut only_a, mut only_b, mut neither) = (0f64, 0f64, 0f64, 0f64);
    for i in 0..n {
        for j in (i + 1)..n {
            match (a[i] == a[j], b[i] == b[j]) {
                (true, true) => both += 1.0,
                (true, false) => only_a += 1.0,
                (false, true) => only_b += 1.0,
                (false, false) => neither += 1.0,
            }
        }
    }
    let den = (neither + only_a) * (only_a + both) + (neither + only_b) * (only_b + both);
    if den == 0.0 {
        return f64::NAN;
    }
    2.0 * (neither * both - only_a * only_b) / den
}

pub fn partition(labels: &[usize]) -> Partition {
    Partition::new(labels.to_vec())
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}
