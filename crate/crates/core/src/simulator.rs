//! Synthetic attributed graphs from the two-parameter affiliation model.
//!
//! Labels are uniform over the `q` classes, a pair is connected with
//! probability `lambda` inside a class and `epsilon` across classes, and the
//! features of a class-`c` vertex are `N(mu_c, sigma_sim^2 I)` with every
//! coordinate of `mu_c` equal to `c * mean_gap`.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{FeatureMatrix, Graph, Partition};

pub const DEFAULT_N: usize = 150;
/// Midpoint between `lambda` and `epsilon` used by the experiment grid.
pub const DEFAULT_CENTER: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct AffiliationSpec {
    pub n: usize,
    pub q: usize,
    /// Number of feature coordinates.
    pub p: usize,
    pub lambda: f64,
    pub epsilon: f64,
    pub mean_gap: f64,
    pub sigma_sim: f64,
    pub seed: u64,
}

impl Default for AffiliationSpec {
    fn default() -> Self {
        AffiliationSpec {
            n: DEFAULT_N,
            q: 3,
            p: 3,
            lambda: 0.5,
            epsilon: 0.1,
            mean_gap: 4.0,
            sigma_sim: 1.0,
            seed: 0,
        }
    }
}

impl AffiliationSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.q == 0 || self.n < self.q {
            return bad(format!("need 1 <= q <= n, got q={} n={}", self.q, self.n));
        }
        if !(0.0 <= self.epsilon && self.epsilon <= self.lambda && self.lambda <= 1.0) {
            return bad(format!(
                "need 0 <= epsilon <= lambda <= 1, got epsilon={} lambda={}",
                self.epsilon, self.lambda
            ));
        }
        if !(self.sigma_sim >= 0.0 && self.sigma_sim.is_finite() && self.mean_gap.is_finite()) {
            return bad("feature noise and mean gap must be finite, noise non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedData {
    pub graph: Graph,
    pub features: FeatureMatrix,
    pub truth: Partition,
}

/// Draws one attributed graph. Deterministic in `spec.seed`.
pub fn generate(spec: &AffiliationSpec) -> Result<SimulatedData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let labels: Vec<usize> = (0..spec.n).map(|_| rng.random_range(0..spec.q)).collect();

    let mut edges = Vec::new();
    for i in 0..spec.n {
        for j in (i + 1)..spec.n {
            let prob = if labels[i] == labels[j] {
                spec.lambda
            } else {
                spec.epsilon
            };
            if rng.random_bool(prob) {
                edges.push((i, j));
            }
        }
    }
    let graph = Graph::from_edges(spec.n, edges)?;

    let mut values = Array2::zeros((spec.n, spec.p));
    for (i, &c) in labels.iter().enumerate() {
        let center = c as f64 * spec.mean_gap;
        for k in 0..spec.p {
            let noise: f64 = rng.sample(StandardNormal);
            values[[i, k]] = center + spec.sigma_sim * noise;
        }
    }
    Ok(SimulatedData {
        graph,
        features: FeatureMatrix::new(values)?,
        truth: Partition::new(labels),
    })
}

/// The four experiment families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Setting {
    /// Vary the number of classes.
    A,
    /// Vary the number of features.
    B,
    /// Vary the connectivity gap `lambda - epsilon`.
    C,
    /// Vary the distance between class means, no graph structure.
    D,
}

impl Setting {
    pub const ALL: [Setting; 4] = [Setting::A, Setting::B, Setting::C, Setting::D];

    /// Name of the parameter varied along this setting.
    pub fn varied_parameter(self) -> &'static str {
        match self {
            Setting::A => "q",
            Setting::B => "p",
            Setting::C => "connectivity_gap",
            Setting::D => "mean_gap",
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Setting::A => "a",
            Setting::B => "b",
            Setting::C => "c",
            Setting::D => "d",
        })
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(Setting::A),
            "b" => Ok(Setting::B),
            "c" => Ok(Setting::C),
            "d" => Ok(Setting::D),
            _ => Err(Error::Unknown {
                what: "setting",
                value: s.to_string(),
            }),
        }
    }
}

/// One point of the experiment grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub setting: Setting,
    /// Position within the setting.
    pub index: usize,
    /// Value of the varied parameter.
    pub varied: f64,
    pub connectivity_gap: f64,
    pub spec: AffiliationSpec,
}

/// Grid rows for a setting with `lambda, epsilon = 0.3 +- gap / 2`.
pub fn grid_specs(setting: Setting) -> Vec<GridSpec> {
    grid_specs_with(setting, DEFAULT_CENTER)
}

/// Grid rows with `lambda = center + gap / 2` and `epsilon = center - gap / 2`.
pub fn grid_specs_with(setting: Setting, center: f64) -> Vec<GridSpec> {
    // (q, p, connectivity gap, mean gap, varied value)
    let rows: Vec<(usize, usize, f64, f64, f64)> = match setting {
        Setting::A => (2..=12).map(|q| (q, 3, 0.4, 4.0, q as f64)).collect(),
        Setting::B => (2..=15).map(|p| (5, p, 0.2, 4.0, p as f64)).collect(),
        Setting::C => (0..=10)
            .map(|k| {
                let gap = k as f64 / 20.0;
                (3, 3, gap, 4.0, gap)
            })
            .collect(),
        Setting::D => (0..7)
            .map(|k| {
                let gap = 4.0 + 0.75 * k as f64;
                (3, 3, 0.0, gap, gap)
            })
            .collect(),
    };
    rows.into_iter()
        .enumerate()
        .map(|(index, (q, p, conn, mean_gap, varied))| GridSpec {
            setting,
            index,
            varied,
            connectivity_gap: conn,
            spec: AffiliationSpec {
                q,
                p,
                lambda: center + conn / 2.0,
                epsilon: center - conn / 2.0,
                mean_gap,
                ..AffiliationSpec::default()
            },
        })
        .collect()
}
