//! Choosing the number of classes with the integrated classification
//! likelihood (ICL).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::inference::{fit_multi_restart, EmConfig, FitResult};
use crate::model::{complete_log_likelihood, Assignment, FeatureMatrix, Graph};

/// Which complete log-likelihood enters the criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LikelihoodKind {
    /// Expectation under the fitted responsibilities.
    #[default]
    Soft,
    /// Evaluated at the hard row-argmax partition.
    Hard,
}

/// Penalty subtracted from the complete log-likelihood:
///
/// `Q(Q-1)/2 ln(n(n-1)/2) + (Q-1)/2 ln n + p(p-1) ln(n(n-1)/2) + pQ ln(n(n-1)/2)`.
pub fn icl_penalty(q: usize, n: usize, p: usize) -> f64 {
    let (q, p, nf) = (q as f64, p as f64, n as f64);
    let log_pairs = (nf * (nf - 1.0) / 2.0).max(1.0).ln();
    let log_n = nf.max(1.0).ln();
    let connectivity = 0.5 * q * (q - 1.0) * log_pairs;
    let proportions = 0.5 * (q - 1.0) * log_n;
    let features = p * (p - 1.0) * log_pairs + p * q * log_pairs;
    connectivity + proportions + features
}

/// ICL of a fitted model using the soft complete log-likelihood.
pub fn icl_score(fit: &FitResult, g: &Graph, f: &FeatureMatrix) -> Result<f64> {
    icl_score_with(fit, g, f, LikelihoodKind::Soft)
}

pub fn icl_score_with(
    fit: &FitResult,
    g: &Graph,
    f: &FeatureMatrix,
    kind: LikelihoodKind,
) -> Result<f64> {
    let z = match kind {
        LikelihoodKind::Soft => Assignment::Soft(&fit.tau),
        LikelihoodKind::Hard => Assignment::Hard(&fit.partition),
    };
    let likelihood = complete_log_likelihood(g, f, z, &fit.params)?;
    Ok(likelihood - icl_penalty(fit.q(), g.n(), f.p()))
}

#[derive(Debug, Clone)]
pub struct IclEntry {
    pub q: usize,
    /// The best fit for this `q` with its ICL filled in, or the failure message.
    pub outcome: std::result::Result<FitResult, String>,
}

impl IclEntry {
    pub fn icl(&self) -> Option<f64> {
        self.outcome.as_ref().ok().and_then(|r| r.icl)
    }
}

#[derive(Debug, Clone)]
pub struct IclScan {
    pub q_min: usize,
    pub q_max: usize,
    pub entries: Vec<IclEntry>,
    pub selected_q: usize,
}

impl IclScan {
    pub fn selected(&self) -> &FitResult {
        self.entries
            .iter()
            .find(|e| e.q == self.selected_q)
            .and_then(|e| e.outcome.as_ref().ok())
            .expect("selected entry always holds a fit")
    }
}

/// Fits every `q` in `q_min..=q_max` with restarts and returns the scan; the
/// selected `q` maximizes the ICL, smaller `q` winning ties.
pub fn select_q(
    g: &Graph,
    f: &FeatureMatrix,
    q_min: usize,
    q_max: usize,
    cfg: &EmConfig,
) -> Result<IclScan> {
    select_q_with(g, f, q_min, q_max, cfg, LikelihoodKind::Soft)
}

pub fn select_q_with(
    g: &Graph,
    f: &FeatureMatrix,
    q_min: usize,
    q_max: usize,
    cfg: &EmConfig,
    kind: LikelihoodKind,
) -> Result<IclScan> {
    if q_min == 0 || q_min > q_max {
        return Err(Error::InvalidConfig(format!(
            "class range {q_min}..={q_max} is empty or starts below 1"
        )));
    }
    let entries: Vec<IclEntry> = (q_min..=q_max)
        .into_par_iter()
        .map(|q| {
            let outcome = fit_multi_restart(g, f, q, cfg).and_then(|mut r| {
                r.icl = Some(icl_score_with(&r, g, f, kind)?);
                Ok(r)
            });
            IclEntry {
                q,
                outcome: outcome.map_err(|e| e.to_string()),
            }
        })
        .collect();

    let mut selected: Option<(usize, f64)> = None;
    for entry in &entries {
        if let Some(icl) = entry.icl() {
            if selected.is_none_or(|(_, best)| icl > best) {
                selected = Some((entry.q, icl));
            }
        }
    }
    let Some((selected_q, _)) = selected else {
        let last = entries
            .iter()
            .rev()
            .find_map(|e| e.outcome.as_ref().err().cloned())
            .unwrap_or_default();
        return Err(Error::AllFailed {
            attempts: entries.len(),
            last,
        });
    };
    Ok(IclScan {
        q_min,
        q_max,
        entries,
        selected_q,
    })
}
