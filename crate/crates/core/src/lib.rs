//! Clustering of graphs whose vertices carry real-valued feature vectors.
//!
//! The model couples a stochastic block model on the edges with a spherical
//! Gaussian mixture on the vertex features, both driven by one latent class
//! per vertex. Parameters are fit by variational EM ([`inference`]), the
//! number of classes is chosen with the integrated classification likelihood
//! ([`selection`]), and [`simulator`] / [`metrics`] provide synthetic
//! affiliation graphs and the adjusted Rand index for evaluation.

pub mod error;
pub mod seed;
pub mod inference;
pub mod metrics;
pub mod model;
pub mod selection;
pub mod simulator;

pub use error::{Error, Result};
pub use inference::{
    e_step, fit, fit_ablation, fit_multi_restart, init_responsibilities, m_step, EmConfig,
    FitMode, FitResult, InitStrategy,
};
pub use metrics::{adjusted_rand_index, ContingencyTable};
pub use model::{
    complete_log_likelihood, exact_log_marginal, lower_bound_j, Assignment, FeatureMatrix, Graph,
    ModelParams, Partition, Responsibilities,
};
pub use selection::{icl_penalty, icl_score, select_q, IclScan, LikelihoodKind};
pub use simulator::{generate, grid_specs, AffiliationSpec, GridSpec, Setting, SimulatedData};
