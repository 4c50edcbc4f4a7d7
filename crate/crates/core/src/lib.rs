//! Copula estimation for the dependence between regression errors.
//!
//! Each response is adjusted for covariates by a per-margin regression, the
//! residuals are turned into pseudo-observations, and a one-parameter copula
//! is fitted to them by rank-based pseudo-likelihood, a trimmed variant of it,
//! or Kendall's tau inversion.

pub mod cli;
pub mod copulas;
pub mod dataset;
pub mod diagnose;
pub mod error;
pub mod estimate;
pub mod marginals;
pub mod matrix;
pub mod montecarlo;
pub mod ranks;
pub mod special;

pub use copulas::{Copula, Family, ScoreClass};
pub use dataset::{load_csv, read_csv, ObservationSet};
pub use error::{Error, Result};
pub use estimate::{
    estimate_mple, estimate_mple_trimmed, estimate_tau_inversion, fit_pipeline,
    sandwich_covariance, EstimateReport, Estimator, TrimPolicy,
};
pub use marginals::{
    fit_marginal, ErrorLaw, MarginalFit, MarginalSpec, ScaleDesign, Transformation,
};
pub use matrix::RowMatrix;
pub use montecarlo::{
    render_table, run_scenario, Margins, McEstimator, MetricRow, Scenario, TableFormat,
};
pub use ranks::{kendall_tau, pseudo_observations, PseudoSample};
