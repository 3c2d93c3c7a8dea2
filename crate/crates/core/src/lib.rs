//! Bootstrap-corrected inference for single coordinates of a sparse
//! high-dimensional linear model `y = Xβ + ε`.
//!
//! The pipeline is: fit the Lasso ([`lasso`]), build a nodewise debiasing
//! direction and the one-step debiased estimate ([`debias`]), then run a
//! Gaussian bootstrap of the debiased estimator to get percentile intervals
//! and the double-debiased (DDB) estimate ([`bootstrap`]). [`diagnostics`]
//! evaluates the design conditions and the exact error decomposition when
//! the truth is known, and [`sim`] runs Monte-Carlo coverage studies.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` / `*32` aliases below name the common instantiations.

pub mod bootstrap;
pub mod data;
pub mod debias;
pub mod diagnostics;
pub mod error;
pub mod lasso;
pub mod matrix;
pub mod rng;
pub mod scalar;
pub mod sim;

pub use bootstrap::{
    bootstrap_debiased, bootstrap_refits, ddb_estimate, ddb_plugin_ci, empirical_quantile, lower_median,
    percentile_ci, pivots, BootstrapDistribution, BootstrapRefits, CiMethod, ConfidenceInterval, PivotValues,
};
pub use data::{destandardize_coefficients, RegressionData};
pub use debias::{debias, estimate_sigma_sq, nodewise_direction, plugin_ci, DebiasArtifacts, DebiasedEstimate};
pub use diagnostics::{
    condition_report, decompose_error, oracle_estimator, population_condition_report, ConditionReport,
    ErrorDecomposition,
};
pub use error::{Error, Result};
pub use lasso::{
    fit_lasso, fit_lasso_pipeline, fit_lasso_warm, fit_with_rule, universal_lambda, LambdaRule, LassoFit,
    SolverConfig,
};
pub use matrix::Matrix;
pub use rng::{gaussian_stream, SeedSpec};
pub use scalar::Scalar;

pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
pub type RegressionData64 = RegressionData<f64>;
pub type RegressionData32 = RegressionData<f32>;
pub type LassoFit64 = LassoFit<f64>;
pub type LassoFit32 = LassoFit<f32>;
pub type SolverConfig64 = SolverConfig<f64>;
pub type SolverConfig32 = SolverConfig<f32>;
pub type DebiasArtifacts64 = DebiasArtifacts<f64>;
pub type DebiasArtifacts32 = DebiasArtifacts<f32>;
pub type BootstrapDistribution64 = BootstrapDistribution<f64>;
pub type BootstrapDistribution32 = BootstrapDistribution<f32>;
pub type ConditionReport64 = ConditionReport<f64>;
pub type ConditionReport32 = ConditionReport<f32>;
