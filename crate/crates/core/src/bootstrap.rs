//! Gaussian bootstrap of the debiased Lasso, percentile intervals, the
//! double-debiased estimator and the studentized pivots.
//!
//! One bootstrap resample draws `ξ ~ N(0, I_n)`, forms `y* = Xβ̂ + σ̂ξ`, refits
//! the Lasso at the original penalty and recomputes the debiased estimate
//! with the original direction `z_j`. The Lasso refits do not depend on `j`,
//! so [`bootstrap_refits`] runs them once and [`BootstrapRefits::distribution`]
//! turns them into draws for any number of coordinates.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::RegressionData;
use crate::debias::{check_alpha, plugin_half_width, DebiasArtifacts, DebiasedEstimate};
use crate::error::{Error, Result};
use crate::lasso::{coordinate_descent, residual, LassoFit, SolverConfig};
use crate::rng::{gaussian_stream_as, SeedSpec};
use crate::scalar::{dot, Scalar};

/// Largest tolerated fraction of non-converged bootstrap refits.
pub const MAX_REFIT_FAILURE_RATE: f64 = 0.2;

/// Domain tag separating bootstrap noise from other uses of a seed.
const BOOTSTRAP_TAG: u64 = 0xb007_5742;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CiMethod {
    /// Percentile interval from the bootstrapped debiased estimator.
    #[serde(rename = "BS-DB")]
    BsDb,
    /// Normal plug-in interval around the debiased estimator.
    #[serde(rename = "DB")]
    Db,
    /// Normal plug-in interval around the double-debiased estimator.
    #[serde(rename = "DDB")]
    DdbPlugin,
}

impl CiMethod {
    pub const ALL: [CiMethod; 3] = [CiMethod::BsDb, CiMethod::Db, CiMethod::DdbPlugin];

    pub fn label(self) -> &'static str {
        match self {
            CiMethod::BsDb => "BS-DB",
            CiMethod::Db => "DB",
            CiMethod::DdbPlugin => "DDB",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "bsdb" => Some(CiMethod::BsDb),
            "db" => Some(CiMethod::Db),
            "ddb" | "ddbplugin" => Some(CiMethod::DdbPlugin),
            _ => None,
        }
    }
}

impl fmt::Display for CiMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval<T> {
    pub j: usize,
    pub lower: T,
    pub upper: T,
    pub level: f64,
    pub method: CiMethod,
}

impl<T: Scalar> ConfidenceInterval<T> {
    pub fn length(&self) -> T {
        self.upper - self.lower
    }

    pub fn contains(&self, value: T) -> bool {
        self.lower <= value && value <= self.upper
    }
}

/// Bootstrap draws of `β̂ⱼ^(*,DB) − β̂ⱼ` for one coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapDistribution<T> {
    pub j: usize,
    pub draws: Vec<T>,
    /// Number of resamples requested.
    pub resamples: usize,
    pub seed: SeedSpec,
    /// Resamples whose Lasso refit did not converge; they contribute no draw.
    pub refit_failures: usize,
}

impl<T: Scalar> BootstrapDistribution<T> {
    pub fn sorted_draws(&self) -> Vec<T> {
        sorted(&self.draws)
    }

    pub fn median(&self) -> Result<T> {
        lower_median(&self.draws)
    }
}

/// Successful bootstrap Lasso refits, shared across coordinates.
#[derive(Debug, Clone)]
pub struct BootstrapRefits<T> {
    pub seed: SeedSpec,
    pub resamples: usize,
    pub refit_failures: usize,
    refits: Vec<Refit<T>>,
}

#[derive(Debug, Clone)]
struct Refit<T> {
    beta_star: Vec<T>,
    /// `y* − Xβ̂*`.
    residual: Vec<T>,
}

/// Noise stream for resample `b` under `seed`.
pub fn resample_seed(seed: SeedSpec, b: usize) -> SeedSpec {
    seed.derive(BOOTSTRAP_TAG).with_stream(b as u64)
}

/// Runs the `resamples` bootstrap Lasso refits.
///
/// Resamples are independent and may run on any thread; results are kept in
/// resample order, so the output depends only on the inputs and `seed`.
pub fn bootstrap_refits<T: Scalar>(
    data: &RegressionData<T>,
    fit: &LassoFit<T>,
    sigma_hat: T,
    resamples: usize,
    seed: SeedSpec,
    config: &SolverConfig<T>,
) -> Result<BootstrapRefits<T>> {
    if resamples == 0 {
        return Err(Error::InvalidConfig("bootstrap needs at least one resample".into()));
    }
    if sigma_hat < T::zero() || !sigma_hat.is_finite() {
        return Err(Error::InvalidData(format!("sigma_hat must be nonnegative, got {sigma_hat}")));
    }
    let x = data.x();
    let n = data.n();
    let fitted = x.mul_vec(&fit.beta_hat);
    let outcomes: Vec<Result<Option<Refit<T>>>> = (0..resamples)
        .into_par_iter()
        .map(|b| {
            let xi: Vec<T> = gaussian_stream_as(resample_seed(seed, b), n);
            let y_star: Vec<T> = fitted.iter().zip(&xi).map(|(&m, &e)| m + sigma_hat * e).collect();
            let refit = coordinate_descent(x, &y_star, fit.lambda, config, Some(&fit.beta_hat), None)?;
            if !refit.converged {
                return Ok(None);
            }
            let residual = residual(x, &y_star, &refit.beta_hat);
            Ok(Some(Refit { beta_star: refit.beta_hat, residual }))
        })
        .collect();
    let mut refits = Vec::with_capacity(resamples);
    let mut failures = 0;
    for o in outcomes {
        match o? {
            Some(r) => refits.push(r),
            None => failures += 1,
        }
    }
    if failures as f64 > MAX_REFIT_FAILURE_RATE * resamples as f64 {
        return Err(Error::TooManyRefitFailures { failures, resamples });
    }
    Ok(BootstrapRefits { seed, resamples, refit_failures: failures, refits })
}

impl<T: Scalar> BootstrapRefits<T> {
    pub fn successful(&self) -> usize {
        self.refits.len()
    }

    /// Draws `β̂*ⱼ + z_jᵀ(y* − Xβ̂*)/z_jᵀx_j − β̂ⱼ` for the coordinate of `art`.
    pub fn distribution(&self, fit: &LassoFit<T>, art: &DebiasArtifacts<T>) -> Result<BootstrapDistribution<T>> {
        let j = art.j;
        let base = fit.beta_hat[j];
        let draws: Vec<T> = self
            .refits
            .iter()
            .map(|r| r.beta_star[j] + dot(&art.z, &r.residual) / art.denom - base)
            .collect();
        if draws.iter().any(|d| !d.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(BootstrapDistribution {
            j,
            draws,
            resamples: self.resamples,
            seed: self.seed,
            refit_failures: self.refit_failures,
        })
    }
}

/// Bootstrap distribution for a single coordinate.
pub fn bootstrap_debiased<T: Scalar>(
    data: &RegressionData<T>,
    fit: &LassoFit<T>,
    sigma_hat: T,
    art: &DebiasArtifacts<T>,
    resamples: usize,
    seed: SeedSpec,
    config: &SolverConfig<T>,
) -> Result<BootstrapDistribution<T>> {
    bootstrap_refits(data, fit, sigma_hat, resamples, seed, config)?.distribution(fit, art)
}

fn sorted<T: Scalar>(v: &[T]) -> Vec<T> {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("finite draws"));
    s
}

/// Order-statistic rank `⌈α·m⌉` clamped to `[1, m]`.
///
/// A relative slack of a few ulps keeps products such as `0.025·200` from
/// rounding up past an integer.
pub fn quantile_rank(alpha: f64, m: usize) -> usize {
    let raw = alpha * m as f64;
    let rank = (raw - raw.abs() * 4.0 * f64::EPSILON).ceil();
    (rank.max(1.0) as usize).min(m)
}

/// `α`-quantile of already sorted draws.
pub fn quantile_sorted<T: Scalar>(sorted_draws: &[T], alpha: f64) -> Result<T> {
    if sorted_draws.is_empty() {
        return Err(Error::EmptyDraws);
    }
    check_alpha(alpha)?;
    Ok(sorted_draws[quantile_rank(alpha, sorted_draws.len()) - 1])
}

/// Empirical `α`-quantile: the order statistic of rank `⌈α·m⌉`.
pub fn empirical_quantile<T: Scalar>(draws: &[T], alpha: f64) -> Result<T> {
    if draws.is_empty() {
        return Err(Error::EmptyDraws);
    }
    quantile_sorted(&sorted(draws), alpha)
}

/// Lower median: order statistic `⌊(m + 1)/2⌋`.
pub fn lower_median<T: Scalar>(draws: &[T]) -> Result<T> {
    if draws.is_empty() {
        return Err(Error::EmptyDraws);
    }
    let s = sorted(draws);
    Ok(s[(s.len() - 1) / 2])
}

fn alpha_of(level: f64) -> Result<f64> {
    if level > 0.0 && level < 1.0 {
        Ok(1.0 - level)
    } else {
        Err(Error::InvalidAlpha(1.0 - level))
    }
}

/// `(β̂ⱼ^DB − q_{1−α/2}, β̂ⱼ^DB − q_{α/2})` over the bootstrap draws.
pub fn percentile_ci<T: Scalar>(
    beta_db: T,
    dist: &BootstrapDistribution<T>,
    level: f64,
) -> Result<ConfidenceInterval<T>> {
    let alpha = alpha_of(level)?;
    let s = dist.sorted_draws();
    let hi_q = quantile_sorted(&s, 1.0 - alpha / 2.0)?;
    let lo_q = quantile_sorted(&s, alpha / 2.0)?;
    Ok(ConfidenceInterval {
        j: dist.j,
        lower: beta_db - hi_q,
        upper: beta_db - lo_q,
        level,
        method: CiMethod::BsDb,
    })
}

/// Double-debiased estimate `β̂ⱼ^DB − median(draws)`.
pub fn ddb_estimate<T: Scalar>(beta_db: T, dist: &BootstrapDistribution<T>) -> Result<T> {
    Ok(beta_db - dist.median()?)
}

/// Normal interval around the double-debiased estimate with the plug-in scale.
pub fn ddb_plugin_ci<T: Scalar>(
    ddb: T,
    art: &DebiasArtifacts<T>,
    sigma_hat: T,
    level: f64,
) -> Result<ConfidenceInterval<T>> {
    let alpha = alpha_of(level)?;
    let hw = plugin_half_width(art, sigma_hat, alpha)?;
    Ok(ConfidenceInterval {
        j: art.j,
        lower: ddb - hw,
        upper: ddb + hw,
        level,
        method: CiMethod::DdbPlugin,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PivotValues<T> {
    /// `(z_jᵀx_j/‖z_j‖₂)(β̂ⱼ^DB − βⱼ)`.
    pub r_j: T,
    /// `(z_jᵀx_j/(σ̂‖z_j‖₂))(β̂ⱼ^DDB − βⱼ)`.
    pub r_j_ddb: T,
    /// `z_jᵀx_j/‖z_j‖₂`.
    pub scale: T,
}

pub fn pivots<T: Scalar>(
    est: &DebiasedEstimate<T>,
    ddb: T,
    art: &DebiasArtifacts<T>,
    sigma_hat: T,
    beta_true_j: T,
) -> Result<PivotValues<T>> {
    if !(sigma_hat > T::zero()) {
        return Err(Error::ZeroSigma);
    }
    let scale = art.denom / art.z_norm2.sqrt();
    Ok(PivotValues {
        r_j: scale * (est.beta_db - beta_true_j),
        r_j_ddb: scale / sigma_hat * (ddb - beta_true_j),
        scale,
    })
}
