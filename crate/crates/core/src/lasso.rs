//! ℓ₁-penalized least squares by cyclic coordinate descent.
//!
//! Minimizes `(1/2n)‖y − Xb‖₂² + λ‖b‖₁`. Each outer iteration runs one sweep
//! over all coordinates followed by sweeps restricted to the nonzero
//! coefficients until they settle; the residual is then recomputed from
//! scratch and the fit is certified by its KKT gap.

use serde::{Deserialize, Serialize};

use crate::data::RegressionData;
use crate::debias::estimate_sigma_sq;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::{dot, norm2_sq, sgn, soft_threshold, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig<T> {
    /// Convergence is declared once the KKT gap is at most this.
    pub kkt_tol: T,
    /// Hard cap on coordinate sweeps (full or active-set).
    pub max_sweeps: usize,
    /// Active-set sweeps stop when no coefficient moves by more than this.
    pub coord_tol: T,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            kkt_tol: T::lit(T::DEFAULT_KKT_TOL),
            max_sweeps: 100_000,
            coord_tol: T::lit(T::DEFAULT_COORD_TOL),
        }
    }
}

impl<T: Scalar> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.kkt_tol > T::zero()) || !(self.coord_tol > T::zero()) || self.max_sweeps == 0 {
            return Err(Error::InvalidConfig(format!(
                "kkt_tol={}, coord_tol={}, max_sweeps={} must all be positive",
                self.kkt_tol, self.coord_tol, self.max_sweeps
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoFit<T> {
    pub beta_hat: Vec<T>,
    /// Sorted indices of the nonzero coefficients.
    pub active_set: Vec<usize>,
    pub lambda: T,
    /// Largest violation of the optimality conditions at `beta_hat`.
    pub kkt_gap: T,
    /// Coordinate sweeps performed.
    pub iterations: usize,
    pub converged: bool,
    /// Objective value after each outer iteration, starting with the initial point.
    pub objective_trace: Vec<T>,
}

impl<T: Scalar> LassoFit<T> {
    pub fn support_size(&self) -> usize {
        self.active_set.len()
    }

    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                iterations: self.iterations,
                kkt_gap: self.kkt_gap.as_f64(),
            })
        }
    }

    pub fn residual(&self, data: &RegressionData<T>) -> Vec<T> {
        residual(data.x(), data.y(), &self.beta_hat)
    }
}

/// `y − Xβ`.
pub fn residual<T: Scalar>(x: &Matrix<T>, y: &[T], beta: &[T]) -> Vec<T> {
    let fitted = x.mul_vec(beta);
    y.iter().zip(fitted).map(|(&a, b)| a - b).collect()
}

pub fn objective<T: Scalar>(x: &Matrix<T>, y: &[T], beta: &[T], lambda: T) -> T {
    let r = residual(x, y, beta);
    objective_from_residual(&r, beta, lambda)
}

fn objective_from_residual<T: Scalar>(r: &[T], beta: &[T], lambda: T) -> T {
    let n = T::lit(r.len() as f64);
    norm2_sq(r) / (n + n) + lambda * beta.iter().map(|b| b.abs()).sum::<T>()
}

/// Maximum KKT violation over the coordinates not listed in `skip`.
///
/// For `g_j = x_jᵀ(y − Xβ)/n`: `|g_j − λ·sgn(β_j)|` on the support and
/// `max(0, |g_j| − λ)` off it.
pub fn kkt_gap<T: Scalar>(x: &Matrix<T>, y: &[T], beta: &[T], lambda: T) -> T {
    let r = residual(x, y, beta);
    kkt_gap_from_residual(x, &r, beta, lambda, None)
}

fn kkt_gap_from_residual<T: Scalar>(
    x: &Matrix<T>,
    r: &[T],
    beta: &[T],
    lambda: T,
    skip: Option<usize>,
) -> T {
    let n = T::lit(r.len() as f64);
    let mut gap = T::zero();
    for (j, &b) in beta.iter().enumerate() {
        if Some(j) == skip {
            continue;
        }
        let g = dot(x.col(j), r) / n;
        let v = if b != T::zero() {
            (g - lambda * sgn(b)).abs()
        } else {
            (g.abs() - lambda).max(T::zero())
        };
        gap = gap.max(v);
    }
    gap
}

/// Raw coordinate-descent solve. `skip` pins one coordinate at zero and
/// ignores it, which is how the nodewise regressions exclude their response column.
pub(crate) fn coordinate_descent<T: Scalar>(
    x: &Matrix<T>,
    y: &[T],
    lambda: T,
    config: &SolverConfig<T>,
    init: Option<&[T]>,
    skip: Option<usize>,
) -> Result<LassoFit<T>> {
    let n = x.nrows();
    let p = x.ncols();
    if !(lambda > T::zero()) || !lambda.is_finite() {
        return Err(Error::InvalidLambda(lambda.as_f64()));
    }
    config.validate()?;
    if y.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: y.len() });
    }
    let nf = T::lit(n as f64);
    let col_sq: Vec<T> = (0..p).map(|j| norm2_sq(x.col(j)) / nf).collect();
    let mut beta = match init {
        Some(b) => {
            if b.len() != p {
                return Err(Error::LengthMismatch { expected: p, got: b.len() });
            }
            b.to_vec()
        }
        None => vec![T::zero(); p],
    };
    if let Some(s) = skip {
        beta[s] = T::zero();
    }
    for (b, &c) in beta.iter_mut().zip(&col_sq) {
        if c == T::zero() {
            *b = T::zero();
        }
    }
    let mut r = residual(x, y, &beta);
    let mut trace = vec![objective_from_residual(&r, &beta, lambda)];
    if !trace[0].is_finite() {
        return Err(Error::NonFinite);
    }

    let update = |j: usize, beta: &mut [T], r: &mut [T]| -> T {
        let a = col_sq[j];
        let xj = x.col(j);
        let old = beta[j];
        let g = dot(xj, r) / nf;
        let new = soft_threshold(g + a * old, lambda) / a;
        let delta = new - old;
        if delta != T::zero() {
            beta[j] = new;
            for (ri, &xi) in r.iter_mut().zip(xj) {
                *ri = *ri - xi * delta;
            }
        }
        delta.abs()
    };

    let coords: Vec<usize> = (0..p)
        .filter(|&j| Some(j) != skip && col_sq[j] > T::zero())
        .collect();
    let mut sweeps = 0usize;
    let mut converged = false;
    let mut gap;
    loop {
        for &j in &coords {
            update(j, &mut beta, &mut r);
        }
        sweeps += 1;
        let active: Vec<usize> = coords.iter().copied().filter(|&j| beta[j] != T::zero()).collect();
        while sweeps < config.max_sweeps && !active.is_empty() {
            let mut max_change = T::zero();
            for &j in &active {
                max_change = max_change.max(update(j, &mut beta, &mut r));
            }
            sweeps += 1;
            if !(max_change > config.coord_tol) {
                break;
            }
        }
        r = residual(x, y, &beta);
        let obj = objective_from_residual(&r, &beta, lambda);
        if !obj.is_finite() {
            return Err(Error::NonFinite);
        }
        trace.push(obj);
        gap = kkt_gap_from_residual(x, &r, &beta, lambda, skip);
        if gap <= config.kkt_tol {
            converged = true;
            break;
        }
        if sweeps >= config.max_sweeps {
            break;
        }
    }
    let active_set = (0..p).filter(|&j| beta[j] != T::zero()).collect();
    Ok(LassoFit {
        beta_hat: beta,
        active_set,
        lambda,
        kkt_gap: gap,
        iterations: sweeps,
        converged,
        objective_trace: trace,
    })
}

/// Lasso fit at penalty `lambda`.
///
/// A fit that exhausts `max_sweeps` is returned with `converged = false`
/// (use [`LassoFit::require_converged`] to turn that into an error).
pub fn fit_lasso<T: Scalar>(
    data: &RegressionData<T>,
    lambda: T,
    config: &SolverConfig<T>,
) -> Result<LassoFit<T>> {
    coordinate_descent(data.x(), data.y(), lambda, config, None, None)
}

/// [`fit_lasso`] started from `init` instead of zero.
pub fn fit_lasso_warm<T: Scalar>(
    data: &RegressionData<T>,
    lambda: T,
    config: &SolverConfig<T>,
    init: &[T],
) -> Result<LassoFit<T>> {
    coordinate_descent(data.x(), data.y(), lambda, config, Some(init), None)
}

/// Sample standard deviation of the response (n − 1 denominator).
pub fn response_sd<T: Scalar>(y: &[T]) -> T {
    let n = T::lit(y.len() as f64);
    let mean = y.iter().copied().sum::<T>() / n;
    (y.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / (n - T::one())).sqrt()
}

/// Universal penalty `σ·√(2·ln p / n)`; a zero `sigma_estimate` is replaced by
/// the sample standard deviation of `y`.
pub fn universal_lambda<T: Scalar>(data: &RegressionData<T>, sigma_estimate: T) -> Result<T> {
    universal_lambda_scaled(data, sigma_estimate, T::one())
}

/// [`universal_lambda`] times a constant `multiplier`.
pub fn universal_lambda_scaled<T: Scalar>(
    data: &RegressionData<T>,
    sigma_estimate: T,
    multiplier: T,
) -> Result<T> {
    if sigma_estimate < T::zero() || !sigma_estimate.is_finite() {
        return Err(Error::DegenerateResponse(format!(
            "noise scale must be finite and nonnegative, got {sigma_estimate}"
        )));
    }
    if !(multiplier > T::zero()) {
        return Err(Error::InvalidConfig(format!("lambda multiplier {multiplier} must be positive")));
    }
    let p = data.p();
    if p < 2 {
        return Err(Error::DegenerateResponse(
            "universal penalty needs p >= 2 (log p = 0)".into(),
        ));
    }
    let sigma = if sigma_estimate > T::zero() {
        sigma_estimate
    } else {
        let sd = response_sd(data.y());
        if !(sd > T::zero()) {
            return Err(Error::DegenerateResponse("response has zero spread".into()));
        }
        sd
    };
    let n = T::lit(data.n() as f64);
    Ok(multiplier * sigma * (T::lit(2.0) * T::lit(p as f64).ln() / n).sqrt())
}

/// How the regression penalty is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LambdaRule<T> {
    /// Pilot at `universal_lambda(data, 0)`, estimate σ̂ from the pilot fit,
    /// refit at the universal level with σ̂.
    TwoStage { multiplier: T },
    /// Universal level with a known noise scale.
    KnownSigma { sigma: T, multiplier: T },
    Fixed(T),
}

impl<T: Scalar> LambdaRule<T> {
    pub fn two_stage() -> Self {
        LambdaRule::TwoStage { multiplier: T::one() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineFit<T> {
    pub fit: LassoFit<T>,
    /// `σ̂²` on the final fit.
    pub sigma_sq: T,
    /// Penalty of the pilot stage, when one was run.
    pub pilot_lambda: Option<T>,
}

impl<T: Scalar> PipelineFit<T> {
    pub fn sigma_hat(&self) -> T {
        self.sigma_sq.sqrt()
    }
}

/// Two-stage universal-penalty fit returning the final fit and `σ̂²`.
pub fn fit_lasso_pipeline<T: Scalar>(
    data: &RegressionData<T>,
    config: &SolverConfig<T>,
) -> Result<(LassoFit<T>, T)> {
    let out = fit_with_rule(data, &LambdaRule::two_stage(), config)?;
    Ok((out.fit, out.sigma_sq))
}

/// Fits under any [`LambdaRule`], requiring solver convergence at every stage.
pub fn fit_with_rule<T: Scalar>(
    data: &RegressionData<T>,
    rule: &LambdaRule<T>,
    config: &SolverConfig<T>,
) -> Result<PipelineFit<T>> {
    match *rule {
        LambdaRule::Fixed(lambda) => {
            let fit = fit_lasso(data, lambda, config)?.require_converged()?;
            let sigma_sq = estimate_sigma_sq(data, &fit)?;
            Ok(PipelineFit { fit, sigma_sq, pilot_lambda: None })
        }
        LambdaRule::KnownSigma { sigma, multiplier } => {
            if !(sigma > T::zero()) {
                return Err(Error::ZeroSigma);
            }
            let lambda = universal_lambda_scaled(data, sigma, multiplier)?;
            let fit = fit_lasso(data, lambda, config)?.require_converged()?;
            let sigma_sq = estimate_sigma_sq(data, &fit)?;
            Ok(PipelineFit { fit, sigma_sq, pilot_lambda: None })
        }
        LambdaRule::TwoStage { multiplier } => {
            let pilot_lambda = universal_lambda_scaled(data, T::zero(), multiplier)?;
            let pilot = fit_lasso(data, pilot_lambda, config)?.require_converged()?;
            let pilot_sigma = estimate_sigma_sq(data, &pilot)?.sqrt();
            if !(pilot_sigma > T::zero()) {
                // perfect pilot fit: nothing left to rescale
                return Ok(PipelineFit { fit: pilot, sigma_sq: T::zero(), pilot_lambda: None });
            }
            let lambda = universal_lambda_scaled(data, pilot_sigma, multiplier)?;
            let fit = fit_lasso_warm(data, lambda, config, &pilot.beta_hat)?.require_converged()?;
            let sigma_sq = estimate_sigma_sq(data, &fit)?;
            Ok(PipelineFit { fit, sigma_sq, pilot_lambda: Some(pilot_lambda) })
        }
    }
}
