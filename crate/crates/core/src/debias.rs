//! Nodewise debiasing direction, noise-variance estimate and the one-step
//! debiased estimator for a single coordinate.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::RegressionData;
use crate::error::{Error, Result};
use crate::lasso::{coordinate_descent, LassoFit, SolverConfig};
use crate::scalar::{dot, norm2_sq, Scalar};

/// Relative floor on `z_jᵀx_j / n` below which inference for `j` is refused.
pub const DEGENERATE_DENOM_RATIO: f64 = 1e-8;

/// Residual of the ℓ₁-penalized regression of `x_j` on the other columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebiasArtifacts<T> {
    pub j: usize,
    pub z: Vec<T>,
    /// Nodewise coefficients `γ̂₋ⱼ`, length `p − 1`, in column order with `j` removed.
    pub gamma_hat: Vec<T>,
    pub lambda_j: T,
    /// `z_jᵀx_j`.
    pub denom: T,
    /// `‖z_j‖₂²`.
    pub z_norm2: T,
    pub nodewise_kkt_gap: T,
    /// `‖z_j‖₄⁴ / ‖z_j‖₂⁴`, small when no observation dominates `z_j`.
    pub z_fourth_ratio: T,
    /// `‖z_j‖₂² / n`.
    pub z_energy: T,
}

impl<T: Scalar> DebiasArtifacts<T> {
    /// Standard error factor `‖z_j‖₂ / z_jᵀx_j`.
    pub fn se_factor(&self) -> T {
        self.z_norm2.sqrt() / self.denom
    }

    /// `γ̂` expanded to length `p` with a zero at `j`.
    pub fn gamma_full(&self) -> Vec<T> {
        let mut g = self.gamma_hat.clone();
        g.insert(self.j, T::zero());
        g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DebiasedEstimate<T> {
    pub j: usize,
    pub beta_db: T,
    pub beta_lasso: T,
    /// `z_jᵀ(y − Xβ̂) / z_jᵀx_j`.
    pub correction: T,
}

/// Debiasing direction for coordinate `j` with nodewise penalty `lambda_j`.
pub fn nodewise_direction<T: Scalar>(
    data: &RegressionData<T>,
    j: usize,
    lambda_j: T,
    config: &SolverConfig<T>,
) -> Result<DebiasArtifacts<T>> {
    let p = data.p();
    let n = data.n();
    if j >= p {
        return Err(Error::IndexOutOfRange(j, p));
    }
    let x = data.x();
    let xj = x.col(j);
    let nf = T::lit(n as f64);
    let (gamma_full, gap) = if p == 1 {
        (vec![T::zero()], T::zero())
    } else {
        let fit = coordinate_descent(x, xj, lambda_j, config, None, Some(j))?.require_converged()?;
        (fit.beta_hat, fit.kkt_gap)
    };
    let mut z = x.mul_vec(&gamma_full);
    for (zi, &xi) in z.iter_mut().zip(xj) {
        *zi = xi - *zi;
    }
    let denom = dot(&z, xj);
    if !(denom > T::lit(DEGENERATE_DENOM_RATIO) * nf) {
        return Err(Error::DegenerateDirection { j, denom: denom.as_f64() });
    }
    let z_norm2 = norm2_sq(&z);
    let z4: T = z.iter().map(|&v| (v * v) * (v * v)).sum();
    let mut gamma_hat = gamma_full;
    gamma_hat.remove(j);
    Ok(DebiasArtifacts {
        j,
        z,
        gamma_hat,
        lambda_j,
        denom,
        z_norm2,
        nodewise_kkt_gap: gap,
        z_fourth_ratio: z4 / (z_norm2 * z_norm2),
        z_energy: z_norm2 / nf,
    })
}

/// `σ̂² = ‖y − Xβ̂‖₂² / (n − |Ŝ|)`.
pub fn estimate_sigma_sq<T: Scalar>(data: &RegressionData<T>, fit: &LassoFit<T>) -> Result<T> {
    let n = data.n();
    let k = fit.beta_hat.iter().filter(|b| **b != T::zero()).count();
    if k >= n {
        return Err(Error::SaturatedFit { support: k, n });
    }
    let r = fit.residual(data);
    Ok(norm2_sq(&r) / T::lit((n - k) as f64))
}

/// One-step correction `β̂ⱼ + z_jᵀ(y − Xβ̂)/z_jᵀx_j`.
pub fn debias<T: Scalar>(
    data: &RegressionData<T>,
    fit: &LassoFit<T>,
    art: &DebiasArtifacts<T>,
) -> Result<DebiasedEstimate<T>> {
    let nf = T::lit(data.n() as f64);
    if !(art.denom > T::lit(DEGENERATE_DENOM_RATIO) * nf) {
        return Err(Error::DegenerateDirection { j: art.j, denom: art.denom.as_f64() });
    }
    if art.z.len() != data.n() {
        return Err(Error::LengthMismatch { expected: data.n(), got: art.z.len() });
    }
    let r = fit.residual(data);
    let correction = dot(&art.z, &r) / art.denom;
    let beta_lasso = fit.beta_hat[art.j];
    Ok(DebiasedEstimate {
        j: art.j,
        beta_db: beta_lasso + correction,
        beta_lasso,
        correction,
    })
}

/// Standard normal quantile.
pub fn normal_quantile(prob: f64) -> f64 {
    Normal::standard().inverse_cdf(prob)
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidAlpha(alpha))
    }
}

/// Half-width `σ̂·z_{1−α/2}·‖z_j‖₂ / z_jᵀx_j` of the plug-in interval.
pub fn plugin_half_width<T: Scalar>(art: &DebiasArtifacts<T>, sigma_hat: T, alpha: f64) -> Result<T> {
    check_alpha(alpha)?;
    if sigma_hat < T::zero() || !sigma_hat.is_finite() {
        return Err(Error::InvalidData(format!("sigma_hat must be nonnegative, got {sigma_hat}")));
    }
    Ok(sigma_hat * T::lit(normal_quantile(1.0 - alpha / 2.0)) * art.se_factor())
}

/// Normal-approximation interval centered at the debiased estimate.
pub fn plugin_ci<T: Scalar>(
    est: &DebiasedEstimate<T>,
    art: &DebiasArtifacts<T>,
    sigma_hat: T,
    alpha: f64,
) -> Result<crate::bootstrap::ConfidenceInterval<T>> {
    let hw = plugin_half_width(art, sigma_hat, alpha)?;
    Ok(crate::bootstrap::ConfidenceInterval {
        j: est.j,
        lower: est.beta_db - hw,
        upper: est.beta_db + hw,
        level: 1.0 - alpha,
        method: crate::bootstrap::CiMethod::Db,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lasso::fit_lasso;
    use crate::matrix::Matrix;

    fn orthogonal() -> RegressionData<f64> {
        let x = Matrix::from_rows(&[
            vec![1.0, 1.0, 1.0],
            vec![1.0, -1.0, 1.0],
            vec![1.0, 1.0, -1.0],
            vec![1.0, -1.0, -1.0],
        ])
        .unwrap();
        RegressionData::new(x, vec![1.0, 2.0, 3.0, 4.0]).unwrap()
    }

    fn artifacts(z: Vec<f64>, denom: f64) -> DebiasArtifacts<f64> {
        let z_norm2 = norm2_sq(&z);
        DebiasArtifacts {
            j: 0,
            z,
            gamma_hat: vec![],
            lambda_j: 0.1,
            denom,
            z_norm2,
            nodewise_kkt_gap: 0.0,
            z_fourth_ratio: 0.0,
            z_energy: 0.0,
        }
    }

    #[test]
    fn orthogonal_column_keeps_itself() {
        let d = orthogonal();
        for lam in [0.01, 0.5, 3.0] {
            let art = nodewise_direction(&d, 1, lam, &SolverConfig::default()).unwrap();
            assert_eq!(art.gamma_hat, vec![0.0, 0.0]);
            assert_eq!(art.z, d.x().col(1));
            assert_eq!(art.denom, 4.0);
        }
    }

    #[test]
    fn large_penalty_gives_zero_gamma() {
        let x: Matrix<f64> = Matrix::from_rows(&[vec![1.0, 0.8], vec![-1.0, -0.5], vec![0.5, 0.9], vec![2.0, 1.0]])
            .unwrap();
        let d = RegressionData::new(x, vec![0.0; 4]).unwrap();
        let max_corr = (dot(d.x().col(0), d.x().col(1)) / 4.0).abs();
        let art = nodewise_direction(&d, 0, max_corr, &SolverConfig::default()).unwrap();
        assert_eq!(art.gamma_hat, vec![0.0]);
        assert_eq!(art.z, d.x().col(0));
    }

    #[test]
    fn collinear_column_is_degenerate() {
        let x = Matrix::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0], vec![-1.0, -1.0]]).unwrap();
        let d = RegressionData::new(x, vec![0.0; 3]).unwrap();
        let r = nodewise_direction(&d, 0, 1e-10, &SolverConfig::default());
        assert!(matches!(r, Err(Error::DegenerateDirection { j: 0, .. })));
    }

    #[test]
    fn out_of_range_coordinate() {
        let d = orthogonal();
        assert!(matches!(
            nodewise_direction(&d, 3, 0.1, &SolverConfig::default()),
            Err(Error::IndexOutOfRange(3, 3))
        ));
    }

    #[test]
    fn sigma_examples() {
        // perfect fit
        let x = Matrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let d = RegressionData::new(x, vec![2.0, 4.0, 6.0]).unwrap();
        let fit = LassoFit {
            beta_hat: vec![2.0],
            active_set: vec![0],
            lambda: 0.1,
            kkt_gap: 0.0,
            iterations: 0,
            converged: true,
            objective_trace: vec![],
        };
        assert_eq!(estimate_sigma_sq(&d, &fit).unwrap(), 0.0);

        // empty support, ‖y‖² = 100, n = 10
        let x = Matrix::from_fn(10, 2, |i, j| (i + j) as f64);
        let d = RegressionData::new(x, vec![10.0 / 10f64.sqrt(); 10]).unwrap();
        let zero = LassoFit { beta_hat: vec![0.0, 0.0], active_set: vec![], ..fit.clone() };
        assert!((estimate_sigma_sq(&d, &zero).unwrap() - 10.0).abs() < 1e-12);

        // n = 5, two active, residual norm² = 6
        let x = Matrix::from_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0],
        ])
        .unwrap();
        let y = vec![1.0, 1.0, 0.0, 2.0, 2.0_f64.sqrt()];
        let d = RegressionData::new(x, y).unwrap();
        let two = LassoFit { beta_hat: vec![1.0, 1.0, 0.0], active_set: vec![0, 1], ..fit.clone() };
        assert!((estimate_sigma_sq(&d, &two).unwrap() - 2.0).abs() < 1e-12);

        let sat = LassoFit { beta_hat: vec![1.0, 1.0, 1.0], active_set: vec![0, 1, 2], ..fit };
        let x = Matrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        let d = RegressionData::new(x, vec![1.0; 3]).unwrap();
        assert!(matches!(estimate_sigma_sq(&d, &sat), Err(Error::SaturatedFit { support: 3, n: 3 })));
    }

    #[test]
    fn zero_residual_no_correction() {
        let d = orthogonal();
        let fit = LassoFit {
            beta_hat: vec![2.5, -0.5, -1.0],
            active_set: vec![0, 1, 2],
            lambda: 0.1,
            kkt_gap: 0.0,
            iterations: 0,
            converged: true,
            objective_trace: vec![],
        };
        // y = Xβ exactly
        let art = nodewise_direction(&d, 0, 0.1, &SolverConfig::default()).unwrap();
        let est = debias(&d, &fit, &art).unwrap();
        assert_eq!(est.correction, 0.0);
        assert_eq!(est.beta_db, est.beta_lasso);
    }

    #[test]
    fn univariate_debiasing_is_least_squares() {
        let x: Matrix<f64> = Matrix::from_rows(&[vec![1.0], vec![2.0], vec![-1.0], vec![0.5]]).unwrap();
        let y = vec![1.2, 2.1, -0.7, 0.9];
        let d = RegressionData::new(x, y.clone()).unwrap();
        let fit = fit_lasso(&d, 0.3, &SolverConfig::default()).unwrap();
        let art = nodewise_direction(&d, 0, 0.3, &SolverConfig::default()).unwrap();
        let est = debias(&d, &fit, &art).unwrap();
        let xs = d.x().col(0);
        let ols = dot(xs, &y) / dot(xs, xs);
        assert!((est.beta_db - ols).abs() < 1e-12);
    }

    #[test]
    fn plugin_examples() {
        let est = DebiasedEstimate { j: 0, beta_db: 0.7, beta_lasso: 0.5, correction: 0.2 };
        // ‖z‖ = 10, denom = 100
        let art = artifacts(vec![6.0, 8.0], 100.0);
        let ci = plugin_ci(&est, &art, 0.0, 0.05).unwrap();
        assert_eq!((ci.lower, ci.upper), (0.7, 0.7));
        let hw = plugin_half_width(&art, 1.0, 0.05).unwrap();
        assert!((hw - 0.195_996_4).abs() < 1e-6);
        assert!(matches!(plugin_ci(&est, &art, 1.0, 1.0), Err(Error::InvalidAlpha(_))));
        assert!(matches!(plugin_ci(&est, &art, 1.0, 0.0), Err(Error::InvalidAlpha(_))));
    }
}
