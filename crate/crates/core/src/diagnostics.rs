//! Numeric evaluation of the design conditions behind the bootstrap theory,
//! the oracle estimator, and the exact Noise/Bias/Remainder split of the
//! debiased-Lasso error.
//!
//! Everything here needs the true support (and for the error split the true
//! coefficients and noise), so it is meant for simulations and for checking
//! a fitted model against a hypothesized support.

use serde::{Deserialize, Serialize};

use crate::data::RegressionData;
use crate::debias::DebiasArtifacts;
use crate::error::{Error, Result};
use crate::lasso::{residual, LassoFit};
use crate::matrix::{spd_inverse, spd_inverse_sqrt, symmetric_eigen, Matrix};
use crate::scalar::{dot, sgn, Scalar};

/// Population-covariance quantities that have no sample analogue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationExtras<T> {
    /// `max_j Σ_jj`.
    pub c_upper: T,
    /// `1 / max_j (Σ⁻¹)_jj`.
    pub c_lower: T,
    /// `(√s ∨ √log p)/√n`.
    pub c_n_small: T,
    /// `4√s·c_n/(1 − 2c_n)²`, the constant inflating the ℓ∞ band.
    pub c_n: T,
    /// `C_n ≥ 1` (or `c_n ≥ 1/2`): the sample size is outside the range where the band is informative.
    pub out_of_asymptotic_range: bool,
    /// Largest number of off-diagonal nonzeros in a column of `Σ⁻¹`.
    pub max_precision_col_sparsity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport<T> {
    /// Incoherence `‖Σ_{Sᶜ,S} Σ_{S,S}⁻¹‖∞`.
    pub kappa: T,
    /// `‖Σ_{S,S}⁻¹‖∞` (sample) or `‖Σ_{S,S}^{-1/2}‖∞²` (population).
    pub k1: T,
    /// `Λ_min(Σ_{S,S})`.
    pub c_min: T,
    /// `max |X_ij|`; sample reports only.
    pub k0: Option<T>,
    /// `‖z_j‖₄⁴/‖z_j‖₂⁴`, when a direction was supplied.
    pub z_fourth_ratio: Option<T>,
    /// `‖z_j‖₂²/n`, when a direction was supplied.
    pub z_energy: Option<T>,
    pub s: usize,
    /// Number of nonzero coefficients strictly inside the weak-signal band.
    pub s_tilde: usize,
    /// ℓ∞ error band for the Lasso (`g₁` sample, `g₂` population).
    pub g_lasso: T,
    /// ℓ∞ band for the bootstrap Lasso around `β̂` (`g₁′` sample, `g₂` population).
    pub g_bootstrap: T,
    /// Upper edge of the weak-signal band used for `s_tilde`.
    pub weak_band: T,
    pub population: Option<PopulationExtras<T>>,
}

impl<T: Scalar> ConditionReport<T> {
    /// Flat `key = value` lines; absent optional quantities are omitted.
    pub fn to_text(&self) -> String {
        let mut lines = vec![
            format!("kappa = {}", self.kappa),
            format!("k1 = {}", self.k1),
            format!("c_min = {}", self.c_min),
        ];
        let opt = [("k0", self.k0), ("z_fourth_ratio", self.z_fourth_ratio), ("z_energy", self.z_energy)];
        lines.extend(opt.iter().filter_map(|(k, v)| v.map(|v| format!("{k} = {v}"))));
        lines.push(format!("s = {}", self.s));
        lines.push(format!("s_tilde = {}", self.s_tilde));
        lines.push(format!("g_lasso = {}", self.g_lasso));
        lines.push(format!("g_bootstrap = {}", self.g_bootstrap));
        lines.push(format!("weak_band = {}", self.weak_band));
        if let Some(pop) = &self.population {
            lines.push(format!("c_upper = {}", pop.c_upper));
            lines.push(format!("c_lower = {}", pop.c_lower));
            lines.push(format!("c_n_small = {}", pop.c_n_small));
            lines.push(format!("c_n = {}", pop.c_n));
            lines.push(format!("out_of_asymptotic_range = {}", pop.out_of_asymptotic_range));
            lines.push(format!("max_precision_col_sparsity = {}", pop.max_precision_col_sparsity));
        }
        let mut out = lines.join("\n");
        out.push('\n');
        out
    }
}

fn check_support(support: &[usize], p: usize) -> Result<Vec<usize>> {
    if support.is_empty() {
        return Err(Error::EmptySupport);
    }
    let mut s = support.to_vec();
    s.sort_unstable();
    s.dedup();
    if let Some(&bad) = s.iter().find(|&&k| k >= p) {
        return Err(Error::IndexOutOfRange(bad, p));
    }
    Ok(s)
}

fn complement(support: &[usize], p: usize) -> Vec<usize> {
    let mut mask = vec![false; p];
    support.iter().for_each(|&k| mask[k] = true);
    (0..p).filter(|&k| !mask[k]).collect()
}

/// Support Gram `X_Sᵀ X_S / n` and its inverse.
pub fn support_gram_inverse<T: Scalar>(data: &RegressionData<T>, support: &[usize]) -> Result<(Matrix<T>, Matrix<T>)> {
    let nf = T::lit(data.n() as f64);
    let gram = data.x().cross_gram(support, support, nf);
    let inv = spd_inverse(&gram).ok_or(Error::SingularSupportGram)?;
    Ok((gram, inv))
}

fn count_weak<T: Scalar>(beta: &[T], band: T) -> usize {
    beta.iter().filter(|b| **b != T::zero() && b.abs() < band).count()
}

/// `g₁(λ) = K₁λ + 8σ√(2 log p / (C_min n))`.
pub fn g1<T: Scalar>(k1: T, c_min: T, lambda: T, sigma: T, n: usize, p: usize) -> T {
    k1 * lambda + T::lit(8.0) * sigma * log_term(c_min, n, p)
}

/// `g₁′(λ) = K₁λ + 2σ√(2 log p / (C_min n))`.
pub fn g1_bootstrap<T: Scalar>(k1: T, c_min: T, lambda: T, sigma: T, n: usize, p: usize) -> T {
    k1 * lambda + T::lit(2.0) * sigma * log_term(c_min, n, p)
}

fn log_term<T: Scalar>(c_min: T, n: usize, p: usize) -> T {
    (T::lit(2.0) * T::lit(p as f64).ln() / (c_min * T::lit(n as f64))).sqrt()
}

/// Sample-design condition report for support `support`.
///
/// `sigma` is the noise scale entering the ℓ∞ bands (the true one in
/// simulations, otherwise an estimate).
pub fn condition_report<T: Scalar>(
    data: &RegressionData<T>,
    support: &[usize],
    art: Option<&DebiasArtifacts<T>>,
    beta_true: &[T],
    lambda: T,
    sigma: T,
) -> Result<ConditionReport<T>> {
    let p = data.p();
    let n = data.n();
    if beta_true.len() != p {
        return Err(Error::LengthMismatch { expected: p, got: beta_true.len() });
    }
    let s_idx = check_support(support, p)?;
    let (gram, inv) = support_gram_inverse(data, &s_idx)?;
    let x = data.x();
    let nf = T::lit(n as f64);

    // A = X_S · inv, so row k of Σ_{Sᶜ,S}Σ_{S,S}⁻¹ is x_kᵀA/n.
    let xs = Matrix::from_fn(n, s_idx.len(), |i, c| x[(i, s_idx[c])]);
    let a = xs.matmul(&inv);
    let kappa = complement(&s_idx, p)
        .iter()
        .map(|&k| {
            let xk = x.col(k);
            (0..s_idx.len()).map(|c| (dot(xk, a.col(c)) / nf).abs()).sum::<T>()
        })
        .fold(T::zero(), T::max);
    let k1 = inv.inf_norm();
    let (eig, _) = symmetric_eigen(&gram);
    let c_min = eig[0];
    if !(c_min > T::zero()) {
        return Err(Error::SingularSupportGram);
    }
    let g_lasso = g1(k1, c_min, lambda, sigma, n, p);
    let g_boot = g1_bootstrap(k1, c_min, lambda, sigma, n, p);
    let band = g_lasso + g_boot;
    Ok(ConditionReport {
        kappa,
        k1,
        c_min,
        k0: Some(x.max_abs()),
        z_fourth_ratio: art.map(|a| a.z_fourth_ratio),
        z_energy: art.map(|a| a.z_energy),
        s: s_idx.len(),
        s_tilde: count_weak(beta_true, band),
        g_lasso,
        g_bootstrap: g_boot,
        weak_band: band,
        population: None,
    })
}

/// Condition report for a Gaussian design with covariance `sigma_mat`.
pub fn population_condition_report<T: Scalar>(
    sigma_mat: &Matrix<T>,
    support: &[usize],
    beta_true: &[T],
    lambda: T,
    n: usize,
    noise_sigma: T,
) -> Result<ConditionReport<T>> {
    let p = sigma_mat.nrows();
    if sigma_mat.ncols() != p {
        return Err(Error::InvalidData("covariance must be square".into()));
    }
    if beta_true.len() != p {
        return Err(Error::LengthMismatch { expected: p, got: beta_true.len() });
    }
    let s_idx = check_support(support, p)?;
    let sc = complement(&s_idx, p);
    let sigma_ss = sigma_mat.select(&s_idx, &s_idx);
    let inv_ss = spd_inverse(&sigma_ss).ok_or(Error::SingularCovariance)?;
    let kappa = if sc.is_empty() {
        T::zero()
    } else {
        sigma_mat.select(&sc, &s_idx).matmul(&inv_ss).inf_norm()
    };
    let inv_sqrt = spd_inverse_sqrt(&sigma_ss).ok_or(Error::SingularCovariance)?;
    let k1n = inv_sqrt.inf_norm();
    let k1 = k1n * k1n;
    let (eig, _) = symmetric_eigen(&sigma_ss);
    let c_min = eig[0];

    let full_inv = spd_inverse(sigma_mat).ok_or(Error::SingularCovariance)?;
    let c_upper = (0..p).map(|j| sigma_mat[(j, j)]).fold(T::zero(), T::max);
    let c_lower = T::one() / (0..p).map(|j| full_inv[(j, j)]).fold(T::zero(), T::max);
    let tol = full_inv.max_abs() * T::lit(1e-10);
    let max_precision_col_sparsity = (0..p)
        .map(|j| (0..p).filter(|&i| i != j && full_inv[(i, j)].abs() > tol).count())
        .max()
        .unwrap_or(0);

    let s = T::lit(s_idx.len() as f64);
    let nf = T::lit(n as f64);
    let logp = T::lit(p as f64).ln();
    let c_n_small = s.sqrt().max(logp.sqrt()) / nf.sqrt();
    let two = T::lit(2.0);
    let denom = (T::one() - two * c_n_small) * (T::one() - two * c_n_small);
    let c_n = T::lit(4.0) * s.sqrt() * c_n_small / denom;
    let out_of_range = c_n >= T::one() || c_n_small >= T::lit(0.5);
    let g2 = (T::one() + c_n) * k1 * lambda + T::lit(4.0) * noise_sigma * (logp / (c_min * nf)).sqrt();
    let band = two * g2;
    Ok(ConditionReport {
        kappa,
        k1,
        c_min,
        k0: None,
        z_fourth_ratio: None,
        z_energy: None,
        s: s_idx.len(),
        s_tilde: count_weak(beta_true, band),
        g_lasso: g2,
        g_bootstrap: g2,
        weak_band: band,
        population: Some(PopulationExtras {
            c_upper,
            c_lower,
            c_n_small,
            c_n,
            out_of_asymptotic_range: out_of_range,
            max_precision_col_sparsity,
        }),
    })
}

/// Oracle estimator: `β_S + G⁻¹X_Sᵀε/n − λG⁻¹sgn(β_S)` on `S` (with `G = X_SᵀX_S/n`), zero elsewhere.
pub fn oracle_estimator<T: Scalar>(
    data: &RegressionData<T>,
    support: &[usize],
    beta_true: &[T],
    eps: &[T],
    lambda: T,
) -> Result<Vec<T>> {
    let p = data.p();
    if beta_true.len() != p {
        return Err(Error::LengthMismatch { expected: p, got: beta_true.len() });
    }
    if eps.len() != data.n() {
        return Err(Error::LengthMismatch { expected: data.n(), got: eps.len() });
    }
    let s_idx = check_support(support, p)?;
    let (_, inv) = support_gram_inverse(data, &s_idx)?;
    let nf = T::lit(data.n() as f64);
    let rhs: Vec<T> = s_idx
        .iter()
        .map(|&k| dot(data.x().col(k), eps) / nf - lambda * sgn(beta_true[k]))
        .collect();
    let shift = inv.mul_vec(&rhs);
    let mut out = vec![T::zero(); p];
    for (c, &k) in s_idx.iter().enumerate() {
        out[k] = beta_true[k] + shift[c];
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RemainderForm {
    /// `Ŝ ⊆ S`: `λ·v_S G⁻¹[sgn(β̂_S) − sgn(β_S)]` with the KKT subgradient on zero coordinates.
    SignForm,
    /// Fallback `total − noise − bias`.
    Difference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorDecomposition<T> {
    pub noise: T,
    pub bias: T,
    pub remainder: T,
    /// `β̂ⱼ^DB − βⱼ`.
    pub total: T,
    pub form: RemainderForm,
}

impl<T: Scalar> ErrorDecomposition<T> {
    /// `total − (noise + bias + remainder)`.
    pub fn identity_residual(&self) -> T {
        self.total - (self.noise + self.bias + self.remainder)
    }
}

/// Splits `β̂ⱼ^DB − βⱼ` into Noise, Bias and Remainder for the direction in `art`.
///
/// Expanding the estimate gives `β̂ⱼ^DB − βⱼ = z_jᵀε/z_jᵀx_j − u(β̂ − β)` with
/// `u = Xᵀz_j/z_jᵀx_j − e_j`. With `G = X_SᵀX_S/n`:
/// Noise `= z_jᵀε/z_jᵀx_j − u_S G⁻¹ X_Sᵀε/n`, Bias `= λ u_S G⁻¹ sgn(β_S)` and
/// Remainder `= u(β̂° − β̂)`, which is `λ u_S G⁻¹ (ŝ_S − sgn(β_S))` when `Ŝ ⊆ S`.
pub fn decompose_error<T: Scalar>(
    data: &RegressionData<T>,
    support: &[usize],
    beta_true: &[T],
    eps: &[T],
    fit: &LassoFit<T>,
    art: &DebiasArtifacts<T>,
    lambda: T,
) -> Result<ErrorDecomposition<T>> {
    let p = data.p();
    let n = data.n();
    if beta_true.len() != p || fit.beta_hat.len() != p {
        return Err(Error::LengthMismatch { expected: p, got: beta_true.len().min(fit.beta_hat.len()) });
    }
    if eps.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: eps.len() });
    }
    let s_idx = check_support(support, p)?;
    let (_, inv) = support_gram_inverse(data, &s_idx)?;
    let x = data.x();
    let nf = T::lit(n as f64);
    let j = art.j;

    let u_s: Vec<T> = s_idx
        .iter()
        .map(|&k| {
            let e = if k == j { T::one() } else { T::zero() };
            dot(&art.z, x.col(k)) / art.denom - e
        })
        .collect();
    // inverse is symmetric, so u_Sᵀ G⁻¹ = (G⁻¹ u_S)ᵀ
    let w = inv.mul_vec(&u_s);

    let xs_eps: Vec<T> = s_idx.iter().map(|&k| dot(x.col(k), eps) / nf).collect();
    let noise = dot(&art.z, eps) / art.denom - dot(&w, &xs_eps);
    let sgn_beta: Vec<T> = s_idx.iter().map(|&k| sgn(beta_true[k])).collect();
    let bias = lambda * dot(&w, &sgn_beta);

    let r = residual(x, data.y(), &fit.beta_hat);
    let beta_db = fit.beta_hat[j] + dot(&art.z, &r) / art.denom;
    let total = beta_db - beta_true[j];

    let mut in_support = vec![false; p];
    s_idx.iter().for_each(|&k| in_support[k] = true);
    let nested = fit.active_set.iter().all(|&k| in_support[k]);
    let (remainder, form) = if nested {
        let sub: Vec<T> = s_idx
            .iter()
            .map(|&k| {
                let b = fit.beta_hat[k];
                if b != T::zero() {
                    sgn(b)
                } else {
                    dot(x.col(k), &r) / (nf * lambda)
                }
            })
            .collect();
        let diff: Vec<T> = sub.iter().zip(&sgn_beta).map(|(&a, &b)| a - b).collect();
        (lambda * dot(&w, &diff), RemainderForm::SignForm)
    } else {
        (total - noise - bias, RemainderForm::Difference)
    };
    Ok(ErrorDecomposition { noise, bias, remainder, total, form })
}

/// Bound `2K₁·s̃·λ·λ_j / (z_jᵀx_j/n)` on the Remainder when the ℓ∞ event holds.
pub fn remainder_bound<T: Scalar>(k1: T, s_tilde: usize, lambda: T, lambda_j: T, denom: T, n: usize) -> T {
    T::lit(2.0) * k1 * T::lit(s_tilde as f64) * lambda * lambda_j / (denom / T::lit(n as f64))
}

/// `Ŝ ⊆ S` and `‖β̂_S − β_S‖∞ ≤ band`.
pub fn support_event<T: Scalar>(fit: &LassoFit<T>, support: &[usize], beta_true: &[T], band: T) -> bool {
    let p = fit.beta_hat.len();
    let mut in_support = vec![false; p];
    support.iter().filter(|&&k| k < p).for_each(|&k| in_support[k] = true);
    fit.active_set.iter().all(|&k| in_support[k])
        && support
            .iter()
            .all(|&k| (fit.beta_hat[k] - beta_true[k]).abs() <= band)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hadamard4() -> RegressionData<f64> {
        let x = Matrix::from_rows(&[
            vec![1.0, 1.0, 1.0, 1.0],
            vec![1.0, -1.0, 1.0, -1.0],
            vec![1.0, 1.0, -1.0, -1.0],
            vec![1.0, -1.0, -1.0, 1.0],
        ])
        .unwrap();
        RegressionData::new(x, vec![0.0; 4]).unwrap()
    }

    #[test]
    fn identity_gram_report() {
        let d = hadamard4();
        let beta = vec![2.0, -2.0, 0.0, 0.0];
        let r = condition_report(&d, &[0, 1], None, &beta, 0.1, 1.0).unwrap();
        assert!(r.kappa.abs() < 1e-14);
        assert!((r.k1 - 1.0).abs() < 1e-14);
        assert!((r.c_min - 1.0).abs() < 1e-14);
        assert_eq!(r.k0, Some(1.0));
        assert_eq!(r.s, 2);
    }

    #[test]
    fn weak_count_open_band() {
        let d = hadamard4();
        let beta = vec![2.0, -2.0, 0.0, 0.0];
        // band well below 2
        let r = condition_report(&d, &[0, 1], None, &beta, 0.01, 0.01).unwrap();
        assert!(r.weak_band < 2.0);
        assert_eq!(r.s_tilde, 0);
        // band above 2
        let r = condition_report(&d, &[0, 1], None, &beta, 5.0, 0.01).unwrap();
        assert_eq!(r.s_tilde, 2);
    }

    #[test]
    fn singular_support_gram() {
        let x = Matrix::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0], vec![0.5, 0.5]]).unwrap();
        let d = RegressionData::new(x, vec![0.0; 3]).unwrap();
        let r = condition_report(&d, &[0, 1], None, &[1.0, 1.0], 0.1, 1.0);
        assert!(matches!(r, Err(Error::SingularSupportGram)));
        assert!(matches!(
            condition_report(&d, &[], None, &[1.0, 1.0], 0.1, 1.0),
            Err(Error::EmptySupport)
        ));
    }

    #[test]
    fn oracle_pure_shrinkage() {
        let d = hadamard4();
        let beta = vec![2.0, -1.5, 0.0, 0.0];
        let o = oracle_estimator(&d, &[0, 1], &beta, &[0.0; 4], 0.25).unwrap();
        assert!((o[0] - 1.75).abs() < 1e-14);
        assert!((o[1] + 1.25).abs() < 1e-14);
        assert_eq!(&o[2..], &[0.0, 0.0]);
    }

    #[test]
    fn oracle_unpenalized_limit() {
        let d = hadamard4();
        let beta = vec![0.3, -0.7, 0.0, 0.0];
        let o = oracle_estimator(&d, &[0, 1], &beta, &[0.0; 4], 1e-300).unwrap();
        assert_eq!(o, beta);
    }

    #[test]
    fn identity_population() {
        let sigma: Matrix<f64> = Matrix::identity(6);
        let beta = vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        let r = population_condition_report(&sigma, &[0, 1], &beta, 0.1, 1000, 1.0).unwrap();
        let pop = r.population.unwrap();
        assert_eq!(pop.c_upper, 1.0);
        assert!((pop.c_lower - 1.0).abs() < 1e-14);
        assert!((r.c_min - 1.0).abs() < 1e-14);
        assert!(r.kappa.abs() < 1e-14);
        assert!((r.k1 - 1.0).abs() < 1e-12);
        assert_eq!(pop.max_precision_col_sparsity, 0);
        let text = r.to_text();
        assert!(text.lines().any(|l| l == "c_upper = 1"));
        assert!(!text.contains("k0"));
        assert!(text.lines().all(|l| l.split_once(" = ").is_some()));
    }

    #[test]
    fn remainder_bound_formula() {
        let b = remainder_bound::<f64>(2.0, 3, 0.1, 0.2, 50.0, 100);
        assert!((b - 2.0 * 2.0 * 3.0 * 0.1 * 0.2 / 0.5).abs() < 1e-15);
    }
}
