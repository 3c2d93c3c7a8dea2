//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use hdinfer::{Matrix, RegressionData};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Solves `a·x = b` by Gaussian elimination with partial pivoting; `None` if singular.
pub fn solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let k = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(r, &v)| r.iter().copied().chain([v]).collect()).collect();
    for c in 0..k {
        let piv = (c..k).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))?;
        if m[piv][c].abs() < 1e-13 {
            return None;
        }
        m.swap(c, piv);
        for r in 0..k {
            if r != c {
                let f = m[r][c] / m[c][c];
                for cc in c..=k {
                    m[r][cc] -= f * m[c][cc];
                }
            }
        }
    }
    Some((0..k).map(|r| m[r][k] / m[r][r]).collect())
}

/// Dense inverse via [`solve`] on unit vectors.
pub fn inverse(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let k = a.len();
    let cols: Option<Vec<Vec<f64>>> = (0..k)
        .map(|c| solve(a, &(0..k).map(|r| f64::from(u8::from(r == c))).collect::<Vec<_>>()))
        .collect();
    let cols = cols?;
    Some((0..k).map(|r| (0..k).map(|c| cols[c][r]).collect()).collect())
}

pub fn col(x: &Matrix<f64>, j: usize) -> Vec<f64> {
    (0..x.nrows()).map(|i| x[(i, j)]).collect()
}

pub fn dotp(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

pub fn objective(x: &Matrix<f64>, y: &[f64], b: &[f64], lambda: f64) -> f64 {
    let n = x.nrows();
    let r: Vec<f64> = (0..n).map(|i| y[i] - (0..x.ncols()).map(|j| x[(i, j)] * b[j]).sum::<f64>()).collect();
    dotp(&r, &r) / (2.0 * n as f64) + lambda * b.iter().map(|v| v.abs()).sum::<f64>()
}

/// KKT gap recomputed from scratch, optionally leaving one column out.
pub fn kkt_gap(x: &Matrix<f64>, y: &[f64], b: &[f64], lambda: f64, skip: Option<usize>) -> f64 {
    let n = x.nrows();
    let r: Vec<f64> = (0..n).map(|i| y[i] - (0..x.ncols()).map(|j| x[(i, j)] * b[j]).sum::<f64>()).collect();
    (0..x.ncols())
        .filter(|&j| Some(j) != skip)
        .map(|j| {
            let g = dotp(&col(x, j), &r) / n as f64;
            if b[j] != 0.0 {
                (g - lambda * b[j].signum()).abs()
            } else {
                (g.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Lasso minimizer by enumerating all `3^p` sign patterns.
///
/// For each pattern with active set `A` and signs `s_A`, solves
/// `X_AᵀX_A b_A / n = X_Aᵀy/n − λ s_A`, keeps solutions whose signs agree with the
/// pattern and whose inactive correlations satisfy `|x_kᵀr/n| ≤ λ`, and returns the
/// feasible candidate with the smallest objective.
pub fn sign_pattern_lasso(x: &Matrix<f64>, y: &[f64], lambda: f64) -> Vec<f64> {
    let (n, p) = (x.nrows(), x.ncols());
    let nf = n as f64;
    let cols: Vec<Vec<f64>> = (0..p).map(|j| col(x, j)).collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for code in 0..3usize.pow(p as u32) {
        let mut c = code;
        let signs: Vec<i8> = (0..p)
            .map(|_| {
                let s = (c % 3) as i8 - 1;
                c /= 3;
                s
            })
            .collect();
        let act: Vec<usize> = (0..p).filter(|&j| signs[j] != 0).collect();
        let mut b = vec![0.0; p];
        if !act.is_empty() {
            let g: Vec<Vec<f64>> =
                act.iter().map(|&a| act.iter().map(|&c| dotp(&cols[a], &cols[c]) / nf).collect()).collect();
            let rhs: Vec<f64> = act.iter().map(|&a| dotp(&cols[a], y) / nf - lambda * f64::from(signs[a])).collect();
            let Some(sol) = solve(&g, &rhs) else { continue };
            if act.iter().zip(&sol).any(|(&a, &v)| v * f64::from(signs[a]) <= 0.0) {
                continue;
            }
            for (&a, &v) in act.iter().zip(&sol) {
                b[a] = v;
            }
        }
        let r: Vec<f64> = (0..n).map(|i| y[i] - (0..p).map(|j| x[(i, j)] * b[j]).sum::<f64>()).collect();
        let feasible = (0..p)
            .filter(|&k| signs[k] == 0)
            .all(|k| (dotp(&cols[k], &r) / nf).abs() <= lambda * (1.0 + 1e-9));
        if !feasible {
            continue;
        }
        let obj = objective(x, y, &b, lambda);
        if best.as_ref().map_or(true, |(o, _)| obj < *o) {
            best = Some((obj, b));
        }
    }
    best.expect("some sign pattern is optimal").1
}

/// Gaussian design and response with a few nonzero coefficients, columns standardized.
pub fn random_instance(seed: u64, n: usize, p: usize, s: usize, amp: f64, noise: f64) -> (RegressionData<f64>, Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Matrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let data = RegressionData::new(x, vec![0.0; n]).unwrap().standardize().unwrap();
    let beta: Vec<f64> = (0..p)
        .map(|j| if j < s { amp * if j % 2 == 0 { 1.0 } else { -1.0 } } else { 0.0 })
        .collect();
    let eps: Vec<f64> = (0..n).map(|_| noise * rng.sample::<f64, _>(StandardNormal)).collect();
    let mean = data.x().mul_vec(&beta);
    let y = mean.iter().zip(&eps).map(|(m, e)| m + e).collect();
    (data.with_response(y).unwrap(), beta, eps)
}
