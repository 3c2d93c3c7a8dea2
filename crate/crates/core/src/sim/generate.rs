//! Simulated instances `y = Xβ + ε` with Gaussian rows `X_i ~ N(0, Σ)`.

use rand::seq::index::sample;

use crate::data::RegressionData;
use crate::error::{Error, Result};
use crate::matrix::{cholesky, Matrix};
use crate::rng::{gaussian_stream_as, SeedSpec};
use crate::scalar::Scalar;
use crate::sim::config::{DesignSpec, SimConfig, TestedCoords};

const NULL_COORDS_TAG: u64 = 0x0c00_4d5;

/// Covariance with unit diagonal and off-diagonal `rho`.
pub fn equicorrelated<T: Scalar>(p: usize, rho: T) -> Matrix<T> {
    Matrix::from_fn(p, p, |i, j| if i == j { T::one() } else { rho })
}

pub fn design_covariance<T: Scalar>(spec: DesignSpec, p: usize) -> Matrix<T> {
    match spec {
        DesignSpec::Identity => Matrix::identity(p),
        DesignSpec::Equicorrelated(rho) => equicorrelated(p, T::lit(rho)),
    }
}

#[derive(Debug, Clone)]
pub struct Instance<T> {
    pub data: RegressionData<T>,
    pub beta_true: Vec<T>,
    pub eps: Vec<T>,
}

/// Everything about a study that does not change between replications.
#[derive(Debug, Clone)]
pub struct Simulator<T> {
    pub config: SimConfig,
    pub beta_true: Vec<T>,
    pub support: Vec<usize>,
    pub tested: Vec<usize>,
    /// Lower Cholesky factor of `Σ`; `None` for the identity.
    chol: Option<Matrix<T>>,
}

impl<T: Scalar> Simulator<T> {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let beta: Vec<f64> = config.beta();
        let support: Vec<usize> = (0..config.p).filter(|&k| beta[k] != 0.0).collect();
        let chol = match config.sigma_design {
            DesignSpec::Identity => None,
            DesignSpec::Equicorrelated(_) => {
                let cov = design_covariance::<T>(config.sigma_design, config.p);
                Some(cholesky(&cov).ok_or(Error::SingularCovariance)?)
            }
        };
        let tested = tested_coordinates(&config, &support);
        Ok(Self {
            beta_true: beta.iter().map(|&b| T::lit(b)).collect(),
            support,
            tested,
            chol,
            config,
        })
    }

    pub fn covariance(&self) -> Matrix<T> {
        design_covariance(self.config.sigma_design, self.config.p)
    }

    /// Instance for replication `rep`, a pure function of `(master_seed, rep)`.
    pub fn instance(&self, rep: u64) -> Result<Instance<T>> {
        let SimConfig { n, p, .. } = self.config;
        let draws: Vec<T> = gaussian_stream_as(SeedSpec::new(self.config.master_seed, rep), n * p + n);
        let (zs, noise) = draws.split_at(n * p);
        let x = match &self.chol {
            None => Matrix::from_fn(n, p, |i, j| zs[i * p + j]),
            Some(l) => {
                let mut x = Matrix::zeros(n, p);
                for i in 0..n {
                    let z = &zs[i * p..(i + 1) * p];
                    for k in 0..p {
                        let zk = z[k];
                        if zk == T::zero() {
                            continue;
                        }
                        // column k of L contributes L[j,k]·z_k to every j ≥ k
                        for j in k..p {
                            x[(i, j)] = x[(i, j)] + l[(j, k)] * zk;
                        }
                    }
                }
                x
            }
        };
        let mut data = RegressionData::new(x, vec![T::zero(); n])?;
        if self.config.standardize {
            data = data.standardize()?;
        }
        let sigma = T::lit(self.config.noise_sigma);
        let eps: Vec<T> = noise.iter().map(|&e| sigma * e).collect();
        let mean = data.x().mul_vec(&self.beta_true);
        let y = mean.iter().zip(&eps).map(|(&m, &e)| m + e).collect();
        Ok(Instance {
            data: data.with_response(y)?,
            beta_true: self.beta_true.clone(),
            eps,
        })
    }
}

/// Convenience wrapper building a [`Simulator`] for a single instance.
pub fn generate_instance<T: Scalar>(config: &SimConfig, rep: u64) -> Result<Instance<T>> {
    Simulator::new(config.clone())?.instance(rep)
}

/// Sorted coordinates the harness builds intervals for.
pub fn tested_coordinates(config: &SimConfig, support: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = match &config.tested_coords {
        TestedCoords::All => (0..config.p).collect(),
        TestedCoords::List(v) => v.clone(),
        TestedCoords::SupportPlusNull { null_count } => {
            let mut in_s = vec![false; config.p];
            support.iter().for_each(|&k| in_s[k] = true);
            let nulls: Vec<usize> = (0..config.p).filter(|&k| !in_s[k]).collect();
            let take = (*null_count).min(nulls.len());
            let mut rng = SeedSpec::new(config.master_seed, NULL_COORDS_TAG).rng();
            let mut v = support.to_vec();
            v.extend(sample(&mut rng, nulls.len(), take).into_iter().map(|i| nulls[i]));
            v
        }
    };
    out.sort_unstable();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(design: DesignSpec) -> SimConfig {
        SimConfig { n: 20, p: 8, s: 2, sigma_design: design, ..SimConfig::default() }
    }

    #[test]
    fn deterministic_in_seed_and_rep() {
        let sim = Simulator::<f64>::new(small(DesignSpec::Identity)).unwrap();
        let a = sim.instance(3).unwrap();
        let b = sim.instance(3).unwrap();
        let c = sim.instance(4).unwrap();
        assert_eq!(a.data, b.data);
        assert_ne!(a.data.y(), c.data.y());
    }

    #[test]
    fn zero_correlation_matches_identity_exactly() {
        let a = Simulator::<f64>::new(small(DesignSpec::Identity)).unwrap().instance(1).unwrap();
        let b = Simulator::<f64>::new(small(DesignSpec::Equicorrelated(0.0))).unwrap().instance(1).unwrap();
        assert_eq!(a.data, b.data);
    }

    #[test]
    fn response_is_signal_plus_noise() {
        let sim = Simulator::<f64>::new(small(DesignSpec::Equicorrelated(0.3))).unwrap();
        let inst = sim.instance(0).unwrap();
        let mean = inst.data.x().mul_vec(&inst.beta_true);
        for i in 0..20 {
            assert!((inst.data.y()[i] - mean[i] - inst.eps[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn standardize_flag() {
        let cfg = SimConfig { standardize: true, ..small(DesignSpec::Identity) };
        let inst = Simulator::<f64>::new(cfg).unwrap().instance(0).unwrap();
        assert!(inst.data.normalization_error() < 1e-12);
    }

    #[test]
    fn default_tested_set() {
        let cfg = SimConfig::default();
        let support: Vec<usize> = (0..20).collect();
        let t = tested_coordinates(&cfg, &support);
        assert_eq!(t.len(), 50);
        assert!(t.iter().take(20).copied().eq(0..20));
        assert_eq!(t, tested_coordinates(&cfg, &support));
        let cfg = SimConfig { master_seed: 1, ..cfg };
        assert_ne!(t, tested_coordinates(&cfg, &support));
    }

    #[test]
    fn equicorrelated_moment_check() {
        let cfg = SimConfig {
            n: 10_000,
            p: 2,
            s: 1,
            sigma_design: DesignSpec::Equicorrelated(0.2),
            ..SimConfig::default()
        };
        let inst = Simulator::<f64>::new(cfg).unwrap().instance(0).unwrap();
        let x = inst.data.x();
        let (a, b) = (x.col(0), x.col(1));
        let m = 10_000.0;
        let ma = a.iter().sum::<f64>() / m;
        let mb = b.iter().sum::<f64>() / m;
        let cov = a.iter().zip(b).map(|(u, v)| (u - ma) * (v - mb)).sum::<f64>() / m;
        let va = a.iter().map(|u| (u - ma).powi(2)).sum::<f64>() / m;
        let vb = b.iter().map(|v| (v - mb).powi(2)).sum::<f64>() / m;
        let corr = cov / (va * vb).sqrt();
        assert!((corr - 0.2).abs() < 0.03, "corr {corr}");
    }
}
