//! Replication loop and aggregation into a [`SimulationReport`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{
    bootstrap_refits, ddb_estimate, ddb_plugin_ci, percentile_ci, pivots, CiMethod, ConfidenceInterval,
};
use crate::debias::{debias, nodewise_direction, normal_cdf, plugin_ci};
use crate::diagnostics::{condition_report, population_condition_report, support_event, ConditionReport};
use crate::error::{Error, Result};
use crate::lasso::{fit_with_rule, LambdaRule, SolverConfig};
use crate::rng::SeedSpec;
use crate::scalar::Scalar;
use crate::sim::config::{LambdaChoice, SimConfig};
use crate::sim::generate::Simulator;

/// Per-method outcome for one tested coordinate in one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRecord {
    pub method: CiMethod,
    pub covered: bool,
    pub length: f64,
    /// Center of the interval's point estimate (DB for BS-DB and DB, DDB for DDB).
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordRecord {
    pub j: usize,
    pub beta_true: f64,
    pub in_support: bool,
    pub lasso: f64,
    pub db: f64,
    pub ddb: Option<f64>,
    pub r_db: f64,
    pub r_ddb: Option<f64>,
    pub intervals: Vec<MethodRecord>,
}

/// Sample-design conditions of one replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionSnapshot {
    pub kappa: f64,
    pub k1: f64,
    pub c_min: f64,
    pub s_tilde: usize,
    pub g_lasso: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub rep: u64,
    pub sigma_hat: f64,
    pub lambda: f64,
    pub support_size: usize,
    pub boot_failures: usize,
    pub omega0: Option<bool>,
    pub conditions: Option<ConditionSnapshot>,
    pub coords: Vec<CoordRecord>,
}

fn to_rule<T: Scalar>(config: &SimConfig) -> LambdaRule<T> {
    let multiplier = T::lit(config.lambda_multiplier);
    match config.lambda_rule {
        LambdaChoice::KnownSigma => LambdaRule::KnownSigma { sigma: T::lit(config.noise_sigma), multiplier },
        LambdaChoice::TwoStage => LambdaRule::TwoStage { multiplier },
        LambdaChoice::Fixed(v) => LambdaRule::Fixed(T::lit(v)),
    }
}

fn method_record<T: Scalar>(ci: &ConfidenceInterval<T>, estimate: T, beta: T) -> MethodRecord {
    MethodRecord {
        method: ci.method,
        covered: ci.contains(beta),
        length: ci.length().as_f64(),
        estimate: estimate.as_f64(),
        lower: ci.lower.as_f64(),
        upper: ci.upper.as_f64(),
    }
}

/// One full replication: data, Lasso, and every requested interval on the tested coordinates.
pub fn run_replication<T: Scalar>(sim: &Simulator<T>, rep: u64, solver: &SolverConfig<T>) -> Result<ReplicationRecord> {
    let config = &sim.config;
    let inst = sim.instance(rep)?;
    let data = &inst.data;
    let pf = fit_with_rule(data, &to_rule::<T>(config), solver)?;
    let fit = &pf.fit;
    let sigma_hat = pf.sigma_hat();
    if !(sigma_hat > T::zero()) {
        return Err(Error::ZeroSigma);
    }
    let lambda_j = config.nodewise_lambda.map(T::lit).unwrap_or(fit.lambda);
    let alpha = 1.0 - config.level;

    let refits = if config.needs_bootstrap() {
        Some(bootstrap_refits(data, fit, sigma_hat, config.boot, SeedSpec::new(config.master_seed, rep), solver)?)
    } else {
        None
    };

    let (omega0, conditions) = if config.diagnostics && !sim.support.is_empty() {
        let rep_cond = condition_report(data, &sim.support, None, &inst.beta_true, fit.lambda, T::lit(config.noise_sigma))?;
        let held = support_event(fit, &sim.support, &inst.beta_true, rep_cond.g_lasso);
        let snap = ConditionSnapshot {
            kappa: rep_cond.kappa.as_f64(),
            k1: rep_cond.k1.as_f64(),
            c_min: rep_cond.c_min.as_f64(),
            s_tilde: rep_cond.s_tilde,
            g_lasso: rep_cond.g_lasso.as_f64(),
        };
        (Some(held), Some(snap))
    } else {
        (None, None)
    };

    let mut in_support = vec![false; config.p];
    sim.support.iter().for_each(|&k| in_support[k] = true);

    let mut coords = Vec::with_capacity(sim.tested.len());
    for &j in &sim.tested {
        let art = nodewise_direction(data, j, lambda_j, solver)?;
        let est = debias(data, fit, &art)?;
        let beta = inst.beta_true[j];
        let dist = match &refits {
            Some(r) => Some(r.distribution(fit, &art)?),
            None => None,
        };
        let ddb = match &dist {
            Some(d) => Some(ddb_estimate(est.beta_db, d)?),
            None => None,
        };
        let piv = pivots(&est, ddb.unwrap_or(est.beta_db), &art, sigma_hat, beta)?;
        let mut intervals = Vec::with_capacity(config.methods.len());
        for &m in &config.methods {
            let rec = match m {
                CiMethod::BsDb => {
                    let d = dist.as_ref().expect("bootstrap ran");
                    method_record(&percentile_ci(est.beta_db, d, config.level)?, est.beta_db, beta)
                }
                CiMethod::Db => method_record(&plugin_ci(&est, &art, sigma_hat, alpha)?, est.beta_db, beta),
                CiMethod::DdbPlugin => {
                    let v = ddb.expect("bootstrap ran");
                    method_record(&ddb_plugin_ci(v, &art, sigma_hat, config.level)?, v, beta)
                }
            };
            intervals.push(rec);
        }
        coords.push(CoordRecord {
            j,
            beta_true: beta.as_f64(),
            in_support: in_support[j],
            lasso: est.beta_lasso.as_f64(),
            db: est.beta_db.as_f64(),
            ddb: ddb.map(|v| v.as_f64()),
            r_db: piv.r_j.as_f64(),
            r_ddb: ddb.map(|_| piv.r_j_ddb.as_f64()),
            intervals,
        });
    }

    Ok(ReplicationRecord {
        rep,
        sigma_hat: sigma_hat.as_f64(),
        lambda: fit.lambda.as_f64(),
        support_size: fit.support_size(),
        boot_failures: refits.as_ref().map_or(0, |r| r.refit_failures),
        omega0,
        conditions,
        coords,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: CiMethod,
    pub cov_s: f64,
    pub cov_sc: f64,
    pub len_s: f64,
    pub len_sc: f64,
    /// Number of (replication, coordinate) records on `S` and `Sᶜ`.
    pub records_s: usize,
    pub records_sc: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoefGroup {
    Zero,
    /// Nonzero but below the largest magnitude.
    Weak,
    /// At the largest magnitude.
    Strong,
}

impl CoefGroup {
    pub fn label(self) -> &'static str {
        match self {
            CoefGroup::Zero => "zero",
            CoefGroup::Weak => "weak",
            CoefGroup::Strong => "strong",
        }
    }
}

/// Mean estimation error `mean(estimate − βⱼ)` across replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasRow {
    pub j: usize,
    pub beta_true: f64,
    pub group: CoefGroup,
    pub lasso: f64,
    pub db: f64,
    pub ddb: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupBias {
    pub group: CoefGroup,
    pub coords: usize,
    /// Average over the group's coordinates of the per-coordinate mean error.
    pub lasso: f64,
    pub db: f64,
    pub ddb: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub reps: usize,
    pub mean_kappa: f64,
    pub mean_k1: f64,
    pub mean_c_min: f64,
    pub mean_s_tilde: f64,
    pub mean_g_lasso: f64,
    /// Population conditions of the design covariance.
    pub population: Option<ConditionReport<f64>>,
}

/// Kolmogorov–Smirnov distance of a coordinate's pivot sample from `N(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PivotCheck {
    pub j: usize,
    pub in_support: bool,
    pub ks_db: f64,
    pub ks_ddb: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub n: usize,
    pub p: usize,
    pub s: usize,
    pub boot: usize,
    pub level: f64,
    pub master_seed: u64,
    pub n_reps: usize,
    pub successful_reps: usize,
    pub failed_reps: usize,
    pub methods: Vec<MethodSummary>,
    pub mean_sigma_hat: f64,
    pub mean_lambda: f64,
    pub mean_support_size: f64,
    pub omega0_rate: Option<f64>,
    pub bias_table: Vec<BiasRow>,
    pub bias_groups: Vec<GroupBias>,
    pub condition_summary: Option<ConditionSummary>,
    pub pivots: Vec<PivotCheck>,
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = it.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

/// `sup_x |F_m(x) − Φ(x)|` for the empirical CDF of `sample`.
pub fn ks_distance_normal(sample: &[f64]) -> f64 {
    let mut s: Vec<f64> = sample.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let m = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal_cdf(x);
            ((i + 1) as f64 / m - f).max(f - i as f64 / m)
        })
        .fold(0.0, f64::max)
}

fn group_of(beta: f64, max_abs: f64) -> CoefGroup {
    if beta == 0.0 {
        CoefGroup::Zero
    } else if beta.abs() < max_abs {
        CoefGroup::Weak
    } else {
        CoefGroup::Strong
    }
}

/// Folds replication records into a report; records are processed in `rep` order.
pub fn aggregate(config: &SimConfig, records: &[ReplicationRecord], failed: usize) -> Result<SimulationReport> {
    if records.is_empty() {
        return Err(Error::AllReplicationsFailed(failed));
    }
    let mut recs: Vec<&ReplicationRecord> = records.iter().collect();
    recs.sort_by_key(|r| r.rep);

    let methods = config
        .methods
        .iter()
        .map(|&m| {
            let pick = |in_s: bool| {
                recs.iter()
                    .flat_map(|r| r.coords.iter())
                    .filter(move |c| c.in_support == in_s)
                    .flat_map(move |c| c.intervals.iter().filter(move |i| i.method == m))
            };
            MethodSummary {
                method: m,
                cov_s: mean(pick(true).map(|i| f64::from(u8::from(i.covered)))),
                cov_sc: mean(pick(false).map(|i| f64::from(u8::from(i.covered)))),
                len_s: mean(pick(true).map(|i| i.length)),
                len_sc: mean(pick(false).map(|i| i.length)),
                records_s: pick(true).count(),
                records_sc: pick(false).count(),
            }
        })
        .collect();

    let tested: Vec<(usize, f64, bool)> = recs[0].coords.iter().map(|c| (c.j, c.beta_true, c.in_support)).collect();
    let max_abs = tested.iter().map(|t| t.1.abs()).fold(0.0, f64::max);
    let column = |k: usize| recs.iter().map(move |r| &r.coords[k]);
    let bias_table: Vec<BiasRow> = tested
        .iter()
        .enumerate()
        .map(|(k, &(j, b, _))| BiasRow {
            j,
            beta_true: b,
            group: group_of(b, max_abs),
            lasso: mean(column(k).map(|c| c.lasso - b)),
            db: mean(column(k).map(|c| c.db - b)),
            ddb: column(k)
                .map(|c| c.ddb.map(|v| v - b))
                .collect::<Option<Vec<f64>>>()
                .map(|v| mean(v.into_iter())),
        })
        .collect();
    let bias_groups = [CoefGroup::Weak, CoefGroup::Strong, CoefGroup::Zero]
        .into_iter()
        .filter_map(|g| {
            let rows: Vec<&BiasRow> = bias_table.iter().filter(|r| r.group == g).collect();
            if rows.is_empty() {
                return None;
            }
            Some(GroupBias {
                group: g,
                coords: rows.len(),
                lasso: mean(rows.iter().map(|r| r.lasso)),
                db: mean(rows.iter().map(|r| r.db)),
                ddb: rows.iter().map(|r| r.ddb).collect::<Option<Vec<f64>>>().map(|v| mean(v.into_iter())),
            })
        })
        .collect();

    let pivots = tested
        .iter()
        .enumerate()
        .map(|(k, &(j, _, in_s))| PivotCheck {
            j,
            in_support: in_s,
            ks_db: ks_distance_normal(&column(k).map(|c| c.r_db).collect::<Vec<_>>()),
            ks_ddb: column(k)
                .map(|c| c.r_ddb)
                .collect::<Option<Vec<f64>>>()
                .map(|v| ks_distance_normal(&v)),
        })
        .collect();

    let omega: Vec<bool> = recs.iter().filter_map(|r| r.omega0).collect();
    let conds: Vec<ConditionSnapshot> = recs.iter().filter_map(|r| r.conditions).collect();
    let condition_summary = (!conds.is_empty()).then(|| ConditionSummary {
        reps: conds.len(),
        mean_kappa: mean(conds.iter().map(|c| c.kappa)),
        mean_k1: mean(conds.iter().map(|c| c.k1)),
        mean_c_min: mean(conds.iter().map(|c| c.c_min)),
        mean_s_tilde: mean(conds.iter().map(|c| c.s_tilde as f64)),
        mean_g_lasso: mean(conds.iter().map(|c| c.g_lasso)),
        population: None,
    });

    Ok(SimulationReport {
        n: config.n,
        p: config.p,
        s: config.s,
        boot: config.boot,
        level: config.level,
        master_seed: config.master_seed,
        n_reps: config.n_reps,
        successful_reps: recs.len(),
        failed_reps: failed,
        methods,
        mean_sigma_hat: mean(recs.iter().map(|r| r.sigma_hat)),
        mean_lambda: mean(recs.iter().map(|r| r.lambda)),
        mean_support_size: mean(recs.iter().map(|r| r.support_size as f64)),
        omega0_rate: (!omega.is_empty()).then(|| mean(omega.iter().map(|&h| f64::from(u8::from(h))))),
        bias_table,
        bias_groups,
        condition_summary,
        pivots,
    })
}

/// Worker count: explicit request, else `HDINFER_THREADS`, else rayon's default.
pub fn resolve_threads(requested: Option<usize>) -> usize {
    requested
        .or_else(|| std::env::var("HDINFER_THREADS").ok().and_then(|v| v.trim().parse().ok()))
        .filter(|&t| t > 0)
        .unwrap_or_else(rayon::current_num_threads)
}

/// Outcome of a run before aggregation.
#[derive(Debug, Clone)]
pub struct SimulationRun {
    pub records: Vec<ReplicationRecord>,
    /// `(rep, error message)` of failed replications.
    pub failures: Vec<(u64, String)>,
}

/// Runs every replication on a pool of `threads` workers (see [`resolve_threads`]).
pub fn run_replications<T: Scalar>(config: &SimConfig, threads: Option<usize>) -> Result<SimulationRun> {
    let sim = Simulator::<T>::new(config.clone())?;
    let solver = SolverConfig::<T>::default();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(resolve_threads(threads))
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let outcomes: Vec<(u64, Result<ReplicationRecord>)> = pool.install(|| {
        (0..config.n_reps as u64)
            .into_par_iter()
            .map(|rep| (rep, run_replication(&sim, rep, &solver)))
            .collect()
    });
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (rep, o) in outcomes {
        match o {
            Ok(r) => records.push(r),
            Err(e) => failures.push((rep, e.to_string())),
        }
    }
    Ok(SimulationRun { records, failures })
}

/// Full study: replications, failure ceiling, aggregation and population conditions.
pub fn run_simulation<T: Scalar>(config: &SimConfig, threads: Option<usize>) -> Result<SimulationReport> {
    let run = run_replications::<T>(config, threads)?;
    let failed = run.failures.len();
    if run.records.is_empty() {
        return Err(Error::AllReplicationsFailed(failed));
    }
    if failed as f64 > config.max_failure_rate * config.n_reps as f64 {
        return Err(Error::TooManyFailedReplications {
            failed,
            total: config.n_reps,
            ceiling: config.max_failure_rate,
        });
    }
    let mut report = aggregate(config, &run.records, failed)?;
    if let Some(summary) = report.condition_summary.as_mut() {
        summary.population = population_report(config, report.mean_lambda).ok();
    }
    Ok(report)
}

/// Population condition report of the configured design at penalty `lambda`.
pub fn population_report(config: &SimConfig, lambda: f64) -> Result<ConditionReport<f64>> {
    let sim = Simulator::<f64>::new(config.clone())?;
    population_condition_report(&sim.covariance(), &sim.support, &sim.beta_true, lambda, config.n, config.noise_sigma)
}
