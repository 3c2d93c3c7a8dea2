//! Simulation configuration and its flat `key = value` file format.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bootstrap::CiMethod;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BetaSpec {
    /// `β_1 = … = β_s = 2`.
    SettingI,
    /// `β_1..β_5 = 1`, `β_6..β_s = 2`.
    SettingII,
    /// Leading coefficients given explicitly; the rest are zero.
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DesignSpec {
    Identity,
    /// Unit diagonal, constant off-diagonal correlation.
    Equicorrelated(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TestedCoords {
    /// All of `S` plus `null_count` pseudo-random coordinates from `Sᶜ`.
    SupportPlusNull { null_count: usize },
    All,
    List(Vec<usize>),
}

/// Penalty rule used by the harness for both the regression and nodewise fits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LambdaChoice {
    /// `multiplier · noise_sigma · √(2 log p / n)` with the simulation's true noise scale.
    KnownSigma,
    /// Pilot from the response spread, then refit with the estimated σ̂.
    TwoStage,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub p: usize,
    pub s: usize,
    pub beta_spec: BetaSpec,
    pub sigma_design: DesignSpec,
    pub noise_sigma: f64,
    pub n_reps: usize,
    /// Bootstrap resamples per replication.
    pub boot: usize,
    pub level: f64,
    pub tested_coords: TestedCoords,
    pub master_seed: u64,
    pub methods: Vec<CiMethod>,
    pub lambda_rule: LambdaChoice,
    pub lambda_multiplier: f64,
    /// Nodewise penalty; `None` reuses the regression penalty.
    pub nodewise_lambda: Option<f64>,
    /// Rescale simulated columns to `‖x_j‖₂² = n` exactly.
    pub standardize: bool,
    /// Compute per-replication condition reports and the support event.
    pub diagnostics: bool,
    /// Abort when more than this fraction of replications fail.
    pub max_failure_rate: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 100,
            p: 500,
            s: 20,
            beta_spec: BetaSpec::SettingI,
            sigma_design: DesignSpec::Identity,
            noise_sigma: 1.0,
            n_reps: 1000,
            boot: 500,
            level: 0.95,
            tested_coords: TestedCoords::SupportPlusNull { null_count: 30 },
            master_seed: 20_190_101,
            methods: CiMethod::ALL.to_vec(),
            lambda_rule: LambdaChoice::KnownSigma,
            lambda_multiplier: std::f64::consts::FRAC_1_SQRT_2,
            nodewise_lambda: None,
            standardize: false,
            diagnostics: true,
            max_failure_rate: 0.05,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if self.n < 2 || self.p < 1 {
            return err(format!("need n >= 2 and p >= 1, got n={} p={}", self.n, self.p));
        }
        if self.s > self.p {
            return err(format!("s = {} exceeds p = {}", self.s, self.p));
        }
        if self.n_reps < 1 {
            return err("n_reps must be at least 1".into());
        }
        if self.boot < 1 && self.needs_bootstrap() {
            return err("B must be at least 1".into());
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return err(format!("level {} must lie in (0, 1)", self.level));
        }
        if !(self.noise_sigma > 0.0) || !self.noise_sigma.is_finite() {
            return err(format!("noise_sigma {} must be positive", self.noise_sigma));
        }
        if !(self.lambda_multiplier > 0.0) {
            return err(format!("lambda_multiplier {} must be positive", self.lambda_multiplier));
        }
        if let LambdaChoice::Fixed(l) = self.lambda_rule {
            if !(l > 0.0) {
                return err(format!("fixed lambda {l} must be positive"));
            }
        }
        if let Some(l) = self.nodewise_lambda {
            if !(l > 0.0) {
                return err(format!("nodewise_lambda {l} must be positive"));
            }
        }
        if let DesignSpec::Equicorrelated(rho) = self.sigma_design {
            let lo = if self.p > 1 { -1.0 / (self.p as f64 - 1.0) } else { -1.0 };
            if !(rho > lo && rho < 1.0) {
                return err(format!("rho {rho} must lie in ({lo}, 1)"));
            }
        }
        match &self.beta_spec {
            BetaSpec::Custom(v) => {
                if v.len() > self.p {
                    return err(format!("custom beta has {} entries for p = {}", v.len(), self.p));
                }
                let nz = v.iter().filter(|b| **b != 0.0).count();
                if nz != self.s {
                    return err(format!("custom beta has {nz} nonzeros but s = {}", self.s));
                }
                if v.iter().any(|b| !b.is_finite()) {
                    return err("custom beta must be finite".into());
                }
            }
            BetaSpec::SettingI | BetaSpec::SettingII => {}
        }
        if let TestedCoords::List(v) = &self.tested_coords {
            if v.is_empty() {
                return err("tested_coords list is empty".into());
            }
            if let Some(bad) = v.iter().find(|&&j| j >= self.p) {
                return err(format!("tested coordinate {bad} out of range for p = {}", self.p));
            }
        }
        if !(0.0..1.0).contains(&self.max_failure_rate) {
            return err(format!("max_failure_rate {} must lie in [0, 1)", self.max_failure_rate));
        }
        Ok(())
    }

    pub fn needs_bootstrap(&self) -> bool {
        self.methods.iter().any(|m| matches!(m, CiMethod::BsDb | CiMethod::DdbPlugin))
    }

    /// True coefficient vector of length `p`.
    pub fn beta(&self) -> Vec<f64> {
        let mut beta = vec![0.0; self.p];
        match &self.beta_spec {
            BetaSpec::SettingI => beta.iter_mut().take(self.s).for_each(|b| *b = 2.0),
            BetaSpec::SettingII => {
                for (k, b) in beta.iter_mut().take(self.s).enumerate() {
                    *b = if k < 5 { 1.0 } else { 2.0 };
                }
            }
            BetaSpec::Custom(v) => beta[..v.len()].copy_from_slice(v),
        }
        beta
    }

    /// Parses the flat `key = value` format; `#` starts a comment and unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = SimConfig::default();
        let mut seen = BTreeSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
            cfg.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<F: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<F, String> {
            v.parse::<F>().map_err(|_| format!("`{key}`: cannot parse `{v}`"))
        }
        fn boolean(key: &str, v: &str) -> std::result::Result<bool, String> {
            match v.to_ascii_lowercase().as_str() {
                "true" | "yes" | "1" | "on" => Ok(true),
                "false" | "no" | "0" | "off" => Ok(false),
                _ => Err(format!("`{key}`: expected a boolean, got `{v}`")),
            }
        }
        fn list<F: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<Vec<F>, String> {
            v.split(',').filter(|t| !t.trim().is_empty()).map(|t| num(key, t.trim())).collect()
        }
        fn arg<'a>(v: &'a str, name: &str) -> Option<&'a str> {
            let lower = v.to_ascii_lowercase();
            let rest = lower.strip_prefix(name)?;
            let start = v.len() - rest.len();
            let rest = &v[start..];
            rest.strip_prefix(':')
                .or_else(|| rest.strip_prefix('(').and_then(|r| r.strip_suffix(')')))
        }
        match key {
            "n" => self.n = num(key, value)?,
            "p" => self.p = num(key, value)?,
            "s" => self.s = num(key, value)?,
            "beta_spec" => {
                self.beta_spec = match value.to_ascii_lowercase().as_str() {
                    "setting_i" | "i" => BetaSpec::SettingI,
                    "setting_ii" | "ii" => BetaSpec::SettingII,
                    _ => match arg(value, "custom") {
                        Some(rest) => BetaSpec::Custom(list(key, rest)?),
                        None => return Err(format!("unknown beta_spec `{value}`")),
                    },
                }
            }
            "sigma_design" => {
                self.sigma_design = if value.eq_ignore_ascii_case("identity") {
                    DesignSpec::Identity
                } else if let Some(rest) = arg(value, "equicorrelated") {
                    DesignSpec::Equicorrelated(num(key, rest.trim())?)
                } else {
                    return Err(format!("unknown sigma_design `{value}`"));
                }
            }
            "noise_sigma" => self.noise_sigma = num(key, value)?,
            "n_reps" => self.n_reps = num(key, value)?,
            "B" | "boot" => self.boot = num(key, value)?,
            "level" => self.level = num(key, value)?,
            "tested_coords" => {
                self.tested_coords = match value.to_ascii_lowercase().as_str() {
                    "all" => TestedCoords::All,
                    "default" => TestedCoords::SupportPlusNull { null_count: 30 },
                    _ => match arg(value, "support_plus") {
                        Some(rest) => TestedCoords::SupportPlusNull { null_count: num(key, rest.trim())? },
                        None => TestedCoords::List(list(key, value)?),
                    },
                }
            }
            "master_seed" => self.master_seed = num(key, value)?,
            "methods" => {
                let mut methods = Vec::new();
                for tok in value.split(',').map(str::trim).filter(|t| !t.is_empty()) {
                    let m = CiMethod::parse(tok).ok_or_else(|| format!("unknown method `{tok}`"))?;
                    if !methods.contains(&m) {
                        methods.push(m);
                    }
                }
                methods.sort();
                self.methods = methods;
            }
            "lambda_rule" => {
                self.lambda_rule = match value.to_ascii_lowercase().as_str() {
                    "known_sigma" => LambdaChoice::KnownSigma,
                    "two_stage" => LambdaChoice::TwoStage,
                    _ => match arg(value, "fixed") {
                        Some(rest) => LambdaChoice::Fixed(num(key, rest.trim())?),
                        None => return Err(format!("unknown lambda_rule `{value}`")),
                    },
                }
            }
            "lambda_multiplier" => self.lambda_multiplier = num(key, value)?,
            "nodewise_lambda" => {
                self.nodewise_lambda = if value.eq_ignore_ascii_case("same") {
                    None
                } else {
                    Some(num(key, value)?)
                }
            }
            "standardize" => self.standardize = boolean(key, value)?,
            "diagnostics" => self.diagnostics = boolean(key, value)?,
            "max_failure_rate" => self.max_failure_rate = num(key, value)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Renders the config in the same `key = value` format [`SimConfig::parse`] reads.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let _ = writeln!(out, "n = {}", self.n);
        let _ = writeln!(out, "p = {}", self.p);
        let _ = writeln!(out, "s = {}", self.s);
        let beta = match &self.beta_spec {
            BetaSpec::SettingI => "setting_i".to_string(),
            BetaSpec::SettingII => "setting_ii".to_string(),
            BetaSpec::Custom(v) => format!("custom:{}", join(v)),
        };
        let _ = writeln!(out, "beta_spec = {beta}");
        let design = match self.sigma_design {
            DesignSpec::Identity => "identity".to_string(),
            DesignSpec::Equicorrelated(r) => format!("equicorrelated:{r}"),
        };
        let _ = writeln!(out, "sigma_design = {design}");
        let _ = writeln!(out, "noise_sigma = {}", self.noise_sigma);
        let _ = writeln!(out, "n_reps = {}", self.n_reps);
        let _ = writeln!(out, "B = {}", self.boot);
        let _ = writeln!(out, "level = {}", self.level);
        let tested = match &self.tested_coords {
            TestedCoords::All => "all".to_string(),
            TestedCoords::SupportPlusNull { null_count } => format!("support_plus:{null_count}"),
            TestedCoords::List(v) => v.iter().map(|j| j.to_string()).collect::<Vec<_>>().join(","),
        };
        let _ = writeln!(out, "tested_coords = {tested}");
        let _ = writeln!(out, "master_seed = {}", self.master_seed);
        let methods = self.methods.iter().map(|m| m.label()).collect::<Vec<_>>().join(",");
        let _ = writeln!(out, "methods = {methods}");
        let rule = match self.lambda_rule {
            LambdaChoice::KnownSigma => "known_sigma".to_string(),
            LambdaChoice::TwoStage => "two_stage".to_string(),
            LambdaChoice::Fixed(l) => format!("fixed:{l}"),
        };
        let _ = writeln!(out, "lambda_rule = {rule}");
        let _ = writeln!(out, "lambda_multiplier = {}", self.lambda_multiplier);
        let nw = self.nodewise_lambda.map_or("same".to_string(), |l| l.to_string());
        let _ = writeln!(out, "nodewise_lambda = {nw}");
        let _ = writeln!(out, "standardize = {}", self.standardize);
        let _ = writeln!(out, "diagnostics = {}", self.diagnostics);
        let _ = writeln!(out, "max_failure_rate = {}", self.max_failure_rate);
        out
    }
}
