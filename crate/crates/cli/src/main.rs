use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hdinfer::bootstrap::{bootstrap_debiased, ddb_estimate, ddb_plugin_ci, percentile_ci};
use hdinfer::data::{read_csv, ColumnSelector, CsvDataset, CsvOptions};
use hdinfer::debias::{debias, nodewise_direction, plugin_ci};
use hdinfer::diagnostics::{condition_report, population_condition_report};
use hdinfer::lasso::{fit_with_rule, LambdaRule, PipelineFit};
use hdinfer::sim::report::{emit_report, ReportFormat};
use hdinfer::sim::{run_simulation, SimConfig, Simulator};
use hdinfer::{CiMethod, ConfidenceInterval, RegressionData, SeedSpec, SolverConfig};
use serde_json::json;

#[derive(Parser)]
#[command(name = "hdinfer", version, about = "Bootstrap-corrected inference for the debiased Lasso")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the Lasso and report the support and noise-scale estimate.
    Fit(FitArgs),
    /// Confidence intervals for selected coordinates.
    Ci(CiArgs),
    /// Run a Monte-Carlo coverage study from a config file.
    Simulate(SimulateArgs),
    /// Design condition report for a data set or a simulation config.
    Diagnose(DiagnoseArgs),
}

#[derive(Args)]
struct DataArgs {
    /// CSV file; remaining numeric columns form the design.
    data: PathBuf,
    /// Response column, by header name or 0-based index.
    #[arg(long)]
    response: String,
    /// The CSV has no header row.
    #[arg(long)]
    no_header: bool,
    /// Rescale columns to ‖x_j‖² = n before fitting; results are reported on the original scale.
    #[arg(long)]
    standardize: bool,
    /// Fixed penalty; default is the two-stage universal rule.
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Bsdb,
    Db,
    Ddb,
}

impl From<MethodArg> for CiMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Bsdb => CiMethod::BsDb,
            MethodArg::Db => CiMethod::Db,
            MethodArg::Ddb => CiMethod::DdbPlugin,
        }
    }
}

#[derive(Args)]
struct CiArgs {
    #[command(flatten)]
    data: DataArgs,
    /// 0-based coordinates, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    coord: Vec<usize>,
    #[arg(long, value_enum, default_value = "bsdb")]
    method: MethodArg,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, default_value_t = 500)]
    boot: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Table,
    Csv,
    Json,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    boot: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to HDINFER_THREADS or all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Extra `key=value` overrides applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "table")]
    format: FormatArg,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// CSV file (omit when using --config).
    data: Option<PathBuf>,
    #[arg(long)]
    response: Option<String>,
    #[arg(long)]
    no_header: bool,
    /// Hypothesized support, 0-based and comma separated.
    #[arg(long, value_delimiter = ',')]
    support: Vec<usize>,
    /// Coordinate whose nodewise direction enters the report.
    #[arg(long)]
    coord: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Population report for the design of a simulation config.
    #[arg(long, conflicts_with = "data")]
    config: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

type CliResult<T> = Result<T, String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn load(args: &DataArgs) -> CliResult<(CsvDataset<f64>, RegressionData<f64>)> {
    let opts = CsvOptions { has_header: !args.no_header, response: ColumnSelector::parse(&args.response) };
    let ds = read_csv::<f64>(&args.data, &opts).map_err(err)?;
    let data = if args.standardize { ds.data.standardize().map_err(err)? } else { ds.data.clone() };
    Ok((ds, data))
}

fn fit(data: &RegressionData<f64>, lambda: Option<f64>, solver: &SolverConfig<f64>) -> CliResult<PipelineFit<f64>> {
    let rule = lambda.map_or_else(LambdaRule::two_stage, LambdaRule::Fixed);
    fit_with_rule(data, &rule, solver).map_err(err)
}

/// Factor taking a coefficient on the fitted scale back to the original column scale.
fn unscale(data: &RegressionData<f64>, j: usize) -> f64 {
    data.column_scales()[j]
}

fn cmd_fit(a: &FitArgs, out: &mut dyn Write) -> CliResult<()> {
    let (ds, data) = load(&a.data)?;
    let solver = SolverConfig::default();
    let pf = fit(&data, a.data.lambda, &solver)?;
    let beta: Vec<f64> = (0..data.p()).map(|j| pf.fit.beta_hat[j] * unscale(&data, j)).collect();
    if a.json {
        let doc = json!({
            "n": data.n(),
            "p": data.p(),
            "response": ds.response_name,
            "features": ds.feature_names,
            "lambda": pf.fit.lambda,
            "pilot_lambda": pf.pilot_lambda,
            "sigma_hat": pf.sigma_hat(),
            "support": pf.fit.active_set,
            "beta_hat": beta,
            "kkt_gap": pf.fit.kkt_gap,
            "iterations": pf.fit.iterations,
            "converged": pf.fit.converged,
        });
        writeln!(out, "{}", serde_json::to_string_pretty(&doc).map_err(err)?).map_err(err)?;
        return Ok(());
    }
    let w = |out: &mut dyn Write, s: String| writeln!(out, "{s}").map_err(err);
    w(out, format!("n = {}", data.n()))?;
    w(out, format!("p = {}", data.p()))?;
    w(out, format!("lambda = {}", pf.fit.lambda))?;
    w(out, format!("sigma_hat = {}", pf.sigma_hat()))?;
    w(out, format!("support_size = {}", pf.fit.support_size()))?;
    w(out, format!("kkt_gap = {:e}", pf.fit.kkt_gap))?;
    w(out, format!("iterations = {}", pf.fit.iterations))?;
    for &j in &pf.fit.active_set {
        w(out, format!("beta[{j}] {} = {}", ds.feature_names[j], beta[j]))?;
    }
    Ok(())
}

fn cmd_ci(a: &CiArgs, out: &mut dyn Write) -> CliResult<()> {
    let (ds, data) = load(&a.data)?;
    let solver = SolverConfig::default();
    let pf = fit(&data, a.data.lambda, &solver)?;
    let sigma_hat = pf.sigma_hat();
    let method = CiMethod::from(a.method);
    let seed = SeedSpec::new(a.seed, 0);
    let mut rows = Vec::new();
    for &j in &a.coord {
        let art = nodewise_direction(&data, j, pf.fit.lambda, &solver).map_err(err)?;
        let est = debias(&data, &pf.fit, &art).map_err(err)?;
        let (ci, estimate): (ConfidenceInterval<f64>, f64) = match method {
            CiMethod::Db => (plugin_ci(&est, &art, sigma_hat, 1.0 - a.level).map_err(err)?, est.beta_db),
            CiMethod::BsDb | CiMethod::DdbPlugin => {
                let dist =
                    bootstrap_debiased(&data, &pf.fit, sigma_hat, &art, a.boot, seed, &solver).map_err(err)?;
                if method == CiMethod::BsDb {
                    (percentile_ci(est.beta_db, &dist, a.level).map_err(err)?, est.beta_db)
                } else {
                    let ddb = ddb_estimate(est.beta_db, &dist).map_err(err)?;
                    (ddb_plugin_ci(ddb, &art, sigma_hat, a.level).map_err(err)?, ddb)
                }
            }
        };
        let k = unscale(&data, j);
        rows.push((j, ds.feature_names[j].clone(), estimate * k, ci.lower * k, ci.upper * k));
    }
    if a.json {
        let doc: Vec<_> = rows
            .iter()
            .map(|(j, name, e, lo, hi)| {
                json!({"j": j, "feature": name, "method": method.label(), "level": a.level,
                       "estimate": e, "lower": lo, "upper": hi})
            })
            .collect();
        writeln!(out, "{}", serde_json::to_string_pretty(&doc).map_err(err)?).map_err(err)?;
        return Ok(());
    }
    writeln!(out, "j,feature,method,level,estimate,lower,upper").map_err(err)?;
    for (j, name, e, lo, hi) in rows {
        writeln!(out, "{j},{name},{},{},{e},{lo},{hi}", method.label(), a.level).map_err(err)?;
    }
    Ok(())
}

fn load_config(path: &PathBuf) -> CliResult<SimConfig> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    SimConfig::parse(&text).map_err(err)
}

fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write) -> CliResult<()> {
    let mut config = load_config(&a.config)?;
    for kv in &a.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| format!("--set expects KEY=VALUE, got {kv}"))?;
        config.set(k.trim(), v.trim())?;
    }
    if let Some(r) = a.reps {
        config.n_reps = r;
    }
    if let Some(b) = a.boot {
        config.boot = b;
    }
    if let Some(s) = a.seed {
        config.master_seed = s;
    }
    config.validate().map_err(err)?;
    let report = run_simulation::<f64>(&config, a.threads).map_err(err)?;
    let format = match a.format {
        FormatArg::Table => ReportFormat::Table,
        FormatArg::Csv => ReportFormat::Csv,
        FormatArg::Json => ReportFormat::Json,
    };
    match &a.out {
        Some(path) => {
            let mut f = fs::File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
            emit_report(&report, format, &mut f).map_err(err)
        }
        None => emit_report(&report, format, out).map_err(err),
    }
}

fn cmd_diagnose(a: &DiagnoseArgs, out: &mut dyn Write) -> CliResult<()> {
    let report = if let Some(path) = &a.config {
        let config = load_config(path)?;
        let sim = Simulator::<f64>::new(config.clone()).map_err(err)?;
        let lambda = a.lambda.unwrap_or_else(|| {
            config.lambda_multiplier * config.noise_sigma * (2.0 * (config.p as f64).ln() / config.n as f64).sqrt()
        });
        let support = if a.support.is_empty() { sim.support.clone() } else { a.support.clone() };
        population_condition_report(&sim.covariance(), &support, &sim.beta_true, lambda, config.n, config.noise_sigma)
            .map_err(err)?
    } else {
        let data_path = a.data.clone().ok_or("diagnose needs a CSV file or --config")?;
        let response = a.response.clone().ok_or("--response is required with a CSV file")?;
        if a.support.is_empty() {
            return Err("--support is required with a CSV file".into());
        }
        let args = DataArgs { data: data_path, response, no_header: a.no_header, standardize: false, lambda: a.lambda };
        let (_, data) = load(&args)?;
        let solver = SolverConfig::default();
        let pf = fit(&data, a.lambda, &solver)?;
        let art = match a.coord {
            Some(j) => Some(nodewise_direction(&data, j, pf.fit.lambda, &solver).map_err(err)?),
            None => None,
        };
        // No truth is available, so the fitted coefficients and σ̂ stand in for it.
        condition_report(&data, &a.support, art.as_ref(), &pf.fit.beta_hat, pf.fit.lambda, pf.sigma_hat())
            .map_err(err)?
    };
    if a.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&report).map_err(err)?).map_err(err)
    } else {
        write!(out, "{}", report.to_text()).map_err(err)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let res = match &cli.command {
        Command::Fit(a) => cmd_fit(a, &mut out),
        Command::Ci(a) => cmd_ci(a, &mut out),
        Command::Simulate(a) => cmd_simulate(a, &mut out),
        Command::Diagnose(a) => cmd_diagnose(a, &mut out),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
