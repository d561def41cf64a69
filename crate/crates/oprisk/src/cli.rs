//! The `oprisk` command line.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use oprisk_core::capital::{isla, sla_bk, sla_degen, CapitalEstimate, CapitalSpec};
use oprisk_core::fisher::{fisher_for, param_covariance};
use oprisk_core::mle::fit_severity;
use oprisk_core::{CTable, Error as CoreError, FitResult, FrequencyModel, RceOptions, SeverityFamily, SeverityModel};
use serde::Serialize;
use serde_json::json;

use crate::calibrate::{calibrate_c, CalibrationConfig, CalibrationError};
use crate::convexity::scan;
use crate::io::{raw_rows, read_losses_path, summary_rows, write_csv, IoError, StudyFile};
use crate::parallel::{mc_capital, rce_estimate_par};
use crate::study::{run_study, StudyError};

pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;
pub const EXIT_QUALITY: u8 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{0}")]
    Quality(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Numeric(_) => EXIT_NUMERIC,
            CliError::Quality(_) => EXIT_QUALITY,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Numeric(_) | CoreError::EstimationFailure(_) | CoreError::DegenerateCovariance => {
                CliError::Numeric(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Io(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<StudyError> for CliError {
    fn from(e: StudyError) -> Self {
        match e {
            StudyError::Core(c) => c.into(),
            StudyError::Config(_) => CliError::Validation(e.to_string()),
            StudyError::TooFewSuccesses { .. } => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<CalibrationError> for CliError {
    fn from(e: CalibrationError) -> Self {
        match e {
            CalibrationError::Study(s) => s.into(),
            CalibrationError::Core(c) => c.into(),
            CalibrationError::NoC { .. } => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Numeric(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "oprisk", version, about = "Operational-risk capital: fitting, approximation, reduced-bias estimation and studies")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "OPRISK_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a severity to a loss file.
    Fit(FitArgs),
    /// Capital for explicit parameters.
    Capital(CapitalArgs),
    /// Reduced-bias capital from a loss file or explicit parameters.
    Rce(RceArgs),
    /// Run a study file and write CSV tables.
    Simulate(SimulateArgs),
    /// Calibrate the reduced-bias exponent c.
    CalibrateC(CalibrateArgs),
    /// VaR against one parameter, with its local convexity.
    ConvexityScan(ScanArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyArg {
    Lognormal,
    Loggamma,
    Gpd,
    Normal,
}

impl From<FamilyArg> for SeverityFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Lognormal => SeverityFamily::LogNormal,
            FamilyArg::Loggamma => SeverityFamily::LogGamma,
            FamilyArg::Gpd => SeverityFamily::Gpd,
            FamilyArg::Normal => SeverityFamily::Normal,
        }
    }
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    #[arg(long, allow_negative_numbers = true)]
    pub p1: f64,
    #[arg(long)]
    pub p2: f64,
    /// Data collection threshold; 10000 is a common choice.
    #[arg(long)]
    pub threshold: Option<f64>,
}

impl ModelArgs {
    fn model(&self) -> Result<SeverityModel, CliError> {
        Ok(SeverityModel::new(self.family.into(), self.p1, self.p2, self.threshold)?)
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub losses: PathBuf,
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Method {
    Bk,
    Degen,
    Isla,
    Mc,
}

#[derive(Debug, Args)]
pub struct CapitalArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.999)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value = "isla")]
    pub method: Method,
    /// Simulated years for `--method mc`.
    #[arg(long, default_value_t = 5_000_000)]
    pub sims: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct RceArgs {
    /// Loss file to fit; otherwise --family, --p1, --p2 and --n.
    #[arg(long)]
    pub losses: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    #[arg(long, allow_negative_numbers = true)]
    pub p1: Option<f64>,
    #[arg(long)]
    pub p2: Option<f64>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Sample size behind explicit parameters.
    #[arg(long)]
    pub n: Option<usize>,
    /// Annual rate; defaults to losses / years for a loss file.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 10)]
    pub years: u32,
    #[arg(long, default_value_t = 0.999)]
    pub alpha: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub study: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Treat a study-quality warning as an error.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    /// Expected number of losses.
    #[arg(long)]
    pub n: f64,
    /// Generating parameters as `p1,p2`; repeat for a grid.
    #[arg(long = "truth", required = true, value_parser = parse_pair)]
    pub truths: Vec<[f64; 2]>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, default_value_t = 10)]
    pub years: u32,
    #[arg(long, default_value_t = 0.999)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1000)]
    pub replications: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Also check the chosen c at the 2.5% and 97.5% joint-percentile parameters.
    #[arg(long)]
    pub verify: bool,
    /// Exit with an error if the verification fails.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Param {
    P1,
    P2,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Parameter held fixed; the other one is scanned.
    #[arg(long, value_enum)]
    pub fix_param: Param,
    /// Values of the scanned parameter: `a,b,c` or `lo:hi:count`.
    #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
    pub param_grid: Grid,
    /// Severity percentiles.
    #[arg(long, value_parser = parse_grid, default_value = "0.999,0.9997,0.99997")]
    pub p_grid: Grid,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let v: Vec<f64> = s.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"))).collect::<Result<_, _>>()?;
    <[f64; 2]>::try_from(v).map_err(|_| format!("expected two comma-separated numbers, got {s:?}"))
}

pub fn parse_grid(s: &str) -> Result<Grid, String> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    let parts: Vec<&str> = s.split(':').collect();
    let values = match parts.as_slice() {
        [lo, hi, count] => {
            let (lo, hi) = (num(lo)?, num(hi)?);
            let count: usize = count.trim().parse().map_err(|e| format!("{count:?}: {e}"))?;
            if count < 2 {
                return Err("a range grid needs at least 2 points".into());
            }
            (0..count).map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64).collect()
        }
        [list] => list.split(',').map(num).collect::<Result<Vec<_>, _>>()?,
        _ => return Err(format!("cannot read grid {s:?}")),
    };
    if values.is_empty() {
        return Err("empty grid".into());
    }
    Ok(Grid(values))
}

fn print_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(|e| CliError::Numeric(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

fn param_map(model: &SeverityModel) -> serde_json::Value {
    let [n1, n2] = model.family().param_names();
    let [p1, p2] = model.params();
    json!({ n1: p1, n2: p2 })
}

fn estimate_json(e: &CapitalEstimate) -> serde_json::Value {
    json!({
        "capital": e.value,
        "quantile_term": e.quantile_term,
        "correction": e.correction,
        "tail_index": e.tail_index,
        "branch": e.branch.name(),
        "interpolated": e.branch == oprisk_core::SlaBranch::Interpolated,
    })
}

fn fit_report(fit: &FitResult) -> Result<serde_json::Value, CliError> {
    let fm = fisher_for(&fit.model)?;
    let cov = param_covariance(&fm, fit.n);
    Ok(json!({
        "family": fit.model.family().name(),
        "threshold": fit.model.threshold(),
        "params": param_map(&fit.model),
        "loglik": fit.loglik,
        "n": fit.n,
        "converged": fit.converged,
        "iterations": fit.iterations,
        "covariance": cov.cov,
        "std_errors": cov.sd,
        "correlation": cov.rho,
    }))
}

fn cmd_fit(a: &FitArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let losses = read_losses_path(&a.losses, a.threshold)?;
    let fit = fit_severity(&losses.amounts, a.family.into(), a.threshold)?;
    print_json(out, &fit_report(&fit)?)
}

fn check_alpha(alpha: f64) -> Result<(), CliError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(CliError::Validation(format!("--alpha must be inside (0, 1), got {alpha}")))
    }
}

fn cmd_capital(a: &CapitalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    check_alpha(a.alpha)?;
    let model = a.model.model()?;
    let spec = CapitalSpec::new(a.alpha, FrequencyModel::new(a.lambda, 1)?)?;
    let mut report = json!({
        "model": model.to_string(),
        "lambda": a.lambda,
        "alpha": a.alpha,
        "method": format!("{:?}", a.method).to_lowercase(),
    });
    let extra = match a.method {
        Method::Bk => estimate_json(&sla_bk(&model, &spec)?),
        Method::Degen => estimate_json(&sla_degen(&model, &spec)?),
        Method::Isla => estimate_json(&isla(&model, &spec)?),
        Method::Mc => {
            let mc = mc_capital(&model, &spec, a.sims, a.seed)?;
            json!({
                "capital": mc.conditional,
                "order_statistic": mc.order_statistic,
                "conditional": mc.conditional,
                "sims": mc.years,
                "seed": a.seed,
            })
        }
    };
    if let (Some(r), serde_json::Value::Object(e)) = (report.as_object_mut(), extra) {
        r.extend(e);
    }
    print_json(out, &report)
}

fn cmd_rce(a: &RceArgs, out: &mut dyn Write) -> Result<(), CliError> {
    check_alpha(a.alpha)?;
    let family: SeverityFamily = a.family.into();
    if family == SeverityFamily::Normal {
        return Err(CoreError::Unsupported { family, what: "reduced-bias capital" }.into());
    }
    let (fit, lambda) = match &a.losses {
        Some(path) => {
            let losses = read_losses_path(path, a.threshold)?;
            let years = losses.span().unwrap_or(a.years);
            let fit = fit_severity(&losses.amounts, family, a.threshold)?;
            (fit, a.lambda.unwrap_or(losses.amounts.len() as f64 / years as f64))
        }
        None => {
            let (Some(p1), Some(p2), Some(n)) = (a.p1, a.p2, a.n) else {
                return Err(CliError::Validation("without --losses, --p1, --p2 and --n are required".into()));
            };
            let model = SeverityModel::new(family, p1, p2, a.threshold)?;
            let fit = FitResult { model, loglik: f64::NAN, n, converged: true, iterations: 0, start_point: [p1, p2] };
            (fit, a.lambda.unwrap_or(n as f64 / a.years as f64))
        }
    };
    let freq = FrequencyModel::new(lambda, a.years)?;
    let t = std::time::Instant::now();
    let r = rce_estimate_par(&fit, &freq, a.alpha, &CTable::standard(), &RceOptions::default())?;
    let report = json!({
        "model": fit.model.to_string(),
        "params": param_map(&fit.model),
        "n": fit.n,
        "converged": fit.converged,
        "lambda": lambda,
        "years": a.years,
        "alpha": a.alpha,
        "capital": r.capital,
        "step1_capital": r.step1_capital,
        "median_of_medians": r.median_of_medians,
        "weighted_mean": r.weighted_mean,
        "ratio": r.ratio,
        "c": r.c.c,
        "c_interpolated": r.c.interpolated,
        "c_clamped": r.c.clamped,
        "discarded_ellipses": r.discarded_ellipses,
        "seconds": t.elapsed().as_secs_f64(),
    });
    if r.c.clamped {
        eprintln!("warning: n = {} is outside the calibrated range 150-1000; c was clamped", fit.n);
    }
    print_json(out, &report)
}

fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = StudyFile::read(&a.study)?.to_config()?;
    let result = run_study(&cfg)?;
    std::fs::create_dir_all(&a.out)?;
    let summary = a.out.join("summary.csv");
    let raw = a.out.join("raw.csv");
    write_csv(std::fs::File::create(&summary)?, &summary_rows(&cfg, &result))?;
    write_csv(std::fs::File::create(&raw)?, &raw_rows(&cfg, &result))?;
    writeln!(out, "{}", summary.display())?;
    writeln!(out, "{}", raw.display())?;
    if result.quality_warning {
        let msg = format!(
            "{} of {} replications failed ({:.1}%), above the 10% quality limit",
            result.failures.len(),
            cfg.replications,
            100.0 * result.failure_fraction()
        );
        if a.strict {
            return Err(CliError::Quality(msg));
        }
        eprintln!("warning: {msg}");
    }
    Ok(())
}

fn cmd_calibrate(a: &CalibrateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    check_alpha(a.alpha)?;
    let cfg = CalibrationConfig {
        family: a.family.into(),
        threshold: a.threshold,
        truths: a.truths.clone(),
        n: a.n,
        years: a.years,
        alpha: a.alpha,
        replications: a.replications,
        master_seed: a.seed,
        verify: a.verify,
    };
    let cal = calibrate_c(&cfg)?;
    let report = json!({
        "family": cfg.family.name(),
        "truncated": cfg.threshold.is_some(),
        "n": cfg.n,
        "c": cal.c,
        "bias_pct": cal.bias_pct,
        "table_c": cal.table_c,
        "verified": cal.verified,
        "verification": cal.verification.iter().map(|v| json!({"params": v.params, "bias_pct": v.bias_pct})).collect::<Vec<_>>(),
        "curve": cal.curve.iter().map(|p| json!({"c": p.c, "bias_pct": p.bias_pct})).collect::<Vec<_>>(),
    });
    print_json(out, &report)?;
    if a.strict && a.verify && !cal.verified {
        return Err(CliError::Quality("the chosen c does not hold at the verification parameters".into()));
    }
    Ok(())
}

fn cmd_scan(a: &ScanArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let model = a.model.model()?;
    let which = match a.fix_param {
        Param::P1 => 1,
        Param::P2 => 0,
    };
    if let Some(p) = a.p_grid.0.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
        return Err(CliError::Validation(format!("percentile {p} is outside (0, 1)")));
    }
    let rows = scan(&model, which, &a.param_grid.0, &a.p_grid.0)?;
    match &a.out {
        Some(path) => write_csv(std::fs::File::create(path)?, &rows)?,
        None => write_csv(&mut *out, &rows)?,
    }
    Ok(())
}

/// Runs a parsed command, writing its primary output to `out`.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Fit(a) => cmd_fit(a, out),
        Command::Capital(a) => cmd_capital(a, out),
        Command::Rce(a) => cmd_rce(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::CalibrateC(a) => cmd_calibrate(a, out),
        Command::ConvexityScan(a) => cmd_scan(a, out),
    }
}
