//! Replicated simulation studies of plug-in (MLE) and reduced-bias capital.

use oprisk_core::capital::{isla, CapitalSpec};
use oprisk_core::contamination::{simulate_sample, Contamination, ContaminationSpec};
use oprisk_core::mle::{fit_poisson, fit_severity};
use oprisk_core::rce::rce_estimate;
use oprisk_core::stats::capital_stats;
use oprisk_core::{CTable, CapitalDistStats, FitResult, FrequencyModel, RceOptions, SeverityFamily, SeverityModel};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::{stream, Purpose};

/// Failed replications above this fraction flag the study.
pub const FAILURE_WARNING_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Mle,
    Rce,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::Mle => "mle",
            Estimator::Rce => "rce",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StudyError {
    #[error("invalid study configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] oprisk_core::Error),
    #[error("only {ok} replications succeeded; statistics need at least 2")]
    TooFewSuccesses { ok: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub truth: SeverityModel,
    pub freq: FrequencyModel,
    pub replications: usize,
    pub alphas: Vec<f64>,
    pub estimators: Vec<Estimator>,
    pub contamination: Option<ContaminationSpec>,
    /// Keep the severity at the truth and estimate only the frequency.
    pub lambda_only: bool,
    pub master_seed: u64,
    pub ctable: CTable,
    pub rce: RceOptions,
}

impl StudyConfig {
    /// 1000 replications of both estimators at the regulatory and economic alphas.
    pub fn new(truth: SeverityModel, freq: FrequencyModel, master_seed: u64) -> Self {
        StudyConfig {
            truth,
            freq,
            replications: 1000,
            alphas: vec![oprisk_core::capital::RCAP_ALPHA, oprisk_core::capital::ECAP_ALPHA],
            estimators: vec![Estimator::Mle, Estimator::Rce],
            contamination: None,
            lambda_only: false,
            master_seed,
            ctable: CTable::standard(),
            rce: RceOptions::default(),
        }
    }

    pub fn wants(&self, e: Estimator) -> bool {
        self.estimators.contains(&e)
    }

    pub fn validate(&self) -> Result<(), StudyError> {
        if self.replications < 2 {
            return Err(StudyError::Config(format!("replications must be at least 2, got {}", self.replications)));
        }
        if self.alphas.is_empty() || self.alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(StudyError::Config("alphas must be non-empty and inside (0, 1)".into()));
        }
        if self.estimators.is_empty() {
            return Err(StudyError::Config("no estimators requested".into()));
        }
        if self.wants(Estimator::Rce) && self.truth.family() == SeverityFamily::Normal {
            return Err(StudyError::Config("the reduced-bias estimator has no c values for the normal family".into()));
        }
        if let Some(c) = &self.contamination {
            c.validate()?;
        }
        Ok(())
    }
}

/// Reduced-bias estimate of one replication, with the pieces needed to
/// recompute it under another exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RceDraw {
    pub capital: f64,
    pub median_of_medians: f64,
    pub ratio: f64,
    pub c: f64,
    pub discarded_ellipses: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub index: usize,
    pub n: usize,
    pub contaminated: usize,
    pub lambda_hat: f64,
    pub params: [f64; 2],
    /// One entry per alpha, empty when the estimator was not requested.
    pub mle: Vec<f64>,
    pub rce: Vec<RceDraw>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaSummary {
    pub alpha: f64,
    pub true_capital: f64,
    pub mle: Option<CapitalDistStats>,
    pub rce: Option<CapitalDistStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub summaries: Vec<AlphaSummary>,
    /// Successful replications in index order.
    pub replications: Vec<Replication>,
    pub failures: Vec<Failure>,
    pub quality_warning: bool,
}

impl StudyResult {
    pub fn failure_fraction(&self) -> f64 {
        self.failures.len() as f64 / (self.failures.len() + self.replications.len()) as f64
    }
}

/// True capital at each alpha: ISLA at the generating parameters.
pub fn true_capitals(cfg: &StudyConfig) -> Result<Vec<f64>, StudyError> {
    cfg.alphas
        .iter()
        .map(|&a| Ok(isla(&cfg.truth, &CapitalSpec::new(a, cfg.freq)?)?.value))
        .collect()
}

/// One replication: simulate, estimate, and compute capital at every alpha.
/// Any failure drops the replication for every estimator.
pub fn run_replication(cfg: &StudyConfig, contamination: Option<&Contamination>, index: usize) -> Result<Replication, Failure> {
    let fail = |reason: String| Failure { index, reason };
    let mut rng = stream(cfg.master_seed, index as u64, Purpose::Sample);
    let sample = simulate_sample(&cfg.truth, &cfg.freq, contamination, &mut rng);
    let n = sample.losses.len();
    let freq_fit = fit_poisson(n as u64, cfg.freq.years()).map_err(|e| fail(e.to_string()))?;
    let freq_hat = freq_fit.model().map_err(|_| fail("no losses simulated".into()))?;

    let fit = if cfg.lambda_only {
        FitResult { model: cfg.truth, loglik: f64::NAN, n, converged: true, iterations: 0, start_point: cfg.truth.params() }
    } else {
        let fit = fit_severity(&sample.losses, cfg.truth.family(), cfg.truth.threshold()).map_err(|e| fail(e.to_string()))?;
        if !fit.converged {
            return Err(fail("severity fit did not converge".into()));
        }
        fit
    };

    let mut mle = Vec::new();
    let mut rce = Vec::new();
    for &alpha in &cfg.alphas {
        if cfg.wants(Estimator::Mle) {
            let spec = CapitalSpec::new(alpha, freq_hat).map_err(|e| fail(e.to_string()))?;
            let v = isla(&fit.model, &spec).map_err(|e| fail(e.to_string()))?.value;
            if !(v.is_finite() && v <= cfg.rce.cap) {
                return Err(fail("plug-in capital is incalculable".into()));
            }
            mle.push(v);
        }
        if cfg.wants(Estimator::Rce) {
            let r = rce_estimate(&fit, &freq_hat, alpha, &cfg.ctable, &cfg.rce).map_err(|e| fail(e.to_string()))?;
            rce.push(RceDraw {
                capital: r.capital,
                median_of_medians: r.median_of_medians,
                ratio: r.ratio,
                c: r.c.c,
                discarded_ellipses: r.discarded_ellipses,
            });
        }
    }
    Ok(Replication {
        index,
        n,
        contaminated: sample.contaminated,
        lambda_hat: freq_fit.lambda,
        params: fit.model.params(),
        mle,
        rce,
    })
}

/// Runs every replication in parallel and reduces in replication order.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyResult, StudyError> {
    cfg.validate()?;
    let contamination = cfg.contamination.map(|spec| Contamination::new(&cfg.truth, &cfg.freq, spec)).transpose()?;
    let truths = true_capitals(cfg)?;
    let outcomes: Vec<Result<Replication, Failure>> =
        (0..cfg.replications).into_par_iter().map(|i| run_replication(cfg, contamination.as_ref(), i)).collect();
    let mut replications = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => replications.push(r),
            Err(f) => failures.push(f),
        }
    }
    summarize(cfg, &truths, replications, failures)
}

fn summarize(
    cfg: &StudyConfig,
    truths: &[f64],
    replications: Vec<Replication>,
    failures: Vec<Failure>,
) -> Result<StudyResult, StudyError> {
    if replications.len() < 2 {
        return Err(StudyError::TooFewSuccesses { ok: replications.len() });
    }
    let n_failed = failures.len();
    let summaries = cfg
        .alphas
        .iter()
        .enumerate()
        .map(|(k, &alpha)| {
            let mle: Vec<f64> = replications.iter().filter_map(|r| r.mle.get(k).copied()).collect();
            let rce: Vec<f64> = replications.iter().filter_map(|r| r.rce.get(k).map(|d| d.capital)).collect();
            AlphaSummary {
                alpha,
                true_capital: truths[k],
                mle: cfg.wants(Estimator::Mle).then(|| capital_stats(&mle, truths[k], n_failed)),
                rce: cfg.wants(Estimator::Rce).then(|| capital_stats(&rce, truths[k], n_failed)),
            }
        })
        .collect();
    let total = replications.len() + n_failed;
    Ok(StudyResult {
        summaries,
        replications,
        failures,
        quality_warning: n_failed as f64 > FAILURE_WARNING_FRACTION * total as f64,
    })
}
