//! Empirical calibration of the reduced-bias exponent c for one family and
//! sample size: pick the c whose study bias is closest to zero.

use oprisk_core::contamination::contaminant;
use oprisk_core::{CTable, FrequencyModel, SeverityFamily, SeverityModel};

use crate::study::{run_study, Estimator, StudyConfig, StudyError};

pub const C_MAX: f64 = 3.0;
pub const C_STEP: f64 = 0.05;
/// Calibration fails if no c gets the bias inside this band (percent).
pub const MAX_ABS_BIAS_PCT: f64 = 15.0;
/// Joint percentile of the parameter pairs used to check the chosen c.
pub const VERIFY_JOINT_P: f64 = 0.95;

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationConfig {
    pub family: SeverityFamily,
    pub threshold: Option<f64>,
    /// Generating parameter pairs; the bias is averaged over them.
    pub truths: Vec<[f64; 2]>,
    /// Expected number of losses; the rate is `n / years`.
    pub n: f64,
    pub years: u32,
    pub alpha: f64,
    pub replications: usize,
    pub master_seed: u64,
    pub verify: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub c: f64,
    /// Mean over truths of the bias percent.
    pub bias_pct: f64,
    pub per_truth: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verification {
    pub params: [f64; 2],
    pub bias_pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub c: f64,
    pub bias_pct: f64,
    pub table_c: Option<f64>,
    pub curve: Vec<CurvePoint>,
    pub verification: Vec<Verification>,
    /// Every verification point also has |bias| below the failure band.
    pub verified: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CalibrationError {
    #[error(transparent)]
    Study(#[from] StudyError),
    #[error(transparent)]
    Core(#[from] oprisk_core::Error),
    #[error("no c in [0, {C_MAX}] brings |bias| below {MAX_ABS_BIAS_PCT}%: best is c = {c} with bias {bias_pct:.2}%")]
    NoC { c: f64, bias_pct: f64 },
}

pub fn c_grid() -> Vec<f64> {
    // divide rather than multiply so every point is the nearest double to k * step
    let per_unit = (1.0 / C_STEP).round();
    let steps = (C_MAX * per_unit).round() as usize;
    (0..=steps).map(|k| k as f64 / per_unit).collect()
}

fn model_of(cfg: &CalibrationConfig, p: [f64; 2]) -> Result<SeverityModel, oprisk_core::Error> {
    SeverityModel::new(cfg.family, p[0], p[1], cfg.threshold)
}

/// Bias percent of the reduced-bias estimate at every c in `cs`, reusing each
/// replication's median of medians and ratio.
fn bias_curve(cfg: &CalibrationConfig, truth: SeverityModel, seed: u64, cs: &[f64]) -> Result<Vec<f64>, CalibrationError> {
    let freq = FrequencyModel::new(cfg.n / cfg.years as f64, cfg.years)?;
    let mut study = StudyConfig::new(truth, freq, seed);
    study.replications = cfg.replications;
    study.alphas = vec![cfg.alpha];
    study.estimators = vec![Estimator::Rce];
    let result = run_study(&study)?;
    let truth_cap = result.summaries[0].true_capital;
    let draws: Vec<_> = result.replications.iter().map(|r| r.rce[0]).collect();
    Ok(cs
        .iter()
        .map(|&c| {
            let mean = draws.iter().map(|d| d.median_of_medians * d.ratio.powf(c)).sum::<f64>() / draws.len() as f64;
            100.0 * (mean - truth_cap) / truth_cap
        })
        .collect())
}

/// Smallest |bias|; near-ties (within 1e-9 points) go to the positive bias.
fn pick(curve: &[CurvePoint]) -> &CurvePoint {
    let mut best = &curve[0];
    for p in &curve[1..] {
        let (a, b) = (p.bias_pct.abs(), best.bias_pct.abs());
        if a < b - 1e-9 || ((a - b).abs() <= 1e-9 && p.bias_pct > best.bias_pct) {
            best = p;
        }
    }
    best
}

pub fn calibrate_c(cfg: &CalibrationConfig) -> Result<Calibration, CalibrationError> {
    let cs = c_grid();
    let mut per_truth = Vec::with_capacity(cfg.truths.len());
    for (k, &p) in cfg.truths.iter().enumerate() {
        let seed = cfg.master_seed.wrapping_add(k as u64);
        per_truth.push(bias_curve(cfg, model_of(cfg, p)?, seed, &cs)?);
    }
    let curve: Vec<CurvePoint> = cs
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let row: Vec<f64> = per_truth.iter().map(|b| b[i]).collect();
            CurvePoint { c, bias_pct: row.iter().sum::<f64>() / row.len() as f64, per_truth: row }
        })
        .collect();
    let best = pick(&curve).clone();
    if best.bias_pct.abs() >= MAX_ABS_BIAS_PCT {
        return Err(CalibrationError::NoC { c: best.c, bias_pct: best.bias_pct });
    }

    let mut verification = Vec::new();
    if cfg.verify {
        let n = cfg.n.round().max(1.0) as usize;
        for (k, &p) in cfg.truths.iter().enumerate() {
            let truth = model_of(cfg, p)?;
            for right in [false, true] {
                let shifted = contaminant(&truth, n, VERIFY_JOINT_P, right)?;
                let seed = cfg.master_seed.wrapping_add(1000 + 2 * k as u64 + right as u64);
                let bias = bias_curve(cfg, shifted, seed, &[best.c])?[0];
                verification.push(Verification { params: shifted.params(), bias_pct: bias });
            }
        }
    }
    let verified = verification.iter().all(|v| v.bias_pct.abs() < MAX_ABS_BIAS_PCT);
    let table_c = CTable::standard().lookup(cfg.family, cfg.threshold.is_some(), cfg.n).ok().map(|l| l.c);
    Ok(Calibration { c: best.c, bias_pct: best.bias_pct, table_c, curve, verification, verified })
}
