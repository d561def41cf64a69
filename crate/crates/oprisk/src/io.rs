//! Loss files, study files and the CSV tables a study emits.

use std::io::{Read, Write};
use std::path::Path;

use oprisk_core::contamination::{ContaminationSpec, Tail};
use oprisk_core::{CapitalDistStats, FrequencyModel, SeverityFamily, SeverityModel};
use serde::{Deserialize, Serialize};

use crate::study::{Estimator, StudyConfig, StudyResult};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Open { path: String, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("study file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("{0}")]
    Invalid(String),
}

fn open(path: &Path) -> Result<std::fs::File, IoError> {
    std::fs::File::open(path).map_err(|source| IoError::Open { path: path.display().to_string(), source })
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
struct LossRecord {
    loss_amount: f64,
    #[serde(default)]
    year: Option<i64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossFile {
    pub amounts: Vec<f64>,
    /// Present when the file has a `year` column.
    pub years: Option<Vec<i64>>,
}

impl LossFile {
    /// Distinct years covered, if recorded.
    pub fn span(&self) -> Option<u32> {
        let y = self.years.as_ref()?;
        let (lo, hi) = (y.iter().min()?, y.iter().max()?);
        u32::try_from(hi - lo + 1).ok()
    }
}

/// Reads a `loss_amount[,year]` CSV. Amounts must be positive and, when a
/// threshold is given, strictly above it.
pub fn read_losses<R: Read>(reader: R, threshold: Option<f64>) -> Result<LossFile, IoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if !headers.iter().any(|h| h == "loss_amount") {
        return Err(IoError::Invalid("loss file needs a loss_amount column".into()));
    }
    let has_year = headers.iter().any(|h| h == "year");
    let mut amounts = Vec::new();
    let mut years = Vec::new();
    for (line, rec) in rdr.deserialize::<LossRecord>().enumerate() {
        let rec = rec?;
        let x = rec.loss_amount;
        if !(x.is_finite() && x > 0.0) {
            return Err(IoError::Invalid(format!("row {}: loss amount {x} must be positive", line + 1)));
        }
        if let Some(h) = threshold {
            if x <= h {
                return Err(IoError::Invalid(format!("row {}: loss amount {x} is not above the threshold {h}", line + 1)));
            }
        }
        amounts.push(x);
        if has_year {
            years.push(rec.year.ok_or_else(|| IoError::Invalid(format!("row {}: missing year", line + 1)))?);
        }
    }
    Ok(LossFile { amounts, years: has_year.then_some(years) })
}

pub fn read_losses_path(path: &Path, threshold: Option<f64>) -> Result<LossFile, IoError> {
    read_losses(open(path)?, threshold)
}

pub fn write_losses<W: Write>(writer: W, amounts: &[f64]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["loss_amount"])?;
    for x in amounts {
        w.serialize([x])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContaminationSection {
    pub tail: String,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub joint_p: Option<f64>,
}

fn default_epsilon() -> f64 {
    0.05
}

/// TOML study description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyFile {
    pub family: String,
    pub p1: f64,
    pub p2: f64,
    #[serde(default)]
    pub threshold: Option<f64>,
    pub lambda: f64,
    #[serde(default = "default_years")]
    pub years: u32,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<Estimator>,
    #[serde(default)]
    pub lambda_only: bool,
    #[serde(default)]
    pub contamination: Option<ContaminationSection>,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_years() -> u32 {
    10
}
fn default_replications() -> usize {
    1000
}
fn default_alphas() -> Vec<f64> {
    vec![0.999, 0.9997]
}
fn default_estimators() -> Vec<Estimator> {
    vec![Estimator::Mle, Estimator::Rce]
}
fn default_seed() -> u64 {
    1
}

impl StudyFile {
    pub fn parse(text: &str) -> Result<Self, IoError> {
        Ok(toml::from_str(text)?)
    }

    pub fn read(path: &Path) -> Result<Self, IoError> {
        let mut text = String::new();
        open(path)?.read_to_string(&mut text)?;
        Self::parse(&text)
    }

    pub fn to_config(&self) -> Result<StudyConfig, IoError> {
        let invalid = |e: oprisk_core::Error| IoError::Invalid(e.to_string());
        let family = SeverityFamily::parse(&self.family)
            .ok_or_else(|| IoError::Invalid(format!("unknown family {:?}", self.family)))?;
        let truth = SeverityModel::new(family, self.p1, self.p2, self.threshold).map_err(invalid)?;
        let freq = FrequencyModel::new(self.lambda, self.years).map_err(invalid)?;
        let mut cfg = StudyConfig::new(truth, freq, self.seed);
        cfg.replications = self.replications;
        cfg.alphas = self.alphas.clone();
        cfg.estimators = self.estimators.clone();
        cfg.lambda_only = self.lambda_only;
        if let Some(c) = &self.contamination {
            let tail = Tail::parse(&c.tail).ok_or_else(|| IoError::Invalid(format!("unknown contamination tail {:?}", c.tail)))?;
            let mut spec = ContaminationSpec::new(tail, c.epsilon).map_err(invalid)?;
            if let Some(p) = c.joint_p {
                spec.joint_p = p;
                spec.validate().map_err(invalid)?;
            }
            cfg.contamination = Some(spec);
        }
        cfg.validate().map_err(|e| IoError::Invalid(e.to_string()))?;
        Ok(cfg)
    }
}

/// One row of the summary table: both estimators side by side at one alpha.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    #[serde(rename = "Dist")]
    pub dist: String,
    #[serde(rename = "Parm1")]
    pub parm1: f64,
    #[serde(rename = "Parm2")]
    pub parm2: f64,
    #[serde(rename = "Threshold")]
    pub threshold: Option<f64>,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
    #[serde(rename = "Alpha")]
    pub alpha: f64,
    #[serde(rename = "TrueCap")]
    pub true_cap: f64,
    #[serde(rename = "MLE_Mean")]
    pub mle_mean: Option<f64>,
    #[serde(rename = "MLE_Bias")]
    pub mle_bias: Option<f64>,
    #[serde(rename = "MLE_BiasPct")]
    pub mle_bias_pct: Option<f64>,
    #[serde(rename = "RCE_Mean")]
    pub rce_mean: Option<f64>,
    #[serde(rename = "RCE_Bias")]
    pub rce_bias: Option<f64>,
    #[serde(rename = "RCE_BiasPct")]
    pub rce_bias_pct: Option<f64>,
    #[serde(rename = "MLE_RMSE")]
    pub mle_rmse: Option<f64>,
    #[serde(rename = "RCE_RMSE")]
    pub rce_rmse: Option<f64>,
    #[serde(rename = "RMSE_Ratio")]
    pub rmse_ratio: Option<f64>,
    #[serde(rename = "MLE_StdDev")]
    pub mle_stddev: Option<f64>,
    #[serde(rename = "RCE_StdDev")]
    pub rce_stddev: Option<f64>,
    #[serde(rename = "StdDev_Ratio")]
    pub stddev_ratio: Option<f64>,
    #[serde(rename = "MLE_CI95")]
    pub mle_ci95: Option<f64>,
    #[serde(rename = "RCE_CI95")]
    pub rce_ci95: Option<f64>,
    #[serde(rename = "CI95_Ratio")]
    pub ci95_ratio: Option<f64>,
    #[serde(rename = "MLE_CV")]
    pub mle_cv: Option<f64>,
    #[serde(rename = "RCE_CV")]
    pub rce_cv: Option<f64>,
    #[serde(rename = "MLE_IQR")]
    pub mle_iqr: Option<f64>,
    #[serde(rename = "RCE_IQR")]
    pub rce_iqr: Option<f64>,
    #[serde(rename = "IQR_Ratio")]
    pub iqr_ratio: Option<f64>,
    #[serde(rename = "MLE_Skew")]
    pub mle_skew: Option<f64>,
    #[serde(rename = "RCE_Skew")]
    pub rce_skew: Option<f64>,
    #[serde(rename = "MLE_Kurtosis")]
    pub mle_kurtosis: Option<f64>,
    #[serde(rename = "RCE_Kurtosis")]
    pub rce_kurtosis: Option<f64>,
    pub n_failed: usize,
    pub n_ok: usize,
    pub quality_warning: bool,
}

fn ratio(a: Option<&CapitalDistStats>, b: Option<&CapitalDistStats>, f: fn(&CapitalDistStats) -> f64) -> Option<f64> {
    Some(f(b?) / f(a?))
}

pub fn summary_rows(cfg: &StudyConfig, result: &StudyResult) -> Vec<SummaryRow> {
    let [p1, p2] = cfg.truth.params();
    result
        .summaries
        .iter()
        .map(|s| {
            let (m, r) = (s.mle.as_ref(), s.rce.as_ref());
            SummaryRow {
                dist: cfg.truth.label().to_string(),
                parm1: p1,
                parm2: p2,
                threshold: cfg.truth.threshold(),
                lambda: cfg.freq.lambda(),
                alpha: s.alpha,
                true_cap: s.true_capital,
                mle_mean: m.map(|x| x.mean),
                mle_bias: m.map(|x| x.bias),
                mle_bias_pct: m.map(|x| x.bias_pct),
                rce_mean: r.map(|x| x.mean),
                rce_bias: r.map(|x| x.bias),
                rce_bias_pct: r.map(|x| x.bias_pct),
                mle_rmse: m.map(|x| x.rmse),
                rce_rmse: r.map(|x| x.rmse),
                rmse_ratio: ratio(m, r, |x| x.rmse),
                mle_stddev: m.map(|x| x.stddev),
                rce_stddev: r.map(|x| x.stddev),
                stddev_ratio: ratio(m, r, |x| x.stddev),
                mle_ci95: m.map(|x| x.ci95_width),
                rce_ci95: r.map(|x| x.ci95_width),
                ci95_ratio: ratio(m, r, |x| x.ci95_width),
                mle_cv: m.map(|x| x.cv),
                rce_cv: r.map(|x| x.cv),
                mle_iqr: m.map(|x| x.iqr),
                rce_iqr: r.map(|x| x.iqr),
                iqr_ratio: ratio(m, r, |x| x.iqr),
                mle_skew: m.map(|x| x.skewness),
                rce_skew: r.map(|x| x.skewness),
                mle_kurtosis: m.map(|x| x.excess_kurtosis),
                rce_kurtosis: r.map(|x| x.excess_kurtosis),
                n_failed: result.failures.len(),
                n_ok: result.replications.len(),
                quality_warning: result.quality_warning,
            }
        })
        .collect()
}

/// Per-replication estimates, one row per replication and alpha.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRow {
    pub replication: usize,
    pub n: usize,
    pub contaminated: usize,
    pub lambda_hat: f64,
    pub p1_hat: f64,
    pub p2_hat: f64,
    pub alpha: f64,
    pub mle: Option<f64>,
    pub rce: Option<f64>,
    pub rce_median_of_medians: Option<f64>,
    pub rce_ratio: Option<f64>,
    pub rce_c: Option<f64>,
    pub rce_discarded: Option<usize>,
}

pub fn raw_rows(cfg: &StudyConfig, result: &StudyResult) -> Vec<RawRow> {
    let mut rows = Vec::with_capacity(result.replications.len() * cfg.alphas.len());
    for r in &result.replications {
        for (k, &alpha) in cfg.alphas.iter().enumerate() {
            let d = r.rce.get(k);
            rows.push(RawRow {
                replication: r.index,
                n: r.n,
                contaminated: r.contaminated,
                lambda_hat: r.lambda_hat,
                p1_hat: r.params[0],
                p2_hat: r.params[1],
                alpha,
                mle: r.mle.get(k).copied(),
                rce: d.map(|d| d.capital),
                rce_median_of_medians: d.map(|d| d.median_of_medians),
                rce_ratio: d.map(|d| d.ratio),
                rce_c: d.map(|d| d.c),
                rce_discarded: d.map(|d| d.discarded_ellipses),
            });
        }
    }
    rows
}

pub fn write_csv<W: Write, T: Serialize>(writer: W, rows: &[T]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read, T: serde::de::DeserializeOwned>(reader: R) -> Result<Vec<T>, IoError> {
    let mut rdr = csv::Reader::from_reader(reader);
    Ok(rdr.deserialize().collect::<Result<Vec<T>, _>>()?)
}
