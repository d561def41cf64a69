//! Reduced-bias capital estimation.
//!
//! The fitted parameters are perturbed deterministically to points on
//! fixed-probability ellipses of their asymptotic joint normal distribution
//! (iso-density sampling). Each outer point gets its own inner grid, whose
//! capitals are summarized by their median; the estimate is the median of those
//! medians scaled by `(median / weighted mean)^c`.

use alloc::vec::Vec;

use crate::capital::{isla, CapitalSpec};
use crate::distributions::{FrequencyModel, SeverityFamily, SeverityModel};
use crate::fisher::{fisher_for, mat2_inverse, param_covariance, ParamCovariance};
use crate::mle::FitResult;
use crate::special::{chi2_2_quantile, poisson_quantile};
use crate::stats::median;
use crate::{Error, Result};

pub const SEVERITY_PERCENTILES: [f64; 7] = [0.01, 0.10, 0.25, 0.50, 0.75, 0.90, 0.99];
pub const FREQUENCY_PERCENTILES: [f64; 2] = [0.25, 0.75];
pub const DIRECTIONS: [(i8, i8); 4] = [(1, 1), (-1, -1), (1, -1), (-1, 1)];
/// Points per grid: 7 ellipses x 4 directions x 2 frequency percentiles.
pub const GRID_SIZE: usize = 56;
const POINTS_PER_LEVEL: usize = 8;

/// Multiplier `q = sqrt(chi2 (1 + z1 z2 rho) / 2)` that puts the offset
/// `(z1 q sd1, z2 q sd2)` on the ellipse at Mahalanobis radius `chi2`.
pub fn iso_multiplier(chi2: f64, rho: f64, z1: f64, z2: f64) -> f64 {
    libm::sqrt((chi2 * (1.0 + z1 * z2 * rho) / 2.0).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipseOffset {
    pub direction: (i8, i8),
    pub q: f64,
    pub delta: [f64; 2],
}

pub fn ellipse_offsets(cov: &ParamCovariance, p: f64) -> Result<[EllipseOffset; 4]> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain { what: "ellipse probability", value: p });
    }
    if !(cov.rho.abs() < 1.0) {
        return Err(Error::DegenerateCovariance);
    }
    if !(cov.sd[0] > 0.0 && cov.sd[1] > 0.0) {
        return Err(Error::Numeric("covariance is not positive definite"));
    }
    let chi2 = chi2_2_quantile(p);
    Ok(DIRECTIONS.map(|(z1, z2)| {
        let (z1f, z2f) = (z1 as f64, z2 as f64);
        let q = iso_multiplier(chi2, cov.rho, z1f, z2f);
        EllipseOffset { direction: (z1, z2), q, delta: [z1f * q * cov.sd[0], z2f * q * cov.sd[1]] }
    }))
}

/// `delta' Sigma^-1 delta`.
pub fn mahalanobis(cov: &ParamCovariance, delta: [f64; 2]) -> f64 {
    let inv = match mat2_inverse(&cov.cov) {
        Some(m) => m,
        None => return f64::NAN,
    };
    delta[0] * (inv[0][0] * delta[0] + inv[0][1] * delta[1]) + delta[1] * (inv[1][0] * delta[0] + inv[1][1] * delta[1])
}

/// Annual rate at percentile `p` of Poisson(lambda * years).
pub fn perturb_lambda(lambda: f64, years: u32, p: f64) -> f64 {
    poisson_quantile(p, lambda * years as f64) as f64 / years as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub p_sev: f64,
    pub direction: (i8, i8),
    pub p_freq: f64,
    pub params: [f64; 2],
    pub lambda: f64,
    pub weight: f64,
    /// `None` when the perturbed parameters leave the family's domain.
    pub model: Option<SeverityModel>,
}

impl GridPoint {
    pub fn valid(&self) -> bool {
        self.model.is_some() && self.lambda > 0.0
    }
}

/// Points ordered by severity percentile, then direction, then frequency percentile.
#[derive(Debug, Clone, PartialEq)]
pub struct IsoGrid {
    pub center: [f64; 2],
    pub points: Vec<GridPoint>,
}

pub fn build_iso_grid(model: &SeverityModel, freq: &FrequencyModel, cov: &ParamCovariance) -> Result<IsoGrid> {
    let center = model.params();
    let lambdas = FREQUENCY_PERCENTILES.map(|p| perturb_lambda(freq.lambda(), freq.years(), p));
    let mut points = Vec::with_capacity(GRID_SIZE);
    for p_sev in SEVERITY_PERCENTILES {
        for off in ellipse_offsets(cov, p_sev)? {
            let params = [center[0] + off.delta[0], center[1] + off.delta[1]];
            let perturbed = model.with_params(params[0], params[1]).ok();
            for (k, p_freq) in FREQUENCY_PERCENTILES.into_iter().enumerate() {
                points.push(GridPoint {
                    p_sev,
                    direction: off.direction,
                    p_freq,
                    params,
                    lambda: lambdas[k],
                    weight: (1.0 - p_sev) * 2.0 * (1.0 - p_freq),
                    model: perturbed,
                });
            }
        }
    }
    Ok(IsoGrid { center, points })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RceOptions {
    /// Capitals above this (or non-finite) are incalculable.
    pub cap: f64,
}

impl Default for RceOptions {
    fn default() -> Self {
        RceOptions { cap: 1e15 }
    }
}

fn calculable(v: f64, opts: &RceOptions) -> bool {
    v.is_finite() && v <= opts.cap
}

/// Number of leading ellipses kept: an ellipse with any missing value is
/// dropped together with every wider one.
pub fn retained_levels(values: &[Option<f64>]) -> usize {
    values
        .chunks(POINTS_PER_LEVEL)
        .position(|level| level.iter().any(Option::is_none))
        .unwrap_or(values.len() / POINTS_PER_LEVEL)
}

/// ISLA capital at each point of a grid; `None` marks invalid or incalculable points.
pub fn grid_capitals(grid: &IsoGrid, alpha: f64, years: u32, opts: &RceOptions) -> Vec<Option<f64>> {
    grid.points
        .iter()
        .map(|pt| {
            let model = pt.model.as_ref()?;
            let freq = FrequencyModel::new(pt.lambda, years).ok()?;
            let spec = CapitalSpec::new(alpha, freq).ok()?;
            let v = isla(model, &spec).ok()?.value;
            calculable(v, opts).then_some(v)
        })
        .collect()
}

/// Median of the inner grid capitals around one outer point, after the discard
/// rule; `None` if the point is itself invalid or nothing survives.
pub fn outer_point_median(point: &GridPoint, years: u32, n: usize, alpha: f64, opts: &RceOptions) -> Option<f64> {
    let model = point.model.as_ref()?;
    let fm = fisher_for(model).ok()?;
    let cov = param_covariance(&fm, n);
    let freq = FrequencyModel::new(point.lambda, years).ok()?;
    let inner = build_iso_grid(model, &freq, &cov).ok()?;
    let caps = grid_capitals(&inner, alpha, years, opts);
    let keep = retained_levels(&caps) * POINTS_PER_LEVEL;
    if keep == 0 {
        return None;
    }
    let kept: Vec<f64> = caps[..keep].iter().flatten().copied().collect();
    let m = median(&kept);
    calculable(m, opts).then_some(m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CTableRow {
    pub family: SeverityFamily,
    pub truncated: bool,
    pub knots: [f64; 5],
    pub root: f64,
}

/// Convexity exponent `c(sev, n)` by severity and sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct CTable {
    pub sample_sizes: [f64; 5],
    pub rows: Vec<CTableRow>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CLookup {
    pub c: f64,
    pub interpolated: bool,
    /// n fell outside the tabulated range and was clamped to its edge.
    pub clamped: bool,
}

impl CTable {
    pub fn standard() -> Self {
        use SeverityFamily::*;
        let row = |family, truncated, knots, root| CTableRow { family, truncated, knots, root };
        CTable {
            sample_sizes: [150.0, 250.0, 500.0, 750.0, 1000.0],
            rows: alloc::vec![
                row(LogNormal, false, [1.00, 1.55, 1.55, 1.55, 1.75], 8.0),
                row(LogNormal, true, [1.20, 1.70, 1.80, 1.80, 1.80], 8.0),
                row(LogGamma, false, [1.00, 1.00, 1.00, 1.00, 0.30], 3.0),
                row(LogGamma, true, [0.30, 0.70, 0.85, 1.00, 1.00], 3.0),
                row(Gpd, false, [1.60, 1.95, 2.00, 2.00, 2.00], 10.0),
                row(Gpd, true, [1.50, 1.85, 2.00, 2.10, 2.10], 10.0),
            ],
        }
    }

    pub fn row(&self, family: SeverityFamily, truncated: bool) -> Option<&CTableRow> {
        self.rows.iter().find(|r| r.family == family && r.truncated == truncated)
    }

    /// Table value at `n`, interpolated between knots on the row's root scale.
    pub fn lookup(&self, family: SeverityFamily, truncated: bool, n: f64) -> Result<CLookup> {
        let row = self.row(family, truncated).ok_or(Error::Unsupported { family, what: "a c(sev, n) entry" })?;
        let ns = &self.sample_sizes;
        if n <= ns[0] {
            return Ok(CLookup { c: row.knots[0], interpolated: false, clamped: n < ns[0] });
        }
        if n >= ns[4] {
            return Ok(CLookup { c: row.knots[4], interpolated: false, clamped: n > ns[4] });
        }
        let k = ns.iter().rposition(|&v| v <= n).unwrap_or(0);
        if n == ns[k] {
            return Ok(CLookup { c: row.knots[k], interpolated: false, clamped: false });
        }
        let (lo, hi) = (row.knots[k], row.knots[k + 1]);
        if lo == hi {
            return Ok(CLookup { c: lo, interpolated: true, clamped: false });
        }
        let frac = (n - ns[k]) / (ns[k + 1] - ns[k]);
        let r = row.root;
        let lo_r = libm::pow(lo, 1.0 / r);
        let c = libm::pow(lo_r + frac * (libm::pow(hi, 1.0 / r) - lo_r), r);
        Ok(CLookup { c, interpolated: true, clamped: false })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RceResult {
    pub capital: f64,
    /// ISLA capital at the fitted parameters (NaN if incalculable).
    pub step1_capital: f64,
    pub median_of_medians: f64,
    pub weighted_mean: f64,
    pub ratio: f64,
    pub c: CLookup,
    /// Outer ellipses dropped by the discard rule.
    pub discarded_ellipses: usize,
    pub medians: Vec<Option<f64>>,
}

impl RceResult {
    /// The estimate under a different exponent.
    pub fn capital_with_c(&self, c: f64) -> f64 {
        self.median_of_medians * libm::pow(self.ratio, c)
    }
}

/// Outer grid around a fit: covariance from the fitted point's Fisher
/// information over the realized sample size.
pub fn outer_grid(fit: &FitResult, freq: &FrequencyModel) -> Result<IsoGrid> {
    if fit.model.family() == SeverityFamily::Normal {
        return Err(Error::Unsupported { family: SeverityFamily::Normal, what: "reduced-bias capital" });
    }
    let fm = fisher_for(&fit.model)?;
    let cov = param_covariance(&fm, fit.n);
    build_iso_grid(&fit.model, freq, &cov)
}

/// Combines per-outer-point medians into the estimate.
pub fn combine(
    fit: &FitResult,
    freq: &FrequencyModel,
    alpha: f64,
    grid: &IsoGrid,
    medians: Vec<Option<f64>>,
    ctable: &CTable,
    opts: &RceOptions,
) -> Result<RceResult> {
    let c = ctable.lookup(fit.model.family(), fit.model.is_truncated(), fit.n as f64)?;
    let levels = retained_levels(&medians);
    if levels == 0 {
        return Err(Error::EstimationFailure("every ellipse was discarded"));
    }
    let keep = levels * POINTS_PER_LEVEL;
    let kept: Vec<f64> = medians[..keep].iter().flatten().copied().collect();
    let mom = median(&kept);
    let (mut num, mut den) = (0.0, 0.0);
    for (pt, m) in grid.points[..keep].iter().zip(&medians[..keep]) {
        if let Some(v) = m {
            num += pt.weight * v;
            den += pt.weight;
        }
    }
    let weighted_mean = num / den;
    let ratio = mom / weighted_mean;
    let capital = mom * libm::pow(ratio, c.c);
    if !calculable(capital, opts) {
        return Err(Error::EstimationFailure("estimate is not finite"));
    }
    let step1_capital = CapitalSpec::new(alpha, *freq)
        .and_then(|spec| isla(&fit.model, &spec))
        .map_or(f64::NAN, |e| e.value);
    Ok(RceResult {
        capital,
        step1_capital,
        median_of_medians: mom,
        weighted_mean,
        ratio,
        c,
        discarded_ellipses: SEVERITY_PERCENTILES.len() - levels,
        medians,
    })
}

/// Reduced-bias capital for a converged fit (serial evaluation).
pub fn rce_estimate(
    fit: &FitResult,
    freq: &FrequencyModel,
    alpha: f64,
    ctable: &CTable,
    opts: &RceOptions,
) -> Result<RceResult> {
    if !fit.converged {
        return Err(Error::EstimationFailure("fit did not converge"));
    }
    let grid = outer_grid(fit, freq)?;
    let medians = grid
        .points
        .iter()
        .map(|pt| outer_point_median(pt, freq.years(), fit.n, alpha, opts))
        .collect();
    combine(fit, freq, alpha, &grid, medians, ctable, opts)
}
