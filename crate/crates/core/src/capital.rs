//! Single-loss approximations to the aggregate VaR and a Monte Carlo oracle.
//!
//! Capital is the `alpha` quantile of the annual aggregate loss of a compound
//! Poisson model. The approximations evaluate the severity at the tail
//! probability `(1 - alpha) / lambda` and add a mean (or heavy-tail) correction.

use alloc::vec::Vec;

use rand_core::RngCore;

use crate::distributions::{FrequencyModel, Mean, PoissonSampler, SeverityFamily, SeverityModel};
use crate::roots::brent;
use crate::special::gamma;
use crate::{Error, Result};

pub const RCAP_ALPHA: f64 = 0.999;
pub const ECAP_ALPHA: f64 = 0.9997;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapitalSpec {
    pub alpha: f64,
    pub freq: FrequencyModel,
}

impl CapitalSpec {
    pub fn new(alpha: f64, freq: FrequencyModel) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Domain { what: "alpha", value: alpha });
        }
        Ok(CapitalSpec { alpha, freq })
    }

    pub fn lambda(&self) -> f64 {
        self.freq.lambda()
    }

    /// Severity exceedance probability `(1 - alpha) / lambda`.
    pub fn severity_tail(&self) -> f64 {
        (1.0 - self.alpha) / self.freq.lambda()
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Ok(CapitalSpec { alpha: self.alpha, freq: self.freq.with_lambda(lambda)? })
    }
}

/// Which approximation produced a capital figure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlaBranch {
    /// Quantile plus a multiple of the (finite) mean.
    MeanCorrected,
    /// Tail index in (1, 2): quantile plus the heavy-tail correction.
    HeavyTail,
    /// Inside the interpolation band around tail index 1.
    Interpolated,
}

impl SlaBranch {
    pub fn name(self) -> &'static str {
        match self {
            SlaBranch::MeanCorrected => "mean-corrected",
            SlaBranch::HeavyTail => "heavy-tail",
            SlaBranch::Interpolated => "interpolated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapitalEstimate {
    pub value: f64,
    pub quantile_term: f64,
    pub correction: f64,
    pub tail_index: f64,
    pub branch: SlaBranch,
}

/// Tail index per family and the interpolation band used around index 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailIndexPolicy {
    pub low: f64,
    pub high: f64,
    pub precision: f64,
    pub root: f64,
}

impl Default for TailIndexPolicy {
    fn default() -> Self {
        TailIndexPolicy { low: 0.8, high: 1.2, precision: 1000.0, root: 50.0 }
    }
}

impl TailIndexPolicy {
    /// GPD: xi; LogGamma: 1/b; LogNormal and Normal: 0.
    pub fn tail_index(model: &SeverityModel) -> f64 {
        match model.family() {
            SeverityFamily::Gpd => model.p1(),
            SeverityFamily::LogGamma => 1.0 / model.p2(),
            SeverityFamily::LogNormal | SeverityFamily::Normal => 0.0,
        }
    }

    /// The model with its tail index moved to `index`, other parameter fixed.
    pub fn with_tail_index(model: &SeverityModel, index: f64) -> Result<SeverityModel> {
        match model.family() {
            SeverityFamily::Gpd => model.with_params(index, model.p2()),
            SeverityFamily::LogGamma => model.with_params(model.p1(), 1.0 / index),
            family => Err(Error::Unsupported { family, what: "a tail index" }),
        }
    }

    fn interpolates(&self, model: &SeverityModel) -> bool {
        let ti = Self::tail_index(model);
        matches!(model.family(), SeverityFamily::Gpd | SeverityFamily::LogGamma) && ti > self.low && ti < self.high
    }
}

fn quantile_term(model: &SeverityModel, spec: &CapitalSpec) -> Result<f64> {
    model.quantile_upper(spec.severity_tail())
}

/// `c_xi = (1 - xi) Gamma(1 - 1/xi)^2 / (2 Gamma(1 - 2/xi))`.
pub fn c_xi(xi: f64) -> f64 {
    let g = gamma(1.0 - 1.0 / xi);
    (1.0 - xi) * g * g / (2.0 * gamma(1.0 - 2.0 / xi))
}

/// Heavy-tail correction for tail index in (1, 2), added to the quantile term.
fn heavy_tail_correction(q: f64, alpha: f64, xi: f64) -> f64 {
    (1.0 - alpha) * q * c_xi(xi) / (1.0 - 1.0 / xi)
}

/// Single-loss approximation with the `(lambda - 1) * mean` correction.
pub fn sla_bk(model: &SeverityModel, spec: &CapitalSpec) -> Result<CapitalEstimate> {
    let mu = match model.mean() {
        Mean::Finite(m) => m,
        Mean::Infinite => return Err(Error::InfiniteMean),
    };
    let q = quantile_term(model, spec)?;
    let correction = (spec.lambda() - 1.0) * mu;
    Ok(CapitalEstimate {
        value: q + correction,
        quantile_term: q,
        correction,
        tail_index: TailIndexPolicy::tail_index(model),
        branch: SlaBranch::MeanCorrected,
    })
}

/// Mean-corrected approximation below tail index 1 (`lambda * mean`) and the
/// heavy-tail correction for tail index in (1, 2).
pub fn sla_degen(model: &SeverityModel, spec: &CapitalSpec) -> Result<CapitalEstimate> {
    let ti = TailIndexPolicy::tail_index(model);
    if ti >= 2.0 {
        return Err(Error::Domain { what: "tail index (must be below 2)", value: ti });
    }
    if ti == 1.0 {
        return Err(Error::Domain { what: "tail index exactly 1 (use isla)", value: ti });
    }
    let q = quantile_term(model, spec)?;
    if ti < 1.0 {
        let mu = model.mean().value();
        if !mu.is_finite() {
            return Err(Error::InfiniteMean);
        }
        let correction = spec.lambda() * mu;
        Ok(CapitalEstimate { value: q + correction, quantile_term: q, correction, tail_index: ti, branch: SlaBranch::MeanCorrected })
    } else {
        let correction = heavy_tail_correction(q, spec.alpha, ti);
        Ok(CapitalEstimate { value: q + correction, quantile_term: q, correction, tail_index: ti, branch: SlaBranch::HeavyTail })
    }
}

/// Interpolated single-loss approximation: identical to [`sla_degen`] outside
/// the band; inside it, the correction is interpolated on a root scale between
/// the mean correction at the band's low end and the heavy-tail correction at
/// its high end, and added to the quantile at the actual parameters.
pub fn isla(model: &SeverityModel, spec: &CapitalSpec) -> Result<CapitalEstimate> {
    isla_with(model, spec, &TailIndexPolicy::default())
}

pub fn isla_with(model: &SeverityModel, spec: &CapitalSpec, policy: &TailIndexPolicy) -> Result<CapitalEstimate> {
    if !policy.interpolates(model) {
        return sla_degen(model, spec);
    }
    let ti = TailIndexPolicy::tail_index(model);
    let low = TailIndexPolicy::with_tail_index(model, policy.low)?;
    let high = TailIndexPolicy::with_tail_index(model, policy.high)?;
    let lct = spec.lambda() * low.mean().value();
    let hct = heavy_tail_correction(quantile_term(&high, spec)?, spec.alpha, policy.high);
    let inv_root = 1.0 / policy.root;
    let full_range = (policy.high - policy.low) * policy.precision;
    let in_range = (ti - policy.low) * policy.precision;
    let lct_r = libm::pow(lct, inv_root);
    let step = (libm::pow(hct, inv_root) - lct_r) / (full_range - 1.0);
    let correction = libm::pow(lct_r + in_range * step, policy.root);
    let q = quantile_term(model, spec)?;
    Ok(CapitalEstimate { value: q + correction, quantile_term: q, correction, tail_index: ti, branch: SlaBranch::Interpolated })
}

/// Simulated annual aggregate losses, keeping what the conditional tail
/// estimator needs: the count, and the sum and maximum of all but the last loss.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnnualLosses {
    pub totals: Vec<f64>,
    pub partial_sums: Vec<f64>,
    pub partial_maxima: Vec<f64>,
    pub counts: Vec<u32>,
}

/// Years per block when summing the conditional tail estimator; the fixed
/// blocking makes serial and parallel sums bit-identical.
pub const TAIL_SUM_BLOCK: usize = 1 << 16;

impl AnnualLosses {
    pub fn with_capacity(n: usize) -> Self {
        AnnualLosses {
            totals: Vec::with_capacity(n),
            partial_sums: Vec::with_capacity(n),
            partial_maxima: Vec::with_capacity(n),
            counts: Vec::with_capacity(n),
        }
    }

    pub fn len(&self) -> usize {
        self.totals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.totals.is_empty()
    }

    pub fn append(&mut self, mut other: AnnualLosses) {
        self.totals.append(&mut other.totals);
        self.partial_sums.append(&mut other.partial_sums);
        self.partial_maxima.append(&mut other.partial_maxima);
        self.counts.append(&mut other.counts);
    }

    /// Type-7 empirical quantile of the annual totals.
    pub fn empirical_quantile(&self, alpha: f64) -> f64 {
        let n = self.totals.len();
        if n == 0 {
            return f64::NAN;
        }
        let h = (n - 1) as f64 * alpha;
        let k = libm::floor(h) as usize;
        let mut work = self.totals.clone();
        let (_, &mut lo, rest) = work.select_nth_unstable_by(k, f64::total_cmp);
        let hi = rest.iter().copied().fold(f64::INFINITY, f64::min);
        if k + 1 >= n {
            return lo;
        }
        lo + (h - k as f64) * (hi - lo)
    }

    /// Sum over years `range` of `N * S(max(M', x - S'))`, where `S'` and `M'`
    /// are the sum and maximum of the first `N - 1` losses.
    pub fn tail_sum(&self, model: &SeverityModel, x: f64, range: core::ops::Range<usize>) -> f64 {
        let mut acc = 0.0;
        for i in range {
            let n = self.counts[i];
            if n == 0 {
                continue;
            }
            let z = (x - self.partial_sums[i]).max(self.partial_maxima[i]);
            acc += n as f64 * model.sf(z);
        }
        acc
    }

    /// Conditional Monte Carlo estimate of `P(S > x)`.
    pub fn tail_probability(&self, model: &SeverityModel, x: f64) -> f64 {
        let n = self.len();
        let mut total = 0.0;
        let mut start = 0;
        while start < n {
            let end = (start + TAIL_SUM_BLOCK).min(n);
            total += self.tail_sum(model, x, start..end);
            start = end;
        }
        total / n as f64
    }

    /// Solves `tail(x) = 1 - alpha` for x, given a tail-probability estimator.
    pub fn solve_tail<F: FnMut(f64) -> f64>(&self, alpha: f64, mut tail: F) -> Result<f64> {
        let target = 1.0 - alpha;
        let start = self.empirical_quantile(alpha);
        if !(start > 0.0) {
            // the aggregate is zero beyond alpha
            if tail(f64::MIN_POSITIVE) <= target {
                return Ok(0.0);
            }
        }
        let mut lo = if start > 0.0 { 0.5 * start } else { 1.0 };
        let mut hi = if start > 0.0 { 2.0 * start } else { 2.0 };
        let mut guard = 0;
        while tail(lo) < target {
            lo *= 0.5;
            guard += 1;
            if guard > 200 {
                return Ok(0.0);
            }
        }
        guard = 0;
        while tail(hi) > target {
            hi *= 2.0;
            guard += 1;
            if guard > 200 || !hi.is_finite() {
                return Err(Error::Numeric("conditional tail estimator: upper bracket not found"));
            }
        }
        brent(|x| tail(x) - target, lo, hi, 1e-12, 200)
    }
}

/// Simulates `years` independent annual aggregates under Poisson(lambda) counts.
pub fn simulate_annual_losses<R: RngCore + ?Sized>(
    model: &SeverityModel,
    lambda: f64,
    years: usize,
    rng: &mut R,
) -> AnnualLosses {
    let poisson = PoissonSampler::new(lambda);
    let mut out = AnnualLosses::with_capacity(years);
    for _ in 0..years {
        let n = poisson.sample(rng) as u32;
        let (mut sum, mut max) = (0.0, f64::NEG_INFINITY);
        let mut last = 0.0;
        for k in 0..n {
            let x = model.sample_one(rng);
            if k + 1 == n {
                last = x;
            } else {
                sum += x;
                max = max.max(x);
            }
        }
        out.totals.push(sum + last);
        out.partial_sums.push(sum);
        out.partial_maxima.push(max);
        out.counts.push(n);
    }
    out
}

/// Monte Carlo capital: the plain order-statistic estimate and the conditional
/// (Asmussen-Kroese) estimate computed from the same simulated years.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McCapital {
    pub order_statistic: f64,
    pub conditional: f64,
    pub years: usize,
}

pub fn mc_estimates(model: &SeverityModel, alpha: f64, sims: &AnnualLosses) -> Result<McCapital> {
    let order_statistic = sims.empirical_quantile(alpha);
    let conditional = sims.solve_tail(alpha, |x| sims.tail_probability(model, x))?;
    Ok(McCapital { order_statistic, conditional, years: sims.len() })
}

/// Serial Monte Carlo oracle over `years` simulated years.
pub fn mc_capital_oracle<R: RngCore + ?Sized>(
    model: &SeverityModel,
    spec: &CapitalSpec,
    years: usize,
    rng: &mut R,
) -> Result<McCapital> {
    if years == 0 {
        return Err(Error::InsufficientData { n: 0, required: 1 });
    }
    let sims = simulate_annual_losses(model, spec.lambda(), years, rng);
    mc_estimates(model, spec.alpha, &sims)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(alpha: f64, lambda: f64) -> CapitalSpec {
        CapitalSpec::new(alpha, FrequencyModel::new(lambda, 1).unwrap()).unwrap()
    }

    #[test]
    fn bk_with_unit_lambda_is_the_quantile() {
        let m = SeverityModel::lognormal(10.0, 2.0).unwrap();
        let c = sla_bk(&m, &spec(0.999, 1.0)).unwrap();
        assert_eq!(c.value, m.quantile(0.999).unwrap());
    }

    #[test]
    fn bk_rejects_infinite_mean() {
        let m = SeverityModel::gpd(1.1, 40000.0).unwrap();
        assert_eq!(sla_bk(&m, &spec(0.999, 25.0)), Err(Error::InfiniteMean));
    }

    #[test]
    fn degen_rejects_extreme_tail() {
        let m = SeverityModel::gpd(2.0, 40000.0).unwrap();
        assert!(sla_degen(&m, &spec(0.999, 25.0)).is_err());
    }

    #[test]
    fn isla_at_band_edge_equals_degen() {
        let m = SeverityModel::gpd(0.8, 55000.0).unwrap();
        let s = spec(0.999, 25.0);
        assert_eq!(isla(&m, &s).unwrap().value, sla_degen(&m, &s).unwrap().value);
    }
}
