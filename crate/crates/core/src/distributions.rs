//! Severity and frequency distributions.
//!
//! A [`SeverityModel`] is a two-parameter family with an optional data
//! collection threshold `H`. When a threshold is present the model is the
//! conditional distribution above `H`: `g(x) = f(x) / (1 - F(H))`.

use alloc::vec::Vec;
use core::fmt;

use rand_core::RngCore;

use crate::special::{
    gamma_p_inv, gamma_pq, gamma_q_inv, ln_gamma, norm_cdf, norm_isf, norm_ppf, norm_sf,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SeverityFamily {
    LogNormal,
    LogGamma,
    Gpd,
    /// Diagnostic only: no truncation, RCE or c-table support.
    Normal,
}

impl SeverityFamily {
    pub const ALL: [SeverityFamily; 4] =
        [SeverityFamily::LogNormal, SeverityFamily::LogGamma, SeverityFamily::Gpd, SeverityFamily::Normal];

    pub fn name(self) -> &'static str {
        match self {
            SeverityFamily::LogNormal => "lognormal",
            SeverityFamily::LogGamma => "loggamma",
            SeverityFamily::Gpd => "gpd",
            SeverityFamily::Normal => "normal",
        }
    }

    pub fn param_names(self) -> [&'static str; 2] {
        match self {
            SeverityFamily::LogNormal | SeverityFamily::Normal => ["mu", "sigma"],
            SeverityFamily::LogGamma => ["a", "b"],
            SeverityFamily::Gpd => ["xi", "theta"],
        }
    }

    pub fn parse(s: &str) -> Option<SeverityFamily> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "lognormal" | "logn" => Some(SeverityFamily::LogNormal),
            "loggamma" | "logg" => Some(SeverityFamily::LogGamma),
            "gpd" => Some(SeverityFamily::Gpd),
            "normal" => Some(SeverityFamily::Normal),
            _ => None,
        }
    }
}

impl fmt::Display for SeverityFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Mean of a severity; heavy tails may have none.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mean {
    Finite(f64),
    Infinite,
}

impl Mean {
    pub fn value(self) -> f64 {
        match self {
            Mean::Finite(m) => m,
            Mean::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Mean::Finite(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeverityModel {
    family: SeverityFamily,
    p1: f64,
    p2: f64,
    threshold: Option<f64>,
    // base survival at the threshold, 1 when untruncated
    tail_mass: f64,
}

impl SeverityModel {
    pub fn new(family: SeverityFamily, p1: f64, p2: f64, threshold: Option<f64>) -> Result<Self> {
        if !p1.is_finite() {
            return Err(Error::Domain { what: family.param_names()[0], value: p1 });
        }
        if !(p2 > 0.0 && p2.is_finite()) {
            return Err(Error::Domain { what: family.param_names()[1], value: p2 });
        }
        match family {
            SeverityFamily::LogGamma if !(p1 > 0.0) => {
                return Err(Error::Domain { what: "a", value: p1 });
            }
            SeverityFamily::Gpd if p1 < 0.0 => return Err(Error::Domain { what: "xi", value: p1 }),
            _ => {}
        }
        let mut model = SeverityModel { family, p1, p2, threshold: None, tail_mass: 1.0 };
        if let Some(h) = threshold {
            if family == SeverityFamily::Normal {
                return Err(Error::Unsupported { family, what: "truncation" });
            }
            let min = if family == SeverityFamily::LogGamma { 1.0 } else { 0.0 };
            if !(h >= min && h.is_finite()) {
                return Err(Error::Domain { what: "threshold", value: h });
            }
            let mass = model.base_sf(h);
            if !(mass > 0.0) {
                return Err(Error::Domain { what: "threshold (no mass above it)", value: h });
            }
            model.threshold = Some(h);
            model.tail_mass = mass;
        }
        Ok(model)
    }

    pub fn lognormal(mu: f64, sigma: f64) -> Result<Self> {
        Self::new(SeverityFamily::LogNormal, mu, sigma, None)
    }

    pub fn loggamma(a: f64, b: f64) -> Result<Self> {
        Self::new(SeverityFamily::LogGamma, a, b, None)
    }

    pub fn gpd(xi: f64, theta: f64) -> Result<Self> {
        Self::new(SeverityFamily::Gpd, xi, theta, None)
    }

    pub fn normal(mu: f64, sigma: f64) -> Result<Self> {
        Self::new(SeverityFamily::Normal, mu, sigma, None)
    }

    /// Same family and parameters, conditioned above `h`.
    pub fn truncated(&self, h: f64) -> Result<Self> {
        Self::new(self.family, self.p1, self.p2, Some(h))
    }

    /// Same family and threshold, new parameters.
    pub fn with_params(&self, p1: f64, p2: f64) -> Result<Self> {
        Self::new(self.family, p1, p2, self.threshold)
    }

    pub fn base(&self) -> Self {
        SeverityModel { threshold: None, tail_mass: 1.0, ..*self }
    }

    pub fn family(&self) -> SeverityFamily {
        self.family
    }

    pub fn params(&self) -> [f64; 2] {
        [self.p1, self.p2]
    }

    pub fn p1(&self) -> f64 {
        self.p1
    }

    pub fn p2(&self) -> f64 {
        self.p2
    }

    pub fn threshold(&self) -> Option<f64> {
        self.threshold
    }

    pub fn is_truncated(&self) -> bool {
        self.threshold.is_some()
    }

    /// `1 - F(H)` of the base distribution (1 when untruncated).
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Short table label, e.g. `TLogN` or `GPD`.
    pub fn label(&self) -> &'static str {
        match (self.family, self.is_truncated()) {
            (SeverityFamily::LogNormal, false) => "LogN",
            (SeverityFamily::LogNormal, true) => "TLogN",
            (SeverityFamily::LogGamma, false) => "Logg",
            (SeverityFamily::LogGamma, true) => "TLogg",
            (SeverityFamily::Gpd, false) => "GPD",
            (SeverityFamily::Gpd, true) => "TGPD",
            (SeverityFamily::Normal, _) => "Normal",
        }
    }

    fn lower_bound(&self) -> f64 {
        match (self.threshold, self.family) {
            (Some(h), _) => h,
            (None, SeverityFamily::LogGamma) => 1.0,
            (None, SeverityFamily::Normal) => f64::NEG_INFINITY,
            (None, _) => 0.0,
        }
    }

    fn base_sf(&self, x: f64) -> f64 {
        let (mu_or_shape, scale) = (self.p1, self.p2);
        match self.family {
            SeverityFamily::LogNormal => {
                if x <= 0.0 {
                    1.0
                } else {
                    norm_sf((libm::log(x) - mu_or_shape) / scale)
                }
            }
            SeverityFamily::Normal => norm_sf((x - mu_or_shape) / scale),
            SeverityFamily::Gpd => {
                if x <= 0.0 {
                    1.0
                } else if mu_or_shape == 0.0 {
                    libm::exp(-x / scale)
                } else {
                    libm::exp(-libm::log1p(mu_or_shape * x / scale) / mu_or_shape)
                }
            }
            SeverityFamily::LogGamma => {
                if x <= 1.0 {
                    1.0
                } else {
                    gamma_pq(mu_or_shape, scale * libm::log(x)).1
                }
            }
        }
    }

    fn base_cdf(&self, x: f64) -> f64 {
        let (m, s) = (self.p1, self.p2);
        match self.family {
            SeverityFamily::LogNormal => {
                if x <= 0.0 {
                    0.0
                } else {
                    norm_cdf((libm::log(x) - m) / s)
                }
            }
            SeverityFamily::Normal => norm_cdf((x - m) / s),
            SeverityFamily::Gpd => {
                if x <= 0.0 {
                    0.0
                } else if m == 0.0 {
                    -libm::expm1(-x / s)
                } else {
                    -libm::expm1(-libm::log1p(m * x / s) / m)
                }
            }
            SeverityFamily::LogGamma => {
                if x <= 1.0 {
                    0.0
                } else {
                    gamma_pq(m, s * libm::log(x)).0
                }
            }
        }
    }

    fn base_ln_pdf(&self, x: f64) -> f64 {
        const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
        let (m, s) = (self.p1, self.p2);
        match self.family {
            SeverityFamily::LogNormal => {
                if x <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                let lx = libm::log(x);
                let z = (lx - m) / s;
                -0.5 * z * z - libm::log(s) - lx - LN_SQRT_2PI
            }
            SeverityFamily::Normal => {
                let z = (x - m) / s;
                -0.5 * z * z - libm::log(s) - LN_SQRT_2PI
            }
            SeverityFamily::Gpd => {
                if x < 0.0 {
                    return f64::NEG_INFINITY;
                }
                if m == 0.0 {
                    -libm::log(s) - x / s
                } else {
                    -libm::log(s) - (1.0 / m + 1.0) * libm::log1p(m * x / s)
                }
            }
            SeverityFamily::LogGamma => {
                if x <= 1.0 {
                    // density at x = 1 is finite only for a = 1
                    return if x == 1.0 && m == 1.0 { libm::log(s) } else { f64::NEG_INFINITY };
                }
                let lx = libm::log(x);
                m * libm::log(s) + (m - 1.0) * libm::log(lx) - ln_gamma(m) - (s + 1.0) * lx
            }
        }
    }

    // base x with survival s
    fn base_sf_inv(&self, s: f64) -> Result<f64> {
        let (m, sc) = (self.p1, self.p2);
        Ok(match self.family {
            SeverityFamily::LogNormal => libm::exp(m + sc * norm_isf(s)),
            SeverityFamily::Normal => m + sc * norm_isf(s),
            SeverityFamily::Gpd => {
                if m == 0.0 {
                    -sc * libm::log(s)
                } else {
                    sc * libm::expm1(-m * libm::log(s)) / m
                }
            }
            SeverityFamily::LogGamma => libm::exp(gamma_q_inv(m, s)? / sc),
        })
    }

    // base x with cdf p, accurate for small p
    fn base_cdf_inv(&self, p: f64) -> Result<f64> {
        let (m, sc) = (self.p1, self.p2);
        Ok(match self.family {
            SeverityFamily::LogNormal => libm::exp(m + sc * norm_ppf(p)),
            SeverityFamily::Normal => m + sc * norm_ppf(p),
            SeverityFamily::Gpd => {
                let ls = libm::log1p(-p);
                if m == 0.0 {
                    -sc * ls
                } else {
                    sc * libm::expm1(-m * ls) / m
                }
            }
            SeverityFamily::LogGamma => libm::exp(gamma_p_inv(m, p)? / sc),
        })
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x < self.lower_bound() {
            return f64::NEG_INFINITY;
        }
        self.base_ln_pdf(x) - libm::log(self.tail_mass)
    }

    /// Density; zero outside the support. At `x = H` the right limit is returned.
    pub fn pdf(&self, x: f64) -> f64 {
        libm::exp(self.ln_pdf(x))
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.lower_bound() {
            return 0.0;
        }
        match self.threshold {
            None => self.base_cdf(x),
            Some(h) => {
                let s = self.base_sf(x);
                let g = if s > 0.5 {
                    (self.base_cdf(x) - self.base_cdf(h)) / self.tail_mass
                } else {
                    1.0 - s / self.tail_mass
                };
                g.clamp(0.0, 1.0)
            }
        }
    }

    pub fn sf(&self, x: f64) -> f64 {
        if x <= self.lower_bound() {
            return 1.0;
        }
        (self.base_sf(x) / self.tail_mass).min(1.0)
    }

    /// Quantile at `p`; for truncated models, the quantile of the
    /// conditional-above-threshold distribution.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain { what: "probability", value: p });
        }
        if p > 0.5 || self.is_truncated() {
            self.quantile_upper(1.0 - p)
        } else {
            self.base_cdf_inv(p)
        }
    }

    /// The `x` with `sf(x) = q`; avoids forming `1 - q` for extreme tails.
    pub fn quantile_upper(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::Domain { what: "tail probability", value: q });
        }
        let x = self.base_sf_inv(q * self.tail_mass)?;
        Ok(match self.threshold {
            Some(h) => x.max(h),
            None => x,
        })
    }

    pub fn mean(&self) -> Mean {
        let (m, s) = (self.p1, self.p2);
        match (self.family, self.threshold) {
            (SeverityFamily::Normal, _) => Mean::Finite(m),
            (SeverityFamily::LogNormal, None) => Mean::Finite(libm::exp(m + 0.5 * s * s)),
            (SeverityFamily::LogNormal, Some(h)) => {
                let w = (m + s * s - libm::log(h)) / s;
                Mean::Finite(libm::exp(m + 0.5 * s * s) * norm_cdf(w) / self.tail_mass)
            }
            (SeverityFamily::Gpd, _) if m >= 1.0 => Mean::Infinite,
            (SeverityFamily::Gpd, None) => Mean::Finite(s / (1.0 - m)),
            (SeverityFamily::Gpd, Some(h)) => Mean::Finite((h + s) / (1.0 - m)),
            (SeverityFamily::LogGamma, _) if s <= 1.0 => Mean::Infinite,
            (SeverityFamily::LogGamma, None) => Mean::Finite(libm::exp(m * libm::log(s / (s - 1.0)))),
            (SeverityFamily::LogGamma, Some(h)) => {
                let lh = libm::log(h);
                let upper = gamma_pq(m, (s - 1.0) * lh).1;
                let ln_mean = m * libm::log(s / (s - 1.0)) + libm::log(upper) - libm::log(self.tail_mass);
                Mean::Finite(libm::exp(ln_mean))
            }
        }
    }

    /// One draw by survival-space inversion: `x = S^-1(u * (1 - F(H)))`.
    pub fn sample_one<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = uniform_open(rng);
        // u in (0, 1) never hits the quantile domain edges
        self.quantile_upper(u).unwrap_or(f64::NAN)
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<f64> {
        (0..count).map(|_| self.sample_one(rng)).collect()
    }
}

impl fmt::Display for SeverityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [n1, n2] = self.family.param_names();
        write!(f, "{}({}={}, {}={}", self.label(), n1, self.p1, n2, self.p2)?;
        if let Some(h) = self.threshold {
            write!(f, ", H={h}")?;
        }
        f.write_str(")")
    }
}

/// Both closed forms of the truncated GPD mean: `theta/xi * (S_H^-xi/(1-xi) - 1)`
/// and `(H + theta)/(1 - xi)`.
pub fn tgpd_mean_forms(xi: f64, theta: f64, h: f64) -> (f64, f64) {
    let s_h = libm::exp(-libm::log1p(xi * h / theta) / xi);
    let first = theta / xi * (libm::pow(s_h, -xi) / (1.0 - xi) - 1.0);
    let second = (h + theta) / (1.0 - xi);
    (first, second)
}

/// Both closed forms of the truncated LogGamma mean: through the upper
/// incomplete gamma at `(b-1) ln H`, and through the LogGamma(a, b-1) survival.
pub fn tloggamma_mean_forms(a: f64, b: f64, h: f64) -> Result<(f64, f64)> {
    let scale = libm::pow(b / (b - 1.0), a);
    let lh = libm::log(h);
    let s_h = gamma_pq(a, b * lh).1;
    let first = scale * gamma_pq(a, lh * (b - 1.0)).1 / s_h;
    let shifted = SeverityModel::loggamma(a, b - 1.0)?;
    let base = SeverityModel::loggamma(a, b)?;
    let second = scale * (1.0 - shifted.cdf(h)) / (1.0 - base.cdf(h));
    Ok((first, second))
}

/// Uniform on the open interval (0, 1) with 53 random bits.
pub fn uniform_open<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyModel {
    lambda: f64,
    years: u32,
}

impl FrequencyModel {
    pub fn new(lambda: f64, years: u32) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Domain { what: "lambda", value: lambda });
        }
        if years == 0 {
            return Err(Error::Domain { what: "years", value: 0.0 });
        }
        Ok(FrequencyModel { lambda, years })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn years(&self) -> u32 {
        self.years
    }

    pub fn expected_count(&self) -> f64 {
        self.lambda * self.years as f64
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(lambda, self.years)
    }
}

/// Total loss count over the horizon, Poisson(lambda * years).
pub fn sample_poisson<R: RngCore + ?Sized>(freq: &FrequencyModel, rng: &mut R) -> u64 {
    PoissonSampler::new(freq.expected_count()).sample(rng)
}

/// Poisson sampling by sequential inversion; for large means the search
/// starts at the mode so the cost grows like the standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonSampler {
    mean: f64,
    mode: u64,
    cdf_mode: f64,
    pmf_mode: f64,
}

impl PoissonSampler {
    pub fn new(mean: f64) -> Self {
        let mean = if mean > 0.0 { mean } else { 0.0 };
        let mode = libm::floor(mean) as u64;
        let cdf_mode = crate::special::poisson_cdf(mode, mean);
        let pmf_mode = crate::special::poisson_pmf(mode, mean);
        PoissonSampler { mean, mode, cdf_mode, pmf_mode }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> u64 {
        if self.mean == 0.0 {
            return 0;
        }
        let u = uniform_open(rng);
        let m = self.mean;
        if m < 30.0 {
            let mut p = libm::exp(-m);
            let mut cdf = p;
            let mut k = 0u64;
            while u > cdf && k < 10_000 {
                k += 1;
                p *= m / k as f64;
                cdf += p;
            }
            return k;
        }
        let mut k = self.mode;
        let mut cdf = self.cdf_mode;
        let mut p = self.pmf_mode;
        if u <= cdf {
            while k > 0 && u <= cdf - p {
                cdf -= p;
                p *= k as f64 / m;
                k -= 1;
            }
        } else {
            while u > cdf {
                k += 1;
                p *= m / k as f64;
                cdf += p;
                if p == 0.0 {
                    break;
                }
            }
        }
        k
    }
}
