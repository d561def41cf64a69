//! Special functions: log-gamma, polygamma, regularized incomplete gamma,
//! normal and Poisson helpers.

use crate::roots::brent;
use crate::{Error, Result};

const EPS: f64 = 1e-16;
const MAX_ITER: usize = 100_000;

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// Digamma for x > 0: upward recurrence to x >= 10, then the asymptotic series.
pub fn digamma(mut x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let r = 1.0 / (x * x);
    let series = r
        * (1.0 / 12.0
            - r * (1.0 / 120.0
                - r * (1.0 / 252.0 - r * (1.0 / 240.0 - r * (1.0 / 132.0 - r * 691.0 / 32760.0)))));
    acc + libm::log(x) - 0.5 / x - series
}

/// Trigamma for x > 0.
pub fn trigamma(mut x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    let mut acc = 0.0;
    while x < 10.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let r = 1.0 / (x * x);
    // B2k / x^(2k+1) tail
    let series = r
        * (1.0 / 6.0
            - r * (1.0 / 30.0
                - r * (1.0 / 42.0 - r * (1.0 / 30.0 - r * (5.0 / 66.0 - r * 691.0 / 2730.0)))));
    acc + 1.0 / x + 0.5 * r + series / x
}

/// Kummer kernel of the lower incomplete gamma:
/// `S(s, x) = sum_{n>=0} x^n / ((s+1)(s+2)...(s+n))`,
/// so that `P(s, x) = x^s e^{-x} / Gamma(s+1) * S(s, x)`.
pub fn lower_gamma_kernel(s: f64, x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = s;
    for _ in 0..MAX_ITER {
        k += 1.0;
        term *= x / k;
        sum += term;
        if term < sum * EPS {
            break;
        }
    }
    sum
}

/// ln of `x^a e^{-x} / Gamma(a)`.
fn ln_prefactor(a: f64, x: f64) -> f64 {
    a * libm::log(x) - x - ln_gamma(a)
}

/// Continued fraction for `Q(a, x) * Gamma(a) / (x^a e^{-x})` (modified Lentz).
fn upper_gamma_cf(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized lower and upper incomplete gamma `(P(a, x), Q(a, x))`, each
/// computed directly on its accurate side.
pub fn gamma_pq(a: f64, x: f64) -> (f64, f64) {
    if !(a > 0.0) || x.is_nan() {
        return (f64::NAN, f64::NAN);
    }
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    if x.is_infinite() {
        return (1.0, 0.0);
    }
    if x < a + 1.0 {
        let p = libm::exp(ln_prefactor(a, x)) * lower_gamma_kernel(a, x) / a;
        let p = p.min(1.0);
        (p, 1.0 - p)
    } else {
        let q = libm::exp(ln_prefactor(a, x)) * upper_gamma_cf(a, x);
        let q = q.min(1.0);
        (1.0 - q, q)
    }
}

pub fn gamma_p(a: f64, x: f64) -> f64 {
    gamma_pq(a, x).0
}

pub fn gamma_q(a: f64, x: f64) -> f64 {
    gamma_pq(a, x).1
}

/// Solves `Q(a, y) = q` for y, i.e. the `1 - q` quantile of Gamma(a, 1).
pub fn gamma_q_inv(a: f64, q: f64) -> Result<f64> {
    if q < 0.5 {
        gamma_inv(a, q, true)
    } else {
        gamma_inv(a, 1.0 - q, false)
    }
}

/// Solves `P(a, y) = p` for y.
pub fn gamma_p_inv(a: f64, p: f64) -> Result<f64> {
    if p < 0.5 {
        gamma_inv(a, p, false)
    } else {
        gamma_inv(a, 1.0 - p, true)
    }
}

// `target` is the probability on the side named by `upper`; matching the
// smaller side directly keeps full relative accuracy in extreme tails.
fn gamma_inv(a: f64, target: f64, upper: bool) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::Domain { what: "gamma shape", value: a });
    }
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Domain { what: "probability", value: target });
    }
    let f = |y: f64| {
        let (p, q) = gamma_pq(a, y);
        if upper {
            target - q
        } else {
            p - target
        }
    };
    // Wilson-Hilferty start
    let z = if upper { norm_isf(target) } else { norm_ppf(target) };
    let wh = 1.0 - 1.0 / (9.0 * a) + z / (3.0 * libm::sqrt(a));
    let mut guess = a * wh * wh * wh;
    if !(guess > 0.0) || !guess.is_finite() {
        let p = if upper { 1.0 - target } else { target };
        guess = libm::pow(p * gamma(a + 1.0), 1.0 / a);
        if !(guess > 0.0) || !guess.is_finite() {
            guess = a;
        }
    }
    let mut lo = guess * 0.5;
    let mut hi = guess * 2.0;
    let mut n = 0;
    while f(lo) > 0.0 {
        lo *= 0.25;
        n += 1;
        if lo < 1e-300 || n > 2000 {
            return Err(Error::Numeric("gamma quantile: lower bracket not found"));
        }
    }
    n = 0;
    while f(hi) < 0.0 {
        hi *= 2.0;
        n += 1;
        if !hi.is_finite() || n > 2000 {
            return Err(Error::Numeric("gamma quantile: upper bracket not found"));
        }
    }
    brent(f, lo, hi, 4.0 * f64::EPSILON, 200)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

pub fn norm_pdf(x: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * libm::exp(-0.5 * x * x)
}

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * core::f64::consts::FRAC_1_SQRT_2)
}

pub fn norm_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * core::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal quantile, Wichura's AS241 (PPND16).
pub fn norm_ppf(p: f64) -> f64 {
    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((((((r * 2509.080_928_730_122_7 + 33430.575_583_588_13) * r
                + 67265.770_927_008_7)
                * r
                + 45921.953_931_549_87)
                * r
                + 13731.693_765_509_461)
                * r
                + 1971.590_950_306_551_4)
                * r
                + 133.141_667_891_784_38)
                * r
                + 3.387_132_872_796_366_5)
            / (((((((r * 5226.495_278_852_546 + 28729.085_735_721_943) * r
                + 39307.895_800_092_71)
                * r
                + 21213.794_301_586_597)
                * r
                + 5394.196_021_424_751)
                * r
                + 687.187_007_492_057_9)
                * r
                + 42.313_330_701_600_91)
                * r
                + 1.0);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = libm::sqrt(-libm::log(tail));
    let val = if r <= 5.0 {
        r -= 1.6;
        (((((((r * 7.745_450_142_783_414e-4 + 0.022_723_844_989_269_184) * r
            + 0.241_780_725_177_450_6)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_545)
            * r
            + 1.423_437_110_749_683_5)
            / (((((((r * 1.050_750_071_644_416_9e-9 + 5.475_938_084_995_345e-4) * r
                + 0.015_198_666_563_616_457)
                * r
                + 0.148_103_976_427_480_08)
                * r
                + 0.689_767_334_985_1)
                * r
                + 1.676_384_830_183_803_8)
                * r
                + 2.053_191_626_637_759)
                * r
                + 1.0)
    } else {
        r -= 5.0;
        (((((((r * 2.010_334_399_292_288_1e-7 + 2.711_555_568_743_487_6e-5) * r
            + 0.001_242_660_947_388_078_4)
            * r
            + 0.026_532_189_526_576_124)
            * r
            + 0.296_560_571_828_504_9)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103)
            / (((((((r * 2.044_263_103_389_939_7e-15 + 1.421_511_758_316_446e-7) * r
                + 1.846_318_317_510_054_8e-5)
                * r
                + 7.868_691_311_456_133e-4)
                * r
                + 0.014_875_361_290_850_615)
                * r
                + 0.136_929_880_922_735_8)
                * r
                + 0.599_832_206_555_888)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// Upper-tail standard normal quantile: `x` with `P(Z > x) = q`.
pub fn norm_isf(q: f64) -> f64 {
    -norm_ppf(q)
}

/// Quantile of the chi-square distribution with two degrees of freedom.
pub fn chi2_2_quantile(p: f64) -> f64 {
    -2.0 * libm::log1p(-p)
}

pub fn poisson_pmf(k: u64, mean: f64) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let kf = k as f64;
    libm::exp(kf * libm::log(mean) - mean - ln_gamma(kf + 1.0))
}

/// `P(X <= k)` for `X ~ Poisson(mean)`.
pub fn poisson_cdf(k: u64, mean: f64) -> f64 {
    if mean == 0.0 {
        return 1.0;
    }
    gamma_q(k as f64 + 1.0, mean)
}

/// Smallest k with `P(X <= k) >= p`.
pub fn poisson_quantile(p: f64, mean: f64) -> u64 {
    if mean <= 0.0 || p <= 0.0 {
        return 0;
    }
    let z = norm_ppf(p.min(1.0 - 1e-16));
    let guess = mean + libm::sqrt(mean) * z + (z * z - 1.0) / 6.0;
    let mut k = if guess > 0.0 { libm::floor(guess) as u64 } else { 0 };
    if poisson_cdf(k, mean) >= p {
        while k > 0 && poisson_cdf(k - 1, mean) >= p {
            k -= 1;
        }
    } else {
        k += 1;
        while poisson_cdf(k, mean) < p {
            k += 1;
        }
    }
    k
}

pub fn softplus(u: f64) -> f64 {
    if u > 35.0 {
        u
    } else {
        libm::log1p(libm::exp(u))
    }
}

pub fn softplus_inv(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else {
        libm::log(libm::expm1(x))
    }
}
