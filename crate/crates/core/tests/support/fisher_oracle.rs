//! Score-covariance quadrature used as the independent Fisher information oracle.
//!
//! Every family is handled in a variable `y` where the base density is simple,
//! and the per-observation information is `Cov_g(s)` for the base score `s`
//! under the (possibly truncated) density `g`. Subtracting the mean score is
//! exactly what the truncation term does, so no incomplete-gamma derivatives
//! are needed.
#![allow(dead_code)]

use oprisk_core::Mat2;

/// 32-point Gauss-Legendre nodes and weights on [-1, 1], by Newton on P_n.
pub fn gauss_legendre() -> Vec<(f64, f64)> {
    let n = 32;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Score covariance of `score` under density `dens` restricted to `[lo, hi]`,
/// integrated piecewise over `cuts`.
pub fn score_cov<D: Fn(f64) -> f64, S: Fn(f64) -> [f64; 2]>(dens: D, score: S, cuts: &[f64]) -> (Mat2, [f64; 2]) {
    let nodes = gauss_legendre();
    let int = |g: &dyn Fn(f64) -> f64| -> f64 {
        cuts.windows(2)
            .map(|w| {
                let (c, h) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
                h * nodes.iter().map(|&(x, wt)| wt * g(c + h * x)).sum::<f64>()
            })
            .sum()
    };
    let mass = int(&|y| dens(y));
    let m0 = int(&|y| dens(y) * score(y)[0]) / mass;
    let m1 = int(&|y| dens(y) * score(y)[1]) / mass;
    let c = |i: usize, j: usize, mi: f64, mj: f64| int(&|y| {
        let s = score(y);
        dens(y) * (s[i] - mi) * (s[j] - mj)
    }) / mass;
    let c00 = c(0, 0, m0, m0);
    let c01 = c(0, 1, m0, m1);
    let c11 = c(1, 1, m1, m1);
    ([[c00, c01], [c01, c11]], [m0, m1])
}

pub fn grid(lo: f64, hi: f64, pieces: usize) -> Vec<f64> {
    (0..=pieces).map(|k| lo + (hi - lo) * k as f64 / pieces as f64).collect()
}

// y = ln x ~ N(mu, sigma^2)
pub fn oracle_lognormal(mu: f64, s: f64, h: Option<f64>) -> (Mat2, [f64; 2]) {
    let lo = h.map_or(mu - 40.0 * s, f64::ln);
    let dens = |y: f64| (-(y - mu) * (y - mu) / (2.0 * s * s)).exp();
    let score = |y: f64| {
        let d = y - mu;
        [d / (s * s), (d * d / (s * s) - 1.0) / s]
    };
    score_cov(dens, score, &grid(lo, mu + 40.0 * s, 64))
}

// the truncated GPD is memoryless in y = ln(1 + xi x / theta): y = y_H + xi e with e ~ Exp(1)
pub fn oracle_gpd(xi: f64, theta: f64, h: f64) -> (Mat2, [f64; 2]) {
    let yh = (xi * h / theta).ln_1p();
    let dens = |e: f64| (-e).exp();
    let score = |e: f64| {
        let y = yh + xi * e;
        let w = -(-y).exp_m1();
        [y / (xi * xi) - (1.0 + xi) / (xi * xi) * w, (-1.0 + (1.0 + xi) * w / xi) / theta]
    };
    score_cov(dens, score, &grid(0.0, 120.0, 240))
}

// y = ln x ~ Gamma(a, rate b)
pub fn oracle_loggamma(a: f64, b: f64, h: f64) -> (Mat2, [f64; 2]) {
    let lnh = h.ln();
    let sd = a.sqrt() / b;
    // unnormalized: the mass divides out, so the gamma constant is not needed
    let mode = ((a - 1.0) / b).max(1e-300);
    let top = (a - 1.0) * mode.ln() - b * mode;
    let dens = |y: f64| if y <= 0.0 { 0.0 } else { ((a - 1.0) * y.ln() - b * y - top).exp() };
    let score = |y: f64| [y.ln(), -y];
    let hi = a / b + 60.0 * sd;
    score_cov(dens, score, &grid(lnh.max(1e-300), hi, 256))
}
