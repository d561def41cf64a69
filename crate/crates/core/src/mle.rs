//! Maximum likelihood fitting of severity (truncation aware) and frequency.

use alloc::vec::Vec;

use crate::distributions::{FrequencyModel, SeverityFamily, SeverityModel};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::special::{ln_gamma, softplus, softplus_inv};
use crate::stats::quantile_type7;
use crate::{Error, Result};

pub const MIN_SAMPLE: usize = 10;
/// Gradient norm (unconstrained coordinates, mean log-likelihood) required to
/// declare convergence.
pub const GRADIENT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: SeverityModel,
    pub loglik: f64,
    pub n: usize,
    pub converged: bool,
    pub iterations: usize,
    pub start_point: [f64; 2],
}

/// Log-likelihood of `losses` under `model`, summing the (truncated) log density.
pub fn log_likelihood(model: &SeverityModel, losses: &[f64]) -> f64 {
    losses.iter().map(|&x| model.ln_pdf(x)).sum()
}

// Sample summaries that make each likelihood evaluation O(1) where the family allows.
struct Sample<'a> {
    data: &'a [f64],
    n: f64,
    // LogNormal/Normal: mean and centered sum of squares of ln x (or x)
    center: f64,
    css: f64,
    sum_ln: f64,
    sum_lnln: f64,
}

impl<'a> Sample<'a> {
    fn new(family: SeverityFamily, data: &'a [f64]) -> Self {
        let n = data.len() as f64;
        let t = |x: f64| if family == SeverityFamily::Normal { x } else { libm::log(x) };
        let center = data.iter().map(|&x| t(x)).sum::<f64>() / n;
        let css = data.iter().map(|&x| (t(x) - center) * (t(x) - center)).sum();
        let sum_ln = if family == SeverityFamily::Normal { 0.0 } else { center * n };
        let sum_lnln = if family == SeverityFamily::LogGamma {
            data.iter().map(|&x| libm::log(libm::log(x))).sum()
        } else {
            0.0
        };
        Sample { data, n, center, css, sum_ln, sum_lnln }
    }

    fn loglik(&self, family: SeverityFamily, p1: f64, p2: f64, threshold: Option<f64>) -> f64 {
        const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
        let tail = match SeverityModel::new(family, p1, p2, threshold) {
            Ok(m) => m.tail_mass(),
            Err(_) => return f64::NEG_INFINITY,
        };
        let n = self.n;
        let base = match family {
            SeverityFamily::LogNormal | SeverityFamily::Normal => {
                let d = self.center - p1;
                let ss = self.css + n * d * d;
                let jac = if family == SeverityFamily::LogNormal { self.sum_ln } else { 0.0 };
                -n * (libm::log(p2) + LN_SQRT_2PI) - jac - ss / (2.0 * p2 * p2)
            }
            SeverityFamily::Gpd => {
                let (xi, theta) = (p1, p2);
                let body: f64 = if xi == 0.0 {
                    self.data.iter().map(|&x| x / theta).sum()
                } else {
                    (1.0 / xi + 1.0) * self.data.iter().map(|&x| libm::log1p(xi * x / theta)).sum::<f64>()
                };
                -n * libm::log(theta) - body
            }
            SeverityFamily::LogGamma => {
                let (a, b) = (p1, p2);
                n * (a * libm::log(b) - ln_gamma(a)) + (a - 1.0) * self.sum_lnln - (b + 1.0) * self.sum_ln
            }
        };
        base - n * libm::log(tail)
    }
}

fn to_params(family: SeverityFamily, u: &[f64]) -> (f64, f64) {
    match family {
        SeverityFamily::LogNormal | SeverityFamily::Normal => (u[0], libm::exp(u[1])),
        SeverityFamily::Gpd => (softplus(u[0]), libm::exp(u[1])),
        SeverityFamily::LogGamma => (libm::exp(u[0]), libm::exp(u[1])),
    }
}

fn from_params(family: SeverityFamily, p: [f64; 2]) -> [f64; 2] {
    match family {
        SeverityFamily::LogNormal | SeverityFamily::Normal => [p[0], libm::log(p[1])],
        SeverityFamily::Gpd => [softplus_inv(p[0].max(1e-8)), libm::log(p[1])],
        SeverityFamily::LogGamma => [libm::log(p[0]), libm::log(p[1])],
    }
}

/// Moment / quantile-matching start for the untruncated family.
fn moment_start(family: SeverityFamily, sample: &Sample) -> [f64; 2] {
    let sd = libm::sqrt(sample.css / (sample.n - 1.0)).max(1e-8);
    match family {
        SeverityFamily::LogNormal | SeverityFamily::Normal => [sample.center, sd],
        SeverityFamily::LogGamma => {
            // ln x ~ Gamma(a, rate b)
            let var = sd * sd;
            let m = sample.center.max(1e-8);
            [(m * m / var).max(1e-3), (m / var).max(1e-3)]
        }
        SeverityFamily::Gpd => {
            let mut sorted: Vec<f64> = sample.data.to_vec();
            sorted.sort_by(f64::total_cmp);
            let q50 = quantile_type7(&sorted, 0.5);
            let q75 = quantile_type7(&sorted, 0.75);
            // q75/q50 = 2^xi + 1 for the GPD
            let ratio = q75 / q50 - 1.0;
            let xi = if ratio > 0.0 && ratio.is_finite() {
                libm::log2(ratio).clamp(0.01, 2.0)
            } else {
                0.5
            };
            let theta = q50 * xi / (libm::exp2(xi) - 1.0);
            [xi, if theta > 0.0 && theta.is_finite() { theta } else { sample.center.max(1.0) }]
        }
    }
}

fn scale_perturbations(family: SeverityFamily, p: [f64; 2]) -> [[f64; 2]; 2] {
    match family {
        SeverityFamily::LogNormal => [[p[0] - core::f64::consts::LN_2, p[1]], [p[0] + core::f64::consts::LN_2, p[1]]],
        SeverityFamily::Normal | SeverityFamily::Gpd => [[p[0], 0.5 * p[1]], [p[0], 2.0 * p[1]]],
        // b is the rate of ln x, so the scale of ln x moves inversely
        SeverityFamily::LogGamma => [[p[0], 2.0 * p[1]], [p[0], 0.5 * p[1]]],
    }
}

fn inflate_shape(family: SeverityFamily, p: [f64; 2], frac_below: f64) -> [f64; 2] {
    let k = 1.0 + frac_below;
    match family {
        SeverityFamily::LogNormal | SeverityFamily::Normal => [p[0], p[1] * k],
        SeverityFamily::Gpd => [p[0] * k, p[1]],
        SeverityFamily::LogGamma => [p[0], p[1] / k],
    }
}

struct Run {
    u: Vec<f64>,
    value: f64,
    iters: usize,
    converged: bool,
}

fn minimize<F: Fn(&[f64]) -> f64>(objective: &F, start: &[f64]) -> Run {
    let r = nelder_mead(objective, start, &NelderMeadOptions::default());
    Run { u: r.xmin, value: r.fmin, iters: r.iters, converged: r.converged }
}

fn gradient_norm<F: Fn(&[f64]) -> f64>(objective: &F, u: &[f64]) -> f64 {
    let mut sq = 0.0;
    let mut x = u.to_vec();
    for i in 0..u.len() {
        let h = 1e-5 * u[i].abs().max(1.0);
        x[i] = u[i] + h;
        let up = objective(&x);
        x[i] = u[i] - h;
        let down = objective(&x);
        x[i] = u[i];
        let g = (up - down) / (2.0 * h);
        sq += g * g;
    }
    libm::sqrt(sq)
}

fn validate(losses: &[f64], family: SeverityFamily, threshold: Option<f64>) -> Result<()> {
    if threshold.is_some() && family == SeverityFamily::Normal {
        return Err(Error::Unsupported { family, what: "truncation" });
    }
    let floor = match family {
        SeverityFamily::Normal => f64::NEG_INFINITY,
        SeverityFamily::LogGamma => 1.0,
        _ => 0.0,
    };
    let floor = threshold.map_or(floor, |h| h.max(floor));
    for &x in losses {
        if !x.is_finite() || x <= floor {
            return Err(Error::Support { value: x });
        }
    }
    if losses.len() < MIN_SAMPLE {
        return Err(Error::InsufficientData { n: losses.len(), required: MIN_SAMPLE });
    }
    if losses.iter().all(|&x| x == losses[0]) {
        return Err(Error::DegenerateSample);
    }
    Ok(())
}

/// Maximizes the (truncated) log-likelihood with a multistart simplex search.
///
/// Non-convergence is reported through `converged = false`, not as an error.
pub fn fit_severity(losses: &[f64], family: SeverityFamily, threshold: Option<f64>) -> Result<FitResult> {
    validate(losses, family, threshold)?;
    let sample = Sample::new(family, losses);
    let n = losses.len();
    let objective = |u: &[f64]| {
        let (p1, p2) = to_params(family, u);
        -sample.loglik(family, p1, p2, threshold) / sample.n
    };

    let mut base = moment_start(family, &sample);
    if let Some(h) = threshold {
        // untruncated fit on the same data, then widen the tail by the mass it puts below H
        let untruncated = |u: &[f64]| {
            let (p1, p2) = to_params(family, u);
            -sample.loglik(family, p1, p2, None) / sample.n
        };
        let run = minimize(&untruncated, &from_params(family, base));
        if run.value.is_finite() {
            let (p1, p2) = to_params(family, &run.u);
            base = [p1, p2];
        }
        let below = SeverityModel::new(family, base[0], base[1], None).map_or(0.0, |m| m.cdf(h));
        base = inflate_shape(family, base, below);
    }
    let [lo, hi] = scale_perturbations(family, base);
    let starts = [base, lo, hi];

    let mut best: Option<(Run, [f64; 2])> = None;
    for start in starts {
        let u0 = from_params(family, start);
        if !objective(&u0).is_finite() {
            continue;
        }
        let run = minimize(&objective, &u0);
        if best.as_ref().map_or(true, |(b, _)| run.value < b.value) {
            best = Some((run, start));
        }
    }
    let (mut run, start_point) = best.ok_or(Error::EstimationFailure("no feasible starting point"))?;
    if !run.value.is_finite() {
        return Err(Error::EstimationFailure("log-likelihood is not finite at any start"));
    }

    let mut grad = gradient_norm(&objective, &run.u);
    let mut restarts = 0;
    while (!run.converged || grad > GRADIENT_TOL) && restarts < 3 {
        let next = minimize(&objective, &run.u);
        let iters = run.iters + next.iters;
        if next.value <= run.value {
            run = next;
        }
        run.iters = iters;
        grad = gradient_norm(&objective, &run.u);
        restarts += 1;
    }

    let (p1, p2) = to_params(family, &run.u);
    let model = SeverityModel::new(family, p1, p2, threshold)?;
    Ok(FitResult {
        model,
        loglik: -run.value * sample.n,
        n,
        converged: run.converged && grad <= GRADIENT_TOL,
        iterations: run.iters,
        start_point,
    })
}

/// Poisson rate estimate over an observation horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyFit {
    pub lambda: f64,
    pub years: u32,
    pub count: u64,
    /// No losses observed: the rate estimate is zero and no model can be built.
    pub degenerate: bool,
}

impl FrequencyFit {
    pub fn model(&self) -> Result<FrequencyModel> {
        FrequencyModel::new(self.lambda, self.years)
    }
}

pub fn fit_poisson(count: u64, years: u32) -> Result<FrequencyFit> {
    if years == 0 {
        return Err(Error::Domain { what: "years", value: 0.0 });
    }
    Ok(FrequencyFit { lambda: count as f64 / years as f64, years, count, degenerate: count == 0 })
}
