//! Parallel versions of the expensive core routines. Work is split into
//! fixed chunks and reduced in order, so the thread count never changes a
//! result.

use oprisk_core::capital::{mc_estimates, simulate_annual_losses, AnnualLosses, CapitalSpec, McCapital, TAIL_SUM_BLOCK};
use oprisk_core::rce::{combine, outer_grid, outer_point_median};
use oprisk_core::{CTable, Error, FitResult, FrequencyModel, RceOptions, RceResult, SeverityModel};
use rayon::prelude::*;

use crate::rng::{stream, Purpose};

/// Simulated years per random stream.
pub const MC_CHUNK_YEARS: usize = TAIL_SUM_BLOCK;

fn chunk_lengths(years: usize) -> Vec<usize> {
    (0..years.div_ceil(MC_CHUNK_YEARS)).map(|k| MC_CHUNK_YEARS.min(years - k * MC_CHUNK_YEARS)).collect()
}

fn merge(parts: Vec<AnnualLosses>) -> AnnualLosses {
    let mut all = AnnualLosses::with_capacity(parts.iter().map(AnnualLosses::len).sum());
    for p in parts {
        all.append(p);
    }
    all
}

fn simulate(model: &SeverityModel, lambda: f64, years: usize, seed: u64, parallel: bool) -> AnnualLosses {
    let run = |(k, len): (usize, usize)| simulate_annual_losses(model, lambda, len, &mut stream(seed, k as u64, Purpose::Oracle));
    let lens = chunk_lengths(years);
    let parts: Vec<AnnualLosses> = if parallel {
        lens.into_par_iter().enumerate().map(run).collect()
    } else {
        lens.into_iter().enumerate().map(run).collect()
    };
    merge(parts)
}

fn tail_probability_par(sims: &AnnualLosses, model: &SeverityModel, x: f64) -> f64 {
    let n = sims.len();
    let blocks: Vec<f64> = (0..n.div_ceil(TAIL_SUM_BLOCK))
        .into_par_iter()
        .map(|b| sims.tail_sum(model, x, b * TAIL_SUM_BLOCK..((b + 1) * TAIL_SUM_BLOCK).min(n)))
        .collect();
    blocks.iter().fold(0.0, |acc, b| acc + b) / n as f64
}

/// Monte Carlo capital from `years` simulated years under `seed`.
pub fn mc_capital(model: &SeverityModel, spec: &CapitalSpec, years: usize, seed: u64) -> Result<McCapital, Error> {
    if years == 0 {
        return Err(Error::InsufficientData { n: 0, required: 1 });
    }
    let sims = simulate(model, spec.lambda(), years, seed, true);
    let order_statistic = sims.empirical_quantile(spec.alpha);
    let conditional = sims.solve_tail(spec.alpha, |x| tail_probability_par(&sims, model, x))?;
    Ok(McCapital { order_statistic, conditional, years })
}

/// Single-threaded reference for [`mc_capital`]; bit-identical to it.
pub fn mc_capital_serial(model: &SeverityModel, spec: &CapitalSpec, years: usize, seed: u64) -> Result<McCapital, Error> {
    if years == 0 {
        return Err(Error::InsufficientData { n: 0, required: 1 });
    }
    let sims = simulate(model, spec.lambda(), years, seed, false);
    mc_estimates(model, spec.alpha, &sims)
}

/// [`oprisk_core::rce::rce_estimate`] with the 56 outer points evaluated in parallel.
pub fn rce_estimate_par(
    fit: &FitResult,
    freq: &FrequencyModel,
    alpha: f64,
    ctable: &CTable,
    opts: &RceOptions,
) -> Result<RceResult, Error> {
    if !fit.converged {
        return Err(Error::EstimationFailure("fit did not converge"));
    }
    let grid = outer_grid(fit, freq)?;
    let medians = grid.points.par_iter().map(|pt| outer_point_median(pt, freq.years(), fit.n, alpha, opts)).collect();
    combine(fit, freq, alpha, &grid, medians, ctable, opts)
}
