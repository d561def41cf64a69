//! Nelder-Mead simplex minimization.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    /// Initial step along each coordinate.
    pub step: f64,
    /// Stop once the simplex diameter falls below this...
    pub x_tol: f64,
    /// ...and the spread of function values below this.
    pub f_tol: f64,
    pub max_iter: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions { step: 0.2, x_tol: 1e-8, f_tol: 1e-10, max_iter: 5000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub xmin: Vec<f64>,
    pub fmin: f64,
    pub iters: usize,
    pub evals: usize,
    pub converged: bool,
}

/// Minimizes `f` from `x0`. Non-finite function values are treated as +inf,
/// which keeps the simplex out of infeasible regions.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> Minimum {
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    pts.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += opts.step;
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| eval(p, &mut evals)).collect();

    let mut iters = 0;
    let mut converged = false;
    let mut centroid = vec![0.0; n];
    let mut trial = vec![0.0; n];
    while iters < opts.max_iter {
        // order best..worst
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = idx.iter().map(|&i| pts[i].clone()).collect();
        vals = idx.iter().map(|&i| vals[i]).collect();

        let spread = vals[n] - vals[0];
        let diameter = pts[1..]
            .iter()
            .map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if vals[0].is_finite() && spread.abs() <= opts.f_tol && diameter <= opts.x_tol {
            converged = true;
            break;
        }
        iters += 1;

        for (j, c) in centroid.iter_mut().enumerate() {
            *c = pts[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64;
        }
        let along = |t: f64, out: &mut Vec<f64>, worst: &[f64], centroid: &[f64]| {
            for j in 0..out.len() {
                out[j] = centroid[j] + t * (centroid[j] - worst[j]);
            }
        };

        along(1.0, &mut trial, &pts[n], &centroid);
        let fr = eval(&trial, &mut evals);
        if fr < vals[0] {
            let reflected = trial.clone();
            along(2.0, &mut trial, &pts[n], &centroid);
            let fe = eval(&trial, &mut evals);
            if fe < fr {
                pts[n].copy_from_slice(&trial);
                vals[n] = fe;
            } else {
                pts[n] = reflected;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n].copy_from_slice(&trial);
            vals[n] = fr;
            continue;
        }
        // contraction, outside if the reflection improved on the worst point
        // the inside test is strict: accepting ties lets a collapsed simplex cycle forever
        let outside = fr < vals[n];
        along(if outside { 0.5 } else { -0.5 }, &mut trial, &pts[n], &centroid);
        let fc = eval(&trial, &mut evals);
        if (outside && fc <= fr) || fc < vals[n] {
            pts[n].copy_from_slice(&trial);
            vals[n] = fc;
            continue;
        }
        // shrink toward the best point
        for i in 1..=n {
            for j in 0..n {
                pts[i][j] = pts[0][j] + 0.5 * (pts[i][j] - pts[0][j]);
            }
            vals[i] = eval(&pts[i], &mut evals);
        }
    }

    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    Minimum { xmin: pts[best].clone(), fmin: vals[best], iters, evals, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let r = nelder_mead(
            |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            &[-1.2, 1.0],
            &NelderMeadOptions { step: 0.5, x_tol: 1e-10, f_tol: 1e-14, max_iter: 20_000 },
        );
        assert!(r.converged);
        assert!((r.xmin[0] - 1.0).abs() < 1e-6 && (r.xmin[1] - 1.0).abs() < 1e-6);
    }
}
