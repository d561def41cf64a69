//! Descriptive statistics of capital-estimate samples.

use alloc::vec::Vec;

/// Linear interpolation between order statistics (Hyndman-Fan type 7) on an
/// ascending slice.
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Median of an unsorted slice (average of the middle pair for even length).
pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_type7(&v, 0.5)
}

/// Summary of a capital-estimate distribution against the true capital.
///
/// `stddev` uses the `m - 1` divisor and `rmse` the `m` divisor, so
/// `rmse^2 = stddev^2 (m-1)/m + bias^2`. Skewness and excess kurtosis are the
/// bias-adjusted sample estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapitalDistStats {
    pub true_capital: f64,
    pub count: usize,
    pub mean: f64,
    pub bias: f64,
    pub bias_pct: f64,
    pub rmse: f64,
    pub stddev: f64,
    pub cv: f64,
    pub iqr: f64,
    pub ci95_width: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub n_failed: usize,
}

pub fn capital_stats(capitals: &[f64], true_capital: f64, n_failed: usize) -> CapitalDistStats {
    let m = capitals.len();
    let mf = m as f64;
    let mean = capitals.iter().sum::<f64>() / mf;
    let bias = capitals.iter().map(|&c| c - true_capital).sum::<f64>() / mf;
    let mse = capitals.iter().map(|&c| (c - true_capital) * (c - true_capital)).sum::<f64>() / mf;
    let (mut s2, mut s3, mut s4) = (0.0, 0.0, 0.0);
    for &c in capitals {
        let d = c - mean;
        let d2 = d * d;
        s2 += d2;
        s3 += d2 * d;
        s4 += d2 * d2;
    }
    let var = s2 / (mf - 1.0);
    let sd = libm::sqrt(var);
    let skewness = if m > 2 && sd > 0.0 {
        mf / ((mf - 1.0) * (mf - 2.0)) * s3 / (var * sd)
    } else {
        f64::NAN
    };
    let excess_kurtosis = if m > 3 && sd > 0.0 {
        mf * (mf + 1.0) / ((mf - 1.0) * (mf - 2.0) * (mf - 3.0)) * s4 / (var * var)
            - 3.0 * (mf - 1.0) * (mf - 1.0) / ((mf - 2.0) * (mf - 3.0))
    } else {
        f64::NAN
    };
    let mut sorted = capitals.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p| quantile_type7(&sorted, p);
    CapitalDistStats {
        true_capital,
        count: m,
        mean,
        bias,
        bias_pct: 100.0 * bias / true_capital,
        rmse: libm::sqrt(mse),
        stddev: sd,
        cv: sd / mean,
        iqr: q(0.75) - q(0.25),
        ci95_width: q(0.975) - q(0.025),
        skewness,
        excess_kurtosis,
        n_failed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type7_matches_hand_values() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_type7(&v, 0.5), 2.5);
        assert_eq!(quantile_type7(&v, 0.25), 1.75);
        assert_eq!(quantile_type7(&v, 1.0), 4.0);
    }

    #[test]
    fn symmetric_pair() {
        let s = capital_stats(&[90.0, 110.0], 100.0, 0);
        assert_eq!(s.bias, 0.0);
        assert_eq!(s.rmse, 10.0);
    }
}
