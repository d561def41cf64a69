//! Closed-form and approximate Fisher information against an independent
//! quadrature of the score covariance.

#[path = "support/fisher_oracle.rs"]
mod fisher_oracle;

use oprisk_core::fisher::*;
use oprisk_core::{Mat2, SeverityModel};
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use std::time::Instant;

use fisher_oracle::{oracle_gpd, oracle_loggamma, oracle_lognormal};

const H: f64 = 10_000.0;
const TLOGG_ROWS: [(f64, f64); 6] = [(23.5, 2.65), (33.0, 3.3), (24.5, 2.5), (34.5, 3.15), (24.75, 2.45), (34.6, 3.07)];

fn assert_close(what: &str, got: &Mat2, want: &Mat2, tol: f64) {
    for i in 0..2 {
        for j in 0..2 {
            let r = (got[i][j] - want[i][j]).abs() / want[i][j].abs();
            assert!(r <= tol, "{what}[{i}][{j}]: {} vs {} (rel {r:e})", got[i][j], want[i][j]);
        }
    }
}

fn inverse(m: &Mat2) -> Mat2 {
    mat2_inverse(m).unwrap()
}

#[test]
fn lognormal_inverse_is_exact() {
    for s in [0.5, 1.0, 2.0, 2.97] {
        let fm = fisher_lognormal(s).unwrap();
        assert_eq!(fm.inverse, [[s * s, 0.0], [0.0, s * s / 2.0]]);
        assert_eq!(fm.correlation(), 0.0);
    }
    let cov = param_covariance(&fisher_lognormal(2.0).unwrap(), 250);
    assert!((cov.cov[0][0] - 0.016).abs() < 1e-17 && (cov.cov[1][1] - 0.008).abs() < 1e-17);
    assert_eq!(cov.cov[0][1], 0.0);
}

#[test]
fn gpd_closed_form() {
    let fm = fisher_gpd(0.8, 35_000.0).unwrap();
    let want = [[1.8 * 1.8, -1.8 * 35_000.0], [-1.8 * 35_000.0, 1.8 * 2.45e9]];
    assert_close("gpd printed", &fm.inverse, &want, 1e-15);
    let (info, _) = oracle_gpd(0.8, 35_000.0, 0.0);
    assert_close("gpd info", &fm.info, &info, 1e-8);
    assert_close("gpd inverse", &fm.inverse, &inverse(&info), 1e-8);
    let zero = fisher_gpd(0.0, 7.0).unwrap();
    assert_close("exponential limit", &zero.inverse, &[[1.0, -7.0], [-7.0, 98.0]], 1e-15);
    assert!(fm.correlation() < 0.0);
}

#[test]
fn tgpd_closed_form() {
    let fm = fisher_tgpd(0.8675, 50_000.0, H).unwrap();
    let (info, _) = oracle_gpd(0.8675, 50_000.0, H);
    assert_close("tgpd info", &fm.info, &info, 1e-8);
    assert_eq!(fisher_tgpd(0.8, 35_000.0, 0.0).unwrap(), fisher_gpd(0.8, 35_000.0).unwrap());
}

#[test]
fn loggamma_closed_form() {
    let fm = fisher_loggamma(24.0, 2.65).unwrap();
    let (info, _) = oracle_loggamma(24.0, 2.65, 1.0);
    assert_close("loggamma info", &fm.info, &info, 1e-8);
    assert!(fm.inverse[0][1] > 0.0);
    for a in [0.1, 0.5, 1.0, 5.0, 24.0, 35.0] {
        assert!(a * oprisk_core::special::trigamma(a) > 1.0);
    }
}

#[test]
fn tlognormal_closed_form() {
    let fm = fisher_tlognormal(10.2, 1.95, H).unwrap();
    let (info, _) = oracle_lognormal(10.2, 1.95, Some(H));
    assert_close("tlognormal info", &fm.info, &info, 1e-6);
    let other = fisher_tlognormal(9.0, 2.2, H).unwrap();
    assert!(other.correlation().abs() > 0.1);
    // vanishing truncation
    let tiny = fisher_tlognormal(10.0, 2.0, 1e-30).unwrap();
    assert!((tiny.inverse[0][0] - 4.0).abs() < 1e-12 && (tiny.inverse[1][1] - 2.0).abs() < 1e-12);
    assert!(tiny.inverse[0][1].abs() < 1e-12);
}

#[test]
fn tloggamma_numeric_matches_oracle() {
    for (a, b) in TLOGG_ROWS {
        let fm = fisher_tloggamma_numeric(a, b, H).unwrap();
        let (info, _) = oracle_loggamma(a, b, H);
        assert_close(&format!("numeric ({a},{b})"), &fm.info, &info, 1e-8);
    }
    assert_close(
        "H = 1",
        &fisher_tloggamma_numeric(24.0, 2.65, 1.0).unwrap().info,
        &fisher_loggamma(24.0, 2.65).unwrap().info,
        1e-12,
    );
}

#[test]
fn tloggamma_approximation_accuracy() {
    for (a, b) in TLOGG_ROWS {
        let approx = fisher_tloggamma_approx(a, b, H, DEFAULT_ETA).unwrap();
        let numeric = fisher_tloggamma_numeric(a, b, H).unwrap();
        assert_close(&format!("approx info ({a},{b})"), &approx.info, &numeric.info, 1e-6);
        // inversion amplifies entry errors by about 1/(1 - rho^2), roughly 150 here
        let rho = numeric.correlation();
        assert_close(&format!("approx inverse ({a},{b})"), &approx.inverse, &numeric.inverse, 1e-6 / (1.0 - rho * rho));
    }
    let near_one = fisher_tloggamma_approx(24.0, 2.65, 1.0 + 1e-12, DEFAULT_ETA).unwrap();
    assert_close("H -> 1", &near_one.info, &fisher_loggamma(24.0, 2.65).unwrap().info, 1e-6);
}

#[test]
fn tloggamma_approximation_is_faster() {
    let time = |f: &dyn Fn(f64, f64) -> FisherMatrix| {
        let t = Instant::now();
        for _ in 0..20 {
            for (a, b) in TLOGG_ROWS {
                std::hint::black_box(f(a, b));
            }
        }
        t.elapsed()
    };
    let approx = time(&|a, b| fisher_tloggamma_approx(a, b, H, DEFAULT_ETA).unwrap());
    let numeric = time(&|a, b| fisher_tloggamma_numeric(a, b, H).unwrap());
    assert!(approx * 5 <= numeric, "{approx:?} vs {numeric:?}");
}

#[test]
fn info_times_inverse_is_identity() {
    let models = [
        fisher_lognormal(2.0).unwrap(),
        fisher_tlognormal(9.4, 2.65, H).unwrap(),
        fisher_gpd(0.95, 7_500.0).unwrap(),
        fisher_tgpd(0.95, 35_000.0, H).unwrap(),
        fisher_loggamma(34.7, 3.07).unwrap(),
        fisher_tloggamma_approx(24.75, 2.45, H, DEFAULT_ETA).unwrap(),
    ];
    for fm in models {
        let p = mat2_mul(&fm.info, &fm.inverse);
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((p[i][j] - want).abs() < 1e-8);
            }
        }
        assert_eq!(fm.info[0][1], fm.info[1][0]);
        assert!(fm.info[0][0] > 0.0 && mat2_det(&fm.info) > 0.0);
    }
}

#[test]
fn covariance_scaling() {
    let fm = fisher_gpd(0.875, 47_500.0).unwrap();
    let a = param_covariance(&fm, 250);
    let b = param_covariance(&fm, 500);
    for i in 0..2 {
        for j in 0..2 {
            assert!((a.cov[i][j] - 2.0 * b.cov[i][j]).abs() <= 1e-15 * a.cov[i][j].abs());
        }
    }
    assert_eq!(a.rho, b.rho);
}

/// The outer product of scores over 10^6 simulated losses estimates the same
/// matrix; agreement within 3 standard errors per entry.
#[test]
fn simulated_score_products() {
    let cases: Vec<(SeverityModel, Box<dyn Fn(f64) -> [f64; 2]>, [f64; 2])> = vec![
        {
            let (_, m) = oracle_lognormal(10.0, 2.0, None);
            (SeverityModel::lognormal(10.0, 2.0).unwrap(), Box::new(|x: f64| {
                let d = x.ln() - 10.0;
                [d / 4.0, (d * d / 4.0 - 1.0) / 2.0]
            }), m)
        },
        {
            let (_, m) = oracle_gpd(0.8675, 50_000.0, H);
            (SeverityModel::gpd(0.8675, 50_000.0).unwrap().truncated(H).unwrap(), Box::new(|x: f64| {
                let (xi, th) = (0.8675, 50_000.0);
                let y = (xi * x / th).ln_1p();
                let w = -(-y).exp_m1();
                [y / (xi * xi) - (1.0 + xi) / (xi * xi) * w, (-1.0 + (1.0 + xi) * w / xi) / th]
            }), m)
        },
        {
            let (_, m) = oracle_loggamma(23.5, 2.65, H);
            (SeverityModel::loggamma(23.5, 2.65).unwrap().truncated(H).unwrap(), Box::new(|x: f64| {
                let y = x.ln();
                [y.ln(), -y]
            }), m)
        },
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (model, score, mean) in cases {
        let fm = fisher_for(&model).unwrap();
        let n = 1_000_000;
        let mut sum = [[0.0; 2]; 2];
        let mut sumsq = [[0.0; 2]; 2];
        for x in model.sample(&mut rng, n) {
            let s = score(x);
            let c = [s[0] - mean[0], s[1] - mean[1]];
            for i in 0..2 {
                for j in 0..2 {
                    let v = c[i] * c[j];
                    sum[i][j] += v;
                    sumsq[i][j] += v * v;
                }
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                let m = sum[i][j] / n as f64;
                let se = ((sumsq[i][j] / n as f64 - m * m) / n as f64).sqrt();
                assert!((m - fm.info[i][j]).abs() <= 3.0 * se, "{model} [{i}][{j}]: {m} vs {} (se {se})", fm.info[i][j]);
            }
        }
    }
}
