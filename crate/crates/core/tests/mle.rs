use oprisk_core::mle::{fit_poisson, fit_severity, log_likelihood, GRADIENT_TOL};
use oprisk_core::{Error, SeverityFamily, SeverityModel};
use proptest::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

const H: f64 = 10_000.0;

fn draws(model: &SeverityModel, n: usize, seed: u64) -> Vec<f64> {
    model.sample(&mut ChaCha8Rng::seed_from_u64(seed), n)
}

// central differences of the mean log-likelihood in the natural parameters
fn grad_norm(model: &SeverityModel, losses: &[f64]) -> f64 {
    let [p1, p2] = model.params();
    let f = |a: f64, b: f64| log_likelihood(&model.with_params(a, b).unwrap(), losses) / losses.len() as f64;
    let (h1, h2) = (1e-5 * p1.abs().max(1e-3), 1e-5 * p2.abs().max(1e-3));
    let g1 = (f(p1 + h1, p2) - f(p1 - h1, p2)) / (2.0 * h1);
    let g2 = (f(p1, p2 + h2) - f(p1, p2 - h2)) / (2.0 * h2);
    // scale to the log-type coordinates the optimizer works in
    (g1 * p1).hypot(g2 * p2)
}

#[test]
fn large_sample_consistency() {
    let truth = SeverityModel::lognormal(10.0, 2.0).unwrap();
    let x = draws(&truth, 100_000, 11);
    let fit = fit_severity(&x, SeverityFamily::LogNormal, None).unwrap();
    assert!(fit.converged);
    assert!((fit.model.p1() - 10.0).abs() < 0.02);
    assert!((fit.model.p2() - 2.0).abs() < 0.01);
    // closed-form MLE for the LogNormal
    let ln: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let mu = ln.iter().sum::<f64>() / ln.len() as f64;
    let s = (ln.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / ln.len() as f64).sqrt();
    assert!((fit.model.p1() - mu).abs() < 1e-6 && (fit.model.p2() - s).abs() < 1e-6);
}

#[test]
fn converged_fits_have_small_gradient() {
    let cases = [
        (SeverityModel::lognormal(10.0, 2.0).unwrap(), None),
        (SeverityModel::gpd(0.8, 35_000.0).unwrap(), None),
        (SeverityModel::loggamma(24.0, 2.65).unwrap(), None),
        (SeverityModel::lognormal(10.2, 1.95).unwrap(), Some(H)),
        (SeverityModel::gpd(0.8675, 50_000.0).unwrap(), Some(H)),
        (SeverityModel::loggamma(23.5, 2.65).unwrap(), Some(H)),
    ];
    for (k, (base, h)) in cases.into_iter().enumerate() {
        let truth = match h {
            Some(h) => base.truncated(h).unwrap(),
            None => base,
        };
        let x = draws(&truth, 250, 100 + k as u64);
        let fit = fit_severity(&x, truth.family(), h).unwrap();
        assert!(fit.converged, "{truth}");
        assert_eq!(fit.n, 250);
        assert!(grad_norm(&fit.model, &x) < 10.0 * GRADIENT_TOL, "{truth}: {}", grad_norm(&fit.model, &x));
        assert!((fit.loglik - log_likelihood(&fit.model, &x)).abs() < 1e-8 * fit.loglik.abs());
        assert!(fit.loglik >= log_likelihood(&truth, &x), "{truth}");
    }
}

#[test]
fn fit_is_reproducible() {
    let truth = SeverityModel::gpd(0.875, 47_500.0).unwrap();
    let x = draws(&truth, 250, 7);
    let a = fit_severity(&x, SeverityFamily::Gpd, None).unwrap();
    let b = fit_severity(&x, SeverityFamily::Gpd, None).unwrap();
    assert_eq!(a, b);
}

#[test]
fn precondition_errors() {
    let few = [5.0, 6.0];
    assert!(matches!(fit_severity(&few, SeverityFamily::LogNormal, Some(H)), Err(Error::Support { .. })));
    let nine: Vec<f64> = (1..10).map(|k| k as f64 * 100.0).collect();
    assert_eq!(
        fit_severity(&nine, SeverityFamily::LogNormal, None),
        Err(Error::InsufficientData { n: 9, required: 10 })
    );
    assert_eq!(fit_severity(&[500.0; 20], SeverityFamily::Gpd, None), Err(Error::DegenerateSample));
    let mut lg: Vec<f64> = (1..20).map(|k| k as f64 * 10.0).collect();
    lg.push(0.5);
    assert!(matches!(fit_severity(&lg, SeverityFamily::LogGamma, None), Err(Error::Support { .. })));
}

#[test]
fn poisson_rate() {
    assert_eq!(fit_poisson(250, 10).unwrap().lambda, 25.0);
    assert_eq!(fit_poisson(150, 10).unwrap().lambda, 15.0);
    let none = fit_poisson(0, 10).unwrap();
    assert!(none.degenerate && none.lambda == 0.0 && none.model().is_err());
    assert!(fit_poisson(10, 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // truncated log-likelihood = untruncated + the renormalization at every parameter point
    #[test]
    fn truncated_loglik_identity(
        family in prop_oneof![Just(SeverityFamily::LogNormal), Just(SeverityFamily::Gpd), Just(SeverityFamily::LogGamma)],
        u1 in 0.0f64..1.0,
        u2 in 0.0f64..1.0,
        seed in 0u64..1000,
    ) {
        let base = match family {
            SeverityFamily::LogNormal => SeverityModel::lognormal(8.0 + 4.0 * u1, 1.0 + 2.0 * u2),
            SeverityFamily::Gpd => SeverityModel::gpd(0.3 + u1, 1e4 + 5e4 * u2),
            _ => SeverityModel::loggamma(20.0 + 15.0 * u1, 2.3 + 1.2 * u2),
        }.unwrap();
        let tr = base.truncated(H).unwrap();
        let x = draws(&tr, 50, seed);
        let lt = log_likelihood(&tr, &x);
        let lu = log_likelihood(&base, &x) - x.len() as f64 * base.sf(H).ln();
        prop_assert!((lt - lu).abs() <= 1e-10 * lt.abs());
    }
}
