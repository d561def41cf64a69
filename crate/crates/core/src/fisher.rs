//! Per-observation Fisher information and asymptotic parameter covariance.

use crate::distributions::{SeverityFamily, SeverityModel};
use crate::quad::{integrate, Tolerance};
use crate::special::{
    digamma, gamma_pq, gamma_q, ln_gamma, lower_gamma_kernel, norm_pdf, norm_sf, trigamma,
};
use crate::{Error, Result};

pub type Mat2 = [[f64; 2]; 2];

pub fn mat2_det(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

pub fn mat2_inverse(m: &Mat2) -> Option<Mat2> {
    let det = mat2_det(m);
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some([[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]])
}

pub fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// Fisher information of one observation and its inverse, the asymptotic
/// covariance kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherMatrix {
    pub info: Mat2,
    pub inverse: Mat2,
}

fn check_spd(m: &Mat2) -> Result<()> {
    let ok = m.iter().flatten().all(|v| v.is_finite())
        && m[0][0] > 0.0
        && m[1][1] > 0.0
        && mat2_det(m) > 0.0;
    if ok {
        Ok(())
    } else {
        Err(Error::Numeric("Fisher information is not positive definite"))
    }
}

impl FisherMatrix {
    pub fn from_info(info: Mat2) -> Result<Self> {
        let info = symmetrize(info);
        check_spd(&info)?;
        let inverse = mat2_inverse(&info).ok_or(Error::Numeric("singular Fisher information"))?;
        Ok(FisherMatrix { info, inverse })
    }

    pub fn from_inverse(inverse: Mat2) -> Result<Self> {
        let inverse = symmetrize(inverse);
        check_spd(&inverse)?;
        let info = mat2_inverse(&inverse).ok_or(Error::Numeric("singular covariance kernel"))?;
        Ok(FisherMatrix { info, inverse })
    }

    /// Asymptotic correlation of the two parameter estimates.
    pub fn correlation(&self) -> f64 {
        let v = &self.inverse;
        v[0][1] / libm::sqrt(v[0][0] * v[1][1])
    }
}

fn symmetrize(m: Mat2) -> Mat2 {
    let off = 0.5 * (m[0][1] + m[1][0]);
    [[m[0][0], off], [off, m[1][1]]]
}

/// Covariance of the estimates from `n` observations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamCovariance {
    pub cov: Mat2,
    pub sd: [f64; 2],
    pub rho: f64,
    pub n: usize,
}

pub fn param_covariance(fm: &FisherMatrix, n: usize) -> ParamCovariance {
    let nf = n as f64;
    let cov = [
        [fm.inverse[0][0] / nf, fm.inverse[0][1] / nf],
        [fm.inverse[1][0] / nf, fm.inverse[1][1] / nf],
    ];
    ParamCovariance {
        cov,
        sd: [libm::sqrt(cov[0][0]), libm::sqrt(cov[1][1])],
        rho: fm.correlation(),
        n,
    }
}

fn positive(what: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain { what, value: v })
    }
}

pub fn fisher_lognormal(sigma: f64) -> Result<FisherMatrix> {
    positive("sigma", sigma)?;
    let s2 = sigma * sigma;
    FisherMatrix::from_inverse([[s2, 0.0], [0.0, 0.5 * s2]])
}

/// Normal(mu, sigma) has the same information structure as the LogNormal.
pub fn fisher_normal(sigma: f64) -> Result<FisherMatrix> {
    fisher_lognormal(sigma)
}

pub fn fisher_tlognormal(mu: f64, sigma: f64, h: f64) -> Result<FisherMatrix> {
    positive("sigma", sigma)?;
    if !(h >= 0.0) {
        return Err(Error::Domain { what: "threshold", value: h });
    }
    let u = (libm::log(h) - mu) / sigma;
    if !u.is_finite() {
        return fisher_lognormal(sigma);
    }
    // inverse Mills ratio at the standardized threshold
    let jr = norm_pdf(u) / norm_sf(u);
    let ju = jr - u;
    let inv = sigma * sigma / (2.0 + jr * ju * (u * ju - 3.0));
    let off = inv * jr * (u * ju - 1.0);
    FisherMatrix::from_inverse([
        [inv * (2.0 + jr * u * (1.0 - u * ju)), off],
        [off, inv * (1.0 - jr * ju)],
    ])
}

pub fn fisher_gpd(xi: f64, theta: f64) -> Result<FisherMatrix> {
    fisher_tgpd(xi, theta, 0.0)
}

pub fn fisher_tgpd(xi: f64, theta: f64, h: f64) -> Result<FisherMatrix> {
    if !(xi >= 0.0 && xi.is_finite()) {
        return Err(Error::Domain { what: "xi", value: xi });
    }
    positive("theta", theta)?;
    if !(h >= 0.0 && h.is_finite()) {
        return Err(Error::Domain { what: "threshold", value: h });
    }
    let r = h / theta;
    let k = 1.0 + 2.0 * xi;
    let off = -(1.0 + xi) * theta * (1.0 + k * r);
    let d = (1.0 + xi) * theta * theta * (2.0 + 2.0 * k * r + (1.0 + xi) * k * r * r);
    FisherMatrix::from_inverse([[(1.0 + xi) * (1.0 + xi), off], [off, d]])
}

pub fn fisher_loggamma(a: f64, b: f64) -> Result<FisherMatrix> {
    positive("a", a)?;
    positive("b", b)?;
    FisherMatrix::from_info(loggamma_info(a, b))
}

fn loggamma_info(a: f64, b: f64) -> Mat2 {
    [[trigamma(a), -1.0 / b], [-1.0 / b, a / (b * b)]]
}

/// Truncated LogGamma information by quadrature of the untruncated score
/// moments over the unobserved region, integrated in `y = ln x`:
/// `I_T = (I - K2)/S - K1 K1' / S^2`.
pub fn fisher_tloggamma_numeric(a: f64, b: f64, h: f64) -> Result<FisherMatrix> {
    positive("a", a)?;
    positive("b", b)?;
    if !(h >= 1.0 && h.is_finite()) {
        return Err(Error::Domain { what: "threshold", value: h });
    }
    let full = loggamma_info(a, b);
    if h == 1.0 {
        return FisherMatrix::from_info(full);
    }
    let top = libm::log(h);
    let s_h = gamma_q(a, b * top);
    let ln_norm = a * libm::log(b) - ln_gamma(a);
    let psi = digamma(a);
    let ln_b = libm::log(b);
    let density = |y: f64| {
        if y <= 0.0 {
            0.0
        } else {
            libm::exp(ln_norm + (a - 1.0) * libm::log(y) - b * y)
        }
    };
    let s1 = |y: f64| ln_b + libm::log(y) - psi;
    let s2 = |y: f64| a / b - y;
    let tol = Tolerance::default();
    let q = |g: &dyn Fn(f64) -> f64| -> Result<f64> {
        integrate(|y| if y <= 0.0 { 0.0 } else { g(y) * density(y) }, 0.0, top, tol).map(|r| r.value)
    };
    let k1 = [q(&s1)?, q(&s2)?];
    let k11 = q(&|y| s1(y) * s1(y))?;
    let k12 = q(&|y| s1(y) * s2(y))?;
    let k22 = q(&|y| s2(y) * s2(y))?;
    let s2h = s_h * s_h;
    let info = [
        [(full[0][0] - k11) / s_h - k1[0] * k1[0] / s2h, (full[0][1] - k12) / s_h - k1[0] * k1[1] / s2h],
        [(full[1][0] - k12) / s_h - k1[0] * k1[1] / s2h, (full[1][1] - k22) / s_h - k1[1] * k1[1] / s2h],
    ];
    FisherMatrix::from_info(info)
}

/// Truncated LogGamma information without quadrature.
///
/// The two- and three-term hypergeometric sums that appear in the entries are
/// split at `a - eta`, `a`, `a + eta` into single-term lower incomplete gamma
/// ratios. Each ratio is evaluated through the Kummer kernel with a common
/// prefactor `x^a e^-x / Gamma(a)`, so no log-gamma differences enter the
/// nearly cancelling combination.
pub fn fisher_tloggamma_approx(a: f64, b: f64, h: f64, eta: f64) -> Result<FisherMatrix> {
    positive("a", a)?;
    positive("b", b)?;
    if !(h >= 1.0 && h.is_finite()) {
        return Err(Error::Domain { what: "threshold", value: h });
    }
    if !(eta > 0.0 && eta < 0.5 * a) {
        return Err(Error::Domain { what: "eta", value: eta });
    }
    if h == 1.0 {
        return fisher_loggamma(a, b);
    }
    let x = b * libm::log(h);
    let (ad, au) = (a - eta, a + eta);
    let c = libm::exp(a * libm::log(x) - x - ln_gamma(a));
    let (sd, s0, su) = (lower_gamma_kernel(ad, x), lower_gamma_kernel(a, x), lower_gamma_kernel(au, x));
    let g2 = c * (au * sd - ad * su) / (au - ad);
    let g3 = c
        * (sd * (au / (au - ad)) * (a / (a - ad))
            + s0 * (ad / (ad - a)) * (au / (au - a))
            + su * (ad / (ad - au)) * (a / (a - au)));
    let q = gamma_pq(a, x).1;
    let d = libm::log(x) - digamma(a);
    let tg = trigamma(a);
    let (a2, a3) = (a * a, a * a * a);
    let aa = (q * d * d - d * d + q * tg - 2.0 * q * g3 / a3 + 2.0 * d * g2 / a2 - g2 * g2 / (a2 * a2))
        / (q * q);
    let w = c / q;
    let bb = -(1.0 + w * (d - g2 / a2) / q) / b;
    let dd = (a + (1.0 + x - a) * w - w * w) / (b * b);
    FisherMatrix::from_info([[aa, bb], [bb, dd]])
        .map_err(|_| Error::Numeric("truncated LogGamma approximation lost precision; use the quadrature form"))
}

pub const DEFAULT_ETA: f64 = 1e-3;

/// Fisher information for any supported model. The truncated LogGamma uses the
/// quadrature-free approximation and falls back to quadrature if it fails.
pub fn fisher_for(model: &SeverityModel) -> Result<FisherMatrix> {
    let [p1, p2] = model.params();
    match (model.family(), model.threshold()) {
        (SeverityFamily::LogNormal, None) => fisher_lognormal(p2),
        (SeverityFamily::LogNormal, Some(h)) => fisher_tlognormal(p1, p2, h),
        (SeverityFamily::Gpd, None) => fisher_gpd(p1, p2),
        (SeverityFamily::Gpd, Some(h)) => fisher_tgpd(p1, p2, h),
        (SeverityFamily::LogGamma, None) => fisher_loggamma(p1, p2),
        (SeverityFamily::LogGamma, Some(h)) => fisher_tloggamma_approx(p1, p2, h, DEFAULT_ETA)
            .or_else(|_| fisher_tloggamma_numeric(p1, p2, h)),
        (SeverityFamily::Normal, _) => fisher_normal(p2),
    }
}
