//! Marginal shape of the severity quantile in each parameter.

use oprisk_core::{Result, SeverityModel};
use serde::Serialize;

/// Relative step of the central second difference.
pub const STEP: f64 = 1e-3;
/// `|s^2 V''/V|` below this counts as linear.
pub const LINEAR_BAND: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Convex,
    Linear,
    Concave,
}

impl Shape {
    pub fn name(self) -> &'static str {
        match self {
            Shape::Convex => "convex",
            Shape::Linear => "linear",
            Shape::Concave => "concave",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanPoint {
    pub param: &'static str,
    pub param_value: f64,
    pub p: f64,
    pub var: f64,
    /// `s^2 V''(x) / V(x)` with `s = max(|x|, 1)`.
    pub curvature: f64,
    pub shape: Shape,
}

fn with_param(model: &SeverityModel, which: usize, value: f64) -> Result<SeverityModel> {
    let [p1, p2] = model.params();
    if which == 0 {
        model.with_params(value, p2)
    } else {
        model.with_params(p1, value)
    }
}

/// Scaled second difference of `VaR_p` in parameter `which` (0 or 1).
pub fn curvature(model: &SeverityModel, which: usize, p: f64) -> Result<f64> {
    let x = model.params()[which];
    let h = STEP * x.abs().max(1.0);
    let v = |t: f64| with_param(model, which, t).and_then(|m| m.quantile(p));
    let (lo, mid, hi) = (v(x - h)?, v(x)?, v(x + h)?);
    let s = x.abs().max(1.0);
    Ok(s * s * (hi - 2.0 * mid + lo) / (h * h * mid.abs()))
}

pub fn classify(c: f64) -> Shape {
    if c > LINEAR_BAND {
        Shape::Convex
    } else if c < -LINEAR_BAND {
        Shape::Concave
    } else {
        Shape::Linear
    }
}

/// VaR and its local shape over a grid of one parameter and several percentiles.
pub fn scan(model: &SeverityModel, which: usize, values: &[f64], ps: &[f64]) -> Result<Vec<ScanPoint>> {
    let name = model.family().param_names()[which];
    let mut out = Vec::with_capacity(values.len() * ps.len());
    for &value in values {
        let m = with_param(model, which, value)?;
        for &p in ps {
            let c = curvature(&m, which, p)?;
            out.push(ScanPoint { param: name, param_value: value, p, var: m.quantile(p)?, curvature: c, shape: classify(c) });
        }
    }
    Ok(out)
}
