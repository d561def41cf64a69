//! Loss samples, optionally contaminated by tail-shifted severities.

use alloc::vec::Vec;
use rand_core::RngCore;

use crate::distributions::{sample_poisson, uniform_open, FrequencyModel, SeverityFamily, SeverityModel};
use crate::fisher::{fisher_for, param_covariance};
use crate::rce::ellipse_offsets;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tail {
    Left,
    Right,
    Both,
}

impl Tail {
    pub fn name(self) -> &'static str {
        match self {
            Tail::Left => "left",
            Tail::Right => "right",
            Tail::Both => "both",
        }
    }

    pub fn parse(s: &str) -> Option<Tail> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" => Some(Tail::Left),
            "right" => Some(Tail::Right),
            "both" => Some(Tail::Both),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContaminationSpec {
    pub tail: Tail,
    /// Probability per active tail that a loss comes from the contaminant.
    pub epsilon: f64,
    /// Joint probability of the ellipse the contaminating parameters sit on.
    pub joint_p: f64,
}

impl ContaminationSpec {
    pub fn new(tail: Tail, epsilon: f64) -> Result<Self> {
        let s = ContaminationSpec { tail, epsilon, joint_p: 0.90 };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let tails = if self.tail == Tail::Both { 2.0 } else { 1.0 };
        if !(self.epsilon > 0.0 && self.epsilon * tails < 1.0) {
            return Err(Error::Domain { what: "contamination epsilon", value: self.epsilon });
        }
        if !(self.joint_p > 0.0 && self.joint_p < 1.0) {
            return Err(Error::Domain { what: "contamination joint probability", value: self.joint_p });
        }
        Ok(())
    }
}

/// Truth plus its resolved contaminating severities.
#[derive(Debug, Clone, PartialEq)]
pub struct Contamination {
    pub spec: ContaminationSpec,
    pub left: Option<SeverityModel>,
    pub right: Option<SeverityModel>,
}

/// Contaminating severity for one tail: both parameters shifted by the same
/// number of standard deviations onto the `joint_p` ellipse of the parameter
/// distribution at sample size `n`. For LogGamma `b` moves against `a`, since a
/// larger `b` means a thinner tail.
pub fn contaminant(truth: &SeverityModel, n: usize, joint_p: f64, right: bool) -> Result<SeverityModel> {
    let cov = param_covariance(&fisher_for(truth)?, n);
    let z1: i8 = if right { 1 } else { -1 };
    let z2 = if truth.family() == SeverityFamily::LogGamma { -z1 } else { z1 };
    let off = ellipse_offsets(&cov, joint_p)?
        .into_iter()
        .find(|o| o.direction == (z1, z2))
        .ok_or(Error::Numeric("missing ellipse direction"))?;
    let [p1, p2] = truth.params();
    truth.with_params(p1 + off.delta[0], p2 + off.delta[1])
}

impl Contamination {
    /// The parameter covariance uses the expected sample size `lambda * years`.
    pub fn new(truth: &SeverityModel, freq: &FrequencyModel, spec: ContaminationSpec) -> Result<Self> {
        spec.validate()?;
        let n = libm::round(freq.expected_count()).max(1.0) as usize;
        let left = matches!(spec.tail, Tail::Left | Tail::Both)
            .then(|| contaminant(truth, n, spec.joint_p, false))
            .transpose()?;
        let right = matches!(spec.tail, Tail::Right | Tail::Both)
            .then(|| contaminant(truth, n, spec.joint_p, true))
            .transpose()?;
        Ok(Contamination { spec, left, right })
    }
}

/// A simulated sample and how many of its losses came from a contaminant.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub losses: Vec<f64>,
    pub contaminated: usize,
}

/// Draws `N ~ Poisson(lambda * years)` losses, each from a contaminant with
/// probability `epsilon` per active tail and otherwise from the truth.
pub fn simulate_sample<R: RngCore + ?Sized>(
    truth: &SeverityModel,
    freq: &FrequencyModel,
    contamination: Option<&Contamination>,
    rng: &mut R,
) -> Sample {
    let count = sample_poisson(freq, rng) as usize;
    draw_losses(truth, count, contamination, rng)
}

/// Fixed-count version of [`simulate_sample`].
pub fn draw_losses<R: RngCore + ?Sized>(
    truth: &SeverityModel,
    count: usize,
    contamination: Option<&Contamination>,
    rng: &mut R,
) -> Sample {
    let Some(c) = contamination else {
        return Sample { losses: truth.sample(rng, count), contaminated: 0 };
    };
    let eps = c.spec.epsilon;
    let mut losses = Vec::with_capacity(count);
    let mut contaminated = 0;
    for _ in 0..count {
        let u = uniform_open(rng);
        let model = match (&c.left, &c.right) {
            (Some(l), _) if u < eps => l,
            (Some(_), Some(r)) if u < 2.0 * eps => r,
            (None, Some(r)) if u < eps => r,
            _ => truth,
        };
        if !core::ptr::eq(model, truth) {
            contaminated += 1;
        }
        losses.push(model.sample_one(rng));
    }
    Sample { losses, contaminated }
}
