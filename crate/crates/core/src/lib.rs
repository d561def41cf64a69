//! Numerical core for operational-risk capital estimation under the loss
//! distribution approach.
//!
//! Everything here is `no_std` with `alloc`: severity and frequency
//! distributions, Fisher information, maximum likelihood fitting, single-loss
//! capital approximations, and the reduced-bias capital estimator. IO,
//! threading and the command line live in the `oprisk` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod capital;
pub mod contamination;
pub mod distributions;
mod error;
pub mod fisher;
pub mod mle;
pub mod optim;
pub mod quad;
pub mod rce;
pub mod roots;
pub mod special;
pub mod stats;

pub use capital::{CapitalEstimate, CapitalSpec, SlaBranch, TailIndexPolicy};
pub use distributions::{FrequencyModel, Mean, SeverityFamily, SeverityModel};
pub use error::{Error, Result};
pub use fisher::{FisherMatrix, Mat2, ParamCovariance};
pub use mle::FitResult;
pub use rce::{CTable, IsoGrid, RceOptions, RceResult};
pub use stats::CapitalDistStats;
