//! Simulation studies, file formats and the command line around
//! `oprisk_core`. Parallel work is chunked and reduced in a fixed order, so
//! results depend only on the master seed.

pub mod calibrate;
pub mod cli;
pub mod convexity;
pub mod io;
pub mod parallel;
pub mod rng;
pub mod study;

pub use study::{run_study, Estimator, StudyConfig, StudyResult};
