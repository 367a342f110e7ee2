//! Region-based genetic association testing on smoothed genotype curves.
//!
//! Per-subject genotype sequences are smoothed into functional data by
//! penalized B-splines (with optional 0<->2 relabeling to remove coding
//! oscillations), then tested for group differences by functional ANOVA,
//! with a functional-linear-model Wald test and a trend-statistic variance
//! component test as comparators, plus a Monte Carlo harness for size and
//! power experiments.

pub mod dist;
pub mod error;
pub mod fanova;
pub mod flm;
pub mod genotype;
pub mod rng;
pub mod skatlite;
pub mod splines;

pub use error::{Error, Result};
