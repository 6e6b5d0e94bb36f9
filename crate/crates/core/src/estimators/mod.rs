//! Monte Carlo estimators with confidence intervals.
//!
//! Every estimator runs its trials on the counter-based streams of
//! [`crate::rng`], accumulates per-block partial sums and reduces them in
//! block order, so a report depends only on its inputs and master seed.

mod decay;
mod family;
mod mgf;
mod shadow;
pub mod stats;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::geometry::GeometryError;
use crate::walk::WalkError;

pub use decay::{estimate_decay_curve, estimate_drift, fit_exponential_rate, witness_constant, WITNESS_GRID};
pub use family::SupremumFamily;
pub use mgf::{
    conditional_mgf_by_bin, estimate_horofn_mgf, estimate_progress_mgf, polya_mgf, polya_mgf_derivative,
    BinEstimate, MIN_BIN_SAMPLES,
};
pub use shadow::{
    certify_uniform_shadow, estimate_shadow_decay, estimate_uniform_shadow_decay, four_point_supremum,
    ShadowCertificate, ShadowDecay,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid estimator input: {0}")]
    InvalidInput(String),
    #[error("no decay: every point of the curve sits at probability 1")]
    NoDecay,
}

/// A point estimate with its 95% interval.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimatorReport {
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub trials: u64,
    pub seed: u64,
    pub params: BTreeMap<String, f64>,
}

impl EstimatorReport {
    pub fn new(estimate: f64, (ci_low, ci_high): (f64, f64), trials: u64, seed: u64) -> Self {
        Self {
            estimate,
            ci_low: ci_low.min(estimate),
            ci_high: ci_high.max(estimate),
            trials,
            seed,
            params: BTreeMap::new(),
        }
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }
}

/// Which variable indexes a curve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    N,
    D,
    T,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::N => "n",
            Axis::D => "d",
            Axis::T => "t",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub x: f64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Estimates indexed by `n`, `d` or `t`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayCurve {
    pub axis: Axis,
    pub points: Vec<CurvePoint>,
    pub trials: u64,
    pub seed: u64,
    pub params: BTreeMap<String, f64>,
}

impl DecayCurve {
    /// CSV with header `<axis>,estimate,ci_low,ci_high`.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{},estimate,ci_low,ci_high\n", self.axis.name());
        for p in &self.points {
            writeln!(out, "{},{},{},{}", p.x, p.estimate, p.ci_low, p.ci_high).unwrap();
        }
        out
    }
}

pub(crate) fn check_trials(trials: u64, min: u64) -> Result<(), EstimatorError> {
    if trials < min {
        return Err(EstimatorError::InvalidInput(format!(
            "need at least {min} trials, got {trials}"
        )));
    }
    Ok(())
}

pub(crate) fn check_grid<T: PartialOrd + Copy + std::fmt::Debug>(name: &str, grid: &[T]) -> Result<(), EstimatorError> {
    if grid.is_empty() {
        return Err(EstimatorError::InvalidInput(format!("{name} grid is empty")));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(EstimatorError::InvalidInput(format!(
            "{name} grid must be strictly increasing: {grid:?}"
        )));
    }
    Ok(())
}
