//! Direct checks of geometric implications, per-sample inequality chains
//! and exact small-instance probability bounds.

mod back;
mod chain;
mod horo;
pub mod lattice;

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::estimators::EstimatorError;
use crate::geometry::GeometryError;
use crate::walk::WalkError;

pub use back::{check_back_geometric, BackInstances};
pub use chain::{
    check_hierarchy, check_iter_corollary, check_iter_remainder, check_prog_chain, full_walk_constant,
    iterated_remainder_laws, lattice_witness, RemainderLaws,
};
pub use horo::{check_horo_bounds, check_mgf_estimate, f_estimate, HoroSample, MgfCheck};
pub use lattice::{LatticeLaw, SyntheticProcess};

/// At most this many counterexamples are stored in a report.
pub const MAX_FAILURES: usize = 20;

/// Slack of the exact finite-state inequalities.
pub const EXACT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifierError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error("invalid verifier input: {0}")]
    InvalidInput(String),
    #[error("exact law needs {states} lattice sites, over the cap of {cap}")]
    StateOverflow { states: usize, cap: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationReport {
    pub check: String,
    pub instances_tested: u64,
    pub hypothesis_satisfying: u64,
    pub failure_count: u64,
    pub failures: Vec<serde_json::Value>,
    pub witnesses: BTreeMap<String, f64>,
    pub flags: BTreeMap<String, bool>,
    pub passed: bool,
}

impl VerificationReport {
    pub fn new(check: &str) -> Self {
        Self {
            check: check.to_string(),
            instances_tested: 0,
            hypothesis_satisfying: 0,
            failure_count: 0,
            failures: Vec::new(),
            witnesses: BTreeMap::new(),
            flags: BTreeMap::new(),
            passed: true,
        }
    }

    pub fn fail(&mut self, payload: serde_json::Value) {
        self.failure_count += 1;
        self.passed = false;
        if self.failures.len() < MAX_FAILURES {
            self.failures.push(payload);
        }
    }

    pub fn absorb(&mut self, other: VerificationReport) {
        self.instances_tested += other.instances_tested;
        self.hypothesis_satisfying += other.hypothesis_satisfying;
        self.failure_count += other.failure_count;
        self.passed &= other.passed;
        for f in other.failures {
            if self.failures.len() < MAX_FAILURES {
                self.failures.push(f);
            }
        }
        self.witnesses.extend(other.witnesses);
        self.flags.extend(other.flags);
    }

    pub fn witness(&mut self, name: &str, value: f64) {
        self.witnesses.insert(name.to_string(), value);
    }

    pub fn flag(&mut self, name: &str, value: bool) {
        self.flags.insert(name.to_string(), value);
    }

    pub fn summary(&self) -> String {
        format!(
            "{} {}: tested {}, hypothesis {}, failures {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.check,
            self.instances_tested,
            self.hypothesis_satisfying,
            self.failure_count
        )
    }
}

/// `lhs ≤ rhs` up to [`EXACT_TOLERANCE`], absolute and relative.
pub(crate) fn le_exact(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + EXACT_TOLERANCE * rhs.abs().max(1.0)
}
