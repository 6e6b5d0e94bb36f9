#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod estimators;
pub mod geometry;
pub mod rng;
pub mod verifier;
pub mod walk;
