//! Broadened-beam coefficient synthesis for uniform rectangular arrays on LEO
//! satellites.
//!
//! The planar design is split into two linear-array subproblems whose
//! coefficients are combined as `W = x yᵀ`. Each subproblem is a lifted
//! semidefinite program driven to rank one by an adaptive trace penalty.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beampattern;
pub mod capacity;
pub mod cli;
pub mod config;
pub mod error;
pub mod geometry;
pub mod linkbudget;
pub mod masks;
pub mod metrics;
pub mod pipeline;
pub mod solver;
pub mod units;

pub use error::{Error, Result};
