//! IR-UWB radar obstacle mapping.
//!
//! Captures of three complex CIRs per frame go through peak detection,
//! multi-criteria filtering, bistatic localisation and density clustering
//! to produce an obstacle map.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod capture;
pub mod cir;
pub mod cli;
pub mod clustering;
pub mod eval;
pub mod exec;
pub mod filtering;
pub mod geometry;
pub mod json_f64;
pub mod peaks;
pub mod pipeline;
pub mod sim;

pub use exec::Execution;
