//! Anomaly detection for motor-torque streams of cable-driven parallel
//! robots holding a pose.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod detector;
pub mod error;
pub mod eval;
pub mod mixture;
pub mod stability;
pub mod streams;

pub use error::{Error, Result};
