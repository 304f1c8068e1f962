//! Downlink sum-rate comparison of a horizontal reflect-only surface and a
//! vertical transmit-and-reflect surface mounted on an aerial platform.
//!
//! The crate covers scenario geometry, Rician channel generation, rate and
//! MSE evaluation, the joint precoder/surface optimizer, and batch
//! experiments driven from the `aerosurf` command-line tool.

pub mod channel;
pub mod cli;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod experiments;
pub mod geometry;
pub mod optimizer;
pub mod units;

pub use error::{Error, Result};
