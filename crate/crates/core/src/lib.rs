//! Linear and nonlinear causal coupling between a driver series (for example
//! daily bullish message counts) and a target series (for example daily log
//! returns): VAR G-causality with F-tests, BDS misspecification checks,
//! kernel transfer entropy with surrogate significance, functional-form
//! re-testing and net information flow.
//!
//! ```
//! use infoflow::inference::{lag_scan, ScanMode, SurrogateConfig};
//! use infoflow::kde::KdeConfig;
//! use infoflow::synth::{generate, GeneratorKind, GeneratorSpec};
//! use infoflow::te::Direction;
//!
//! let pair = generate(&GeneratorSpec::new(GeneratorKind::quadratic(1.0), 1000, 7))?;
//! let scan = lag_scan(&pair, 10, ScanMode::Nonlinear, Direction::DriverToTarget,
//!                     &KdeConfig::silverman(), &SurrogateConfig::with_seed(7))?;
//! assert!(scan.significant_at(1, 0.05));
//! # Ok::<(), infoflow::Error>(())
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bds;
pub mod error;
pub mod filters;
pub mod granger;
pub mod ingest;
pub mod inference;
pub mod kde;
mod par;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod series;
pub mod stats;
pub mod synth;
pub mod te;

pub use error::{Error, Result};
