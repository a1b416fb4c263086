//! Moderate-calibration assessment of individualized treatment effect (ITE)
//! models for binary outcomes, using randomized-trial validation data.
//!
//! Predicted effects are turned into cumulative-error processes that behave
//! like standard Brownian motion when the model is calibrated. The crate
//! builds those processes ([`ite`], [`risk`]), tests them ([`inference`]),
//! studies the tests by simulation ([`simulation`]) and handles datasets,
//! reports and plots ([`dataset`], [`report`], [`plot`], [`cli`]).

pub mod cli;
pub mod dataset;
pub mod domain;
pub mod error;
pub mod inference;
pub mod ite;
pub mod plot;
pub mod report;
pub mod risk;
pub mod simulation;

pub use domain::{build_sample, Arm, OrderBy, OrderedSample, ProcessKind, ProcessPath, SubjectRecord, TestReport};
pub use error::{Error, Result};
