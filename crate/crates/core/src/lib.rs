//! Joint trend removal, denoising and blind sparse deconvolution of 1-D peak
//! signals.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod filters;
pub mod metrics;
pub mod projections;
pub mod signal;
pub mod solver;
pub mod spoq;
pub mod tuning;

pub use error::{Error, Result};
