//! Experiment catalog, convergence studies and result emission for the
//! `sfe` command-line tool.

pub mod catalog;
pub mod config;
pub mod emit;
pub mod error;
pub mod study;

pub use error::HarnessError;
