//! Files, experiments and the command line around `pile-core`.
//!
//! - [`spec`]: the line-oriented problem-spec language
//! - [`data`]: observation CSV ingestion
//! - [`reference`]: a reference solution for the Poisson benchmark
//! - [`experiments`]: the Poisson and transport benchmark runs
//! - [`output`], [`report`]: CSV, JSON and binary artifacts
//! - [`cli`]: the `pile-kit` command line

pub mod cli;
pub mod data;
pub mod error;
pub mod experiments;
pub mod output;
pub mod reference;
pub mod report;
pub mod spec;

pub use error::{KitError, Result, SpecError};
