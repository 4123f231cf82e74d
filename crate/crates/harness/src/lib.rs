// Copyright 2026 The btlab Authors
// SPDX-License-Identifier: Apache-2.0

//! Experiment runner for the `btlab-core` samplers.
//!
//! A run starts from a TOML document ([`config`]), expands its sweep into grid
//! points, runs each point for the configured repetitions ([`experiment`]) and
//! writes one [`output::ResultRow`] per metric ([`output`]). Named documents
//! ship as [`presets`]; [`external`] connects a generator served by another
//! process.

pub mod config;
pub mod experiment;
pub mod external;
pub mod output;
pub mod presets;

use std::path::PathBuf;

use btlab_core::corruption::CorruptionError;
use btlab_core::dyck::DyckError;
use btlab_core::samplers::SampleError;
use btlab_core::tasks::TaskError;
use btlab_core::OracleError;
use thiserror::Error;

pub use config::{ConfigDocument, ExperimentConfig};
pub use experiment::{run_document, run_experiment, RunOptions};
pub use output::{emit_results, read_results, OutputFormat, ResultRow};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config at `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Corruption(#[from] CorruptionError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Dyck(#[from] DyckError),
    #[error("no result rows to write")]
    EmptyResults,
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl HarnessError {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Validation { field: field.into(), message: message.into() }
    }

    /// 1 for configuration problems, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation { .. } | Self::Parse(_) | Self::UnknownPreset(_) => 1,
            _ => 2,
        }
    }
}
