// Copyright 2026 The btlab Authors
// SPDX-License-Identifier: Apache-2.0

//! Result rows and their CSV / JSON-lines files.

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tempfile::NamedTempFile;

use crate::config::ExperimentConfig;
use crate::HarnessError;

/// One metric of one repetition. Aggregate rows over all repetitions of a
/// grid point have no repetition index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub grid_index: usize,
    pub repetition: Option<usize>,
    pub metric: String,
    pub value: f64,
    pub std_err: Option<f64>,
    /// The grid point's full config as compact JSON.
    pub config: String,
}

impl ResultRow {
    pub fn config(&self) -> Result<ExperimentConfig, serde_json::Error> {
        serde_json::from_str(&self.config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    JsonLines,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::JsonLines => "jsonl",
        }
    }

    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "csv" => Some(Self::Csv),
            "jsonl" | "json" => Some(Self::JsonLines),
            _ => None,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

fn format_err(path: &Path, message: impl ToString) -> HarnessError {
    HarnessError::Format { path: path.to_path_buf(), message: message.to_string() }
}

/// Writes `rows` to `path` through a temporary file in the same directory.
pub fn emit_results(rows: &[ResultRow], path: &Path, format: OutputFormat) -> Result<(), HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::EmptyResults);
    }
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = NamedTempFile::new_in(&dir).map_err(io_err(path))?;
    match format {
        OutputFormat::Csv => {
            let mut writer = csv::Writer::from_writer(tmp.as_file_mut());
            for row in rows {
                writer.serialize(row).map_err(|e| format_err(path, e))?;
            }
            writer.flush().map_err(io_err(path))?;
        }
        OutputFormat::JsonLines => {
            let mut out = std::io::BufWriter::new(tmp.as_file_mut());
            for row in rows {
                serde_json::to_writer(&mut out, row).map_err(|e| format_err(path, e))?;
                out.write_all(b"\n").map_err(io_err(path))?;
            }
            out.flush().map_err(io_err(path))?;
        }
    }
    tmp.persist(path).map_err(|e| HarnessError::Io { path: path.to_path_buf(), source: e.error })?;
    Ok(())
}

pub fn read_results(path: &Path, format: OutputFormat) -> Result<Vec<ResultRow>, HarnessError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    match format {
        OutputFormat::Csv => csv::Reader::from_reader(file)
            .deserialize()
            .collect::<Result<_, _>>()
            .map_err(|e| format_err(path, e)),
        OutputFormat::JsonLines => BufReader::new(file)
            .lines()
            .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
            .map(|line| {
                let line = line.map_err(io_err(path))?;
                serde_json::from_str(&line).map_err(|e| format_err(path, e))
            })
            .collect(),
    }
}
