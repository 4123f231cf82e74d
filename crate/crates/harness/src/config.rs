// Copyright 2026 The btlab Authors
// SPDX-License-Identifier: Apache-2.0

//! Experiment configuration.
//!
//! A config document is a TOML table holding the fields of
//! [`ExperimentConfig`], plus two optional tables:
//!
//! - `[sweep]`: dotted field paths mapped to lists of values. The grid is the
//!   Cartesian product, first key (in sorted order) varying slowest.
//! - `[output]`: `dir` and `formats`; these never influence episodes.
//!
//! Unknown keys anywhere are errors.

use std::path::{Path, PathBuf};

use btlab_core::corruption::CorruptionMode;
use btlab_core::model::{DecodingTransform, TransformOrder};
use btlab_core::samplers::{CapPolicy, EraseScope};
use btlab_core::tasks::{WeightMode, MAX_KNAPSACK_WEIGHT};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::output::OutputFormat;
use crate::HarnessError;

fn default_seed() -> u64 {
    2024
}
fn one() -> usize {
    1
}
fn default_episodes() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "one")]
    pub repetitions: usize,
    /// Episodes per repetition; for Dyck tasks, the number of prompts.
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    pub task: TaskConfig,
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub verifier: VerifierConfig,
    #[serde(default)]
    pub oracle: OracleSource,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetSet {
    /// `{0^D}`
    #[default]
    AllZeros,
    /// Strings containing at least one 0.
    HasZero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TaskConfig {
    /// Uniform binary oracle with a target set.
    UniformTarget {
        d: usize,
        #[serde(default)]
        target: TargetSet,
        /// Also compare the output law with the exact restricted and tokenwise laws.
        #[serde(default)]
        distribution: bool,
    },
    /// Hidden-secret parity oracle; a fresh secret per episode.
    Parity { d: usize },
    /// Planted knapsack instances, shared across repetitions.
    Knapsack {
        d: usize,
        #[serde(default = "default_weight_mode")]
        weight_mode: WeightMode,
        #[serde(default = "default_max_weight")]
        max_weight: u64,
        #[serde(default = "default_instances")]
        instances: usize,
    },
    Dyck {
        #[serde(default = "default_dyck_d")]
        d: usize,
        #[serde(default = "default_dyck_p")]
        p: f64,
        #[serde(default = "default_dyck_q")]
        q: f64,
        #[serde(default)]
        prompts: PromptSource,
        #[serde(default)]
        corruption: Option<CorruptionConfig>,
        /// Report the number of distinct outputs among this many
        /// completions per prompt instead of accuracy.
        #[serde(default)]
        diversity_k: Option<usize>,
    },
}

fn default_weight_mode() -> WeightMode {
    WeightMode::UniformRandom
}
fn default_max_weight() -> u64 {
    1 << 10
}
fn default_instances() -> usize {
    50
}
fn default_dyck_d() -> usize {
    32
}
fn default_dyck_p() -> f64 {
    0.2
}
fn default_dyck_q() -> f64 {
    0.5
}
fn default_ood_p() -> f64 {
    0.8
}
fn default_min_len() -> usize {
    25
}
fn default_max_len() -> usize {
    31
}
fn default_pool() -> usize {
    10_000
}
fn default_budget() -> usize {
    500_000
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PromptSource {
    /// Generation from the empty prefix.
    #[default]
    Empty,
    /// Prefixes of the process under a different open-bracket probability.
    Ood {
        #[serde(default = "default_ood_p")]
        p: f64,
        #[serde(default = "default_min_len")]
        min_len: usize,
        #[serde(default = "default_max_len")]
        max_len: usize,
    },
    /// Prefixes one token before the generator's first mistake on OOD prompts.
    Harvest {
        #[serde(default = "default_ood_p")]
        p: f64,
        #[serde(default = "default_min_len")]
        min_len: usize,
        #[serde(default = "default_max_len")]
        max_len: usize,
        #[serde(default = "default_pool")]
        pool: usize,
        #[serde(default = "default_budget")]
        budget: usize,
    },
}

fn default_corruption_mode() -> CorruptionMode {
    CorruptionMode::MassSmoothing
}
fn default_calibration_prompts() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorruptionConfig {
    #[serde(default = "default_corruption_mode")]
    pub mode: CorruptionMode,
    /// Corrupt only prefixes deeper than this; absent means every prefix.
    #[serde(default)]
    pub depth_threshold: Option<usize>,
    /// Fixed per-prefix corruption probability.
    #[serde(default)]
    pub epsilon: Option<f64>,
    /// Bisect epsilon to this plain-sampling validity on OOD prompts instead.
    #[serde(default)]
    pub calibrate_to: Option<f64>,
    #[serde(default = "default_calibration_prompts")]
    pub calibration_prompts: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    Rejection,
    Tokenwise,
    Backtrack,
    BacktrackNoArgmax,
    BlockBon,
    Greedy,
    /// Parity only: probe every length-(D-1) prefix in order.
    SecretSearch,
}

fn default_stride() -> usize {
    4
}
fn default_n() -> usize {
    2
}
fn default_block_width() -> usize {
    4
}
fn default_unit() -> f64 {
    1.0
}
fn default_per_token_cap() -> u64 {
    CapPolicy::default().per_token_cap
}
fn default_episode_cap() -> u64 {
    CapPolicy::default().episode_cap
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    #[serde(default)]
    pub quota: u32,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub scope: EraseScope,
    /// Candidates per block for block best-of-n.
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_block_width")]
    pub block_width: usize,
    #[serde(default = "default_unit")]
    pub top_p: f64,
    #[serde(default = "default_unit")]
    pub temperature: f64,
    #[serde(default)]
    pub order: TransformOrder,
    #[serde(default = "default_per_token_cap")]
    pub per_token_cap: u64,
    #[serde(default = "default_episode_cap")]
    pub episode_cap: u64,
}

impl SamplerConfig {
    pub fn decoding(&self) -> DecodingTransform {
        DecodingTransform { top_p: self.top_p, temperature: self.temperature, order: self.order }
    }

    pub fn caps(&self) -> CapPolicy {
        CapPolicy { per_token_cap: self.per_token_cap, episode_cap: self.episode_cap }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum VerifierConfig {
    #[default]
    Perfect,
    /// The perfect verifier with prefix-hashed decision flips.
    Noisy {
        #[serde(default)]
        false_reject_rate: f64,
        #[serde(default)]
        false_accept_rate: f64,
        #[serde(default)]
        depth_bias: Option<f64>,
    },
    /// Dyck only: accepts when the uncorrupted oracle gives the last token at
    /// least this probability.
    Threshold { threshold: f64 },
}

fn default_timeout_ms() -> u64 {
    5_000
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OracleSource {
    /// The task's exact oracle.
    #[default]
    Builtin,
    Subprocess {
        command: Vec<String>,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
    },
    Tcp {
        address: String,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
    },
}

impl OracleSource {
    pub fn is_external(&self) -> bool {
        !matches!(self, Self::Builtin)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default = "default_formats")]
    pub formats: Vec<OutputFormat>,
}

fn default_formats() -> Vec<OutputFormat> {
    vec![OutputFormat::Csv, OutputFormat::JsonLines]
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: None, formats: default_formats() }
    }
}

/// A parsed config file: the expanded grid and output settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigDocument {
    pub name: String,
    pub grid: Vec<ExperimentConfig>,
    pub output: OutputConfig,
}

impl ConfigDocument {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut table: Table = text.parse().map_err(|e: toml::de::Error| HarnessError::Parse(e.to_string()))?;
        let output = match table.remove("output") {
            Some(v) => v.try_into::<OutputConfig>().map_err(|e| HarnessError::Parse(format!("output: {e}")))?,
            None => OutputConfig::default(),
        };
        let sweep = match table.remove("sweep") {
            Some(Value::Table(t)) => t,
            Some(_) => return Err(HarnessError::validation("sweep", "must be a table")),
            None => Table::new(),
        };
        let mut axes: Vec<(String, Vec<Value>)> = Vec::new();
        for (path, values) in sweep {
            match values {
                Value::Array(values) if !values.is_empty() => axes.push((path, values)),
                _ => return Err(HarnessError::validation(format!("sweep.{path}"), "must be a non-empty list")),
            }
        }
        let mut grid = Vec::new();
        for point in cartesian(&axes) {
            let mut doc = table.clone();
            for (path, value) in point {
                set_path(&mut doc, path, value.clone())?;
            }
            let cfg: ExperimentConfig =
                Value::Table(doc).try_into().map_err(|e: toml::de::Error| HarnessError::Parse(e.to_string()))?;
            cfg.validate()?;
            grid.push(cfg);
        }
        let name = grid[0].name.clone();
        Ok(Self { name, grid, output })
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.grid.iter_mut().for_each(|cfg| cfg.seed = seed);
        self
    }
}

fn cartesian(axes: &[(String, Vec<Value>)]) -> Vec<Vec<(&str, &Value)>> {
    let mut points: Vec<Vec<(&str, &Value)>> = vec![Vec::new()];
    for (path, values) in axes {
        points = points
            .into_iter()
            .flat_map(|point| {
                values.iter().map(move |v| {
                    let mut next = point.clone();
                    next.push((path.as_str(), v));
                    next
                })
            })
            .collect();
    }
    points
}

fn set_path(table: &mut Table, path: &str, value: Value) -> Result<(), HarnessError> {
    let mut parts: Vec<&str> = path.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| HarnessError::validation(path, "empty sweep path"))?;
    let mut current = table;
    for part in parts {
        let entry = current.entry(part.to_string()).or_insert_with(|| Value::Table(Table::new()));
        current = entry
            .as_table_mut()
            .ok_or_else(|| HarnessError::validation(path, format!("`{part}` is not a table")))?;
    }
    current.insert(last.to_string(), value);
    Ok(())
}

fn check(ok: bool, field: &str, message: &str) -> Result<(), HarnessError> {
    if ok {
        Ok(())
    } else {
        Err(HarnessError::validation(field, message))
    }
}

fn unit(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

impl ExperimentConfig {
    /// Checks every parameter against the chosen task and sampler.
    pub fn validate(&self) -> Result<(), HarnessError> {
        check(!self.name.is_empty(), "name", "must be non-empty")?;
        check(self.repetitions >= 1, "repetitions", "must be at least 1")?;
        check(self.episodes >= 1, "episodes", "must be at least 1")?;
        let s = &self.sampler;
        check(s.stride >= 1, "sampler.stride", "must be at least 1")?;
        check(s.n >= 1, "sampler.n", "must be at least 1")?;
        check(s.block_width >= 1, "sampler.block_width", "must be at least 1")?;
        s.decoding().validate().map_err(|e| HarnessError::validation("sampler.top_p/temperature", e.to_string()))?;

        match &self.verifier {
            VerifierConfig::Perfect => {}
            VerifierConfig::Noisy { false_reject_rate, false_accept_rate, depth_bias } => {
                check(unit(*false_reject_rate), "verifier.false_reject_rate", "must lie in [0, 1]")?;
                check(unit(*false_accept_rate), "verifier.false_accept_rate", "must lie in [0, 1]")?;
                check(depth_bias.is_none_or(|b| b >= 0.0), "verifier.depth_bias", "must be non-negative")?;
            }
            VerifierConfig::Threshold { threshold } => {
                check(matches!(self.task, TaskConfig::Dyck { .. }), "verifier.kind", "threshold verifier needs a dyck task")?;
                check(unit(*threshold), "verifier.threshold", "must lie in [0, 1]")?;
            }
        }
        if let OracleSource::Subprocess { command, .. } = &self.oracle {
            check(!command.is_empty(), "oracle.command", "must name a program")?;
        }

        match &self.task {
            TaskConfig::UniformTarget { d, distribution, .. } => {
                check((1..=64).contains(d), "task.d", "must lie in 1..=64")?;
                check(!*distribution || *d <= 16, "task.distribution", "exact laws need d <= 16")?;
            }
            TaskConfig::Parity { d } => {
                check((2..=30).contains(d), "task.d", "must lie in 2..=30")?;
                check(!self.oracle.is_external(), "oracle.kind", "the parity oracle is built per secret")?;
            }
            TaskConfig::Knapsack { d, max_weight, instances, .. } => {
                check((1..=64).contains(d), "task.d", "must lie in 1..=64")?;
                check((1..=MAX_KNAPSACK_WEIGHT).contains(max_weight), "task.max_weight", "must lie in 1..=2^20")?;
                check(*instances >= 1, "task.instances", "must be at least 1")?;
            }
            TaskConfig::Dyck { d, p, q, prompts, corruption, diversity_k } => {
                check(*d >= 2 && d % 2 == 0, "task.d", "must be even and at least 2")?;
                check(*p > 0.0 && *p < 1.0, "task.p", "must lie in (0, 1)")?;
                check(*q > 0.0 && *q < 1.0, "task.q", "must lie in (0, 1)")?;
                check(diversity_k.is_none_or(|k| k >= 1), "task.diversity_k", "must be at least 1")?;
                match prompts {
                    PromptSource::Empty => {}
                    PromptSource::Ood { p, min_len, max_len } | PromptSource::Harvest { p, min_len, max_len, .. } => {
                        check(*p > 0.0 && *p < 1.0, "task.prompts.p", "must lie in (0, 1)")?;
                        check(min_len <= max_len && max_len < d, "task.prompts.max_len", "need min_len <= max_len < d")?;
                    }
                }
                if let PromptSource::Harvest { pool, .. } = prompts {
                    check(*pool >= 1, "task.prompts.pool", "must be at least 1")?;
                    check(corruption.is_some(), "task.corruption", "harvesting needs a corrupted generator")?;
                }
                if let Some(c) = corruption {
                    check(
                        c.epsilon.is_some() != c.calibrate_to.is_some(),
                        "task.corruption",
                        "set exactly one of epsilon and calibrate_to",
                    )?;
                    check(c.epsilon.is_none_or(unit), "task.corruption.epsilon", "must lie in [0, 1]")?;
                    check(c.calibrate_to.is_none_or(unit), "task.corruption.calibrate_to", "must lie in [0, 1]")?;
                    check(c.calibration_prompts >= 1, "task.corruption.calibration_prompts", "must be at least 1")?;
                }
            }
        }

        let is_parity = matches!(self.task, TaskConfig::Parity { .. });
        check(
            s.kind != SamplerKind::SecretSearch || is_parity,
            "sampler.kind",
            "secret-search applies to the parity task only",
        )?;
        if let TaskConfig::Dyck { diversity_k: Some(_), .. } = self.task {
            check(s.kind != SamplerKind::Greedy, "sampler.kind", "greedy decoding has no diversity")?;
        }
        Ok(())
    }

    /// Compact JSON echo; deserializes back to an identical config.
    pub fn echo(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
