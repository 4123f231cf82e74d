// Copyright 2026 The btlab Authors
// SPDX-License-Identifier: Apache-2.0

//! Controlled imperfect generators built on an exact oracle, and harvesting
//! of the prefixes at which they go wrong.
//!
//! Whether a prefix is corrupted is a deterministic function of the
//! corruption seed and the full prefix, drawn once with probability ε. A
//! prefix that misleads the generator keeps misleading it on every visit,
//! as a fixed trained network would.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dyck::{dyck_depth, dyck_first_error, dyck_is_member};
use crate::exec::{map_indexed, try_map_indexed, Execution};
use crate::model::{
    hash_unit, NextTokenDistribution, Oracle, OracleError, OracleHandle, RandomStream, TokenId,
    TokenString,
};
use crate::samplers::{ancestral_sample, SampleError};

/// Weight on the uniform component under [`CorruptionMode::MassSmoothing`].
pub const SMOOTHING_LAMBDA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorruptionMode {
    /// Replace the distribution by the uniform one.
    UniformSwap,
    /// `(1 - λ) base + λ uniform`.
    MassSmoothing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorruptionTrigger {
    Always,
    /// Only prefixes whose Dyck depth exceeds the threshold (unparseable
    /// prefixes always qualify).
    DepthAbove(usize),
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CorruptionError {
    #[error("epsilon {0} outside [0, 1]")]
    InvalidEpsilon(f64),
    #[error("harvest found {found} of {target} prefixes within {episodes} episodes")]
    Timeout { found: usize, target: usize, episodes: usize },
    #[error("no prompts given")]
    NoPrompts,
    #[error(transparent)]
    Sample(#[from] SampleError),
}

#[derive(Debug, Clone)]
pub struct CorruptionSpec {
    pub base: OracleHandle,
    pub epsilon: f64,
    pub mode: CorruptionMode,
    pub trigger: CorruptionTrigger,
    pub seed: u64,
}

#[derive(Debug)]
pub struct CorruptedOracle {
    spec: CorruptionSpec,
    descriptor: String,
}

impl CorruptedOracle {
    pub fn new(spec: CorruptionSpec) -> Result<Self, CorruptionError> {
        if !(0.0..=1.0).contains(&spec.epsilon) {
            return Err(CorruptionError::InvalidEpsilon(spec.epsilon));
        }
        let descriptor = format!(
            "corrupt({}, eps={}, {:?}, {:?})",
            spec.base.descriptor(),
            spec.epsilon,
            spec.mode,
            spec.trigger
        );
        Ok(Self { spec, descriptor })
    }

    /// Whether queries at `prefix` are answered with the corrupted distribution.
    pub fn is_corrupted(&self, prefix: &[TokenId]) -> bool {
        let triggered = match self.spec.trigger {
            CorruptionTrigger::Always => true,
            CorruptionTrigger::DepthAbove(t) => dyck_depth(prefix).is_none_or(|depth| depth > t),
        };
        triggered && hash_unit(self.spec.seed, prefix) < self.spec.epsilon
    }
}

impl Oracle for CorruptedOracle {
    fn vocab_size(&self) -> usize {
        self.spec.base.vocab_size()
    }

    fn query(&self, prefix: &[TokenId]) -> Result<NextTokenDistribution, OracleError> {
        let n = self.vocab_size();
        let base = match self.spec.base.query(prefix) {
            Ok(dist) => dist,
            // the generator has left the base support; it no longer knows anything
            Err(OracleError::DeadPrefix { .. } | OracleError::OutOfRange { .. }) => {
                return Ok(NextTokenDistribution::uniform(n));
            }
            Err(e) => return Err(e),
        };
        if !self.is_corrupted(prefix) {
            return Ok(base);
        }
        Ok(match self.spec.mode {
            CorruptionMode::UniformSwap => NextTokenDistribution::uniform(n),
            CorruptionMode::MassSmoothing => base.mix(&NextTokenDistribution::uniform(n), SMOOTHING_LAMBDA),
        })
    }

    fn descriptor(&self) -> String {
        self.descriptor.clone()
    }
}

pub fn corrupt_oracle(spec: CorruptionSpec) -> Result<OracleHandle, CorruptionError> {
    Ok(OracleHandle::new(CorruptedOracle::new(spec)?))
}

/// Completes `prompts[i]` to total length `d` by plain sampling from stream
/// `(seed, i)`.
pub fn dyck_complete(
    oracle: &dyn Oracle,
    prompts: &[TokenString],
    d: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<TokenString>, SampleError> {
    try_map_indexed(exec, prompts.len(), |i| {
        let remaining = d.saturating_sub(prompts[i].len());
        ancestral_sample(&prompts[i], oracle, remaining, &mut RandomStream::new(seed, i as u64)).map(|t| t.output)
    })
}

/// Fraction of plain-sampling completions of `prompts` that are in `Dyck_d`.
pub fn dyck_validity_rate(
    oracle: &dyn Oracle,
    prompts: &[TokenString],
    d: usize,
    seed: u64,
    exec: Execution,
) -> Result<f64, SampleError> {
    let outputs = dyck_complete(oracle, prompts, d, seed, exec)?;
    let valid = outputs.iter().filter(|s| dyck_is_member(s, d)).count();
    Ok(valid as f64 / outputs.len().max(1) as f64)
}

/// Outcome of [`calibrate_epsilon`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub epsilon: f64,
    pub validity: f64,
    pub probes: usize,
}

/// Bisects ε in `[0, 1]` until the validity of `build(ε)` on `prompts` is
/// within `tolerance` of `target`, or `max_probes` is reached. Validity is
/// taken to decrease in ε. Returns the closest probe.
pub fn calibrate_epsilon<F>(
    build: F,
    prompts: &[TokenString],
    d: usize,
    target: f64,
    tolerance: f64,
    max_probes: usize,
    seed: u64,
    exec: Execution,
) -> Result<Calibration, CorruptionError>
where
    F: Fn(f64) -> Result<OracleHandle, CorruptionError>,
{
    if prompts.is_empty() {
        return Err(CorruptionError::NoPrompts);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut best: Option<Calibration> = None;
    for probe in 1..=max_probes.max(1) {
        let eps = (lo + hi) / 2.0;
        let validity = dyck_validity_rate(&build(eps)?, prompts, d, seed, exec)?;
        let cal = Calibration { epsilon: eps, validity, probes: probe };
        if best.is_none_or(|b| (validity - target).abs() < (b.validity - target).abs()) {
            best = Some(cal);
        }
        if (validity - target).abs() <= tolerance {
            return Ok(Calibration { probes: probe, ..cal });
        }
        if validity > target {
            lo = eps;
        } else {
            hi = eps;
        }
    }
    let mut best = best.expect("at least one probe");
    best.probes = max_probes.max(1);
    Ok(best)
}

/// A prefix at which the generator made its first mistake, and the mistake.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HarvestedPrefix {
    pub prefix: TokenString,
    pub bad_token: TokenId,
}

/// Completes prompts (cycling through them) until `n_target` failures are
/// seen, returning for each the prefix ending one token before its first
/// error. Errors landing inside the prompt are skipped. Episode `e` uses
/// stream `(seed, e)`.
pub fn harvest_error_inducing_prefixes(
    oracle: &dyn Oracle,
    prompts: &[TokenString],
    d: usize,
    n_target: usize,
    episode_budget: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<HarvestedPrefix>, CorruptionError> {
    if prompts.is_empty() {
        return Err(CorruptionError::NoPrompts);
    }
    const BATCH: usize = 1024;
    let mut found = Vec::with_capacity(n_target);
    let mut start = 0;
    while found.len() < n_target && start < episode_budget {
        let count = BATCH.min(episode_budget - start);
        let batch = map_indexed(exec, count, |j| -> Result<Option<HarvestedPrefix>, SampleError> {
            let e = start + j;
            let prompt = &prompts[e % prompts.len()];
            let remaining = d.saturating_sub(prompt.len());
            let out = ancestral_sample(prompt, oracle, remaining, &mut RandomStream::new(seed, e as u64))?.output;
            Ok(match dyck_first_error(&out, d) {
                Some(pos) if pos > prompt.len() => {
                    Some(HarvestedPrefix { prefix: TokenString::from(&out[..pos - 1]), bad_token: out[pos - 1] })
                }
                _ => None,
            })
        });
        for item in batch {
            if let Some(h) = item? {
                if found.len() < n_target {
                    found.push(h);
                }
            }
        }
        start += count;
    }
    if found.len() < n_target {
        return Err(CorruptionError::Timeout { found: found.len(), target: n_target, episodes: start });
    }
    Ok(found)
}
