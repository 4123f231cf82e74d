// Copyright 2026 The btlab Authors
// SPDX-License-Identifier: Apache-2.0

//! Verifier constructors and block scoring.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dyck;
use crate::model::{hash_unit, FnVerifier, TokenId, Verifier, VerifierHandle};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifierError {
    #[error("rate {name} = {value} outside [0, 1]")]
    InvalidRate { name: &'static str, value: f64 },
}

/// Accepts exactly the prefixes for which `completable` holds.
pub fn perfect_process_verifier(
    descriptor: impl Into<String>,
    completable: impl Fn(&[TokenId]) -> bool + Send + Sync + 'static,
) -> VerifierHandle {
    VerifierHandle::new(FnVerifier::new(descriptor, completable))
}

/// Accepts exactly the full-length strings for which `membership` holds.
pub fn membership_verifier(
    descriptor: impl Into<String>,
    d: usize,
    membership: impl Fn(&[TokenId]) -> bool + Send + Sync + 'static,
) -> VerifierHandle {
    VerifierHandle::new(FnVerifier::new(descriptor, move |s: &[TokenId]| {
        s.len() == d && membership(s)
    }))
}

/// The perfect Dyck process verifier for target length `d`.
pub fn dyck_process_verifier(d: usize) -> VerifierHandle {
    perfect_process_verifier(format!("dyck-completable(D={d})"), move |s| {
        dyck::dyck_completable(s, d)
    })
}

/// Parameters of a noise-corrupted verifier.
#[derive(Clone)]
pub struct NoisyVerifierSpec {
    pub base: VerifierHandle,
    /// Probability of rejecting a prefix the base accepts.
    pub false_reject_rate: f64,
    /// Probability of accepting a prefix the base rejects.
    pub false_accept_rate: f64,
    pub seed: u64,
    /// Optional multiplier on both rates per unit of Dyck depth:
    /// `rate * (1 + bias * depth)`, capped at 1. Unparseable prefixes count as depth 0.
    pub depth_bias: Option<f64>,
}

impl NoisyVerifierSpec {
    pub fn new(base: VerifierHandle, false_reject_rate: f64, false_accept_rate: f64, seed: u64) -> Self {
        Self { base, false_reject_rate, false_accept_rate, seed, depth_bias: None }
    }
}

/// Flips base decisions with prefix-hashed noise, so repeated queries on the
/// same prefix agree.
pub struct NoisyVerifier {
    spec: NoisyVerifierSpec,
}

impl NoisyVerifier {
    pub fn new(spec: NoisyVerifierSpec) -> Result<Self, VerifierError> {
        for (name, value) in [
            ("false_reject_rate", spec.false_reject_rate),
            ("false_accept_rate", spec.false_accept_rate),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(VerifierError::InvalidRate { name, value });
            }
        }
        if let Some(b) = spec.depth_bias {
            if !(b >= 0.0) {
                return Err(VerifierError::InvalidRate { name: "depth_bias", value: b });
            }
        }
        Ok(Self { spec })
    }
}

impl Verifier for NoisyVerifier {
    fn assess(&self, prefix: &[TokenId]) -> bool {
        let base = self.spec.base.assess(prefix);
        let mut rate = if base { self.spec.false_reject_rate } else { self.spec.false_accept_rate };
        if let Some(bias) = self.spec.depth_bias {
            let depth = dyck::dyck_depth(prefix).unwrap_or(0) as f64;
            rate = (rate * (1.0 + bias * depth)).min(1.0);
        }
        let flip = hash_unit(self.spec.seed, prefix) < rate;
        base != flip
    }

    fn descriptor(&self) -> String {
        format!(
            "noisy({}, fr={}, fa={})",
            self.spec.base.descriptor(),
            self.spec.false_reject_rate,
            self.spec.false_accept_rate
        )
    }
}

pub fn noisy_verifier(spec: NoisyVerifierSpec) -> Result<VerifierHandle, VerifierError> {
    Ok(VerifierHandle::new(NoisyVerifier::new(spec)?))
}

/// Accepts a prefix iff `score(prefix) >= threshold`.
pub fn threshold_scorer_verifier(
    score: impl Fn(&[TokenId]) -> f64 + Send + Sync + 'static,
    threshold: f64,
) -> VerifierHandle {
    VerifierHandle::new(FnVerifier::new(format!("threshold({threshold})"), move |s: &[TokenId]| {
        score(s) >= threshold
    }))
}

/// Rule marking where blocks end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockSplitter {
    /// Blocks of `k` tokens; the last may be shorter.
    FixedWidth(usize),
    /// A block ends with (and includes) the delimiter token.
    Delimiter(TokenId),
}

impl BlockSplitter {
    /// Whether a block that currently holds `block` is finished.
    pub fn is_complete(&self, block: &[TokenId]) -> bool {
        match *self {
            BlockSplitter::FixedWidth(k) => block.len() >= k.max(1),
            BlockSplitter::Delimiter(delim) => block.last() == Some(&delim),
        }
    }
}

/// Splits a token string into contiguous, non-overlapping, covering spans.
pub fn split_blocks(tokens: &[TokenId], splitter: BlockSplitter) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    let mut start = 0;
    for i in 0..tokens.len() {
        if splitter.is_complete(&tokens[start..=i]) {
            spans.push(start..i + 1);
            start = i + 1;
        }
    }
    if start < tokens.len() {
        spans.push(start..tokens.len());
    }
    spans
}

type ScoreFn = dyn Fn(&[TokenId], &[TokenId]) -> f64 + Send + Sync;

/// Scores a candidate block in the context of the prefix it extends.
#[derive(Clone)]
pub struct BlockScorer {
    score: Arc<ScoreFn>,
    pub splitter: BlockSplitter,
}

impl BlockScorer {
    pub fn new(
        splitter: BlockSplitter,
        score: impl Fn(&[TokenId], &[TokenId]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { score: Arc::new(score), splitter }
    }

    /// Scores `prefix ∘ candidate` as 1.0 when the verifier accepts it, else 0.0.
    pub fn from_verifier(splitter: BlockSplitter, verifier: impl Verifier + 'static) -> Self {
        Self::new(splitter, move |prefix, candidate| {
            let mut full = Vec::with_capacity(prefix.len() + candidate.len());
            full.extend_from_slice(prefix);
            full.extend_from_slice(candidate);
            if verifier.assess(&full) {
                1.0
            } else {
                0.0
            }
        })
    }

    pub fn score(&self, prefix: &[TokenId], candidate: &[TokenId]) -> f64 {
        (self.score)(prefix, candidate)
    }
}

impl fmt::Debug for BlockScorer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BlockScorer").field("splitter", &self.splitter).finish_non_exhaustive()
    }
}
