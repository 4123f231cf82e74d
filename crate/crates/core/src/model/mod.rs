// Copyright 2026 The btlab Authors
// SPDX-License-Identifier: Apache-2.0

//! Core value types and the oracle/verifier interface contracts.

mod decoding;
mod dist;
mod oracle;
mod rng;
mod tokens;
mod verifier;

pub use decoding::{DecodedOracle, DecodingTransform, TransformOrder};
pub use dist::{
    apply_temperature, argmax_token, sample_token, truncate_top_p, NextTokenDistribution,
    BOUNDARY_TOLERANCE, INTERNAL_TOLERANCE,
};
pub use oracle::{FnOracle, Oracle, OracleError, OracleHandle};
pub use rng::{derive_seed, hash_unit, prefix_hash, RandomStream};
pub use tokens::{concat, TokenId, TokenString, Vocabulary};
pub use verifier::{AcceptAll, FnVerifier, Verifier, VerifierHandle};

use thiserror::Error;

/// Errors raised while constructing or transforming model values.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid distribution: probabilities sum to {sum} (tolerance {tolerance})")]
    InvalidDistribution { sum: f64, tolerance: f64 },
    #[error("invalid distribution: entry {index} is {value}")]
    NegativeProbability { index: usize, value: f64 },
    #[error("invalid distribution: empty probability vector")]
    EmptyDistribution,
    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),
    #[error("token {token} out of range for vocabulary of size {size}")]
    TokenOutOfRange { token: TokenId, size: usize },
}
