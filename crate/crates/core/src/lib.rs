// Copyright 2026 The btlab Authors
// SPDX-License-Identifier: Apache-2.0

//! Constrained generation with an autoregressive oracle and a process verifier.
//!
//! The crate is organized bottom-up:
//!
//! - [`model`]: vocabularies, token strings, next-token distributions, seeded
//!   random streams and the call-counted [`model::OracleHandle`] /
//!   [`model::VerifierHandle`] contracts.
//! - [`dyck`]: the two-bracket Dyck environment with its exact oracle,
//!   completability predicate and first-error parser.
//! - [`tasks`]: the uniform oracle, the hidden-secret parity oracle and
//!   knapsack constraint sets.
//! - [`verifiers`]: perfect, membership-only, noisy and threshold verifiers,
//!   plus block scoring.
//! - [`samplers`]: rejection, tokenwise rejection, backtracking, block
//!   best-of-n and greedy decoding, each producing a [`samplers::SampleTrace`].
//! - [`metrics`]: oracle complexity, completion accuracy, distinct-correct
//!   counts, diversity and total-variation comparisons.
//! - [`corruption`]: controlled imperfect generators and error-inducing
//!   prefix harvesting.
//! - [`exec`]: trial-level parallelism (rayon behind the `parallel` feature).

pub mod corruption;
pub mod dyck;
pub mod exec;
pub mod metrics;
pub mod model;
pub mod samplers;
pub mod tasks;
pub mod verifiers;

pub use model::{
    NextTokenDistribution, Oracle, OracleError, OracleHandle, RandomStream, TokenId, TokenString,
    Verifier, VerifierHandle, Vocabulary,
};
