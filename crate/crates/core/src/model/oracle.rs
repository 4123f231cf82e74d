// Copyright 2026 The btlab Authors
// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use thiserror::Error;

use super::{ModelError, NextTokenDistribution, TokenId};

/// Failure of a single oracle query.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("prefix {prefix:?} cannot be extended to a member of the language")]
    DeadPrefix { prefix: Vec<TokenId> },
    #[error("prefix length {len} outside the oracle's domain (max {max})")]
    OutOfRange { len: usize, max: usize },
    #[error("token {token} outside vocabulary of size {size}")]
    InvalidToken { token: TokenId, size: usize },
    #[error("oracle timed out on request {request}")]
    Timeout { request: String },
    #[error("malformed oracle response {payload:?}: {reason}")]
    MalformedResponse { payload: String, reason: String },
    #[error("oracle connection lost during request {request}: {detail}")]
    ConnectionLost { request: String, detail: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// An autoregressive oracle: maps a prefix to its next-token distribution.
pub trait Oracle: Send + Sync {
    fn vocab_size(&self) -> usize;

    fn query(&self, prefix: &[TokenId]) -> Result<NextTokenDistribution, OracleError>;

    fn descriptor(&self) -> String {
        "oracle".to_string()
    }
}

impl<O: Oracle + ?Sized> Oracle for &O {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn query(&self, prefix: &[TokenId]) -> Result<NextTokenDistribution, OracleError> {
        (**self).query(prefix)
    }

    fn descriptor(&self) -> String {
        (**self).descriptor()
    }
}

impl<O: Oracle + ?Sized> Oracle for Arc<O> {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn query(&self, prefix: &[TokenId]) -> Result<NextTokenDistribution, OracleError> {
        (**self).query(prefix)
    }

    fn descriptor(&self) -> String {
        (**self).descriptor()
    }
}

impl<O: Oracle + ?Sized> Oracle for Box<O> {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn query(&self, prefix: &[TokenId]) -> Result<NextTokenDistribution, OracleError> {
        (**self).query(prefix)
    }

    fn descriptor(&self) -> String {
        (**self).descriptor()
    }
}

/// Oracle backed by a closure.
pub struct FnOracle<F> {
    vocab_size: usize,
    descriptor: String,
    f: F,
}

impl<F> FnOracle<F>
where
    F: Fn(&[TokenId]) -> Result<NextTokenDistribution, OracleError> + Send + Sync,
{
    pub fn new(vocab_size: usize, descriptor: impl Into<String>, f: F) -> Self {
        Self { vocab_size, descriptor: descriptor.into(), f }
    }
}

impl<F> Oracle for FnOracle<F>
where
    F: Fn(&[TokenId]) -> Result<NextTokenDistribution, OracleError> + Send + Sync,
{
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn query(&self, prefix: &[TokenId]) -> Result<NextTokenDistribution, OracleError> {
        (self.f)(prefix)
    }

    fn descriptor(&self) -> String {
        self.descriptor.clone()
    }
}

/// A shared oracle with an atomic query counter.
///
/// Every call to [`Oracle::query`] through the handle counts once, whether or
/// not it succeeds. Clones share the counter.
#[derive(Clone)]
pub struct OracleHandle {
    inner: Arc<dyn Oracle>,
    calls: Arc<AtomicU64>,
}

impl OracleHandle {
    pub fn new(oracle: impl Oracle + 'static) -> Self {
        Self::from_arc(Arc::new(oracle))
    }

    pub fn from_arc(inner: Arc<dyn Oracle>) -> Self {
        Self { inner, calls: Arc::new(AtomicU64::new(0)) }
    }

    /// A handle over the same oracle with its own counter.
    pub fn fresh_counter(&self) -> Self {
        Self::from_arc(Arc::clone(&self.inner))
    }

    pub fn call_count(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn reset_count(&self) {
        self.calls.store(0, Ordering::Relaxed);
    }

    pub fn inner(&self) -> &Arc<dyn Oracle> {
        &self.inner
    }
}

impl Oracle for OracleHandle {
    fn vocab_size(&self) -> usize {
        self.inner.vocab_size()
    }

    fn query(&self, prefix: &[TokenId]) -> Result<NextTokenDistribution, OracleError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.query(prefix)
    }

    fn descriptor(&self) -> String {
        self.inner.descriptor()
    }
}

impl fmt::Debug for OracleHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OracleHandle")
            .field("descriptor", &self.inner.descriptor())
            .field("calls", &self.call_count())
            .finish()
    }
}
