// Copyright 2026 The btlab Authors
// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use super::TokenId;

/// A prefix judge: `true` means accept.
pub trait Verifier: Send + Sync {
    fn assess(&self, prefix: &[TokenId]) -> bool;

    fn descriptor(&self) -> String {
        "verifier".to_string()
    }
}

impl<V: Verifier + ?Sized> Verifier for &V {
    fn assess(&self, prefix: &[TokenId]) -> bool {
        (**self).assess(prefix)
    }

    fn descriptor(&self) -> String {
        (**self).descriptor()
    }
}

impl<V: Verifier + ?Sized> Verifier for Arc<V> {
    fn assess(&self, prefix: &[TokenId]) -> bool {
        (**self).assess(prefix)
    }

    fn descriptor(&self) -> String {
        (**self).descriptor()
    }
}

/// Verifier backed by a predicate.
pub struct FnVerifier<F> {
    descriptor: String,
    f: F,
}

impl<F: Fn(&[TokenId]) -> bool + Send + Sync> FnVerifier<F> {
    pub fn new(descriptor: impl Into<String>, f: F) -> Self {
        Self { descriptor: descriptor.into(), f }
    }
}

impl<F: Fn(&[TokenId]) -> bool + Send + Sync> Verifier for FnVerifier<F> {
    fn assess(&self, prefix: &[TokenId]) -> bool {
        (self.f)(prefix)
    }

    fn descriptor(&self) -> String {
        self.descriptor.clone()
    }
}

/// Accepts every prefix.
#[derive(Debug, Clone, Copy, Default)]
pub struct AcceptAll;

impl Verifier for AcceptAll {
    fn assess(&self, _prefix: &[TokenId]) -> bool {
        true
    }

    fn descriptor(&self) -> String {
        "accept-all".to_string()
    }
}

/// A shared verifier with an atomic call counter. Clones share the counter.
#[derive(Clone)]
pub struct VerifierHandle {
    inner: Arc<dyn Verifier>,
    calls: Arc<AtomicU64>,
}

impl VerifierHandle {
    pub fn new(verifier: impl Verifier + 'static) -> Self {
        Self::from_arc(Arc::new(verifier))
    }

    pub fn from_arc(inner: Arc<dyn Verifier>) -> Self {
        Self { inner, calls: Arc::new(AtomicU64::new(0)) }
    }

    pub fn call_count(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn reset_count(&self) {
        self.calls.store(0, Ordering::Relaxed);
    }
}

impl Verifier for VerifierHandle {
    fn assess(&self, prefix: &[TokenId]) -> bool {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.assess(prefix)
    }

    fn descriptor(&self) -> String {
        self.inner.descriptor()
    }
}

impl fmt::Debug for VerifierHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VerifierHandle")
            .field("descriptor", &self.inner.descriptor())
            .field("calls", &self.call_count())
            .finish()
    }
}
