// Copyright 2026 The btlab Authors
// SPDX-License-Identifier: Apache-2.0

//! Generation strategies with exact oracle-call accounting.
//!
//! Every sampler takes a prompt (possibly empty), generates a continuation and
//! returns a [`SampleTrace`]. `SampleTrace::output` is the full final
//! sequence, prompt included.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Oracle, OracleError, RandomStream, TokenId, TokenString, Verifier};
use crate::verifiers::BlockScorer;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SampleError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("invalid sampler parameter {name}: {detail}")]
    InvalidConfig { name: &'static str, detail: String },
}

/// Maximum number of generated tokens and an optional end-of-sequence token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthLimit {
    pub max_len: usize,
    pub eos: Option<TokenId>,
}

impl From<usize> for LengthLimit {
    fn from(max_len: usize) -> Self {
        Self { max_len, eos: None }
    }
}

/// Which tokens a backtrack may erase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EraseScope {
    /// Only generated tokens; the prompt is fixed and `max_len` bounds the
    /// generated part.
    #[default]
    Completion,
    /// The prompt is the initial contents of the sequence: erasure may reach
    /// into it and `max_len` bounds the whole sequence.
    Sequence,
}

/// Quota `Q`, stride `B` and length bound of the backtracking sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BacktrackConfig {
    pub max_len: usize,
    pub quota: u32,
    pub stride: usize,
    #[serde(default)]
    pub scope: EraseScope,
    #[serde(default)]
    pub eos: Option<TokenId>,
}

impl BacktrackConfig {
    pub fn new(max_len: usize, quota: u32, stride: usize) -> Result<Self, SampleError> {
        if max_len < 1 {
            return Err(SampleError::InvalidConfig { name: "D", detail: "must be at least 1".into() });
        }
        if stride < 1 {
            return Err(SampleError::InvalidConfig { name: "B", detail: "must be at least 1".into() });
        }
        Ok(Self { max_len, quota, stride, scope: EraseScope::Completion, eos: None })
    }

    pub fn with_scope(mut self, scope: EraseScope) -> Self {
        self.scope = scope;
        self
    }

    pub fn with_eos(mut self, eos: Option<TokenId>) -> Self {
        self.eos = eos;
        self
    }
}

/// Bounds on otherwise unbounded sampling loops. Zero means unlimited.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapPolicy {
    /// Maximum rejections at one position before the episode fails.
    pub per_token_cap: u64,
    /// Maximum oracle calls in one episode.
    pub episode_cap: u64,
}

impl Default for CapPolicy {
    fn default() -> Self {
        Self { per_token_cap: 1000, episode_cap: 10_000_000 }
    }
}

impl CapPolicy {
    pub fn unlimited() -> Self {
        Self { per_token_cap: 0, episode_cap: 0 }
    }

    fn episode_exhausted(&self, calls: u64) -> bool {
        self.episode_cap > 0 && calls >= self.episode_cap
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceStatus {
    /// The episode ran to completion (for rejection samplers: produced an accepted string).
    Success,
    /// A per-token cap was hit; the partial output is kept.
    Fail,
    /// The episode's oracle-call budget ran out.
    CapExhausted,
}

/// Record of one generation episode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleTrace {
    pub output: TokenString,
    pub prompt_len: usize,
    pub oracle_calls: u64,
    pub verifier_calls: u64,
    /// Oracle calls whose distribution was sampled (the rest were argmax calls).
    pub sampled_tokens: u64,
    pub backtracks_used: u32,
    /// Sequence length at each backtrack trigger, before erasing.
    pub backtrack_at: Vec<usize>,
    /// Full-string attempts made by rejection sampling; 1 for other samplers.
    pub attempts: u64,
    /// Rejected draws at each generated position (tokenwise rejection only).
    pub resample_counts: Vec<u32>,
    pub status: TraceStatus,
}

impl SampleTrace {
    fn start(prompt: &[TokenId]) -> Self {
        Self {
            output: TokenString::from(prompt),
            prompt_len: prompt.len(),
            oracle_calls: 0,
            verifier_calls: 0,
            sampled_tokens: 0,
            backtracks_used: 0,
            backtrack_at: Vec::new(),
            attempts: 1,
            resample_counts: Vec::new(),
            status: TraceStatus::Success,
        }
    }

    /// Tokens after the prompt.
    pub fn completion(&self) -> &[TokenId] {
        &self.output[self.prompt_len.min(self.output.len())..]
    }

    pub fn is_success(&self) -> bool {
        self.status == TraceStatus::Success
    }

    /// One-line JSON record.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("trace serializes")
    }

    pub fn from_json_line(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }
}

/// A configured sampler: prompt and random stream in, trace out.
pub trait Sampler: Send + Sync {
    fn sample(&self, prompt: &[TokenId], rng: &mut RandomStream) -> Result<SampleTrace, SampleError>;
}

impl<F> Sampler for F
where
    F: Fn(&[TokenId], &mut RandomStream) -> Result<SampleTrace, SampleError> + Send + Sync,
{
    fn sample(&self, prompt: &[TokenId], rng: &mut RandomStream) -> Result<SampleTrace, SampleError> {
        self(prompt, rng)
    }
}

fn sample_next(
    oracle: &dyn Oracle,
    seq: &[TokenId],
    trace: &mut SampleTrace,
    rng: &mut RandomStream,
) -> Result<TokenId, SampleError> {
    let dist = oracle.query(seq)?;
    trace.oracle_calls += 1;
    trace.sampled_tokens += 1;
    Ok(dist.sample(rng) as TokenId)
}

fn argmax_next(
    oracle: &dyn Oracle,
    seq: &[TokenId],
    trace: &mut SampleTrace,
) -> Result<TokenId, SampleError> {
    let dist = oracle.query(seq)?;
    trace.oracle_calls += 1;
    Ok(dist.argmax() as TokenId)
}

/// Open-loop state: whether generation should continue.
fn open(seq: &[TokenId], protected: usize, limit: LengthLimit) -> bool {
    let generated = &seq[protected.min(seq.len())..];
    generated.len() < limit.max_len
        && match (limit.eos, generated.last()) {
            (Some(eos), Some(&last)) => last != eos,
            _ => true,
        }
}

/// Plain autoregressive sampling from the oracle.
pub fn ancestral_sample(
    prompt: &[TokenId],
    oracle: &dyn Oracle,
    limit: impl Into<LengthLimit>,
    rng: &mut RandomStream,
) -> Result<SampleTrace, SampleError> {
    let limit = limit.into();
    let mut trace = SampleTrace::start(prompt);
    let mut seq = trace.output.clone().into_vec();
    while open(&seq, prompt.len(), limit) {
        let t = sample_next(oracle, &seq, &mut trace, rng)?;
        seq.push(t);
    }
    trace.output = seq.into();
    Ok(trace)
}

/// Draws whole continuations until the membership verifier accepts one.
pub fn rejection_sample(
    prompt: &[TokenId],
    oracle: &dyn Oracle,
    member_v: &dyn Verifier,
    limit: impl Into<LengthLimit>,
    cap: CapPolicy,
    rng: &mut RandomStream,
) -> Result<SampleTrace, SampleError> {
    let limit = limit.into();
    let mut trace = SampleTrace::start(prompt);
    trace.attempts = 0;
    let mut seq: Vec<TokenId> = Vec::with_capacity(prompt.len() + limit.max_len);
    loop {
        trace.attempts += 1;
        seq.clear();
        seq.extend_from_slice(prompt);
        while open(&seq, prompt.len(), limit) {
            if cap.episode_exhausted(trace.oracle_calls) {
                trace.status = TraceStatus::CapExhausted;
                return Ok(trace);
            }
            let t = sample_next(oracle, &seq, &mut trace, rng)?;
            seq.push(t);
        }
        trace.verifier_calls += 1;
        if member_v.assess(&seq) {
            trace.output = seq.into();
            return Ok(trace);
        }
    }
}

/// Extends one token at a time, redrawing from the unmodified oracle
/// distribution until the process verifier accepts the extended prefix.
pub fn tokenwise_rejection_sample(
    prompt: &[TokenId],
    oracle: &dyn Oracle,
    process_v: &dyn Verifier,
    limit: impl Into<LengthLimit>,
    cap: CapPolicy,
    rng: &mut RandomStream,
) -> Result<SampleTrace, SampleError> {
    let limit = limit.into();
    let mut trace = SampleTrace::start(prompt);
    let mut seq = trace.output.clone().into_vec();
    while open(&seq, prompt.len(), limit) {
        let mut rejected = 0u32;
        loop {
            if cap.per_token_cap > 0 && u64::from(rejected) >= cap.per_token_cap {
                trace.status = TraceStatus::Fail;
            } else if cap.episode_exhausted(trace.oracle_calls) {
                trace.status = TraceStatus::CapExhausted;
            }
            if trace.status != TraceStatus::Success {
                trace.resample_counts.push(rejected);
                trace.output = seq.into();
                return Ok(trace);
            }
            let t = sample_next(oracle, &seq, &mut trace, rng)?;
            seq.push(t);
            trace.verifier_calls += 1;
            if process_v.assess(&seq) {
                break;
            }
            seq.pop();
            rejected += 1;
        }
        trace.resample_counts.push(rejected);
    }
    trace.output = seq.into();
    Ok(trace)
}

/// Tokenwise rejection sampling with backtracking.
///
/// After each sampled token, while quota remains, the verifier checks the
/// sequence. On rejection the last `stride` tokens are erased (everything
/// erasable if fewer remain), one unit of quota is spent, and exactly
/// `stride` tokens are regenerated by argmax without further verifier checks.
pub fn backtracking_sample(
    prompt: &[TokenId],
    oracle: &dyn Oracle,
    verifier: &dyn Verifier,
    cfg: &BacktrackConfig,
    cap: CapPolicy,
    rng: &mut RandomStream,
) -> Result<SampleTrace, SampleError> {
    backtrack_impl(prompt, oracle, verifier, cfg, cap, rng, true)
}

/// [`backtracking_sample`] without the argmax redo: after erasing, ordinary
/// sampling resumes.
pub fn backtracking_sample_no_argmax(
    prompt: &[TokenId],
    oracle: &dyn Oracle,
    verifier: &dyn Verifier,
    cfg: &BacktrackConfig,
    cap: CapPolicy,
    rng: &mut RandomStream,
) -> Result<SampleTrace, SampleError> {
    backtrack_impl(prompt, oracle, verifier, cfg, cap, rng, false)
}

fn backtrack_impl(
    prompt: &[TokenId],
    oracle: &dyn Oracle,
    verifier: &dyn Verifier,
    cfg: &BacktrackConfig,
    cap: CapPolicy,
    rng: &mut RandomStream,
    redo: bool,
) -> Result<SampleTrace, SampleError> {
    let protected = match cfg.scope {
        EraseScope::Completion => prompt.len(),
        EraseScope::Sequence => 0,
    };
    let limit = LengthLimit { max_len: cfg.max_len, eos: cfg.eos };
    let mut trace = SampleTrace::start(prompt);
    let mut seq = trace.output.clone().into_vec();
    let mut quota = cfg.quota;
    while open(&seq, protected, limit) {
        if cap.episode_exhausted(trace.oracle_calls) {
            trace.status = TraceStatus::CapExhausted;
            break;
        }
        let t = sample_next(oracle, &seq, &mut trace, rng)?;
        seq.push(t);
        if quota == 0 {
            continue;
        }
        trace.verifier_calls += 1;
        if verifier.assess(&seq) {
            continue;
        }
        trace.backtrack_at.push(seq.len());
        seq.truncate(seq.len().saturating_sub(cfg.stride).max(protected));
        quota -= 1;
        trace.backtracks_used += 1;
        if redo {
            for _ in 0..cfg.stride {
                let t = argmax_next(oracle, &seq, &mut trace)?;
                seq.push(t);
            }
        }
    }
    trace.output = seq.into();
    Ok(trace)
}

/// Per block: draws `n` candidate blocks, keeps the highest-scoring one (the
/// first sampled on ties), and moves on.
pub fn block_best_of_n(
    prompt: &[TokenId],
    oracle: &dyn Oracle,
    scorer: &BlockScorer,
    n: usize,
    limit: impl Into<LengthLimit>,
    rng: &mut RandomStream,
) -> Result<SampleTrace, SampleError> {
    if n < 1 {
        return Err(SampleError::InvalidConfig { name: "n", detail: "must be at least 1".into() });
    }
    let limit = limit.into();
    let mut trace = SampleTrace::start(prompt);
    let mut seq = trace.output.clone().into_vec();
    let mut candidate: Vec<TokenId> = Vec::new();
    while open(&seq, prompt.len(), limit) {
        let mut best: Option<(f64, Vec<TokenId>)> = None;
        for _ in 0..n {
            candidate.clear();
            let mut local = seq.clone();
            while open(&local, prompt.len(), limit) && !scorer.splitter.is_complete(&candidate) {
                let t = sample_next(oracle, &local, &mut trace, rng)?;
                local.push(t);
                candidate.push(t);
            }
            let score = scorer.score(&seq, &candidate);
            trace.verifier_calls += 1;
            if best.as_ref().map_or(true, |(b, _)| score > *b) {
                best = Some((score, candidate.clone()));
            }
        }
        let (_, block) = best.expect("n >= 1");
        seq.extend_from_slice(&block);
    }
    trace.output = seq.into();
    Ok(trace)
}

/// Deterministic argmax decoding.
pub fn greedy_sample(
    prompt: &[TokenId],
    oracle: &dyn Oracle,
    limit: impl Into<LengthLimit>,
) -> Result<SampleTrace, SampleError> {
    let limit = limit.into();
    let mut trace = SampleTrace::start(prompt);
    let mut seq = trace.output.clone().into_vec();
    while open(&seq, prompt.len(), limit) {
        let t = argmax_next(oracle, &seq, &mut trace)?;
        seq.push(t);
    }
    trace.output = seq.into();
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyck::{self, DyckOracle, DyckParams};
    use crate::model::{AcceptAll, FnOracle, FnVerifier, NextTokenDistribution, OracleHandle};
    use crate::tasks::{all_zeros_completable, UniformOracle};
    use crate::verifiers::{dyck_process_verifier, BlockSplitter};

    fn zeros_verifier(d: usize) -> impl Verifier {
        FnVerifier::new("zeros", move |s: &[TokenId]| all_zeros_completable(s, d))
    }

    fn reject_all() -> impl Verifier {
        FnVerifier::new("reject", |_: &[TokenId]| false)
    }

    #[test]
    fn rejection_everything_accepted_costs_d() {
        let mut rng = RandomStream::new(1, 0);
        for _ in 0..50 {
            let t = rejection_sample(&[], &UniformOracle::binary(), &AcceptAll, 7, CapPolicy::default(), &mut rng)
                .unwrap();
            assert_eq!(t.oracle_calls, 7);
            assert_eq!(t.attempts, 1);
            assert!(t.is_success());
        }
    }

    #[test]
    fn rejection_cap_exhausts_on_infeasible_target() {
        let mut rng = RandomStream::new(1, 0);
        let cap = CapPolicy { per_token_cap: 0, episode_cap: 500 };
        let t = rejection_sample(&[], &UniformOracle::binary(), &reject_all(), 5, cap, &mut rng).unwrap();
        assert_eq!(t.status, TraceStatus::CapExhausted);
        assert_eq!(t.oracle_calls, 500);
        assert!(t.completion().is_empty());
    }

    #[test]
    fn rejection_output_is_member() {
        let mut rng = RandomStream::new(2, 0);
        let member = FnVerifier::new("zeros", |s: &[TokenId]| s.len() == 4 && s.iter().all(|&t| t == 0));
        for _ in 0..20 {
            let t = rejection_sample(&[], &UniformOracle::binary(), &member, 4, CapPolicy::default(), &mut rng)
                .unwrap();
            assert_eq!(t.output.as_slice(), &[0, 0, 0, 0]);
            assert_eq!(t.oracle_calls, 4 * t.attempts);
        }
    }

    #[test]
    fn tokenwise_builds_target() {
        let mut rng = RandomStream::new(3, 0);
        let t = tokenwise_rejection_sample(
            &[],
            &UniformOracle::binary(),
            &zeros_verifier(10),
            10,
            CapPolicy::default(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(t.output.as_slice(), &[0; 10]);
        assert_eq!(t.resample_counts.len(), 10);
        let rejected: u64 = t.resample_counts.iter().map(|&r| u64::from(r)).sum();
        assert_eq!(t.oracle_calls, 10 + rejected);
        assert_eq!(t.verifier_calls, t.oracle_calls);
    }

    #[test]
    fn tokenwise_per_token_cap_fails_with_partial_output() {
        let mut rng = RandomStream::new(3, 0);
        let v = FnVerifier::new("short", |s: &[TokenId]| s.len() <= 2);
        let cap = CapPolicy { per_token_cap: 5, episode_cap: 0 };
        let t = tokenwise_rejection_sample(&[], &UniformOracle::binary(), &v, 4, cap, &mut rng).unwrap();
        assert_eq!(t.status, TraceStatus::Fail);
        assert_eq!(t.output.len(), 2);
        assert_eq!(t.resample_counts, vec![0, 0, 5]);
        assert_eq!(t.oracle_calls, 7);
    }

    #[test]
    fn tokenwise_on_exact_dyck_never_rejects() {
        let params = DyckParams::new(16, 0.2, 0.5).unwrap();
        let mut rng = RandomStream::new(4, 0);
        let v = dyck_process_verifier(16);
        for _ in 0..200 {
            let t = tokenwise_rejection_sample(&[], &DyckOracle::new(params), &v, 16, CapPolicy::default(), &mut rng)
                .unwrap();
            assert_eq!(t.oracle_calls, 16);
            assert!(t.resample_counts.iter().all(|&r| r == 0));
            assert!(dyck::dyck_is_member(&t.output, 16));
        }
    }

    #[test]
    fn zero_quota_is_ancestral_sampling() {
        let params = DyckParams::new(12, 0.3, 0.6).unwrap();
        let oracle = DyckOracle::new(params);
        let cfg = BacktrackConfig::new(12, 0, 3).unwrap();
        for seed in 0..30 {
            let a = backtracking_sample(&[], &oracle, &reject_all(), &cfg, CapPolicy::default(), &mut RandomStream::new(seed, 0))
                .unwrap();
            let b = backtracking_sample_no_argmax(&[], &oracle, &reject_all(), &cfg, CapPolicy::default(), &mut RandomStream::new(seed, 0))
                .unwrap();
            let c = ancestral_sample(&[], &oracle, 12, &mut RandomStream::new(seed, 0)).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.output, c.output);
            assert_eq!(a.oracle_calls, a.output.len() as u64);
            assert_eq!(a.verifier_calls, 0);
        }
    }

    #[test]
    fn accept_all_verifier_matches_zero_quota() {
        let params = DyckParams::new(12, 0.3, 0.6).unwrap();
        let oracle = DyckOracle::new(params);
        let with_quota = BacktrackConfig::new(12, 4, 3).unwrap();
        let without = BacktrackConfig::new(12, 0, 3).unwrap();
        for seed in 0..30 {
            let run = |cfg: &BacktrackConfig, redo: bool| {
                let mut rng = RandomStream::new(seed, 1);
                if redo {
                    backtracking_sample(&[], &oracle, &AcceptAll, cfg, CapPolicy::default(), &mut rng)
                } else {
                    backtracking_sample_no_argmax(&[], &oracle, &AcceptAll, cfg, CapPolicy::default(), &mut rng)
                }
                .unwrap()
            };
            assert_eq!(run(&with_quota, true).output, run(&without, true).output);
            assert_eq!(run(&with_quota, true).output, run(&with_quota, false).output);
        }
    }

    // Oracle with a fixed distribution and a verifier that rejects any 1.
    fn biased_oracle() -> FnOracle<impl Fn(&[TokenId]) -> Result<NextTokenDistribution, OracleError>> {
        FnOracle::new(2, "biased", |_: &[TokenId]| Ok(NextTokenDistribution::new(vec![0.7, 0.3]).unwrap()))
    }

    #[test]
    fn backtrack_erases_and_redoes_by_argmax() {
        let v = FnVerifier::new("no-ones", |s: &[TokenId]| !s.contains(&1));
        let cfg = BacktrackConfig::new(8, 2, 3).unwrap();
        for seed in 0..200 {
            let t = backtracking_sample(&[], &biased_oracle(), &v, &cfg, CapPolicy::default(), &mut RandomStream::new(seed, 0))
                .unwrap();
            assert!(t.backtracks_used <= 2);
            assert_eq!(t.oracle_calls, t.sampled_tokens + 3 * u64::from(t.backtracks_used));
            // argmax is 0, so redone positions never hold a 1
            if t.backtracks_used < 2 {
                assert!(!t.output.contains(&1), "{:?}", t);
            }
            assert!(t.output.len() >= 8);
        }
    }

    #[test]
    fn backtrack_with_short_sequence_erases_to_empty_then_redoes_stride() {
        // Rejects the first token whatever it is; erasing 5 from length 1 leaves ε.
        let v = FnVerifier::new("reject-len1", |s: &[TokenId]| s.len() != 1);
        let cfg = BacktrackConfig::new(3, 1, 5).unwrap();
        let t = backtracking_sample(&[], &biased_oracle(), &v, &cfg, CapPolicy::default(), &mut RandomStream::new(0, 0))
            .unwrap();
        assert_eq!(t.backtracks_used, 1);
        assert_eq!(t.backtrack_at, vec![1]);
        assert_eq!(t.output.as_slice(), &[0, 0, 0, 0, 0]);
        assert_eq!(t.oracle_calls, 6);
    }

    #[test]
    fn completion_scope_protects_prompt() {
        let v = FnVerifier::new("reject-all-but-prompt", |s: &[TokenId]| s.len() <= 2);
        let prompt = [1, 1];
        let cfg = BacktrackConfig::new(2, 1, 4).unwrap();
        let t = backtracking_sample(&prompt, &biased_oracle(), &v, &cfg, CapPolicy::default(), &mut RandomStream::new(0, 0))
            .unwrap();
        assert_eq!(&t.output[..2], &prompt);
        // erased to the prompt, then 4 argmax tokens
        assert_eq!(t.output.len(), 6);

        let seq_cfg = cfg.with_scope(EraseScope::Sequence);
        let cfg4 = BacktrackConfig { max_len: 4, ..seq_cfg };
        let t = backtracking_sample(&prompt, &biased_oracle(), &v, &cfg4, CapPolicy::default(), &mut RandomStream::new(0, 0))
            .unwrap();
        // sequence scope: the 3-token sequence is erased to ε, then 4 argmax zeros
        assert_eq!(t.output.as_slice(), &[0, 0, 0, 0]);
    }

    #[test]
    fn eos_stops_generation() {
        let oracle = FnOracle::new(3, "eos-heavy", |s: &[TokenId]| {
            Ok(if s.len() >= 2 {
                NextTokenDistribution::point_mass(3, 2)
            } else {
                NextTokenDistribution::point_mass(3, 0)
            })
        });
        let limit = LengthLimit { max_len: 10, eos: Some(2) };
        let g = greedy_sample(&[], &oracle, limit).unwrap();
        assert_eq!(g.output.as_slice(), &[0, 0, 2]);
        let cfg = BacktrackConfig::new(10, 0, 1).unwrap().with_eos(Some(2));
        let b = backtracking_sample(&[], &oracle, &AcceptAll, &cfg, CapPolicy::default(), &mut RandomStream::new(0, 0))
            .unwrap();
        assert_eq!(b.output.as_slice(), &[0, 0, 2]);
        let t = tokenwise_rejection_sample(&[], &oracle, &AcceptAll, limit, CapPolicy::default(), &mut RandomStream::new(0, 0))
            .unwrap();
        assert_eq!(t.output.as_slice(), &[0, 0, 2]);
    }

    #[test]
    fn greedy_is_deterministic_and_breaks_ties_low() {
        let params = DyckParams::new(8, 0.5, 0.5).unwrap();
        let a = greedy_sample(&[], &DyckOracle::new(params), 8).unwrap();
        let b = greedy_sample(&[], &DyckOracle::new(params), 8).unwrap();
        assert_eq!(a, b);
        // depth 0 ties [ vs ( at 0.5: lowest index '['; then close (0.5) beats opens (0.25 each)
        assert_eq!(dyck::render(&a.output), "[][][][]");
        assert_eq!(a.oracle_calls, 8);
    }

    #[test]
    fn best_of_one_is_plain_sampling() {
        let params = DyckParams::new(12, 0.3, 0.6).unwrap();
        let oracle = DyckOracle::new(params);
        let scorer = BlockScorer::from_verifier(BlockSplitter::FixedWidth(4), dyck_process_verifier(12));
        for seed in 0..20 {
            let bon = block_best_of_n(&[], &oracle, &scorer, 1, 12, &mut RandomStream::new(seed, 0)).unwrap();
            let plain = ancestral_sample(&[], &oracle, 12, &mut RandomStream::new(seed, 0)).unwrap();
            assert_eq!(bon.output, plain.output);
            assert_eq!(bon.oracle_calls, 12);
        }
    }

    #[test]
    fn best_of_n_accounting() {
        let oracle = UniformOracle { vocab_size: 4 };
        let scorer = BlockScorer::new(BlockSplitter::FixedWidth(3), |_, c| c.iter().filter(|&&t| t == 0).count() as f64);
        let t = block_best_of_n(&[], &oracle, &scorer, 5, 10, &mut RandomStream::new(0, 0)).unwrap();
        // blocks of 3, 3, 3, 1
        assert_eq!(t.oracle_calls, 5 * 10);
        assert_eq!(t.output.len(), 10);
        assert!(block_best_of_n(&[], &oracle, &scorer, 0, 10, &mut RandomStream::new(0, 0)).is_err());
    }

    #[test]
    fn counting_wrapper_agrees_with_trace() {
        let params = DyckParams::new(16, 0.5, 0.5).unwrap();
        let handle = OracleHandle::new(DyckOracle::new(params));
        let v = FnVerifier::new("noisy", |s: &[TokenId]| s.len() % 5 != 0);
        let cfg = BacktrackConfig::new(16, 3, 2).unwrap();
        for seed in 0..50 {
            handle.reset_count();
            let t = backtracking_sample(&[], &handle, &v, &cfg, CapPolicy::default(), &mut RandomStream::new(seed, 0));
            if let Ok(t) = t {
                assert_eq!(handle.call_count(), t.oracle_calls);
            }
        }
    }

    #[test]
    fn trace_json_round_trip() {
        let t = tokenwise_rejection_sample(
            &[1],
            &UniformOracle::binary(),
            &AcceptAll,
            4,
            CapPolicy::default(),
            &mut RandomStream::new(0, 0),
        )
        .unwrap();
        let line = t.to_json_line();
        assert!(!line.contains('\n'));
        assert_eq!(SampleTrace::from_json_line(&line).unwrap(), t);
        assert_eq!(t.completion().len(), 4);
    }

    #[test]
    fn config_validation() {
        assert!(BacktrackConfig::new(0, 1, 1).is_err());
        assert!(BacktrackConfig::new(4, 1, 0).is_err());
    }
}
