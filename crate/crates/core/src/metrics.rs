// Copyright 2026 The btlab Authors
// SPDX-License-Identifier: Apache-2.0

//! Estimators: oracle complexity, completion accuracy, distinct-correct
//! counts, diversity and total-variation comparisons.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::exec::{try_map_indexed, Execution};
use crate::model::{Oracle, RandomStream, TokenId, TokenString, Verifier};
use crate::samplers::{SampleError, SampleTrace, Sampler, TraceStatus};

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub n: usize,
}

impl MeanEstimate {
    /// Mean and `sd / sqrt(n)` with the unbiased sample deviation; SE is 0 for n = 1.
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: f64::NAN, std_err: f64::NAN, n };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Self { mean, std_err: 0.0, n };
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Self { mean, std_err: (var / n as f64).sqrt(), n }
    }

    /// `sqrt(se_a^2 + se_b^2)`.
    pub fn pooled_std_err(&self, other: &Self) -> f64 {
        self.std_err.hypot(other.std_err)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityStats {
    pub mean_calls: f64,
    pub std_err: f64,
    pub n_episodes: usize,
    pub cap_exhausted_fraction: f64,
}

/// Capped episodes count at their capped call totals.
pub fn complexity_from_traces(traces: &[SampleTrace]) -> ComplexityStats {
    let calls: Vec<f64> = traces.iter().map(|t| t.oracle_calls as f64).collect();
    let est = MeanEstimate::from_values(&calls);
    let capped = traces.iter().filter(|t| t.status == TraceStatus::CapExhausted).count();
    ComplexityStats {
        mean_calls: est.mean,
        std_err: est.std_err,
        n_episodes: traces.len(),
        cap_exhausted_fraction: capped as f64 / traces.len().max(1) as f64,
    }
}

/// Runs `n_episodes` episodes; episode `i` draws from stream `(seed, i)`.
pub fn run_episodes<F>(
    n_episodes: usize,
    seed: u64,
    exec: Execution,
    episode: F,
) -> Result<Vec<SampleTrace>, SampleError>
where
    F: Fn(usize, &mut RandomStream) -> Result<SampleTrace, SampleError> + Send + Sync,
{
    try_map_indexed(exec, n_episodes, |i| episode(i, &mut RandomStream::new(seed, i as u64)))
}

pub fn measure_complexity<F>(
    n_episodes: usize,
    seed: u64,
    exec: Execution,
    episode: F,
) -> Result<ComplexityStats, SampleError>
where
    F: Fn(usize, &mut RandomStream) -> Result<SampleTrace, SampleError> + Send + Sync,
{
    assert!(n_episodes >= 1, "n_episodes must be at least 1");
    Ok(complexity_from_traces(&run_episodes(n_episodes, seed, exec, episode)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub n_prompts: usize,
    pub n_correct: usize,
    pub accuracy: f64,
    pub outcomes: Vec<bool>,
}

impl AccuracyReport {
    pub fn from_outcomes(outcomes: Vec<bool>) -> Self {
        let n_correct = outcomes.iter().filter(|&&c| c).count();
        Self {
            n_prompts: outcomes.len(),
            n_correct,
            accuracy: n_correct as f64 / outcomes.len().max(1) as f64,
            outcomes,
        }
    }
}

/// One completion per prompt, drawn from stream `(seed, prompt index)`.
pub fn completion_accuracy(
    sampler: &dyn Sampler,
    prompts: &[TokenString],
    membership: &(dyn Fn(&[TokenId]) -> bool + Sync),
    seed: u64,
    exec: Execution,
) -> Result<(AccuracyReport, Vec<SampleTrace>), SampleError> {
    assert!(!prompts.is_empty(), "prompts must be non-empty");
    let traces = try_map_indexed(exec, prompts.len(), |i| {
        sampler.sample(&prompts[i], &mut RandomStream::new(seed, i as u64))
    })?;
    let outcomes = traces.iter().map(|t| membership(&t.output)).collect();
    Ok((AccuracyReport::from_outcomes(outcomes), traces))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistinctReport {
    pub n_requested: usize,
    pub n_distinct_correct: usize,
    pub acc_distinct: f64,
}

pub fn distinct_correct<K: Eq + std::hash::Hash>(
    outputs: &[TokenString],
    correctness: impl Fn(&[TokenId]) -> bool,
    canonicalizer: impl Fn(&TokenString) -> K,
) -> DistinctReport {
    let keys: HashSet<K> = outputs.iter().filter(|o| correctness(o)).map(canonicalizer).collect();
    DistinctReport {
        n_requested: outputs.len(),
        n_distinct_correct: keys.len(),
        acc_distinct: keys.len() as f64 / outputs.len().max(1) as f64,
    }
}

/// Number of distinct outputs among `k` independent completions of `prompt`.
pub fn diversity_k(
    sampler: &dyn Sampler,
    prompt: &[TokenId],
    k: usize,
    rng: &mut RandomStream,
) -> Result<usize, SampleError> {
    assert!(k >= 1, "k must be at least 1");
    let mut seen = HashSet::with_capacity(k);
    for _ in 0..k {
        seen.insert(sampler.sample(prompt, rng)?.output);
    }
    Ok(seen.len())
}

pub type Pmf = BTreeMap<TokenString, f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub empirical: Vec<(TokenString, f64)>,
    pub reference: Vec<(TokenString, f64)>,
    pub total_variation: f64,
    pub n_samples: usize,
}

/// `(1/2) Σ |a(s) - b(s)|` over the union of supports.
pub fn total_variation(a: &Pmf, b: &Pmf) -> f64 {
    let mut tv = 0.0;
    for (s, pa) in a {
        tv += (pa - b.get(s).copied().unwrap_or(0.0)).abs();
    }
    for (s, pb) in b {
        if !a.contains_key(s) {
            tv += pb.abs();
        }
    }
    (tv / 2.0).clamp(0.0, 1.0)
}

pub fn empirical_pmf<'a>(outputs: impl IntoIterator<Item = &'a TokenString>) -> Pmf {
    let mut counts: BTreeMap<TokenString, u64> = BTreeMap::new();
    let mut n = 0u64;
    for o in outputs {
        *counts.entry(o.clone()).or_default() += 1;
        n += 1;
    }
    counts.into_iter().map(|(s, c)| (s, c as f64 / n as f64)).collect()
}

/// Draws `n_samples` outputs of `sampler` on `prompt` and compares their
/// empirical pmf with `reference`.
pub fn empirical_vs_reference(
    sampler: &dyn Sampler,
    prompt: &[TokenId],
    reference: &Pmf,
    n_samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<DistributionReport, SampleError> {
    let traces = try_map_indexed(exec, n_samples, |i| {
        sampler.sample(prompt, &mut RandomStream::new(seed, i as u64))
    })?;
    let empirical = empirical_pmf(traces.iter().map(|t| &t.output));
    Ok(DistributionReport {
        total_variation: total_variation(&empirical, reference),
        empirical: empirical.into_iter().collect(),
        reference: reference.iter().map(|(s, p)| (s.clone(), *p)).collect(),
        n_samples,
    })
}

/// Exact law of length-`d` oracle strings conditioned on `membership`.
/// Prefixes on which the oracle errors carry no mass.
pub fn restricted_pmf(oracle: &dyn Oracle, membership: impl Fn(&[TokenId]) -> bool, d: usize) -> Pmf {
    let mut out = Pmf::new();
    let mut stack: Vec<(Vec<TokenId>, f64)> = vec![(Vec::new(), 1.0)];
    while let Some((prefix, mass)) = stack.pop() {
        if prefix.len() == d {
            if membership(&prefix) {
                out.insert(prefix.into(), mass);
            }
            continue;
        }
        let Ok(dist) = oracle.query(&prefix) else { continue };
        for (t, &p) in dist.probs().iter().enumerate() {
            if p > 0.0 {
                let mut next = prefix.clone();
                next.push(t as TokenId);
                stack.push((next, mass * p));
            }
        }
    }
    normalize(out)
}

/// Exact output law of tokenwise rejection sampling: at each step the oracle
/// conditional renormalized over verifier-accepted tokens. Prefixes with no
/// accepted token carry no mass.
pub fn tokenwise_pmf(oracle: &dyn Oracle, verifier: &dyn Verifier, d: usize) -> Pmf {
    let mut out = Pmf::new();
    let mut stack: Vec<(Vec<TokenId>, f64)> = vec![(Vec::new(), 1.0)];
    while let Some((prefix, mass)) = stack.pop() {
        if prefix.len() == d {
            out.insert(prefix.into(), mass);
            continue;
        }
        let Ok(dist) = oracle.query(&prefix) else { continue };
        let mut accepted = Vec::new();
        for (t, &p) in dist.probs().iter().enumerate() {
            let mut next = prefix.clone();
            next.push(t as TokenId);
            if p > 0.0 && verifier.assess(&next) {
                accepted.push((next, p));
            }
        }
        let z: f64 = accepted.iter().map(|(_, p)| p).sum();
        for (next, p) in accepted {
            stack.push((next, mass * p / z));
        }
    }
    normalize(out)
}

fn normalize(mut pmf: Pmf) -> Pmf {
    let z: f64 = pmf.values().sum();
    if z > 0.0 {
        pmf.values_mut().for_each(|p| *p /= z);
    }
    pmf
}
