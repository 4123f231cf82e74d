// Copyright 2026 The btlab Authors
// SPDX-License-Identifier: Apache-2.0

//! Binary-alphabet environments: the uniform oracle, the hidden-secret parity
//! oracle with its even-parity constraint set, and knapsack constraint sets.

use std::fmt;
use std::sync::Arc;

use dashmap::DashMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{NextTokenDistribution, Oracle, OracleError, RandomStream, TokenId, TokenString};

/// Largest knapsack weight accepted; keeps the subset-sum table pseudo-polynomial.
pub const MAX_KNAPSACK_WEIGHT: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TaskError {
    #[error("secret must have length D - 1 = {expected}, got {got}")]
    SecretLength { expected: usize, got: usize },
    #[error("token {0} is not binary")]
    NonBinary(TokenId),
    #[error("knapsack weight {0} exceeds {MAX_KNAPSACK_WEIGHT}")]
    WeightTooLarge(u64),
    #[error("invalid task parameter {name}: {detail}")]
    InvalidParameter { name: &'static str, detail: String },
}

/// Next-token distribution of the uniform oracle; independent of the prefix.
pub fn uniform_next_dist(_prefix: &[TokenId], vocab_size: usize) -> NextTokenDistribution {
    NextTokenDistribution::uniform(vocab_size)
}

#[derive(Debug, Clone, Copy)]
pub struct UniformOracle {
    pub vocab_size: usize,
}

impl UniformOracle {
    pub fn binary() -> Self {
        Self { vocab_size: 2 }
    }
}

impl Oracle for UniformOracle {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn query(&self, prefix: &[TokenId]) -> Result<NextTokenDistribution, OracleError> {
        Ok(uniform_next_dist(prefix, self.vocab_size))
    }

    fn descriptor(&self) -> String {
        format!("uniform(|V|={})", self.vocab_size)
    }
}

/// Hidden-secret parity oracle parameters: strings of length `d` and a
/// secret of length `d - 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParityOracleSpec {
    pub d: usize,
    pub secret: TokenString,
}

impl ParityOracleSpec {
    pub fn new(d: usize, secret: TokenString) -> Result<Self, TaskError> {
        if d < 1 || secret.len() != d - 1 {
            return Err(TaskError::SecretLength { expected: d.saturating_sub(1), got: secret.len() });
        }
        if let Some(&t) = secret.iter().find(|&&t| t > 1) {
            return Err(TaskError::NonBinary(t));
        }
        Ok(Self { d, secret })
    }

    pub fn random(d: usize, rng: &mut RandomStream) -> Self {
        let secret = (1..d).map(|_| rng.below(2) as TokenId).collect();
        Self { d, secret }
    }
}

fn bit_sum(s: &[TokenId]) -> u64 {
    s.iter().map(|&t| u64::from(t)).sum()
}

/// Uniform below length `d - 1`. At length `d - 1` the secret is completed to
/// even total parity and every other prefix to odd parity.
pub fn parity_next_dist(
    prefix: &[TokenId],
    spec: &ParityOracleSpec,
) -> Result<NextTokenDistribution, OracleError> {
    if prefix.len() >= spec.d {
        return Err(OracleError::OutOfRange { len: prefix.len(), max: spec.d - 1 });
    }
    if let Some(&token) = prefix.iter().find(|&&t| t > 1) {
        return Err(OracleError::InvalidToken { token, size: 2 });
    }
    if prefix.len() < spec.d - 1 {
        return Ok(NextTokenDistribution::uniform(2));
    }
    let parity = bit_sum(prefix) % 2;
    let want = if prefix == spec.secret.as_slice() { 0 } else { 1 };
    // last bit b with (parity + b) % 2 == want
    let last = (want + 2 - parity) % 2;
    Ok(NextTokenDistribution::point_mass(2, last as usize))
}

#[derive(Debug, Clone)]
pub struct ParityOracle {
    pub spec: ParityOracleSpec,
}

impl Oracle for ParityOracle {
    fn vocab_size(&self) -> usize {
        2
    }

    fn query(&self, prefix: &[TokenId]) -> Result<NextTokenDistribution, OracleError> {
        parity_next_dist(prefix, &self.spec)
    }

    fn descriptor(&self) -> String {
        format!("parity-secret(D={})", self.spec.d)
    }
}

pub fn parity_membership(s: &[TokenId], d: usize) -> bool {
    s.len() == d && s.iter().all(|&t| t <= 1) && bit_sum(s) % 2 == 0
}

/// Outcome of [`sequential_secret_search`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecretSearch {
    pub secret: Option<TokenString>,
    /// Length-`(d - 1)` prefixes queried.
    pub probes: u64,
}

/// Queries every length-`(d - 1)` binary prefix in lexicographic order until
/// the oracle completes one to an even-parity string.
pub fn sequential_secret_search(oracle: &dyn Oracle, d: usize) -> Result<SecretSearch, OracleError> {
    let width = d - 1;
    let mut prefix: Vec<TokenId> = vec![0; width];
    for index in 0..1u64 << width {
        for (i, bit) in prefix.iter_mut().enumerate() {
            *bit = ((index >> (width - 1 - i)) & 1) as TokenId;
        }
        let last = oracle.query(&prefix)?.argmax() as u64;
        if (bit_sum(&prefix) + last) % 2 == 0 {
            return Ok(SecretSearch { secret: Some(TokenString::from(prefix)), probes: index + 1 });
        }
    }
    Ok(SecretSearch { secret: None, probes: 1 << width })
}

/// Knapsack weights `X_1..X_D` and target `c`; a binary string `a` is a
/// solution when `Σ a_i X_i = c`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnapsackInstance {
    pub weights: Vec<u64>,
    pub target: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden: Option<TokenString>,
}

impl KnapsackInstance {
    pub fn new(weights: Vec<u64>, target: u64) -> Result<Self, TaskError> {
        if let Some(&w) = weights.iter().find(|&&w| w > MAX_KNAPSACK_WEIGHT) {
            return Err(TaskError::WeightTooLarge(w));
        }
        Ok(Self { weights, target, hidden: None })
    }

    pub fn d(&self) -> usize {
        self.weights.len()
    }

    pub fn total_weight(&self) -> u64 {
        self.weights.iter().sum()
    }

    fn weighted_sum(&self, s: &[TokenId]) -> Option<u64> {
        let mut sum = 0u64;
        for (&bit, &w) in s.iter().zip(&self.weights) {
            match bit {
                0 => {}
                1 => sum += w,
                _ => return None,
            }
        }
        Some(sum)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceRecord {
    d: usize,
    weights: Vec<u64>,
    target: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hidden: Option<TokenString>,
}

impl KnapsackInstance {
    /// One-line JSON record `{"d", "weights", "target", "hidden"?}`.
    pub fn to_record(&self) -> String {
        let rec = InstanceRecord {
            d: self.d(),
            weights: self.weights.clone(),
            target: self.target,
            hidden: self.hidden.clone(),
        };
        serde_json::to_string(&rec).expect("record serializes")
    }

    pub fn from_record(line: &str) -> Result<Self, TaskError> {
        let rec: InstanceRecord = serde_json::from_str(line)
            .map_err(|e| TaskError::InvalidParameter { name: "record", detail: e.to_string() })?;
        if rec.d != rec.weights.len() {
            return Err(TaskError::InvalidParameter {
                name: "d",
                detail: format!("d = {} but {} weights", rec.d, rec.weights.len()),
            });
        }
        let mut inst = Self::new(rec.weights, rec.target)?;
        inst.hidden = rec.hidden;
        Ok(inst)
    }
}

pub fn knapsack_membership(s: &[TokenId], inst: &KnapsackInstance) -> bool {
    s.len() == inst.d() && inst.weighted_sum(s) == Some(inst.target)
}

/// Prefix completability for a knapsack instance via a memoized subset-sum
/// table keyed by `(position, residual target)`.
///
/// The memo is internally synchronized, so one solver can be shared across
/// worker threads.
pub struct KnapsackSolver {
    instance: KnapsackInstance,
    suffix_total: Vec<u64>,
    memo: DashMap<(usize, u64), bool>,
}

impl KnapsackSolver {
    pub fn new(instance: KnapsackInstance) -> Self {
        let mut suffix_total = vec![0u64; instance.d() + 1];
        for i in (0..instance.d()).rev() {
            suffix_total[i] = suffix_total[i + 1] + instance.weights[i];
        }
        Self { instance, suffix_total, memo: DashMap::new() }
    }

    pub fn instance(&self) -> &KnapsackInstance {
        &self.instance
    }

    pub fn is_member(&self, s: &[TokenId]) -> bool {
        knapsack_membership(s, &self.instance)
    }

    /// Whether some binary suffix completes `prefix` to a solution.
    pub fn completable(&self, prefix: &[TokenId]) -> bool {
        if prefix.len() > self.instance.d() {
            return false;
        }
        match self.instance.weighted_sum(prefix) {
            Some(sum) if sum <= self.instance.target => {
                self.feasible(prefix.len(), self.instance.target - sum)
            }
            _ => false,
        }
    }

    fn feasible(&self, pos: usize, residual: u64) -> bool {
        if residual == 0 {
            return true;
        }
        if pos == self.instance.d() || residual > self.suffix_total[pos] {
            return false;
        }
        if let Some(hit) = self.memo.get(&(pos, residual)) {
            return *hit;
        }
        let w = self.instance.weights[pos];
        let ok = self.feasible(pos + 1, residual) || (w <= residual && self.feasible(pos + 1, residual - w));
        self.memo.insert((pos, residual), ok);
        ok
    }
}

impl fmt::Debug for KnapsackSolver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KnapsackSolver")
            .field("instance", &self.instance)
            .field("memo_entries", &self.memo.len())
            .finish()
    }
}

/// One-shot completability check; builds a fresh table.
pub fn knapsack_completable(prefix: &[TokenId], inst: &KnapsackInstance) -> bool {
    KnapsackSolver::new(inst.clone()).completable(prefix)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    /// Each weight at least the sum of all earlier ones.
    Superincreasing,
    /// Independent uniform weights in `1..=max_weight`.
    UniformRandom,
}

/// Random instance with a planted solution: the target is the weighted sum of
/// a uniformly random hidden assignment.
pub fn gen_knapsack_instance(
    d: usize,
    mode: WeightMode,
    max_weight: u64,
    rng: &mut RandomStream,
) -> Result<KnapsackInstance, TaskError> {
    if d < 1 {
        return Err(TaskError::InvalidParameter { name: "D", detail: "must be at least 1".into() });
    }
    if max_weight < 1 || max_weight > MAX_KNAPSACK_WEIGHT {
        return Err(TaskError::WeightTooLarge(max_weight));
    }
    let weights = match mode {
        WeightMode::UniformRandom => (0..d).map(|_| rng.range_inclusive(1, max_weight)).collect(),
        WeightMode::Superincreasing => {
            let mut weights = Vec::with_capacity(d);
            let mut sum = 0u64;
            for _ in 0..d {
                let lo = sum.max(1);
                let hi = (2 * sum).max(2).min(max_weight);
                if lo > max_weight {
                    return Err(TaskError::InvalidParameter {
                        name: "max_weight",
                        detail: format!("{max_weight} too small for {d} superincreasing weights"),
                    });
                }
                let w = rng.range_inclusive(lo, hi.max(lo));
                weights.push(w);
                sum += w;
            }
            weights
        }
    };
    let hidden: TokenString = (0..d).map(|_| rng.below(2) as TokenId).collect();
    let mut inst = KnapsackInstance::new(weights, 0)?;
    inst.target = inst.weighted_sum(&hidden).expect("binary assignment");
    inst.hidden = Some(hidden);
    Ok(inst)
}

/// A target set `A ⊆ Σ^D` given by a length-strict membership predicate.
#[derive(Clone)]
pub struct ConstraintSet {
    membership: Arc<dyn Fn(&[TokenId]) -> bool + Send + Sync>,
    d: usize,
    descriptor: String,
}

impl ConstraintSet {
    pub fn new(
        d: usize,
        descriptor: impl Into<String>,
        membership: impl Fn(&[TokenId]) -> bool + Send + Sync + 'static,
    ) -> Self {
        Self { membership: Arc::new(membership), d, descriptor: descriptor.into() }
    }

    pub fn contains(&self, s: &[TokenId]) -> bool {
        s.len() == self.d && (self.membership)(s)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    /// `A = {0^D}`.
    pub fn all_zeros(d: usize) -> Self {
        Self::new(d, format!("zeros(D={d})"), |s| s.iter().all(|&t| t == 0))
    }

    /// `A = {s : some s_i = 0}`.
    pub fn has_zero(d: usize) -> Self {
        Self::new(d, format!("has-zero(D={d})"), |s| s.contains(&0))
    }

    /// `A = Σ^D` over an alphabet of `vocab_size` symbols.
    pub fn everything(d: usize, vocab_size: usize) -> Self {
        Self::new(d, format!("all(D={d})"), move |s| s.iter().all(|&t| (t as usize) < vocab_size))
    }

    pub fn parity(d: usize) -> Self {
        Self::new(d, format!("even-parity(D={d})"), move |s| parity_membership(s, d))
    }

    pub fn knapsack(inst: KnapsackInstance) -> Self {
        let d = inst.d();
        Self::new(d, format!("knapsack(D={d}, c={})", inst.target), move |s| {
            knapsack_membership(s, &inst)
        })
    }
}

impl fmt::Debug for ConstraintSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConstraintSet").field("d", &self.d).field("descriptor", &self.descriptor).finish()
    }
}

/// Completability for `A = {0^D}`.
pub fn all_zeros_completable(prefix: &[TokenId], d: usize) -> bool {
    prefix.len() <= d && prefix.iter().all(|&t| t == 0)
}

/// Completability for `A = {s : some s_i = 0}`.
pub fn has_zero_completable(prefix: &[TokenId], d: usize) -> bool {
    prefix.len() < d || (prefix.len() == d && prefix.contains(&0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(bits: &str) -> TokenString {
        bits.chars().map(|c| c.to_digit(2).unwrap() as TokenId).collect()
    }

    fn spec() -> ParityOracleSpec {
        ParityOracleSpec::new(4, ts("101")).unwrap()
    }

    #[test]
    fn uniform_examples() {
        assert_eq!(uniform_next_dist(&[], 2).probs(), &[0.5, 0.5]);
        assert_eq!(uniform_next_dist(&[1, 0, 1], 4).probs(), &[0.25; 4]);
        assert_eq!(uniform_next_dist(&[1], 2), uniform_next_dist(&[0, 0, 0], 2));
    }

    #[test]
    fn secret_search_finds_secret() {
        let secret = ts("0110");
        let oracle = ParityOracle { spec: ParityOracleSpec::new(5, secret.clone()).unwrap() };
        let found = sequential_secret_search(&oracle, 5).unwrap();
        assert_eq!(found.secret, Some(secret));
        assert_eq!(found.probes, 0b0110 + 1);
    }

    #[test]
    fn parity_examples() {
        assert_eq!(parity_next_dist(&ts("10"), &spec()).unwrap().probs(), &[0.5, 0.5]);
        assert_eq!(parity_next_dist(&ts("100"), &spec()).unwrap().probs(), &[1.0, 0.0]);
        assert_eq!(parity_next_dist(&ts("101"), &spec()).unwrap().probs(), &[1.0, 0.0]);
        assert_eq!(parity_next_dist(&ts("111"), &spec()).unwrap().probs(), &[1.0, 0.0]);
        assert!(matches!(
            parity_next_dist(&ts("1011"), &spec()),
            Err(OracleError::OutOfRange { .. })
        ));
        assert!(ParityOracleSpec::new(4, ts("10")).is_err());
        assert!(ParityOracleSpec::new(3, TokenString::from([0, 2])).is_err());
    }

    #[test]
    fn parity_membership_examples() {
        assert!(parity_membership(&ts("0000"), 4));
        assert!(!parity_membership(&ts("1000"), 4));
        assert!(parity_membership(&ts("1010"), 4));
        assert!(!parity_membership(&ts("10"), 4));
    }

    fn example() -> KnapsackInstance {
        KnapsackInstance::new(vec![1, 2, 4], 5).unwrap()
    }

    #[test]
    fn knapsack_examples() {
        let inst = example();
        assert!(knapsack_membership(&ts("101"), &inst));
        assert!(!knapsack_membership(&ts("111"), &inst));
        assert!(!knapsack_membership(&ts("10"), &inst));
        let zero = KnapsackInstance::new(vec![1, 2, 4], 0).unwrap();
        assert!(knapsack_membership(&ts("000"), &zero));
        assert!(knapsack_completable(&ts("1"), &inst));
        assert!(!knapsack_completable(&ts("11"), &inst));
        assert!(knapsack_completable(&ts(""), &inst));
        for s in ["000", "001", "010", "011", "100", "101", "110", "111"] {
            assert_eq!(knapsack_completable(&ts(s), &inst), knapsack_membership(&ts(s), &inst));
        }
        assert!(!knapsack_completable(&ts("1010"), &inst));
        assert!(KnapsackInstance::new(vec![MAX_KNAPSACK_WEIGHT + 1], 0).is_err());
    }

    #[test]
    fn infeasible_target_is_not_completable() {
        let inst = KnapsackInstance::new(vec![1, 2, 4], 8).unwrap();
        assert!(!knapsack_completable(&[], &inst));
    }

    #[test]
    fn superincreasing_generation() {
        let mut rng = RandomStream::new(1, 0);
        let inst = gen_knapsack_instance(4, WeightMode::Superincreasing, 1 << 10, &mut rng).unwrap();
        let mut sum = 0;
        for &w in &inst.weights {
            assert!(w >= sum.max(1));
            sum += w;
        }
        assert!(knapsack_completable(&[], &inst));
        assert!(knapsack_membership(inst.hidden.as_ref().unwrap(), &inst));
        assert!(gen_knapsack_instance(40, WeightMode::Superincreasing, 1 << 10, &mut rng).is_err());
    }

    #[test]
    fn planted_instances_are_feasible() {
        let mut rng = RandomStream::new(2, 0);
        for _ in 0..50 {
            let inst = gen_knapsack_instance(12, WeightMode::UniformRandom, 1 << 10, &mut rng).unwrap();
            assert!(knapsack_completable(&[], &inst));
            if inst.hidden.as_ref().unwrap().iter().all(|&b| b == 0) {
                assert_eq!(inst.target, 0);
            }
        }
    }

    #[test]
    fn record_round_trip() {
        let mut rng = RandomStream::new(3, 0);
        let inst = gen_knapsack_instance(6, WeightMode::UniformRandom, 100, &mut rng).unwrap();
        let line = inst.to_record();
        assert_eq!(KnapsackInstance::from_record(&line).unwrap(), inst);
        let bare = KnapsackInstance::new(vec![3, 5], 5).unwrap();
        assert_eq!(bare.to_record(), r#"{"d":2,"weights":[3,5],"target":5}"#);
        assert_eq!(KnapsackInstance::from_record(&bare.to_record()).unwrap(), bare);
        assert!(KnapsackInstance::from_record(r#"{"d":3,"weights":[3,5],"target":5}"#).is_err());
    }

    #[test]
    fn constraint_sets_are_length_strict() {
        let sets = [
            ConstraintSet::all_zeros(3),
            ConstraintSet::has_zero(3),
            ConstraintSet::everything(3, 2),
            ConstraintSet::parity(3),
            ConstraintSet::knapsack(KnapsackInstance::new(vec![1, 1, 1], 0).unwrap()),
        ];
        for set in &sets {
            assert!(!set.contains(&[0, 0]));
            assert!(!set.contains(&[0, 0, 0, 0]));
            assert!(set.contains(&[0, 0, 0]), "{}", set.descriptor());
        }
    }
}
