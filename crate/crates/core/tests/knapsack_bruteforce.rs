// Copyright 2026 The btlab Authors
// SPDX-License-Identifier: Apache-2.0

use std::collections::HashSet;

use btlab_core::model::AcceptAll;
use btlab_core::samplers::{tokenwise_rejection_sample, CapPolicy};
use btlab_core::tasks::{
    gen_knapsack_instance, knapsack_completable, knapsack_membership, KnapsackInstance, KnapsackSolver,
    UniformOracle, WeightMode,
};
use btlab_core::verifiers::perfect_process_verifier;
use btlab_core::{RandomStream, TokenId};
use proptest::prelude::*;

// Every prefix of every solution, found by enumerating all 2^D assignments.
fn completable_prefixes(inst: &KnapsackInstance) -> HashSet<Vec<TokenId>> {
    let d = inst.weights.len();
    let mut out = HashSet::new();
    for code in 0u64..1 << d {
        let s: Vec<TokenId> = (0..d).map(|i| ((code >> (d - 1 - i)) & 1) as TokenId).collect();
        let sum: u64 = s.iter().zip(&inst.weights).map(|(&b, &w)| u64::from(b) * w).sum();
        if sum == inst.target {
            for len in 0..=d {
                out.insert(s[..len].to_vec());
            }
        }
    }
    out
}

fn check_all_prefixes(inst: &KnapsackInstance) {
    let d = inst.weights.len();
    let truth = completable_prefixes(inst);
    let solver = KnapsackSolver::new(inst.clone());
    for len in 0..=d {
        for code in 0u64..1 << len {
            let p: Vec<TokenId> = (0..len).map(|i| ((code >> (len - 1 - i)) & 1) as TokenId).collect();
            assert_eq!(solver.completable(&p), truth.contains(&p), "{inst:?} {p:?}");
        }
    }
}

#[test]
fn completable_matches_enumeration_on_random_instances() {
    let mut rng = RandomStream::new(2026, 0);
    for i in 0..20 {
        let d = 8 + (i % 9);
        let mode = if i % 2 == 0 { WeightMode::UniformRandom } else { WeightMode::Superincreasing };
        let max_w = if mode == WeightMode::Superincreasing { 1 << 20 } else { 1 << 10 };
        let inst = gen_knapsack_instance(d, mode, max_w, &mut rng).unwrap();
        check_all_prefixes(&inst);
    }
}

#[test]
fn unplanted_targets_match_enumeration() {
    let mut rng = RandomStream::new(7, 0);
    for _ in 0..10 {
        let weights: Vec<u64> = (0..10).map(|_| rng.range_inclusive(1, 40)).collect();
        let target = rng.range_inclusive(0, 200);
        check_all_prefixes(&KnapsackInstance::new(weights, target).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tokenwise_with_dp_verifier_reaches_a_solution(seed in any::<u64>(), d in 4usize..=16) {
        let mut rng = RandomStream::new(seed, 0);
        let inst = gen_knapsack_instance(d, WeightMode::UniformRandom, 1 << 10, &mut rng).unwrap();
        prop_assert!(knapsack_completable(&[], &inst));
        let solver = KnapsackSolver::new(inst.clone());
        let verifier = perfect_process_verifier("knapsack", move |s| solver.completable(s));
        let t = tokenwise_rejection_sample(&[], &UniformOracle::binary(), &verifier, d, CapPolicy::default(), &mut rng)
            .unwrap();
        prop_assert!(t.is_success());
        prop_assert!(knapsack_membership(&t.output, &inst));
        // the membership-only verifier accepts any string
        let any = tokenwise_rejection_sample(&[], &UniformOracle::binary(), &AcceptAll, d, CapPolicy::default(), &mut rng)
            .unwrap();
        prop_assert_eq!(any.oracle_calls, d as u64);
    }
}
