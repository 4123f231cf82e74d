// Copyright 2026 The btlab Authors
// SPDX-License-Identifier: Apache-2.0

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{ModelError, RandomStream};

/// Normalization slack for distributions produced inside the crate.
pub const INTERNAL_TOLERANCE: f64 = 1e-9;
/// Normalization slack accepted from external sources; larger deviations are rejected.
pub const BOUNDARY_TOLERANCE: f64 = 1e-6;

/// A probability vector indexed by vocabulary position.
///
/// Construction validates non-negativity and normalization (within
/// [`BOUNDARY_TOLERANCE`]) and renormalizes, so every value of this type sums
/// to one within [`INTERNAL_TOLERANCE`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct NextTokenDistribution {
    probs: Vec<f64>,
}

impl NextTokenDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self, ModelError> {
        Self::with_tolerance(probs, BOUNDARY_TOLERANCE)
    }

    pub fn with_tolerance(mut probs: Vec<f64>, tolerance: f64) -> Result<Self, ModelError> {
        if probs.is_empty() {
            return Err(ModelError::EmptyDistribution);
        }
        for (index, &value) in probs.iter().enumerate() {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(ModelError::NegativeProbability { index, value });
            }
        }
        let sum: f64 = probs.iter().sum();
        if !((sum - 1.0).abs() <= tolerance) {
            return Err(ModelError::InvalidDistribution { sum, tolerance });
        }
        if sum != 1.0 {
            probs.iter_mut().for_each(|p| *p /= sum);
        }
        Ok(Self { probs })
    }

    /// Normalizes non-negative weights. Fails if all weights are zero.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self, ModelError> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(ModelError::InvalidDistribution { sum, tolerance: 0.0 });
        }
        Self::with_tolerance(weights.into_iter().map(|w| w / sum).collect(), INTERNAL_TOLERANCE)
    }

    pub fn uniform(size: usize) -> Self {
        assert!(size > 0, "uniform distribution over an empty vocabulary");
        Self { probs: vec![1.0 / size as f64; size] }
    }

    pub fn point_mass(size: usize, index: usize) -> Self {
        assert!(index < size, "point mass index {index} out of range {size}");
        let mut probs = vec![0.0; size];
        probs[index] = 1.0;
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, index: usize) -> f64 {
        self.probs.get(index).copied().unwrap_or(0.0)
    }

    /// Index of the largest probability; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate().skip(1) {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    /// Draws an index by inverting the cumulative distribution at one uniform draw.
    pub fn sample(&self, rng: &mut RandomStream) -> usize {
        let u = rng.uniform_f64();
        let mut cumulative = 0.0;
        let mut last_positive = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                cumulative += p;
                last_positive = i;
                if u < cumulative {
                    return i;
                }
            }
        }
        // u landed in the rounding gap above the accumulated mass
        last_positive
    }

    /// Keeps the smallest highest-probability set whose mass reaches `top_p`.
    pub fn truncate_top_p(&self, top_p: f64) -> Result<Self, ModelError> {
        if !(top_p > 0.0 && top_p <= 1.0) {
            return Err(ModelError::InvalidParameter { name: "top_p", value: top_p });
        }
        if top_p == 1.0 {
            return Ok(self.clone());
        }
        let mut order: Vec<usize> = (0..self.probs.len()).collect();
        // stable sort keeps ascending index among equal probabilities
        order.sort_by(|&a, &b| {
            self.probs[b].partial_cmp(&self.probs[a]).unwrap_or(Ordering::Equal)
        });
        let mut kept = vec![0.0; self.probs.len()];
        let mut mass = 0.0;
        for &i in &order {
            kept[i] = self.probs[i];
            mass += self.probs[i];
            if mass + INTERNAL_TOLERANCE >= top_p {
                break;
            }
        }
        Self::from_weights(kept)
    }

    /// Rescales each entry to `p^(1/T)` and renormalizes.
    pub fn apply_temperature(&self, temperature: f64) -> Result<Self, ModelError> {
        if !(temperature > 0.0) || !temperature.is_finite() {
            return Err(ModelError::InvalidParameter { name: "temperature", value: temperature });
        }
        if temperature == 1.0 {
            return Ok(self.clone());
        }
        // log space keeps tiny temperatures from underflowing every entry
        let max_log = self.probs[self.argmax()].ln();
        let weights: Vec<f64> = self
            .probs
            .iter()
            .map(|&p| if p > 0.0 { ((p.ln() - max_log) / temperature).exp() } else { 0.0 })
            .collect();
        Self::from_weights(weights)
    }

    /// `(1 - lambda) * self + lambda * other`.
    pub fn mix(&self, other: &Self, lambda: f64) -> Self {
        assert_eq!(self.len(), other.len(), "mixing distributions of different sizes");
        let probs = self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (1.0 - lambda) * a + lambda * b)
            .collect();
        Self::from_weights(probs).expect("mixture of distributions is normalizable")
    }
}

impl TryFrom<Vec<f64>> for NextTokenDistribution {
    type Error = ModelError;

    fn try_from(probs: Vec<f64>) -> Result<Self, ModelError> {
        Self::new(probs)
    }
}

impl From<NextTokenDistribution> for Vec<f64> {
    fn from(d: NextTokenDistribution) -> Vec<f64> {
        d.probs
    }
}

pub fn sample_token(dist: &NextTokenDistribution, rng: &mut RandomStream) -> usize {
    dist.sample(rng)
}

pub fn argmax_token(dist: &NextTokenDistribution) -> usize {
    dist.argmax()
}

pub fn truncate_top_p(
    dist: &NextTokenDistribution,
    top_p: f64,
) -> Result<NextTokenDistribution, ModelError> {
    dist.truncate_top_p(top_p)
}

pub fn apply_temperature(
    dist: &NextTokenDistribution,
    temperature: f64,
) -> Result<NextTokenDistribution, ModelError> {
    dist.apply_temperature(temperature)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dist(p: &[f64]) -> NextTokenDistribution {
        NextTokenDistribution::new(p.to_vec()).unwrap()
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn rejects_unnormalized_and_negative() {
        assert!(matches!(
            NextTokenDistribution::new(vec![0.5, 0.3]),
            Err(ModelError::InvalidDistribution { .. })
        ));
        assert!(matches!(
            NextTokenDistribution::new(vec![1.5, -0.5]),
            Err(ModelError::NegativeProbability { .. })
        ));
        assert!(NextTokenDistribution::new(vec![f64::NAN, 1.0]).is_err());
        // within boundary tolerance: repaired
        let d = NextTokenDistribution::new(vec![0.5 + 4e-7, 0.5]).unwrap();
        assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn point_mass_sampling() {
        let mut rng = RandomStream::new(1, 0);
        let d = dist(&[1.0, 0.0]);
        for _ in 0..1000 {
            assert_eq!(sample_token(&d, &mut rng), 0);
        }
    }

    fn frequency_of_zero(p: &[f64], n: usize, seed: u64) -> f64 {
        let d = dist(p);
        let mut rng = RandomStream::new(seed, 0);
        (0..n).filter(|_| sample_token(&d, &mut rng) == 0).count() as f64 / n as f64
    }

    #[test]
    fn sampling_frequencies() {
        assert!((frequency_of_zero(&[0.5, 0.5], 100_000, 7) - 0.5).abs() < 0.01);
        assert!((frequency_of_zero(&[0.2, 0.8], 100_000, 8) - 0.2).abs() < 0.01);
    }

    #[test]
    fn argmax_examples() {
        assert_eq!(argmax_token(&dist(&[0.1, 0.7, 0.2])), 1);
        assert_eq!(argmax_token(&dist(&[0.5, 0.5])), 0);
        assert_eq!(argmax_token(&dist(&[0.25; 4])), 0);
    }

    #[test]
    fn top_p_examples() {
        let d = dist(&[0.6, 0.3, 0.1]);
        assert_close(truncate_top_p(&d, 0.9).unwrap().probs(), &[2.0 / 3.0, 1.0 / 3.0, 0.0], 1e-12);
        assert_close(truncate_top_p(&d, 0.5).unwrap().probs(), &[1.0, 0.0, 0.0], 1e-12);
        assert_eq!(truncate_top_p(&d, 1.0).unwrap(), d);
        assert!(truncate_top_p(&d, 0.0).is_err());
        assert!(truncate_top_p(&d, 1.5).is_err());
    }

    #[test]
    fn top_p_ties_prefer_lower_index() {
        let d = dist(&[0.25, 0.25, 0.25, 0.25]);
        assert_close(truncate_top_p(&d, 0.5).unwrap().probs(), &[0.5, 0.5, 0.0, 0.0], 1e-12);
    }

    #[test]
    fn temperature_examples() {
        let d = dist(&[0.5, 0.5]);
        assert_close(apply_temperature(&d, 0.2).unwrap().probs(), &[0.5, 0.5], 1e-12);
        let d = dist(&[0.8, 0.2]);
        assert_eq!(apply_temperature(&d, 1.0).unwrap(), d);
        let sharp = apply_temperature(&d, 0.5).unwrap();
        let expected = 0.64 / (0.64 + 0.04);
        assert_close(sharp.probs(), &[expected, 1.0 - expected], 1e-12);
        assert!((sharp.prob(0) - 0.941).abs() < 1e-3);
        assert!(apply_temperature(&d, 0.0).is_err());
        assert!(apply_temperature(&d, -1.0).is_err());
        let cold = apply_temperature(&dist(&[0.3, 0.4, 0.3]), 1e-3).unwrap();
        assert_close(cold.probs(), &[0.0, 1.0, 0.0], 1e-12);
    }

    // The usual nucleus rule is not idempotent in general: after
    // renormalizing, a strict subset of the kept tokens can reach `top_p`.
    #[test]
    fn top_p_second_pass_can_shrink_support() {
        let d = dist(&[0.4, 0.3, 0.3]);
        let once = truncate_top_p(&d, 0.5).unwrap();
        assert_close(once.probs(), &[4.0 / 7.0, 3.0 / 7.0, 0.0], 1e-12);
        let twice = truncate_top_p(&once, 0.5).unwrap();
        assert_close(twice.probs(), &[1.0, 0.0, 0.0], 1e-12);
    }

    fn arb_dist() -> impl Strategy<Value = NextTokenDistribution> {
        prop::collection::vec(0.0f64..1.0, 2..12).prop_filter_map("all zero", |w| {
            NextTokenDistribution::from_weights(w).ok()
        })
    }

    fn normalized(d: &NextTokenDistribution) -> bool {
        (d.probs().iter().sum::<f64>() - 1.0).abs() <= INTERNAL_TOLERANCE
            && d.probs().iter().all(|&p| p >= 0.0)
    }

    proptest! {
        #[test]
        fn transforms_stay_normalized(d in arb_dist(), top_p in 0.01f64..=1.0, t in 0.05f64..20.0) {
            prop_assert!(normalized(&d));
            prop_assert!(normalized(&d.truncate_top_p(top_p).unwrap()));
            prop_assert!(normalized(&d.apply_temperature(t).unwrap()));
        }

        #[test]
        fn identities_are_exact(d in arb_dist()) {
            prop_assert_eq!(d.truncate_top_p(1.0).unwrap(), d.clone());
            prop_assert_eq!(d.apply_temperature(1.0).unwrap(), d);
        }

        #[test]
        fn argmax_survives_temperature(d in arb_dist(), t in 0.05f64..20.0) {
            prop_assert_eq!(d.apply_temperature(t).unwrap().argmax(), d.argmax());
        }

        // A second pass never grows the support, keeps the argmax, and is the
        // identity once the kept set is a single token or covers all mass.
        #[test]
        fn top_p_second_pass_is_contractive(d in arb_dist(), top_p in 0.01f64..=1.0) {
            let once = d.truncate_top_p(top_p).unwrap();
            let twice = once.truncate_top_p(top_p).unwrap();
            for (a, b) in once.probs().iter().zip(twice.probs()) {
                prop_assert!(*a > 0.0 || *b == 0.0);
            }
            prop_assert_eq!(twice.argmax(), d.argmax());
            let support = once.probs().iter().filter(|&&p| p > 0.0).count();
            if support == 1 {
                prop_assert_eq!(twice, once);
            }
        }
    }
}
