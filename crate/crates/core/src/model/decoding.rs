// Copyright 2026 The btlab Authors
// SPDX-License-Identifier: Apache-2.0

//! Decoding transforms (nucleus truncation, temperature) applied on top of an oracle.

use serde::{Deserialize, Serialize};

use super::{ModelError, NextTokenDistribution, Oracle, OracleError, TokenId};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformOrder {
    #[default]
    TopPThenTemperature,
    TemperatureThenTopP,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecodingTransform {
    #[serde(default = "one")]
    pub top_p: f64,
    #[serde(default = "one")]
    pub temperature: f64,
    #[serde(default)]
    pub order: TransformOrder,
}

fn one() -> f64 {
    1.0
}

impl Default for DecodingTransform {
    fn default() -> Self {
        Self { top_p: 1.0, temperature: 1.0, order: TransformOrder::default() }
    }
}

impl DecodingTransform {
    pub fn nucleus(top_p: f64) -> Self {
        Self { top_p, ..Self::default() }
    }

    pub fn is_identity(&self) -> bool {
        self.top_p == 1.0 && self.temperature == 1.0
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let probe = NextTokenDistribution::uniform(1);
        probe.truncate_top_p(self.top_p)?;
        probe.apply_temperature(self.temperature)?;
        Ok(())
    }

    pub fn apply(&self, dist: &NextTokenDistribution) -> Result<NextTokenDistribution, ModelError> {
        match self.order {
            TransformOrder::TopPThenTemperature => {
                dist.truncate_top_p(self.top_p)?.apply_temperature(self.temperature)
            }
            TransformOrder::TemperatureThenTopP => {
                dist.apply_temperature(self.temperature)?.truncate_top_p(self.top_p)
            }
        }
    }
}

/// An oracle whose every answer passes through a [`DecodingTransform`].
#[derive(Debug, Clone)]
pub struct DecodedOracle<O> {
    base: O,
    transform: DecodingTransform,
}

impl<O: Oracle> DecodedOracle<O> {
    pub fn new(base: O, transform: DecodingTransform) -> Result<Self, ModelError> {
        transform.validate()?;
        Ok(Self { base, transform })
    }
}

impl<O: Oracle> Oracle for DecodedOracle<O> {
    fn vocab_size(&self) -> usize {
        self.base.vocab_size()
    }

    fn query(&self, prefix: &[TokenId]) -> Result<NextTokenDistribution, OracleError> {
        Ok(self.transform.apply(&self.base.query(prefix)?)?)
    }

    fn descriptor(&self) -> String {
        format!(
            "{} | top_p={} T={} {:?}",
            self.base.descriptor(),
            self.transform.top_p,
            self.transform.temperature,
            self.transform.order
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FnOracle;

    fn fixed() -> FnOracle<impl Fn(&[TokenId]) -> Result<NextTokenDistribution, OracleError>> {
        FnOracle::new(3, "fixed", |_: &[TokenId]| Ok(NextTokenDistribution::new(vec![0.6, 0.3, 0.1]).unwrap()))
    }

    #[test]
    fn identity_passes_through() {
        let o = DecodedOracle::new(fixed(), DecodingTransform::default()).unwrap();
        assert_eq!(o.query(&[]).unwrap(), fixed().query(&[]).unwrap());
    }

    #[test]
    fn nucleus_truncates() {
        let o = DecodedOracle::new(fixed(), DecodingTransform::nucleus(0.9)).unwrap();
        let d = o.query(&[1]).unwrap();
        assert!((d.prob(0) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(d.prob(2), 0.0);
    }

    #[test]
    fn order_matters() {
        let a = DecodingTransform { top_p: 0.7, temperature: 3.0, order: TransformOrder::TopPThenTemperature };
        let b = DecodingTransform { order: TransformOrder::TemperatureThenTopP, ..a };
        let d = fixed().query(&[]).unwrap();
        assert_ne!(a.apply(&d).unwrap(), b.apply(&d).unwrap());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(DecodedOracle::new(fixed(), DecodingTransform::nucleus(0.0)).is_err());
        let t = DecodingTransform { temperature: -1.0, ..DecodingTransform::default() };
        assert!(DecodedOracle::new(fixed(), t).is_err());
    }
}
