// Copyright 2026 The btlab Authors
// SPDX-License-Identifier: Apache-2.0

use std::collections::HashSet;
use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Index of a symbol in a [`Vocabulary`].
pub type TokenId = u32;

/// An ordered set of distinct token labels with an optional end-of-sequence symbol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    symbols: Vec<String>,
    eos: Option<TokenId>,
}

impl Vocabulary {
    pub fn new<S: Into<String>>(
        symbols: impl IntoIterator<Item = S>,
        eos: Option<TokenId>,
    ) -> Result<Self, ModelError> {
        let symbols: Vec<String> = symbols.into_iter().map(Into::into).collect();
        if symbols.len() < 2 {
            return Err(ModelError::InvalidVocabulary(format!(
                "need at least 2 symbols, got {}",
                symbols.len()
            )));
        }
        let mut seen = HashSet::new();
        for s in &symbols {
            if !seen.insert(s.as_str()) {
                return Err(ModelError::InvalidVocabulary(format!("duplicate symbol {s:?}")));
            }
        }
        if let Some(e) = eos {
            if e as usize >= symbols.len() {
                return Err(ModelError::InvalidVocabulary(format!(
                    "eos index {e} out of range for {} symbols",
                    symbols.len()
                )));
            }
        }
        Ok(Self { symbols, eos })
    }

    /// The `{0, 1}` alphabet used by the theory environments.
    pub fn binary() -> Self {
        Self::new(["0", "1"], None).expect("static vocabulary")
    }

    pub fn size(&self) -> usize {
        self.symbols.len()
    }

    pub fn eos(&self) -> Option<TokenId> {
        self.eos
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn symbol(&self, token: TokenId) -> Option<&str> {
        self.symbols.get(token as usize).map(String::as_str)
    }

    pub fn index_of(&self, symbol: &str) -> Option<TokenId> {
        self.symbols.iter().position(|s| s == symbol).map(|i| i as TokenId)
    }

    /// Checks that every token of `tokens` indexes this vocabulary.
    pub fn validate(&self, tokens: &[TokenId]) -> Result<(), ModelError> {
        match tokens.iter().find(|&&t| t as usize >= self.size()) {
            Some(&token) => Err(ModelError::TokenOutOfRange { token, size: self.size() }),
            None => Ok(()),
        }
    }

    /// Concatenates symbol labels.
    pub fn render(&self, tokens: &[TokenId]) -> String {
        tokens
            .iter()
            .map(|&t| self.symbol(t).unwrap_or("\u{fffd}"))
            .collect()
    }

    /// Parses text whose symbols are all single characters.
    pub fn parse_chars(&self, text: &str) -> Result<TokenString, ModelError> {
        text.chars()
            .map(|c| {
                let mut buf = [0u8; 4];
                self.index_of(c.encode_utf8(&mut buf)).ok_or_else(|| {
                    ModelError::InvalidVocabulary(format!("symbol {c:?} not in vocabulary"))
                })
            })
            .collect::<Result<Vec<_>, _>>()
            .map(TokenString::from)
    }
}

/// A finite sequence of vocabulary indices.
///
/// Positions used by [`TokenString::slice`] are 1-based and inclusive; a
/// slice whose start exceeds its end is the empty string.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenString(Vec<TokenId>);

impl TokenString {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    pub fn with_capacity(capacity: usize) -> Self {
        Self(Vec::with_capacity(capacity))
    }

    /// `s_{start:end}` with 1-based inclusive bounds, clamped to the string.
    pub fn slice(&self, start: usize, end: usize) -> TokenString {
        let start = start.max(1);
        let end = end.min(self.0.len());
        if start > end {
            return TokenString::new();
        }
        TokenString(self.0[start - 1..end].to_vec())
    }

    pub fn push(&mut self, token: TokenId) {
        self.0.push(token);
    }

    pub fn extend_from_slice(&mut self, tokens: &[TokenId]) {
        self.0.extend_from_slice(tokens);
    }

    pub fn truncate(&mut self, len: usize) {
        self.0.truncate(len);
    }

    pub fn as_slice(&self) -> &[TokenId] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<TokenId> {
        self.0
    }
}

impl Deref for TokenString {
    type Target = [TokenId];

    fn deref(&self) -> &[TokenId] {
        &self.0
    }
}

impl From<Vec<TokenId>> for TokenString {
    fn from(v: Vec<TokenId>) -> Self {
        Self(v)
    }
}

impl From<&[TokenId]> for TokenString {
    fn from(v: &[TokenId]) -> Self {
        Self(v.to_vec())
    }
}

impl<const N: usize> From<[TokenId; N]> for TokenString {
    fn from(v: [TokenId; N]) -> Self {
        Self(v.to_vec())
    }
}

impl FromIterator<TokenId> for TokenString {
    fn from_iter<I: IntoIterator<Item = TokenId>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl fmt::Display for TokenString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

/// `x ∘ y`.
pub fn concat(x: &[TokenId], y: &[TokenId]) -> TokenString {
    let mut out = Vec::with_capacity(x.len() + y.len());
    out.extend_from_slice(x);
    out.extend_from_slice(y);
    TokenString(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn concat_examples() {
        let s = TokenString::from([0, 1, 1]);
        assert_eq!(concat(&[], &s), s);
        assert_eq!(concat(&s, &[]), s);
        assert_eq!(concat(&[0], &[1, 1]), TokenString::from([0, 1, 1]));
    }

    #[test]
    fn slice_follows_empty_convention() {
        let s = TokenString::from([5, 6, 7]);
        assert_eq!(s.slice(1, 2), TokenString::from([5, 6]));
        assert_eq!(s.slice(2, 1), TokenString::new());
        assert_eq!(s.slice(1, 0), TokenString::new());
        assert_eq!(s.slice(3, 3), TokenString::from([7]));
    }

    #[test]
    fn vocabulary_rejects_bad_input() {
        assert!(Vocabulary::new(["a"], None).is_err());
        assert!(Vocabulary::new(["a", "a"], None).is_err());
        assert!(Vocabulary::new(["a", "b"], Some(2)).is_err());
        let v = Vocabulary::new(["a", "b", "<eos>"], Some(2)).unwrap();
        assert_eq!(v.size(), 3);
        assert_eq!(v.eos(), Some(2));
        assert!(v.validate(&[0, 1, 2]).is_ok());
        assert!(v.validate(&[3]).is_err());
    }

    #[test]
    fn render_and_parse() {
        let v = Vocabulary::new(["[", "]", "(", ")"], None).unwrap();
        let s = v.parse_chars("[()]").unwrap();
        assert_eq!(s.as_slice(), &[0, 2, 3, 1]);
        assert_eq!(v.render(&s), "[()]");
        assert!(v.parse_chars("[x").is_err());
    }
}
