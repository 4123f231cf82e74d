// Copyright 2026 The btlab Authors
// SPDX-License-Identifier: Apache-2.0

//! Two-bracket Dyck language of fixed even length.
//!
//! Token order is fixed: `[`, `]`, `(`, `)` map to 0, 1, 2, 3.
//!
//! The generative process: at depth 0 open `[` with probability `p` or `(`
//! with `1 - p`; when the depth equals the number of positions left, emit the
//! close matching the innermost open; otherwise open `[` / `(` with `p·q` /
//! `(1-p)·q` or emit the matching close with `1 - q`.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    NextTokenDistribution, Oracle, OracleError, RandomStream, TokenId, TokenString, Vocabulary,
};

pub const OPEN_SQUARE: TokenId = 0;
pub const CLOSE_SQUARE: TokenId = 1;
pub const OPEN_ROUND: TokenId = 2;
pub const CLOSE_ROUND: TokenId = 3;
pub const VOCAB_SIZE: usize = 4;

const SYMBOLS: [char; VOCAB_SIZE] = ['[', ']', '(', ')'];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DyckError {
    #[error("invalid Dyck parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("character {0:?} is not a bracket")]
    BadCharacter(char),
}

/// The four-symbol bracket vocabulary.
pub fn vocabulary() -> Vocabulary {
    Vocabulary::new(SYMBOLS.iter().map(|c| c.to_string()), None).expect("static vocabulary")
}

pub fn is_open(token: TokenId) -> bool {
    token == OPEN_SQUARE || token == OPEN_ROUND
}

/// The close bracket matching an open one.
pub fn matching_close(open: TokenId) -> TokenId {
    open + 1
}

/// Parses bracket text such as `"[()]"`.
pub fn parse(text: &str) -> Result<TokenString, DyckError> {
    text.trim()
        .chars()
        .map(|c| {
            SYMBOLS
                .iter()
                .position(|&s| s == c)
                .map(|i| i as TokenId)
                .ok_or(DyckError::BadCharacter(c))
        })
        .collect()
}

pub fn render(tokens: &[TokenId]) -> String {
    tokens.iter().map(|&t| SYMBOLS.get(t as usize).copied().unwrap_or('?')).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DyckParams {
    /// Target string length.
    pub d: usize,
    /// Square-vs-round bracket probability.
    pub p: f64,
    /// Open-vs-close tendency.
    pub q: f64,
}

impl DyckParams {
    pub fn new(d: usize, p: f64, q: f64) -> Result<Self, DyckError> {
        if d < 2 || d % 2 != 0 {
            return Err(DyckError::InvalidParameter { name: "D", value: d as f64 });
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(DyckError::InvalidParameter { name: "p", value: p });
        }
        if !(q > 0.0 && q < 1.0) {
            return Err(DyckError::InvalidParameter { name: "q", value: q });
        }
        Ok(Self { d, p, q })
    }
}

/// Scan state of a valid prefix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DyckPrefixState {
    pub position: usize,
    pub open_stack: Vec<TokenId>,
}

impl DyckPrefixState {
    pub fn depth(&self) -> usize {
        self.open_stack.len()
    }

    /// Scans a prefix; `None` when some close does not match the innermost open.
    pub fn scan(prefix: &[TokenId]) -> Option<Self> {
        let mut state = Self { position: 0, open_stack: Vec::with_capacity(prefix.len()) };
        for &t in prefix {
            if !state.step(t) {
                return None;
            }
        }
        Some(state)
    }

    fn step(&mut self, token: TokenId) -> bool {
        self.position += 1;
        match token {
            OPEN_SQUARE | OPEN_ROUND => {
                self.open_stack.push(token);
                true
            }
            CLOSE_SQUARE | CLOSE_ROUND => match self.open_stack.last() {
                Some(&open) if matching_close(open) == token => {
                    self.open_stack.pop();
                    true
                }
                _ => false,
            },
            _ => false,
        }
    }
}

/// Depth of a valid prefix, or `None` if the prefix is not a valid Dyck prefix.
pub fn dyck_depth(prefix: &[TokenId]) -> Option<usize> {
    DyckPrefixState::scan(prefix).map(|s| s.depth())
}

pub fn dyck_is_member(s: &[TokenId], d: usize) -> bool {
    s.len() == d && dyck_depth(s) == Some(0)
}

fn fits(depth: usize, len: usize, d: usize) -> bool {
    len <= d && depth <= d - len && (d - len - depth) % 2 == 0
}

/// Whether `prefix` extends to a member of `Dyck_d`.
pub fn dyck_completable(prefix: &[TokenId], d: usize) -> bool {
    match dyck_depth(prefix) {
        Some(depth) => fits(depth, prefix.len(), d),
        None => false,
    }
}

/// Next-token distribution of the Dyck process after `prefix`.
///
/// Errors on prefixes that cannot be completed, and on full-length prefixes,
/// which admit no further token.
pub fn dyck_next_dist(
    prefix: &[TokenId],
    params: &DyckParams,
) -> Result<NextTokenDistribution, OracleError> {
    let d = params.d;
    if prefix.len() >= d {
        return Err(OracleError::OutOfRange { len: prefix.len(), max: d - 1 });
    }
    let state = DyckPrefixState::scan(prefix)
        .filter(|s| fits(s.depth(), prefix.len(), d))
        .ok_or_else(|| OracleError::DeadPrefix { prefix: prefix.to_vec() })?;
    let depth = state.depth();
    let remaining = d - prefix.len();
    let mut probs = [0.0; VOCAB_SIZE];
    match state.open_stack.last() {
        None => {
            probs[OPEN_SQUARE as usize] = params.p;
            probs[OPEN_ROUND as usize] = 1.0 - params.p;
        }
        Some(&open) if depth == remaining => {
            probs[matching_close(open) as usize] = 1.0;
        }
        Some(&open) => {
            probs[OPEN_SQUARE as usize] = params.p * params.q;
            probs[OPEN_ROUND as usize] = (1.0 - params.p) * params.q;
            probs[matching_close(open) as usize] = 1.0 - params.q;
        }
    }
    Ok(NextTokenDistribution::new(probs.to_vec())?)
}

/// The exact autoregressive Dyck oracle.
#[derive(Debug, Clone, Copy)]
pub struct DyckOracle {
    pub params: DyckParams,
}

impl DyckOracle {
    pub fn new(params: DyckParams) -> Self {
        Self { params }
    }
}

impl Oracle for DyckOracle {
    fn vocab_size(&self) -> usize {
        VOCAB_SIZE
    }

    fn query(&self, prefix: &[TokenId]) -> Result<NextTokenDistribution, OracleError> {
        dyck_next_dist(prefix, &self.params)
    }

    fn descriptor(&self) -> String {
        format!("dyck(D={}, p={}, q={})", self.params.d, self.params.p, self.params.q)
    }
}

/// Probability of a full string under the process; zero for non-members.
pub fn dyck_string_prob(s: &[TokenId], params: &DyckParams) -> f64 {
    if !dyck_is_member(s, params.d) {
        return 0.0;
    }
    let mut prob = 1.0;
    for i in 0..s.len() {
        match dyck_next_dist(&s[..i], params) {
            Ok(dist) => prob *= dist.prob(s[i] as usize),
            Err(_) => return 0.0,
        }
    }
    prob
}

fn extend(prefix: &mut TokenString, steps: usize, params: &DyckParams, rng: &mut RandomStream) {
    for _ in 0..steps {
        let dist = dyck_next_dist(prefix, params).expect("process stays completable");
        prefix.push(dist.sample(rng) as TokenId);
    }
}

/// Draws a member of `Dyck_D` from the process.
pub fn dyck_sample(params: &DyckParams, rng: &mut RandomStream) -> TokenString {
    let mut s = TokenString::with_capacity(params.d);
    extend(&mut s, params.d, params, rng);
    s
}

/// Samples `n` prefixes from the process under `params_ood` with lengths
/// uniform over `len_range`.
pub fn dyck_ood_prompts(
    n: usize,
    params_ood: &DyckParams,
    len_range: RangeInclusive<usize>,
    rng: &mut RandomStream,
) -> Result<Vec<TokenString>, DyckError> {
    let (lo, hi) = (*len_range.start(), *len_range.end());
    if lo > hi || hi >= params_ood.d {
        return Err(DyckError::InvalidParameter { name: "len_range", value: hi as f64 });
    }
    let mut prompts = Vec::with_capacity(n);
    while prompts.len() < n {
        let len = rng.range_inclusive(lo as u64, hi as u64) as usize;
        let mut s = TokenString::with_capacity(len);
        extend(&mut s, len, params_ood, rng);
        if dyck_completable(&s, params_ood.d) {
            prompts.push(s);
        }
    }
    Ok(prompts)
}

/// 1-based position of the first token after which `s` can no longer be
/// completed to a member of `Dyck_d`. `None` for members and completable prefixes.
pub fn dyck_first_error(s: &[TokenId], d: usize) -> Option<usize> {
    let mut state = DyckPrefixState { position: 0, open_stack: Vec::new() };
    for (i, &t) in s.iter().enumerate() {
        if !state.step(t) || !fits(state.depth(), i + 1, d) {
            return Some(i + 1);
        }
    }
    None
}

/// How a completed string first went wrong.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DyckErrorKind {
    /// A close bracket of the wrong type for the innermost open.
    MismatchedClose,
    /// A close bracket at depth 0.
    UnmatchedClose,
    /// Too many opens for the positions left.
    Overflow,
    /// String ran past the target length.
    TooLong,
    /// Completable but shorter than the target length.
    TooShort,
}

impl DyckErrorKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::MismatchedClose => "mismatched_close",
            Self::UnmatchedClose => "unmatched_close",
            Self::Overflow => "overflow",
            Self::TooLong => "too_long",
            Self::TooShort => "too_short",
        }
    }
}

/// Classifies the first error of `s`; `None` for members of `Dyck_d`.
pub fn classify_error(s: &[TokenId], d: usize) -> Option<DyckErrorKind> {
    if dyck_is_member(s, d) {
        return None;
    }
    let Some(pos) = dyck_first_error(s, d) else {
        return Some(DyckErrorKind::TooShort);
    };
    if pos > d {
        return Some(DyckErrorKind::TooLong);
    }
    let before = DyckPrefixState::scan(&s[..pos - 1]).expect("prefix before first error is valid");
    let token = s[pos - 1];
    Some(if is_open(token) {
        DyckErrorKind::Overflow
    } else {
        match before.open_stack.last() {
            None => DyckErrorKind::UnmatchedClose,
            Some(&open) if matching_close(open) != token => DyckErrorKind::MismatchedClose,
            // the right close, but it breaks parity or budget
            Some(_) => DyckErrorKind::Overflow,
        }
    })
}
