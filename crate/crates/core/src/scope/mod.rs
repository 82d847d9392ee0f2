//! Substring-constrained scope localization.
//!
//! While a scope is being emitted, every partial scope must stay a contiguous
//! substring of the reference buffer. [`ConstraintState`] tracks the partial
//! scope and answers which tokens may come next; [`ConstraintState::close`]
//! resolves the final span to its right-most occurrence.
//!
//! Indexing is 0-based and occurrences are identified by their exclusive end
//! index `j`, so `buffer[j - |s| .. j] == s` and `buffer[j]` is the token
//! that would extend the match.

mod automaton;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use automaton::SubstringIndex;

use crate::token::Token;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScopeError {
    #[error("cannot localize a scope in an empty buffer")]
    EmptyBuffer,
    #[error("token {token:?} does not extend any match of the partial scope")]
    InvalidContinuation { token: Token },
    #[error("scope is empty")]
    EmptySpan,
    #[error("sequence does not occur in the buffer")]
    NotASubstring,
    #[error("substring index covers {index} tokens but the buffer has {buffer}")]
    IndexMismatch { index: usize, buffer: usize },
}

/// Which match-tracking structure backs a [`ConstraintState`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    /// Explicit list of match end positions, `O(|ends|)` per step.
    PositionList,
    /// Suffix automaton, `O(log σ)` per step after an `O(n)` build.
    #[default]
    SubstringIndex,
}

impl FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "position-list" => Ok(Backend::PositionList),
            "substring-index" => Ok(Backend::SubstringIndex),
            other => Err(format!(
                "unknown backend `{other}` (position-list|substring-index)"
            )),
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::PositionList => "position-list",
            Backend::SubstringIndex => "substring-index",
        })
    }
}

/// The dynamic mask for the next scope token.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidSet {
    pub continuations: BTreeSet<Token>,
    pub closure_allowed: bool,
}

/// End positions where the partial scope currently matches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchSet {
    pub buffer_len: usize,
    pub ends: Vec<usize>,
    pub span_len: usize,
}

/// A finalized scope and its target window `[start, end)` in the buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalizedSpan {
    pub span: Vec<Token>,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone)]
enum Cursor {
    /// `None` before the first token: every position is a candidate start.
    Positions(Option<Arc<[usize]>>),
    Index {
        index: Arc<SubstringIndex>,
        state: u32,
    },
}

/// Value-semantics localization state. [`advance`](Self::advance) returns a
/// new state and leaves `self` untouched.
#[derive(Debug, Clone)]
pub struct ConstraintState {
    buffer: Arc<[Token]>,
    span: Vec<Token>,
    cursor: Cursor,
}

/// Extends every match in `ends` by `token`. `None` means the empty scope,
/// which matches at every end index `0..n`.
fn step_ends(buffer: &[Token], ends: Option<&[usize]>, token: &Token) -> Vec<usize> {
    match ends {
        None => (0..buffer.len())
            .filter(|&j| buffer[j] == *token)
            .map(|j| j + 1)
            .collect(),
        Some(ends) => ends
            .iter()
            .filter(|&&j| j < buffer.len() && buffer[j] == *token)
            .map(|&j| j + 1)
            .collect(),
    }
}

/// Right-most window of `span` in `buffer`, using the same match-set steps
/// as the position-list backend. The renderer splices through this.
pub fn locate_rightmost(buffer: &[Token], span: &[Token]) -> Result<LocalizedSpan, ScopeError> {
    if span.is_empty() {
        return Err(ScopeError::EmptySpan);
    }
    if buffer.is_empty() {
        return Err(ScopeError::EmptyBuffer);
    }
    let mut ends = step_ends(buffer, None, &span[0]);
    for token in &span[1..] {
        if ends.is_empty() {
            break;
        }
        ends = step_ends(buffer, Some(&ends), token);
    }
    let end = *ends.last().ok_or(ScopeError::NotASubstring)?;
    Ok(LocalizedSpan {
        span: span.to_vec(),
        start: end - span.len(),
        end,
    })
}

impl ConstraintState {
    pub fn open(buffer: impl Into<Arc<[Token]>>, backend: Backend) -> Result<Self, ScopeError> {
        let buffer: Arc<[Token]> = buffer.into();
        if buffer.is_empty() {
            return Err(ScopeError::EmptyBuffer);
        }
        let cursor = match backend {
            Backend::PositionList => Cursor::Positions(None),
            Backend::SubstringIndex => Cursor::Index {
                index: Arc::new(SubstringIndex::build(&buffer)),
                state: SubstringIndex::ROOT,
            },
        };
        Ok(Self {
            buffer,
            span: Vec::new(),
            cursor,
        })
    }

    /// Opens against a prebuilt index of exactly `buffer`.
    pub fn with_index(
        buffer: impl Into<Arc<[Token]>>,
        index: Arc<SubstringIndex>,
    ) -> Result<Self, ScopeError> {
        let buffer: Arc<[Token]> = buffer.into();
        if buffer.is_empty() {
            return Err(ScopeError::EmptyBuffer);
        }
        if index.len() != buffer.len() {
            return Err(ScopeError::IndexMismatch {
                index: index.len(),
                buffer: buffer.len(),
            });
        }
        Ok(Self {
            buffer,
            span: Vec::new(),
            cursor: Cursor::Index {
                index,
                state: SubstringIndex::ROOT,
            },
        })
    }

    pub fn backend(&self) -> Backend {
        match self.cursor {
            Cursor::Positions(_) => Backend::PositionList,
            Cursor::Index { .. } => Backend::SubstringIndex,
        }
    }

    pub fn buffer(&self) -> &[Token] {
        &self.buffer
    }

    pub fn span(&self) -> &[Token] {
        &self.span
    }

    pub fn span_len(&self) -> usize {
        self.span.len()
    }

    /// True iff `token` extends at least one current match.
    pub fn allows(&self, token: &Token) -> bool {
        match &self.cursor {
            Cursor::Positions(None) => self.buffer.contains(token),
            Cursor::Positions(Some(ends)) => ends
                .iter()
                .any(|&j| j < self.buffer.len() && self.buffer[j] == *token),
            Cursor::Index { index, state } => index.step(*state, token).is_some(),
        }
    }

    pub fn closure_allowed(&self) -> bool {
        !self.span.is_empty()
    }

    pub fn valid_set(&self) -> ValidSet {
        let continuations = match &self.cursor {
            Cursor::Positions(None) => self.buffer.iter().cloned().collect(),
            Cursor::Positions(Some(ends)) => ends
                .iter()
                .filter(|&&j| j < self.buffer.len())
                .map(|&j| self.buffer[j].clone())
                .collect(),
            Cursor::Index { index, state } => index.continuations(*state).cloned().collect(),
        };
        ValidSet {
            continuations,
            closure_allowed: self.closure_allowed(),
        }
    }

    pub fn advance(&self, token: &Token) -> Result<Self, ScopeError> {
        let invalid = || ScopeError::InvalidContinuation {
            token: token.clone(),
        };
        let cursor = match &self.cursor {
            Cursor::Positions(ends) => {
                let next = step_ends(&self.buffer, ends.as_deref(), token);
                if next.is_empty() {
                    return Err(invalid());
                }
                Cursor::Positions(Some(next.into()))
            }
            Cursor::Index { index, state } => {
                let next = index.step(*state, token).ok_or_else(invalid)?;
                Cursor::Index {
                    index: Arc::clone(index),
                    state: next,
                }
            }
        };
        let mut span = Vec::with_capacity(self.span.len() + 1);
        span.extend_from_slice(&self.span);
        span.push(token.clone());
        Ok(Self {
            buffer: Arc::clone(&self.buffer),
            span,
            cursor,
        })
    }

    /// Current match end positions. Cheap for the position-list backend; the
    /// index backend recomputes them from the buffer.
    pub fn match_set(&self) -> MatchSet {
        let ends = match &self.cursor {
            Cursor::Positions(Some(ends)) => ends.to_vec(),
            _ if self.span.is_empty() => (0..=self.buffer.len()).collect(),
            _ => {
                let mut ends = step_ends(&self.buffer, None, &self.span[0]);
                for token in &self.span[1..] {
                    ends = step_ends(&self.buffer, Some(&ends), token);
                }
                ends
            }
        };
        MatchSet {
            buffer_len: self.buffer.len(),
            ends,
            span_len: self.span.len(),
        }
    }

    /// Finalizes the scope at its right-most occurrence `j* = max(ends)`.
    pub fn close(&self) -> Result<LocalizedSpan, ScopeError> {
        if self.span.is_empty() {
            return Err(ScopeError::EmptySpan);
        }
        let end = match &self.cursor {
            Cursor::Positions(Some(ends)) => {
                *ends.last().expect("non-empty after a successful advance")
            }
            Cursor::Positions(None) => unreachable!("span is non-empty"),
            Cursor::Index { index, state } => index.last_end(*state),
        };
        Ok(LocalizedSpan {
            span: self.span.clone(),
            start: end - self.span.len(),
            end,
        })
    }
}

/// Naive reference for the valid set: scan every occurrence of `partial` and
/// collect the token that follows it.
pub fn brute_force_valid_set(buffer: &[Token], partial: &[Token]) -> Result<ValidSet, ScopeError> {
    let n = buffer.len();
    let m = partial.len();
    if m > n {
        return Err(ScopeError::NotASubstring);
    }
    let mut found = false;
    let mut continuations = BTreeSet::new();
    for start in 0..=n - m {
        if buffer[start..start + m] == *partial {
            found = true;
            if start + m < n {
                continuations.insert(buffer[start + m].clone());
            }
        }
    }
    if !found {
        return Err(ScopeError::NotASubstring);
    }
    Ok(ValidSet {
        continuations,
        closure_allowed: m >= 1,
    })
}
