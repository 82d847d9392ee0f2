//! The augmented vocabulary, revision episodes, trajectories and the
//! conversion between structured trajectories and flat token streams.
//!
//! A serialized episode is
//!
//! ```text
//! <|backtracking|> <|OLD|> scope… <|/OLD|> <|NEW|> patch… <|/NEW|>
//! ```
//!
//! so every episode costs exactly `|scope| + |patch| + 5` stream tokens.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::token::{tokenize, Profile, Token};

pub const TRIGGER: &str = "<|backtracking|>";
pub const SCOPE_OPEN: &str = "<|OLD|>";
pub const SCOPE_CLOSE: &str = "<|/OLD|>";
pub const PATCH_OPEN: &str = "<|NEW|>";
pub const PATCH_CLOSE: &str = "<|/NEW|>";

/// Accepted on input, never emitted.
pub const ALIASES: [(&str, SentinelKind); 4] = [
    ("<scope>", SentinelKind::ScopeOpen),
    ("</scope>", SentinelKind::ScopeClose),
    ("<patch>", SentinelKind::PatchOpen),
    ("</patch>", SentinelKind::PatchClose),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SentinelKind {
    Trigger,
    ScopeOpen,
    ScopeClose,
    PatchOpen,
    PatchClose,
}

impl fmt::Display for SentinelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            SentinelKind::Trigger => "trigger",
            SentinelKind::ScopeOpen => "scope-open",
            SentinelKind::ScopeClose => "scope-close",
            SentinelKind::PatchOpen => "patch-open",
            SentinelKind::PatchClose => "patch-close",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SentinelError {
    #[error("sentinels `{0}` and `{1}` collide")]
    Duplicate(String, String),
}

/// The five operational tokens, plus the alias spellings accepted on input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentinelSet {
    trigger: Token,
    scope_open: Token,
    scope_close: Token,
    patch_open: Token,
    patch_close: Token,
    aliases: Vec<(Token, SentinelKind)>,
}

impl Default for SentinelSet {
    fn default() -> Self {
        Self::canonical()
    }
}

impl SentinelSet {
    /// `<|backtracking|>`, `<|OLD|>`, `<|/OLD|>`, `<|NEW|>`, `<|/NEW|>`, with the
    /// `<scope>`/`<patch>` aliases.
    pub fn canonical() -> Self {
        let mut set = Self::new(
            TRIGGER.into(),
            SCOPE_OPEN.into(),
            SCOPE_CLOSE.into(),
            PATCH_OPEN.into(),
            PATCH_CLOSE.into(),
        )
        .expect("canonical sentinels are distinct");
        set.aliases = ALIASES.iter().map(|&(s, k)| (Token::from(s), k)).collect();
        set
    }

    /// A custom set without aliases. All five spellings must differ.
    pub fn new(
        trigger: Token,
        scope_open: Token,
        scope_close: Token,
        patch_open: Token,
        patch_close: Token,
    ) -> Result<Self, SentinelError> {
        let all = [
            &trigger,
            &scope_open,
            &scope_close,
            &patch_open,
            &patch_close,
        ];
        for (i, a) in all.iter().enumerate() {
            for b in &all[i + 1..] {
                if a == b {
                    return Err(SentinelError::Duplicate(a.to_string(), b.to_string()));
                }
            }
        }
        Ok(Self {
            trigger,
            scope_open,
            scope_close,
            patch_open,
            patch_close,
            aliases: Vec::new(),
        })
    }

    pub fn get(&self, kind: SentinelKind) -> &Token {
        match kind {
            SentinelKind::Trigger => &self.trigger,
            SentinelKind::ScopeOpen => &self.scope_open,
            SentinelKind::ScopeClose => &self.scope_close,
            SentinelKind::PatchOpen => &self.patch_open,
            SentinelKind::PatchClose => &self.patch_close,
        }
    }

    pub fn trigger(&self) -> &Token {
        &self.trigger
    }

    /// Canonical spelling or alias, mapped to its role.
    pub fn classify(&self, token: &Token) -> Option<SentinelKind> {
        self.spellings()
            .find(|(t, _)| *t == token)
            .map(|(_, kind)| kind)
    }

    pub fn is_sentinel(&self, token: &Token) -> bool {
        self.classify(token).is_some()
    }

    /// Every recognized spelling, canonical ones first.
    pub fn spellings(&self) -> impl Iterator<Item = (&Token, SentinelKind)> {
        [
            (&self.trigger, SentinelKind::Trigger),
            (&self.scope_open, SentinelKind::ScopeOpen),
            (&self.scope_close, SentinelKind::ScopeClose),
            (&self.patch_open, SentinelKind::PatchOpen),
            (&self.patch_close, SentinelKind::PatchClose),
        ]
        .into_iter()
        .chain(self.aliases.iter().map(|(t, k)| (t, *k)))
    }

    /// True if `text` contains any sentinel spelling as a substring. Such text
    /// cannot travel through the trajectory text format unchanged.
    pub fn occurs_in(&self, text: &str) -> bool {
        self.spellings().any(|(t, _)| text.contains(t.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("a revision episode needs a non-empty scope")]
pub struct EmptyScopeError;

/// One in-stream edit: replace the right-most occurrence of `scope` in the
/// visible buffer by `patch`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RevisionEpisode {
    scope: Vec<Token>,
    patch: Vec<Token>,
}

impl RevisionEpisode {
    pub fn new(scope: Vec<Token>, patch: Vec<Token>) -> Result<Self, EmptyScopeError> {
        if scope.is_empty() {
            return Err(EmptyScopeError);
        }
        Ok(Self { scope, patch })
    }

    pub fn scope(&self) -> &[Token] {
        &self.scope
    }

    pub fn patch(&self) -> &[Token] {
        &self.patch
    }

    /// Stream tokens this episode occupies once serialized.
    pub fn serialized_len(&self) -> usize {
        self.scope.len() + self.patch.len() + 5
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Item {
    Code(Token),
    Episode(RevisionEpisode),
}

/// Flat interleaving of code tokens and episodes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Trajectory {
    pub items: Vec<Item>,
}

impl Trajectory {
    pub fn new(items: Vec<Item>) -> Self {
        Self { items }
    }

    pub fn from_code(tokens: impl IntoIterator<Item = Token>) -> Self {
        Self {
            items: tokens.into_iter().map(Item::Code).collect(),
        }
    }

    pub fn episodes(&self) -> impl Iterator<Item = &RevisionEpisode> {
        self.items.iter().filter_map(|item| match item {
            Item::Episode(e) => Some(e),
            Item::Code(_) => None,
        })
    }

    pub fn code_tokens(&self) -> impl Iterator<Item = &Token> {
        self.items.iter().filter_map(|item| match item {
            Item::Code(t) => Some(t),
            Item::Episode(_) => None,
        })
    }

    pub fn code_len(&self) -> usize {
        self.code_tokens().count()
    }

    pub fn episode_count(&self) -> usize {
        self.episodes().count()
    }

    /// `#code + Σ(|s| + |s'| + 5)`.
    pub fn serialized_len(&self) -> usize {
        self.code_len()
            + self
                .episodes()
                .map(RevisionEpisode::serialized_len)
                .sum::<usize>()
    }

    /// Finds the first token (code or episode content) that spells a sentinel.
    pub fn find_sentinel(&self, sentinels: &SentinelSet) -> Option<Token> {
        for item in &self.items {
            match item {
                Item::Code(t) if sentinels.is_sentinel(t) => return Some(t.clone()),
                Item::Episode(e) => {
                    if let Some(t) = e
                        .scope
                        .iter()
                        .chain(&e.patch)
                        .find(|t| sentinels.is_sentinel(t))
                    {
                        return Some(t.clone());
                    }
                }
                Item::Code(_) => {}
            }
        }
        None
    }
}

/// Grammar strictness shared by the parser and the renderer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Strict,
    Lenient,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "strict" => Ok(Mode::Strict),
            "lenient" => Ok(Mode::Lenient),
            other => Err(format!(
                "unknown mode `{other}` (expected `strict` or `lenient`)"
            )),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Strict => "strict",
            Mode::Lenient => "lenient",
        })
    }
}

/// Grammar violations. Every variant names the stream index of the offending
/// token (or of the trigger, for an unterminated episode).
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GrammarError {
    #[error("episode opened at token {start} is never closed")]
    UnterminatedEpisode { start: usize },
    #[error("trigger at token {index} appears inside an open episode")]
    NestedEpisode { index: usize },
    #[error("{kind} sentinel at token {index} is out of context")]
    SentinelOutOfContext { index: usize, kind: SentinelKind },
    #[error("expected {expected} sentinel at token {index}")]
    ExpectedSentinel {
        index: usize,
        expected: SentinelKind,
    },
    #[error("empty scope closed at token {index}")]
    EmptyScope { index: usize },
}

impl GrammarError {
    pub fn index(&self) -> usize {
        match *self {
            GrammarError::UnterminatedEpisode { start } => start,
            GrammarError::NestedEpisode { index }
            | GrammarError::SentinelOutOfContext { index, .. }
            | GrammarError::ExpectedSentinel { index, .. }
            | GrammarError::EmptyScope { index } => index,
        }
    }
}

pub fn serialize(trajectory: &Trajectory, sentinels: &SentinelSet) -> Vec<Token> {
    let mut out = Vec::with_capacity(trajectory.serialized_len());
    for item in &trajectory.items {
        match item {
            Item::Code(t) => out.push(t.clone()),
            Item::Episode(e) => {
                out.push(sentinels.get(SentinelKind::Trigger).clone());
                out.push(sentinels.get(SentinelKind::ScopeOpen).clone());
                out.extend(e.scope.iter().cloned());
                out.push(sentinels.get(SentinelKind::ScopeClose).clone());
                out.push(sentinels.get(SentinelKind::PatchOpen).clone());
                out.extend(e.patch.iter().cloned());
                out.push(sentinels.get(SentinelKind::PatchClose).clone());
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ParsePhase {
    Code,
    Triggered,
    Scope,
    ScopeClosed,
    Patch,
}

/// Inverse of [`serialize`]. Lenient mode only relaxes the end of the
/// stream: a trailing unterminated episode is dropped together with its raw
/// tokens.
pub fn parse(
    stream: &[Token],
    sentinels: &SentinelSet,
    mode: Mode,
) -> Result<Trajectory, GrammarError> {
    use SentinelKind::*;

    let mut items = Vec::new();
    let mut phase = ParsePhase::Code;
    let mut start = 0;
    let mut scope = Vec::new();
    let mut patch = Vec::new();

    for (index, token) in stream.iter().enumerate() {
        let kind = sentinels.classify(token);
        phase = match (phase, kind) {
            (ParsePhase::Code, None) => {
                items.push(Item::Code(token.clone()));
                ParsePhase::Code
            }
            (ParsePhase::Code, Some(Trigger)) => {
                start = index;
                ParsePhase::Triggered
            }
            (_, Some(Trigger)) => return Err(GrammarError::NestedEpisode { index }),
            (ParsePhase::Triggered, Some(ScopeOpen)) => ParsePhase::Scope,
            (ParsePhase::Triggered, _) => {
                return Err(GrammarError::ExpectedSentinel {
                    index,
                    expected: ScopeOpen,
                })
            }
            (ParsePhase::Scope, None) => {
                scope.push(token.clone());
                ParsePhase::Scope
            }
            (ParsePhase::Scope, Some(ScopeClose)) => {
                if scope.is_empty() {
                    return Err(GrammarError::EmptyScope { index });
                }
                ParsePhase::ScopeClosed
            }
            (ParsePhase::ScopeClosed, Some(PatchOpen)) => ParsePhase::Patch,
            (ParsePhase::ScopeClosed, _) => {
                return Err(GrammarError::ExpectedSentinel {
                    index,
                    expected: PatchOpen,
                })
            }
            (ParsePhase::Patch, None) => {
                patch.push(token.clone());
                ParsePhase::Patch
            }
            (ParsePhase::Patch, Some(PatchClose)) => {
                let episode = RevisionEpisode {
                    scope: std::mem::take(&mut scope),
                    patch: std::mem::take(&mut patch),
                };
                items.push(Item::Episode(episode));
                ParsePhase::Code
            }
            (_, Some(kind)) => return Err(GrammarError::SentinelOutOfContext { index, kind }),
        };
    }

    if phase != ParsePhase::Code && mode == Mode::Strict {
        return Err(GrammarError::UnterminatedEpisode { start });
    }
    Ok(Trajectory { items })
}

/// Splits trajectory text into stream tokens: sentinel spellings (canonical
/// or alias) become single tokens, everything between them is tokenized with
/// `profile`.
pub fn tokenize_stream(text: &str, profile: Profile, sentinels: &SentinelSet) -> Vec<Token> {
    let spellings: Vec<&Token> = sentinels.spellings().map(|(t, _)| t).collect();
    let mut out = Vec::new();
    let mut rest = text;
    loop {
        // Earliest occurrence wins; longest spelling breaks ties.
        let next = spellings
            .iter()
            .filter_map(|s| rest.find(s.as_str()).map(|at| (at, *s)))
            .min_by(|a, b| {
                a.0.cmp(&b.0)
                    .then(b.1.as_str().len().cmp(&a.1.as_str().len()))
            });
        match next {
            Some((at, sentinel)) => {
                out.extend(tokenize(&rest[..at], profile));
                out.push(sentinel.clone());
                rest = &rest[at + sentinel.as_str().len()..];
            }
            None => {
                out.extend(tokenize(rest, profile));
                return out;
            }
        }
    }
}

/// Reads trajectory text into a structured trajectory.
pub fn parse_text(
    text: &str,
    profile: Profile,
    sentinels: &SentinelSet,
    mode: Mode,
) -> Result<Trajectory, GrammarError> {
    parse(&tokenize_stream(text, profile, sentinels), sentinels, mode)
}

/// Trajectory text format: tokens concatenated, sentinels verbatim.
pub fn to_text(trajectory: &Trajectory, sentinels: &SentinelSet) -> String {
    crate::token::detokenize(&serialize(trajectory, sentinels))
}
