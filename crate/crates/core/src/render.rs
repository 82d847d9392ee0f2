//! The deterministic stream renderer.
//!
//! Code tokens are appended to the visible buffer as they arrive. A trigger
//! switches to a hidden state in which the scope and patch are buffered; the
//! buffer is only touched when the patch-close sentinel arrives, and then in
//! a single splice at the right-most occurrence of the scope.

use serde::{Deserialize, Serialize};

use crate::episode::{GrammarError, Item, Mode, SentinelKind, SentinelSet, Trajectory};
use crate::scope::{locate_rightmost, LocalizedSpan};
use crate::token::Token;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Transparent,
    /// Trigger seen, waiting for scope-open.
    Triggered,
    InScope,
    /// Scope closed, waiting for patch-open.
    ScopeClosed,
    InPatch,
}

impl Phase {
    pub fn in_episode(self) -> bool {
        self != Phase::Transparent
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscardReason {
    ScopeNotFound,
    Unterminated,
    NestedEpisode,
    SentinelOutOfContext,
    ExpectedSentinel,
    EmptyScope,
}

impl From<&GrammarError> for DiscardReason {
    fn from(err: &GrammarError) -> Self {
        match err {
            GrammarError::UnterminatedEpisode { .. } => DiscardReason::Unterminated,
            GrammarError::NestedEpisode { .. } => DiscardReason::NestedEpisode,
            GrammarError::SentinelOutOfContext { .. } => DiscardReason::SentinelOutOfContext,
            GrammarError::ExpectedSentinel { .. } => DiscardReason::ExpectedSentinel,
            GrammarError::EmptyScope { .. } => DiscardReason::EmptyScope,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RenderEvent {
    Append {
        token: Token,
    },
    RevisionApplied {
        start: usize,
        end: usize,
        old: Vec<Token>,
        new: Vec<Token>,
    },
    RevisionDiscarded {
        reason: DiscardReason,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RenderError {
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error("scope of the episode opened at token {start} does not occur in the buffer")]
    ScopeNotFound { start: usize },
}

impl RenderError {
    /// Stream index the error points at.
    pub fn index(&self) -> usize {
        match self {
            RenderError::Grammar(e) => e.index(),
            RenderError::ScopeNotFound { start } => *start,
        }
    }
}

/// Visible buffer plus the hidden episode state.
#[derive(Debug, Clone)]
pub struct RenderState {
    sentinels: SentinelSet,
    mode: Mode,
    buffer: Vec<Token>,
    phase: Phase,
    pending_scope: Vec<Token>,
    pending_patch: Vec<Token>,
    events: Vec<RenderEvent>,
    /// Index of the next stream token.
    position: usize,
    episode_start: usize,
}

impl RenderState {
    pub fn new(sentinels: SentinelSet, mode: Mode) -> Self {
        Self {
            sentinels,
            mode,
            buffer: Vec::new(),
            phase: Phase::Transparent,
            pending_scope: Vec::new(),
            pending_patch: Vec::new(),
            events: Vec::new(),
            position: 0,
            episode_start: 0,
        }
    }

    pub fn buffer(&self) -> &[Token] {
        &self.buffer
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn sentinels(&self) -> &SentinelSet {
        &self.sentinels
    }

    pub fn pending_scope(&self) -> &[Token] {
        &self.pending_scope
    }

    pub fn pending_patch(&self) -> &[Token] {
        &self.pending_patch
    }

    pub fn events(&self) -> &[RenderEvent] {
        &self.events
    }

    /// Number of stream tokens consumed so far.
    pub fn position(&self) -> usize {
        self.position
    }

    pub fn into_parts(self) -> (Vec<Token>, Vec<RenderEvent>) {
        (self.buffer, self.events)
    }

    /// Consumes one stream token. In strict mode a grammar violation is
    /// returned and the state is left as it was before the call; in lenient
    /// mode the open episode (if any) and the offending token are discarded.
    pub fn feed(&mut self, token: &Token) -> Result<(), RenderError> {
        use SentinelKind::*;

        let index = self.position;
        let kind = self.sentinels.classify(token);
        let outcome = match (self.phase, kind) {
            (Phase::Transparent, None) => {
                self.buffer.push(token.clone());
                self.events.push(RenderEvent::Append {
                    token: token.clone(),
                });
                Ok(())
            }
            (Phase::Transparent, Some(Trigger)) => {
                self.episode_start = index;
                self.phase = Phase::Triggered;
                Ok(())
            }
            (_, Some(Trigger)) => Err(GrammarError::NestedEpisode { index }.into()),
            (Phase::Triggered, Some(ScopeOpen)) => {
                self.phase = Phase::InScope;
                Ok(())
            }
            (Phase::Triggered, _) => Err(GrammarError::ExpectedSentinel {
                index,
                expected: ScopeOpen,
            }
            .into()),
            (Phase::InScope, None) => {
                self.pending_scope.push(token.clone());
                Ok(())
            }
            (Phase::InScope, Some(ScopeClose)) if self.pending_scope.is_empty() => {
                Err(GrammarError::EmptyScope { index }.into())
            }
            (Phase::InScope, Some(ScopeClose)) => {
                self.phase = Phase::ScopeClosed;
                Ok(())
            }
            (Phase::ScopeClosed, Some(PatchOpen)) => {
                self.phase = Phase::InPatch;
                Ok(())
            }
            (Phase::ScopeClosed, _) => Err(GrammarError::ExpectedSentinel {
                index,
                expected: PatchOpen,
            }
            .into()),
            (Phase::InPatch, None) => {
                self.pending_patch.push(token.clone());
                Ok(())
            }
            (Phase::InPatch, Some(PatchClose)) => self.commit(),
            (_, Some(kind)) => Err(GrammarError::SentinelOutOfContext { index, kind }.into()),
        };
        match outcome {
            Ok(()) => {
                self.position += 1;
                Ok(())
            }
            Err(err) if self.mode == Mode::Lenient => {
                let reason = match &err {
                    RenderError::Grammar(g) => DiscardReason::from(g),
                    RenderError::ScopeNotFound { .. } => DiscardReason::ScopeNotFound,
                };
                self.discard(reason);
                self.position += 1;
                Ok(())
            }
            Err(err) => Err(err),
        }
    }

    fn discard(&mut self, reason: DiscardReason) {
        self.pending_scope.clear();
        self.pending_patch.clear();
        self.phase = Phase::Transparent;
        self.events.push(RenderEvent::RevisionDiscarded { reason });
    }

    /// Splices the pending patch over the right-most occurrence of the
    /// pending scope. All-or-nothing: on error nothing changes.
    fn commit(&mut self) -> Result<(), RenderError> {
        let LocalizedSpan { start, end, .. } = locate_rightmost(&self.buffer, &self.pending_scope)
            .map_err(|_| RenderError::ScopeNotFound {
                start: self.episode_start,
            })?;
        let old = std::mem::take(&mut self.pending_scope);
        let new = std::mem::take(&mut self.pending_patch);
        self.buffer.splice(start..end, new.iter().cloned());
        self.events.push(RenderEvent::RevisionApplied {
            start,
            end,
            old,
            new,
        });
        self.phase = Phase::Transparent;
        Ok(())
    }

    /// Ends the stream. An open episode is an error in strict mode and is
    /// discarded in lenient mode.
    pub fn finish(mut self) -> Result<(Vec<Token>, Vec<RenderEvent>), RenderError> {
        if self.phase.in_episode() {
            if self.mode == Mode::Strict {
                return Err(GrammarError::UnterminatedEpisode {
                    start: self.episode_start,
                }
                .into());
            }
            self.discard(DiscardReason::Unterminated);
        }
        Ok(self.into_parts())
    }
}

/// Folds [`RenderState::feed`] over `stream` from the empty buffer.
pub fn render(
    stream: &[Token],
    sentinels: &SentinelSet,
    mode: Mode,
) -> Result<(Vec<Token>, Vec<RenderEvent>), RenderError> {
    let mut state = RenderState::new(sentinels.clone(), mode);
    for token in stream {
        state.feed(token)?;
    }
    state.finish()
}

/// Structural semantics: apply each episode, left to right, to the buffer
/// built so far.
pub fn apply_episodes(trajectory: &Trajectory) -> Option<Vec<Token>> {
    let mut buffer: Vec<Token> = Vec::new();
    for item in &trajectory.items {
        match item {
            Item::Code(t) => buffer.push(t.clone()),
            Item::Episode(e) => {
                let window = locate_rightmost(&buffer, e.scope()).ok()?;
                buffer.splice(window.start..window.end, e.patch().iter().cloned());
            }
        }
    }
    Some(buffer)
}
