//! The decoding loop: policy proposes, the mask filters, the renderer
//! consumes.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::cost::CostReport;
use super::policy::{draw, Policy, Streams, TriggerBias, WeightTable, EOS};
use super::HarnessError;
use crate::episode::{Mode, SentinelKind, SentinelSet};
use crate::render::{Phase, RenderEvent, RenderState};
use crate::scope::{Backend, ConstraintState, SubstringIndex};
use crate::token::Token;

#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub sentinels: SentinelSet,
    pub bias: TriggerBias,
    pub enforce_mask: bool,
    /// Prompt length `L`; counted as input, never decoded.
    pub context_len: u64,
    pub mode: Mode,
    pub backend: Backend,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            sentinels: SentinelSet::canonical(),
            bias: TriggerBias::default(),
            enforce_mask: true,
            context_len: 0,
            mode: Mode::Strict,
            backend: Backend::SubstringIndex,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SessionOutput {
    /// Every accepted token, in order.
    pub stream: Vec<Token>,
    pub buffer: Vec<Token>,
    pub events: Vec<RenderEvent>,
    pub cost: CostReport,
    /// Trigger tokens accepted, including episodes later discarded.
    pub triggers: usize,
}

struct Session<'a> {
    config: &'a SessionConfig,
    render: RenderState,
    /// Mirrors the visible buffer; only kept when the index backend masks.
    index: Option<Arc<SubstringIndex>>,
    constraint: Option<ConstraintState>,
    stream: Vec<Token>,
    last_content: Option<Token>,
    triggers: usize,
}

impl<'a> Session<'a> {
    fn new(config: &'a SessionConfig) -> Self {
        let indexed = config.enforce_mask && config.backend == Backend::SubstringIndex;
        Self {
            config,
            render: RenderState::new(config.sentinels.clone(), config.mode),
            index: indexed.then(|| Arc::new(SubstringIndex::new())),
            constraint: None,
            stream: Vec::new(),
            last_content: None,
            triggers: 0,
        }
    }

    fn sentinel(&self, kind: SentinelKind) -> Token {
        self.config.sentinels.get(kind).clone()
    }

    /// Mask check for `token` in the current phase. Returns the constraint
    /// state to install if the token is accepted.
    fn masked(&self, token: &Token) -> Result<Option<ConstraintState>, HarnessError> {
        let invalid = || HarnessError::InvalidScript {
            index: self.stream.len(),
            token: token.clone(),
        };
        let kind = self.config.sentinels.classify(token);
        match (self.render.phase(), kind) {
            (Phase::Transparent, Some(SentinelKind::Trigger))
                if self.render.buffer().is_empty() =>
            {
                Err(invalid())
            }
            (Phase::Triggered, Some(SentinelKind::ScopeOpen)) => {
                let buffer: Arc<[Token]> = self.render.buffer().into();
                let state = match &self.index {
                    Some(index) => ConstraintState::with_index(buffer, Arc::clone(index)),
                    None => ConstraintState::open(buffer, self.config.backend),
                };
                state.map(Some).map_err(|_| invalid())
            }
            (Phase::InScope, _) => {
                let current = self
                    .constraint
                    .as_ref()
                    .expect("constraint is open while in scope");
                match kind {
                    Some(SentinelKind::ScopeClose) if current.closure_allowed() => Ok(None),
                    None => current.advance(token).map(Some).map_err(|_| invalid()),
                    Some(_) => Err(invalid()),
                }
            }
            _ => Ok(None),
        }
    }

    fn accept(&mut self, token: &Token) -> Result<(), HarnessError> {
        let next_constraint = if self.config.enforce_mask {
            self.masked(token)?
        } else {
            None
        };
        let seen = self.render.events().len();
        self.render.feed(token)?;
        self.stream.push(token.clone());

        match self.config.sentinels.classify(token) {
            Some(SentinelKind::Trigger) => self.triggers += 1,
            Some(_) => {}
            None => self.last_content = Some(token.clone()),
        }
        self.constraint = match self.render.phase() {
            Phase::InScope => next_constraint,
            _ => None,
        };
        if let Some(index) = &mut self.index {
            let mut rebuild = false;
            for event in &self.render.events()[seen..] {
                match event {
                    RenderEvent::Append { token } => Arc::make_mut(index).push(token),
                    RenderEvent::RevisionApplied { .. } => rebuild = true,
                    RenderEvent::RevisionDiscarded { .. } => {}
                }
            }
            if rebuild {
                *index = Arc::new(SubstringIndex::build(self.render.buffer()));
            }
        }
        Ok(())
    }

    fn run_script(&mut self, script: &[Token]) -> Result<(), HarnessError> {
        for token in script {
            if token.as_str() == EOS {
                break;
            }
            self.accept(token)?;
        }
        Ok(())
    }

    fn run_stochastic(&mut self, table: &WeightTable, seed: u64) -> Result<(), HarnessError> {
        table.validate()?;
        let mut rng = Streams::new(seed);
        let trigger = self.sentinel(SentinelKind::Trigger);
        let mut prev_code: Option<Token> = None;
        let mut code_count = 0;
        while code_count < table.max_code_tokens {
            let row = table.row(prev_code.as_ref());
            let (w_t, rest) = row.map_or((0.0, 0.0), |r| {
                let w_t = r.get(trigger.as_str()).copied().unwrap_or(0.0);
                let rest = r
                    .iter()
                    .filter(|(k, _)| **k != trigger.as_str())
                    .map(|(_, w)| w)
                    .sum();
                (w_t, rest)
            });
            // one trigger draw per slot, legal once the buffer has content
            let u: f64 = rng.trigger.random();
            if code_count > 0 && u < self.config.bias.trigger_probability(w_t, rest) {
                self.stochastic_episode(table, &mut rng.episode)?;
            }

            let candidates: Vec<(Option<Token>, f64)> = row
                .into_iter()
                .flatten()
                .filter_map(|(k, &w)| {
                    if k == EOS {
                        return Some((None, w));
                    }
                    let t = Token::new(k)?;
                    (!self.config.sentinels.is_sentinel(&t)).then_some((Some(t), w))
                })
                .collect();
            match draw(&mut rng.code, &candidates) {
                Some(Some(t)) => {
                    let t = t.clone();
                    self.accept(&t)?;
                    prev_code = Some(t);
                    code_count += 1;
                }
                _ => break,
            }
        }
        Ok(())
    }

    /// Code-token candidates of the row for the last content token.
    fn content_row(&self, table: &WeightTable) -> (Vec<(Token, f64)>, f64) {
        let row = table.row(self.last_content.as_ref());
        let close_weight = row.and_then(|r| r.get(EOS)).copied().unwrap_or(0.0);
        let tokens = row
            .into_iter()
            .flatten()
            .filter_map(|(k, &w)| {
                let t = Token::new(k)
                    .filter(|t| t.as_str() != EOS && !self.config.sentinels.is_sentinel(t))?;
                Some((t, w))
            })
            .collect();
        (tokens, close_weight)
    }

    fn weight_of(table: &WeightTable, prev: Option<&Token>, token: &Token) -> f64 {
        table
            .row(prev)
            .and_then(|r| r.get(token.as_str()))
            .copied()
            .unwrap_or(0.0)
    }

    /// Samples scope and patch. Under the mask the scope is drawn from the
    /// valid set, renormalized (uniform if the row puts no mass on it).
    fn stochastic_episode(
        &mut self,
        table: &WeightTable,
        rng: &mut ChaCha8Rng,
    ) -> Result<(), HarnessError> {
        let close_scope = self.sentinel(SentinelKind::ScopeClose);
        let close_patch = self.sentinel(SentinelKind::PatchClose);
        let buffer_len = self.render.buffer().len();

        self.accept(&self.sentinel(SentinelKind::Trigger))?;
        self.accept(&self.sentinel(SentinelKind::ScopeOpen))?;
        let mut span = 0;
        loop {
            if self.render.phase() != Phase::InScope {
                return Ok(());
            }
            if span >= table.max_scope_len {
                self.accept(&close_scope)?;
                break;
            }
            let (row_tokens, close_weight) = self.content_row(table);
            let mut candidates: Vec<(Token, f64)> = match &self.constraint {
                Some(c) => {
                    let valid = c.valid_set();
                    let mut cands: Vec<(Token, f64)> = valid
                        .continuations
                        .into_iter()
                        .map(|t| {
                            let w = Self::weight_of(table, self.last_content.as_ref(), &t);
                            (t, w)
                        })
                        .collect();
                    if valid.closure_allowed {
                        cands.push((close_scope.clone(), close_weight));
                    }
                    cands
                }
                None => {
                    let mut cands = row_tokens;
                    if span > 0 {
                        cands.push((close_scope.clone(), close_weight));
                    }
                    cands
                }
            };
            if candidates.is_empty() {
                candidates.push((close_scope.clone(), 0.0));
            }
            let token = draw(rng, &candidates).expect("non-empty").clone();
            self.accept(&token)?;
            if token == close_scope {
                break;
            }
            span += 1;
        }
        if self.render.phase() != Phase::ScopeClosed {
            return Ok(());
        }

        self.accept(&self.sentinel(SentinelKind::PatchOpen))?;
        // never leave the buffer empty: a whole-buffer scope gets a non-empty patch
        let needs_content = span == buffer_len;
        let mut patch = 0;
        while self.render.phase() == Phase::InPatch {
            let may_close = !(needs_content && patch == 0);
            if may_close && patch >= table.max_patch_len {
                self.accept(&close_patch)?;
                break;
            }
            let (mut candidates, close_weight) = self.content_row(table);
            if may_close {
                candidates.push((close_patch.clone(), close_weight));
            } else if candidates.is_empty() {
                candidates = self
                    .render
                    .buffer()
                    .iter()
                    .map(|t| (t.clone(), 0.0))
                    .collect();
            }
            let token = draw(rng, &candidates).expect("non-empty").clone();
            self.accept(&token)?;
            patch += 1;
        }
        Ok(())
    }

    fn finish(self) -> Result<SessionOutput, HarnessError> {
        if self.render.phase().in_episode() && self.config.mode == Mode::Strict {
            return Err(HarnessError::PolicyExhausted {
                index: self.stream.len(),
            });
        }
        let Session {
            config,
            render,
            stream,
            triggers,
            ..
        } = self;
        let (buffer, events) = render.finish()?;

        let mut appended = 0u64;
        let mut applied = 0u64;
        let mut patch_tokens = 0u64;
        for event in &events {
            match event {
                RenderEvent::Append { .. } => appended += 1,
                RenderEvent::RevisionApplied { new, .. } => {
                    applied += 1;
                    patch_tokens += new.len() as u64;
                }
                RenderEvent::RevisionDiscarded { .. } => {}
            }
        }
        let output = stream.len() as u64;
        let cost = CostReport {
            l: config.context_len,
            n_v: appended,
            n_s: patch_tokens,
            measured_input: config.context_len,
            measured_output: output,
            idealized_overhead: applied,
            measured_overhead: output - appended,
            episodes: applied,
            total: config.context_len + output,
        };
        Ok(SessionOutput {
            stream,
            buffer,
            events,
            cost,
            triggers,
        })
    }
}

/// Runs one decoding session to the policy's end of stream.
pub fn decode_session(
    policy: &Policy,
    config: &SessionConfig,
) -> Result<SessionOutput, HarnessError> {
    let mut session = Session::new(config);
    match policy {
        Policy::Stochastic { table, seed } => session.run_stochastic(table, *seed)?,
        deterministic => {
            let script = deterministic
                .script(&config.sentinels)
                .expect("deterministic policy");
            session.run_script(&script)?;
        }
    }
    session.finish()
}
