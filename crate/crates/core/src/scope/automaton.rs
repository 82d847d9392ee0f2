//! Online suffix automaton over token sequences.
//!
//! Each state stands for a class of substrings with the same set of end
//! positions. A transition on token `v` from the state of `s` exists iff
//! `s ⊕ v` occurs in the buffer, so the outgoing edges of a state are
//! exactly the admissible scope continuations.

use std::collections::HashMap;
use std::sync::OnceLock;

use crate::token::Token;

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct State {
    len: u32,
    link: u32,
    /// Sorted by symbol.
    next: Vec<(u32, u32)>,
    /// End index of the occurrence that created this state, 0 for clones.
    created_end: u32,
}

impl State {
    fn get(&self, sym: u32) -> Option<u32> {
        self.next
            .binary_search_by_key(&sym, |&(s, _)| s)
            .ok()
            .map(|i| self.next[i].1)
    }

    fn set(&mut self, sym: u32, target: u32) {
        match self.next.binary_search_by_key(&sym, |&(s, _)| s) {
            Ok(i) => self.next[i].1 = target,
            Err(i) => self.next.insert(i, (sym, target)),
        }
    }
}

/// Substring index over a growing token buffer.
#[derive(Debug, Clone)]
pub struct SubstringIndex {
    states: Vec<State>,
    last: u32,
    len: usize,
    symbols: HashMap<Token, u32>,
    tokens: Vec<Token>,
    /// Max end index per state, rebuilt on demand after appends.
    last_end: OnceLock<Vec<u32>>,
}

impl Default for SubstringIndex {
    fn default() -> Self {
        Self::new()
    }
}

impl SubstringIndex {
    pub const ROOT: u32 = 0;

    pub fn new() -> Self {
        Self {
            states: vec![State {
                len: 0,
                link: NONE,
                next: Vec::new(),
                created_end: 0,
            }],
            last: 0,
            len: 0,
            symbols: HashMap::new(),
            tokens: Vec::new(),
            last_end: OnceLock::new(),
        }
    }

    pub fn build(buffer: &[Token]) -> Self {
        let mut index = Self::new();
        index.states.reserve(2 * buffer.len());
        for token in buffer {
            index.push(token);
        }
        index
    }

    /// Number of buffer tokens indexed.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    fn symbol(&mut self, token: &Token) -> u32 {
        if let Some(&sym) = self.symbols.get(token) {
            return sym;
        }
        let sym = self.tokens.len() as u32;
        self.symbols.insert(token.clone(), sym);
        self.tokens.push(token.clone());
        sym
    }

    /// Appends one token to the indexed buffer.
    pub fn push(&mut self, token: &Token) {
        let sym = self.symbol(token);
        self.len += 1;
        self.last_end = OnceLock::new();

        let cur = self.states.len() as u32;
        self.states.push(State {
            len: self.states[self.last as usize].len + 1,
            link: NONE,
            next: Vec::new(),
            created_end: self.len as u32,
        });

        let mut p = self.last;
        while p != NONE && self.states[p as usize].get(sym).is_none() {
            self.states[p as usize].set(sym, cur);
            p = self.states[p as usize].link;
        }

        if p == NONE {
            self.states[cur as usize].link = Self::ROOT;
        } else {
            let q = self.states[p as usize].get(sym).expect("transition exists");
            if self.states[p as usize].len + 1 == self.states[q as usize].len {
                self.states[cur as usize].link = q;
            } else {
                let clone = self.states.len() as u32;
                let mut cloned = self.states[q as usize].clone();
                cloned.len = self.states[p as usize].len + 1;
                cloned.created_end = 0;
                self.states.push(cloned);
                while p != NONE && self.states[p as usize].get(sym) == Some(q) {
                    self.states[p as usize].set(sym, clone);
                    p = self.states[p as usize].link;
                }
                self.states[q as usize].link = clone;
                self.states[cur as usize].link = clone;
            }
        }
        self.last = cur;
    }

    /// Follows the transition on `token`, if the extended string occurs.
    pub fn step(&self, state: u32, token: &Token) -> Option<u32> {
        let sym = *self.symbols.get(token)?;
        self.states[state as usize].get(sym)
    }

    /// Tokens with an outgoing transition from `state`.
    pub fn continuations(&self, state: u32) -> impl Iterator<Item = &Token> {
        self.states[state as usize]
            .next
            .iter()
            .map(|&(sym, _)| &self.tokens[sym as usize])
    }

    /// Largest end index among the occurrences represented by `state`.
    pub fn last_end(&self, state: u32) -> usize {
        self.last_end.get_or_init(|| self.compute_last_end())[state as usize] as usize
    }

    fn compute_last_end(&self) -> Vec<u32> {
        // Every end position of a state's class is the creation position of
        // some non-clone state in its suffix-link subtree.
        let mut last: Vec<u32> = self.states.iter().map(|s| s.created_end).collect();
        let mut order: Vec<u32> = (0..self.states.len() as u32).collect();
        order.sort_unstable_by_key(|&v| std::cmp::Reverse(self.states[v as usize].len));
        for v in order {
            let link = self.states[v as usize].link;
            if link != NONE {
                last[link as usize] = last[link as usize].max(last[v as usize]);
            }
        }
        last
    }
}
