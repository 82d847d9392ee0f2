//! Token sources standing in for a model's next-token distribution.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::episode::{serialize, tokenize_stream, SentinelSet};
use crate::forge::TrajectoryRecord;
use crate::token::{Profile, Token};

/// End-of-stream marker in scripts and weight tables.
pub const EOS: &str = "<|eos|>";

fn default_max_code() -> usize {
    256
}

fn default_max_span() -> usize {
    8
}

/// Next-token weights keyed by the previous token.
///
/// The row under `""` is used for the first token and for any context with
/// no row of its own. A row may weight the trigger spelling (its trigger
/// propensity) and [`EOS`], which ends the program in code position and
/// closes the span inside an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightTable {
    pub rows: BTreeMap<String, BTreeMap<String, f64>>,
    #[serde(default = "default_max_code")]
    pub max_code_tokens: usize,
    #[serde(default = "default_max_span")]
    pub max_scope_len: usize,
    #[serde(default = "default_max_span")]
    pub max_patch_len: usize,
}

impl WeightTable {
    pub fn validate(&self) -> Result<(), HarnessError> {
        for (ctx, row) in &self.rows {
            for (tok, w) in row {
                if tok.is_empty() {
                    return Err(HarnessError::InvalidWeightTable(format!(
                        "empty token in row `{ctx}`"
                    )));
                }
                if !w.is_finite() || *w < 0.0 {
                    return Err(HarnessError::InvalidWeightTable(format!(
                        "weight {w} for `{tok}` in row `{ctx}` is not a finite non-negative number"
                    )));
                }
            }
        }
        if self.max_scope_len == 0 {
            return Err(HarnessError::InvalidWeightTable(
                "max_scope_len must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn row(&self, prev: Option<&Token>) -> Option<&BTreeMap<String, f64>> {
        prev.and_then(|t| self.rows.get(t.as_str()))
            .or_else(|| self.rows.get(""))
    }
}

#[derive(Debug, Clone)]
pub enum Policy {
    /// Emits a fixed token sequence, stopping at [`EOS`] or its end.
    Scripted(Vec<Token>),
    /// Emits the serialized trajectory of a dataset record.
    Replay(TrajectoryRecord),
    Stochastic {
        table: WeightTable,
        seed: u64,
    },
}

impl Policy {
    /// One token per line. A line starting with `"` is read as a JSON string,
    /// which allows whitespace and newline tokens.
    pub fn from_token_lines(text: &str) -> Result<Self, HarnessError> {
        let mut tokens = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let raw = if line.starts_with('"') {
                serde_json::from_str::<String>(line)
                    .map_err(|e| HarnessError::MalformedScript(format!("line {}: {e}", n + 1)))?
            } else {
                line.to_string()
            };
            match Token::new(&raw) {
                Some(t) => tokens.push(t),
                None => continue,
            }
        }
        Ok(Policy::Scripted(tokens))
    }

    /// Trajectory text tokenized with `profile`.
    pub fn from_trajectory_text(text: &str, profile: Profile, sentinels: &SentinelSet) -> Self {
        Policy::Scripted(tokenize_stream(text, profile, sentinels))
    }

    /// The token sequence of a deterministic policy.
    pub fn script(&self, sentinels: &SentinelSet) -> Option<Vec<Token>> {
        match self {
            Policy::Scripted(tokens) => Some(tokens.clone()),
            Policy::Replay(record) => Some(serialize(&record.trajectory, sentinels)),
            Policy::Stochastic { .. } => None,
        }
    }
}

/// Signed scalar added to the trigger token's logit.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TriggerBias(pub f64);

impl TriggerBias {
    /// Trigger probability after biasing a trigger weight `w_t` against the
    /// remaining mass `rest`: `w_t·e^b / (w_t·e^b + rest)`.
    pub fn trigger_probability(self, w_t: f64, rest: f64) -> f64 {
        let b = self.0;
        if w_t <= 0.0 || b == f64::NEG_INFINITY {
            return 0.0;
        }
        if rest <= 0.0 || b == f64::INFINITY {
            return 1.0;
        }
        if b == 0.0 {
            return w_t / (w_t + rest);
        }
        1.0 / (1.0 + (rest / w_t) * (-b).exp())
    }
}

/// Draws `key` from `candidates` with the given weights; uniform when every
/// weight is zero. `None` only for an empty candidate list.
pub(crate) fn draw<'a, T>(rng: &mut ChaCha8Rng, candidates: &'a [(T, f64)]) -> Option<&'a T> {
    if candidates.is_empty() {
        return None;
    }
    let i = match WeightedIndex::new(candidates.iter().map(|(_, w)| *w)) {
        Ok(dist) => dist.sample(rng),
        Err(_) => rng.random_range(0..candidates.len()),
    };
    Some(&candidates[i].0)
}

/// Independent generator streams: trigger decisions, code tokens, episode
/// content. Keeping them apart makes the code sequence and the per-slot
/// trigger draws identical for every bias value under one seed.
pub(crate) struct Streams {
    pub trigger: ChaCha8Rng,
    pub code: ChaCha8Rng,
    pub episode: ChaCha8Rng,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        let stream = |n| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(n);
            rng
        };
        Self {
            trigger: stream(0),
            code: stream(1),
            episode: stream(2),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_bias_is_the_policy_probability() {
        let p = TriggerBias(0.0).trigger_probability(1.0, 3.0);
        assert_eq!(p, 0.25);
        assert_eq!(TriggerBias::default(), TriggerBias(0.0));
    }

    #[test]
    fn bias_limits() {
        assert_eq!(
            TriggerBias(f64::INFINITY).trigger_probability(0.1, 100.0),
            1.0
        );
        assert_eq!(
            TriggerBias(f64::NEG_INFINITY).trigger_probability(5.0, 1.0),
            0.0
        );
        assert_eq!(
            TriggerBias(f64::INFINITY).trigger_probability(0.0, 1.0),
            0.0
        );
    }

    #[test]
    fn bias_is_monotone() {
        let mut last = 0.0;
        for b in -40..=40 {
            let p = TriggerBias(b as f64 * 0.5).trigger_probability(0.3, 2.0);
            assert!(p >= last);
            last = p;
        }
    }

    #[test]
    fn token_lines_with_json_escapes() {
        let Policy::Scripted(tokens) =
            Policy::from_token_lines("int\n\" \"\n\"\\n\"\nx\n").unwrap()
        else {
            unreachable!()
        };
        let texts: Vec<&str> = tokens.iter().map(Token::as_str).collect();
        assert_eq!(texts, ["int", " ", "\n", "x"]);
    }

    #[test]
    fn table_validation() {
        let mut table: WeightTable = serde_json::from_str(r#"{"rows":{"":{"a":1.0}}}"#).unwrap();
        assert_eq!(table.max_code_tokens, 256);
        assert!(table.validate().is_ok());
        table.rows.get_mut("").unwrap().insert("b".into(), -1.0);
        assert!(table.validate().is_err());
    }

    #[test]
    fn uniform_fallback_on_zero_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let picks: Vec<char> = (0..50)
            .map(|_| *draw(&mut rng, &[('a', 0.0), ('b', 0.0)]).unwrap())
            .collect();
        assert!(picks.contains(&'a') && picks.contains(&'b'));
        assert!(draw::<char>(&mut rng, &[]).is_none());
    }
}
