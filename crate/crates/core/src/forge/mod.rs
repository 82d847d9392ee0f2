//! Alignment-data construction: from vulnerable/patched function pairs to
//! revision trajectories.
//!
//! The stages are diffing ([`diff`]), commit purity filtering ([`tier`]),
//! trajectory construction with bounded trigger latency ([`build`]),
//! deduplication ([`dedup`]) and mixing with a general corpus ([`mix`]).
//! [`pipeline`] wires them together over JSONL.

pub mod build;
pub mod dedup;
pub mod diff;
pub mod mix;
pub mod pipeline;
pub mod tier;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::episode::{parse_text, to_text, GrammarError, Mode, SentinelSet, Trajectory};
use crate::token::Profile;

pub use build::{build_trajectory, BuildOptions};
pub use dedup::{dedup, diff_signature, DedupStats};
pub use diff::{apply_hunks, diff_function_pair, diff_tokens, DiffHunk};
pub use mix::{mix_corpora, MixOutcome, MixRatio};
pub use pipeline::{run_pipeline, PipelineConfig, PipelineOutput, Summary, TierSelection};
pub use tier::{filter_tier, TierVerdict};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ForgeError {
    #[error("vulnerable and patched texts are identical")]
    IdenticalPair,
    #[error("vulnerable text is empty, so an insertion has no anchor")]
    EmptyVulnerable,
    #[error("text contains a sentinel spelling")]
    SentinelCollision,
    #[error("hunk {hunk} does not match the vulnerable text")]
    InvalidHunk { hunk: usize },
    #[error("scope of hunk {hunk} cannot be made to resolve to its own window")]
    ScopeAmbiguityUnresolvable { hunk: usize },
    #[error("rendered trajectory does not reproduce the patched text")]
    RoundTripMismatch,
}

/// One modified function with its provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionPair {
    pub id: String,
    pub vulnerable: String,
    pub patched: String,
    /// `source_commit`, `cwe`, `language`, and optionally `function`.
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

impl FunctionPair {
    /// Commit key used for tier grouping: `source_commit`, falling back to the id.
    pub fn commit_key(&self) -> &str {
        self.meta
            .get("source_commit")
            .map(String::as_str)
            .unwrap_or(&self.id)
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Strict,
    Relaxed,
    /// Replayed general instruction data; never carries episodes.
    #[default]
    General,
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tier::Strict => "strict",
            Tier::Relaxed => "relaxed",
            Tier::General => "general",
        })
    }
}

impl FromStr for Tier {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strict" => Ok(Tier::Strict),
            "relaxed" => Ok(Tier::Relaxed),
            "general" => Ok(Tier::General),
            other => Err(format!("unknown tier `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordMeta {
    #[serde(default)]
    pub tier: Tier,
    #[serde(default)]
    pub latency_k: usize,
    #[serde(default)]
    pub profile: Profile,
    #[serde(flatten)]
    pub provenance: BTreeMap<String, String>,
}

impl Default for RecordMeta {
    fn default() -> Self {
        Self {
            tier: Tier::General,
            latency_k: 0,
            profile: Profile::Char,
            provenance: BTreeMap::new(),
        }
    }
}

/// A dataset row: specification plus trajectory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrajectoryRecord {
    pub id: String,
    pub spec: String,
    pub trajectory: Trajectory,
    pub meta: RecordMeta,
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    id: String,
    #[serde(default)]
    spec: String,
    trajectory: String,
    #[serde(default)]
    meta: RecordMeta,
}

#[derive(Debug, thiserror::Error)]
pub enum RecordError {
    #[error("malformed record: {0}")]
    Json(#[from] serde_json::Error),
    #[error("record trajectory: {0}")]
    Grammar(#[from] GrammarError),
}

impl TrajectoryRecord {
    pub fn source_commit(&self) -> Option<&str> {
        self.meta
            .provenance
            .get("source_commit")
            .map(String::as_str)
    }

    /// One JSON object, no trailing newline.
    pub fn to_json_line(&self, sentinels: &SentinelSet) -> String {
        let line = RecordLine {
            id: self.id.clone(),
            spec: self.spec.clone(),
            trajectory: to_text(&self.trajectory, sentinels),
            meta: self.meta.clone(),
        };
        serde_json::to_string(&line).expect("record serializes")
    }

    /// Parses a record line; the trajectory text is read with the profile
    /// named in `meta.profile`.
    pub fn from_json_line(line: &str, sentinels: &SentinelSet) -> Result<Self, RecordError> {
        let raw: RecordLine = serde_json::from_str(line)?;
        let trajectory = parse_text(&raw.trajectory, raw.meta.profile, sentinels, Mode::Strict)?;
        Ok(Self {
            id: raw.id,
            spec: raw.spec,
            trajectory,
            meta: raw.meta,
        })
    }
}
