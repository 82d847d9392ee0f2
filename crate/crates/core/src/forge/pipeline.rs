//! The end-to-end dataset build: parse → diff → tier → build → dedup → mix.
//!
//! Per-pair work runs on a rayon pool; every reduction happens afterwards on
//! id-sorted data so the output does not depend on the worker count.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    build_trajectory, dedup, diff_function_pair, filter_tier, mix_corpora, BuildOptions,
    DedupStats, DiffHunk, ForgeError, FunctionPair, MixRatio, Tier, TierVerdict, TrajectoryRecord,
};
use crate::episode::SentinelSet;
use crate::token::Profile;

/// Which commits to keep and how to label them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TierSelection {
    /// Strict commits only.
    Strict,
    /// Every commit within the relaxed bounds, labelled `relaxed`.
    Relaxed,
    /// Every commit within the relaxed bounds, labelled with its tightest tier.
    #[default]
    Both,
}

impl FromStr for TierSelection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strict" => Ok(TierSelection::Strict),
            "relaxed" => Ok(TierSelection::Relaxed),
            "both" => Ok(TierSelection::Both),
            other => Err(format!(
                "unknown tier selection `{other}` (strict|relaxed|both)"
            )),
        }
    }
}

impl fmt::Display for TierSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TierSelection::Strict => "strict",
            TierSelection::Relaxed => "relaxed",
            TierSelection::Both => "both",
        })
    }
}

impl TierSelection {
    fn label(self, verdict: TierVerdict) -> Option<Tier> {
        match (self, verdict) {
            (_, TierVerdict::Rejected) => None,
            (TierSelection::Strict, TierVerdict::Strict) => Some(Tier::Strict),
            (TierSelection::Strict, TierVerdict::Relaxed) => None,
            (TierSelection::Relaxed, _) => Some(Tier::Relaxed),
            (TierSelection::Both, TierVerdict::Strict) => Some(Tier::Strict),
            (TierSelection::Both, TierVerdict::Relaxed) => Some(Tier::Relaxed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PipelineConfig {
    pub profile: Profile,
    pub tier: TierSelection,
    pub latency_k: usize,
    pub seed: u64,
    pub merge_gap: usize,
    pub ratio: Option<MixRatio>,
    /// Worker threads for the per-pair stages; `None` uses available parallelism.
    pub workers: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            profile: Profile::Char,
            tier: TierSelection::Both,
            latency_k: super::build::DEFAULT_LATENCY_K,
            seed: 0,
            merge_gap: 0,
            ratio: None,
            workers: None,
        }
    }
}

/// Counts reported alongside the dataset.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Summary {
    pub pairs_read: usize,
    pub malformed_lines: usize,
    pub identical_pairs: usize,
    pub unusable_pairs: usize,
    pub commits_strict: usize,
    pub commits_relaxed: usize,
    pub commits_rejected: usize,
    pub pairs_filtered_out: usize,
    pub scope_ambiguity_skips: usize,
    pub records_built: usize,
    pub dedup: DedupStats,
    pub revision_records: usize,
    pub general_read: usize,
    pub general_malformed: usize,
    pub general_with_episodes: usize,
    pub remainder_revision: usize,
    pub remainder_general: usize,
    pub records_emitted: usize,
    pub records_by_tier: BTreeMap<String, usize>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub records: Vec<TrajectoryRecord>,
    pub summary: Summary,
}

impl PipelineOutput {
    /// The dataset as JSONL, one record per line.
    pub fn to_jsonl(&self) -> String {
        let sentinels = SentinelSet::canonical();
        let mut out = String::new();
        for record in &self.records {
            out.push_str(&record.to_json_line(&sentinels));
            out.push('\n');
        }
        out
    }
}

/// Input pair line: the pair plus an optional opaque specification.
#[derive(Deserialize)]
struct PairLine {
    #[serde(flatten)]
    pair: FunctionPair,
    #[serde(default)]
    spec: String,
}

fn in_pool<R: Send>(workers: Option<usize>, job: impl FnOnce() -> R + Send) -> R {
    match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("thread pool")
            .install(job),
        None => job(),
    }
}

/// Runs the full build over JSONL text inputs.
pub fn run_pipeline(
    pairs_jsonl: &str,
    general_jsonl: Option<&str>,
    config: &PipelineConfig,
) -> PipelineOutput {
    let mut summary = Summary::default();

    let mut pairs: Vec<(FunctionPair, String)> = Vec::new();
    for line in pairs_jsonl.lines().filter(|l| !l.trim().is_empty()) {
        match serde_json::from_str::<PairLine>(line) {
            Ok(p) => pairs.push((p.pair, p.spec)),
            Err(_) => summary.malformed_lines += 1,
        }
    }
    summary.pairs_read = pairs.len();
    pairs.sort_by(|a, b| a.0.id.cmp(&b.0.id));

    let diffed: Vec<Result<Vec<DiffHunk>, ForgeError>> = in_pool(config.workers, || {
        pairs
            .par_iter()
            .map(|(pair, _)| diff_function_pair(pair, config.profile, config.merge_gap))
            .collect()
    });

    // commit → hunk counts of its usable functions
    let mut commits: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    let mut usable: Vec<(usize, Vec<DiffHunk>)> = Vec::new();
    for (i, result) in diffed.into_iter().enumerate() {
        match result {
            Ok(hunks) => {
                commits
                    .entry(pairs[i].0.commit_key())
                    .or_default()
                    .push(hunks.len());
                usable.push((i, hunks));
            }
            Err(ForgeError::IdenticalPair) => summary.identical_pairs += 1,
            Err(_) => summary.unusable_pairs += 1,
        }
    }
    let verdicts: BTreeMap<&str, TierVerdict> = commits
        .iter()
        .map(|(commit, counts)| (*commit, filter_tier(counts)))
        .collect();
    for verdict in verdicts.values() {
        match verdict {
            TierVerdict::Strict => summary.commits_strict += 1,
            TierVerdict::Relaxed => summary.commits_relaxed += 1,
            TierVerdict::Rejected => summary.commits_rejected += 1,
        }
    }

    let selected: Vec<(usize, Vec<DiffHunk>, Tier)> = usable
        .into_iter()
        .filter_map(|(i, hunks)| {
            let tier = config.tier.label(verdicts[pairs[i].0.commit_key()]);
            if tier.is_none() {
                summary.pairs_filtered_out += 1;
            }
            tier.map(|t| (i, hunks, t))
        })
        .collect();

    let options = BuildOptions {
        profile: config.profile,
        latency_k: config.latency_k,
        seed: config.seed,
    };
    let built: Vec<Result<TrajectoryRecord, ForgeError>> = in_pool(config.workers, || {
        selected
            .par_iter()
            .map(|(i, hunks, tier)| {
                let (pair, spec) = &pairs[*i];
                build_trajectory(pair, hunks, spec, *tier, &options)
            })
            .collect()
    });

    let mut records = Vec::with_capacity(built.len());
    for result in built {
        match result {
            Ok(r) => records.push(r),
            Err(ForgeError::ScopeAmbiguityUnresolvable { .. }) => {
                summary.scope_ambiguity_skips += 1
            }
            Err(_) => summary.unusable_pairs += 1,
        }
    }
    summary.records_built = records.len();

    records.sort_by(|a, b| a.id.cmp(&b.id));
    let (records, stats) = dedup(records);
    summary.dedup = stats;
    summary.revision_records = records.len();

    let records = match (config.ratio, general_jsonl) {
        (Some(ratio), Some(general_text)) => {
            let sentinels = SentinelSet::canonical();
            let mut general = Vec::new();
            for line in general_text.lines().filter(|l| !l.trim().is_empty()) {
                match TrajectoryRecord::from_json_line(line, &sentinels) {
                    Ok(r) if r.trajectory.episode_count() > 0 => summary.general_with_episodes += 1,
                    Ok(mut r) => {
                        r.meta.tier = Tier::General;
                        general.push(r);
                    }
                    Err(_) => summary.general_malformed += 1,
                }
            }
            summary.general_read = general.len();
            general.sort_by(|a, b| a.id.cmp(&b.id));
            let mixed = mix_corpora(records, general, ratio);
            summary.remainder_revision = mixed.remainder_revision;
            summary.remainder_general = mixed.remainder_general;
            mixed.records
        }
        _ => records,
    };

    summary.records_emitted = records.len();
    for r in &records {
        *summary
            .records_by_tier
            .entry(r.meta.tier.to_string())
            .or_default() += 1;
    }
    PipelineOutput { records, summary }
}
