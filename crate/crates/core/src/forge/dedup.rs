//! Two-pass deduplication: exact commit duplicates, then near duplicates by
//! diff signature.

use std::collections::HashSet;

use serde::Serialize;
use sha2::{Digest, Sha256};
use similar::{DiffTag, TextDiff};

use super::TrajectoryRecord;
use crate::episode::{serialize, Mode, SentinelSet};
use crate::render::render;
use crate::token::detokenize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct DedupStats {
    pub commit_duplicates: usize,
    pub signature_duplicates: usize,
}

fn normalize_line(line: &str) -> String {
    line.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// SHA-256 over the whitespace-collapsed removed and added lines of the
/// record's edit, in source order. `None` for episode-free records.
pub fn diff_signature(record: &TrajectoryRecord) -> Option<String> {
    if record.trajectory.episode_count() == 0 {
        return None;
    }
    let sentinels = SentinelSet::canonical();
    let before: Vec<_> = record.trajectory.code_tokens().cloned().collect();
    let before = detokenize(&before);
    let after = render(
        &serialize(&record.trajectory, &sentinels),
        &sentinels,
        Mode::Lenient,
    )
    .map(|(buf, _)| detokenize(&buf))
    .unwrap_or_default();

    let diff = TextDiff::from_lines(&before, &after);
    let mut canon = String::new();
    for op in diff.ops() {
        if op.tag() == DiffTag::Equal {
            continue;
        }
        canon.push_str("@@\n");
        for line in &diff.old_slices()[op.old_range()] {
            canon.push('-');
            canon.push_str(&normalize_line(line));
            canon.push('\n');
        }
        for line in &diff.new_slices()[op.new_range()] {
            canon.push('+');
            canon.push_str(&normalize_line(line));
            canon.push('\n');
        }
    }
    Some(hex::encode(Sha256::digest(canon.as_bytes())))
}

/// First occurrence wins; surviving records keep their order.
///
/// The commit pass keys on `(source_commit, function)` so that the several
/// functions of one multi-function commit are not collapsed; records without
/// a `function` entry key on the commit alone.
pub fn dedup(records: Vec<TrajectoryRecord>) -> (Vec<TrajectoryRecord>, DedupStats) {
    let mut stats = DedupStats::default();
    let mut commits = HashSet::new();
    let mut signatures = HashSet::new();
    let mut out = Vec::with_capacity(records.len());
    for record in records {
        if let Some(commit) = record.source_commit() {
            let function = record.meta.provenance.get("function").cloned();
            if !commits.insert((commit.to_string(), function)) {
                stats.commit_duplicates += 1;
                continue;
            }
        }
        out.push(record);
    }
    let records = std::mem::take(&mut out);
    for record in records {
        if let Some(sig) = diff_signature(&record) {
            if !signatures.insert(sig) {
                stats.signature_duplicates += 1;
                continue;
            }
        }
        out.push(record);
    }
    (out, stats)
}
