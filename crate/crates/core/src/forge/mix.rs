//! Interleaving revision trajectories with general instruction data.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// `revision:general` block sizes, both positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MixRatio {
    pub revision: usize,
    pub general: usize,
}

impl MixRatio {
    pub fn new(revision: usize, general: usize) -> Option<Self> {
        (revision > 0 && general > 0).then_some(Self { revision, general })
    }
}

impl fmt::Display for MixRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.revision, self.general)
    }
}

impl FromStr for MixRatio {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || format!("invalid mixing ratio `{s}` (expected r:g with positive integers)");
        let (r, g) = s.split_once(':').ok_or_else(err)?;
        let r = r.trim().parse().map_err(|_| err())?;
        let g = g.trim().parse().map_err(|_| err())?;
        MixRatio::new(r, g).ok_or_else(err)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixOutcome<T> {
    pub records: Vec<T>,
    pub remainder_revision: usize,
    pub remainder_general: usize,
}

/// Emits whole blocks of `r` revision records followed by `g` general
/// records, preserving order within each source, and stops as soon as either
/// source cannot fill its part of the next block.
pub fn mix_corpora<T>(revision: Vec<T>, general: Vec<T>, ratio: MixRatio) -> MixOutcome<T> {
    let blocks = (revision.len() / ratio.revision).min(general.len() / ratio.general);
    let used_rev = blocks * ratio.revision;
    let used_gen = blocks * ratio.general;
    let remainder_revision = revision.len() - used_rev;
    let remainder_general = general.len() - used_gen;

    let mut rev = revision.into_iter();
    let mut gen = general.into_iter();
    let mut records = Vec::with_capacity(used_rev + used_gen);
    for _ in 0..blocks {
        records.extend(rev.by_ref().take(ratio.revision));
        records.extend(gen.by_ref().take(ratio.general));
    }
    MixOutcome {
        records,
        remainder_revision,
        remainder_general,
    }
}
