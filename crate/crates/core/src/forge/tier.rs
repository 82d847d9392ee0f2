//! Commit purity tiers.

use serde::{Deserialize, Serialize};

pub const RELAXED_MAX_FUNCTIONS: usize = 5;
pub const RELAXED_MAX_HUNKS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TierVerdict {
    Strict,
    Relaxed,
    Rejected,
}

/// Classifies a commit from the hunk count of each function it touches.
/// Functions with zero hunks are not modified and do not count.
///
/// Strict: exactly one modified function with exactly one hunk. Relaxed: at
/// most five modified functions with at most five hunks each.
pub fn filter_tier(hunks_per_function: &[usize]) -> TierVerdict {
    let modified: Vec<usize> = hunks_per_function
        .iter()
        .copied()
        .filter(|&h| h > 0)
        .collect();
    match modified.as_slice() {
        [] => TierVerdict::Rejected,
        [1] => TierVerdict::Strict,
        m if m.len() <= RELAXED_MAX_FUNCTIONS && m.iter().all(|&h| h <= RELAXED_MAX_HUNKS) => {
            TierVerdict::Relaxed
        }
        _ => TierVerdict::Rejected,
    }
}
