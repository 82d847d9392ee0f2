//! Token-level diffing of function pairs into contiguous hunks.

use similar::{capture_diff_slices, Algorithm, DiffOp};

use super::{ForgeError, FunctionPair};
use crate::token::{tokenize, Profile, Token};

/// A contiguous edit: `vul[start..end]` (= `del_span`) becomes `ins_span`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffHunk {
    pub start: usize,
    pub end: usize,
    pub del_span: Vec<Token>,
    pub ins_span: Vec<Token>,
}

impl DiffHunk {
    pub fn is_pure_insertion(&self) -> bool {
        self.del_span.is_empty()
    }
}

/// Old and new ranges of one change group.
#[derive(Debug, Clone, Copy)]
struct Group {
    old: (usize, usize),
    new: (usize, usize),
}

/// Maximal runs of non-equal ops in a minimal (Myers) diff, merged across
/// runs of fewer than `merge_gap` common tokens.
fn change_groups(vul: &[Token], patched: &[Token], merge_gap: usize) -> Vec<Group> {
    let mut groups: Vec<Group> = Vec::new();
    let mut pending: Option<Group> = None;
    let mut gap = usize::MAX;
    // positions are tracked from op lengths; reported insert indices are not
    // always the running old position
    let (mut o, mut n) = (0, 0);
    for op in capture_diff_slices(Algorithm::Myers, vul, patched) {
        let (old_len, new_len) = (op.old_range().len(), op.new_range().len());
        if let DiffOp::Equal { len, .. } = op {
            if let Some(g) = pending.take() {
                groups.push(g);
            }
            gap = len;
            o += len;
            n += len;
            continue;
        }
        let group = match pending.take() {
            Some(g) => g,
            None if gap < merge_gap && !groups.is_empty() => groups.pop().expect("non-empty"),
            None => Group {
                old: (o, o),
                new: (n, n),
            },
        };
        o += old_len;
        n += new_len;
        pending = Some(Group {
            old: (group.old.0, o),
            new: (group.new.0, n),
        });
    }
    groups.extend(pending);
    groups
}

/// Minimal token diff. Change groups separated by fewer than `merge_gap`
/// common tokens are merged; zero-deletion hunks get one common token as
/// anchor (the preceding one, or the following one at position 0).
pub fn diff_tokens(
    vul: &[Token],
    patched: &[Token],
    merge_gap: usize,
) -> Result<Vec<DiffHunk>, ForgeError> {
    if vul == patched {
        return Err(ForgeError::IdenticalPair);
    }
    if vul.is_empty() {
        return Err(ForgeError::EmptyVulnerable);
    }
    let mut anchored: Vec<Group> = Vec::new();
    for mut g in change_groups(vul, patched, merge_gap) {
        if g.old.0 == g.old.1 {
            if g.old.0 > 0 {
                g.old.0 -= 1;
                g.new.0 -= 1;
            } else {
                g.old.1 += 1;
                g.new.1 += 1;
            }
        }
        // two insertions around one common token may now share it
        match anchored.last_mut() {
            Some(prev) if g.old.0 < prev.old.1 => {
                prev.old.1 = prev.old.1.max(g.old.1);
                prev.new.1 = prev.new.1.max(g.new.1);
            }
            _ => anchored.push(g),
        }
    }
    Ok(anchored
        .into_iter()
        .map(|g| DiffHunk {
            start: g.old.0,
            end: g.old.1,
            del_span: vul[g.old.0..g.old.1].to_vec(),
            ins_span: patched[g.new.0..g.new.1].to_vec(),
        })
        .collect())
}

pub fn diff_function_pair(
    pair: &FunctionPair,
    profile: Profile,
    merge_gap: usize,
) -> Result<Vec<DiffHunk>, ForgeError> {
    if pair.vulnerable == pair.patched {
        return Err(ForgeError::IdenticalPair);
    }
    diff_tokens(
        &tokenize(&pair.vulnerable, profile),
        &tokenize(&pair.patched, profile),
        merge_gap,
    )
}

/// Replaces every hunk window by its insertion. Hunks must be sorted and
/// disjoint.
pub fn apply_hunks(vul: &[Token], hunks: &[DiffHunk]) -> Result<Vec<Token>, ForgeError> {
    let mut out = Vec::with_capacity(vul.len());
    let mut cursor = 0;
    for (i, h) in hunks.iter().enumerate() {
        if h.start < cursor
            || h.end > vul.len()
            || h.start > h.end
            || vul[h.start..h.end] != h.del_span[..]
        {
            return Err(ForgeError::InvalidHunk { hunk: i });
        }
        out.extend_from_slice(&vul[cursor..h.start]);
        out.extend_from_slice(&h.ins_span);
        cursor = h.end;
    }
    out.extend_from_slice(&vul[cursor..]);
    Ok(out)
}
