//! Linearizing a function pair into a revision trajectory.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{apply_hunks, DiffHunk, ForgeError, FunctionPair, RecordMeta, Tier, TrajectoryRecord};
use crate::episode::{serialize, Item, Mode, RevisionEpisode, SentinelSet, Trajectory};
use crate::render::render;
use crate::scope::locate_rightmost;
use crate::token::{tokenize, Profile, Token};

pub const DEFAULT_LATENCY_K: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildOptions {
    pub profile: Profile,
    /// Maximum number of code tokens between a hunk's window end and its trigger.
    pub latency_k: usize,
    pub seed: u64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            profile: Profile::Char,
            latency_k: DEFAULT_LATENCY_K,
            seed: 0,
        }
    }
}

/// Per-record RNG seed, independent of processing order.
pub fn record_seed(seed: u64, id: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(id.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Emits the vulnerable tokens in order and, for each hunk, an episode
/// `E(s = del_span, s' = ins_span)` after a latency of `d ~ U{0..k}` further
/// code tokens. `d` is clamped so the trigger precedes the next hunk's window
/// and the end of the function.
///
/// When the scope would resolve to a later occurrence than the hunk's own
/// window, it is widened leftward with buffer context (the patch gets the
/// same prefix) until it does.
pub fn build_trajectory(
    pair: &FunctionPair,
    hunks: &[DiffHunk],
    spec: &str,
    tier: Tier,
    options: &BuildOptions,
) -> Result<TrajectoryRecord, ForgeError> {
    let sentinels = SentinelSet::canonical();
    if sentinels.occurs_in(&pair.vulnerable) || sentinels.occurs_in(&pair.patched) {
        return Err(ForgeError::SentinelCollision);
    }
    let vul = tokenize(&pair.vulnerable, options.profile);
    let patched = tokenize(&pair.patched, options.profile);
    if apply_hunks(&vul, hunks)? != patched {
        return Err(ForgeError::RoundTripMismatch);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(record_seed(options.seed, &pair.id));
    let mut items: Vec<Item> = Vec::with_capacity(vul.len() + hunks.len());
    // what the renderer will hold at each point
    let mut buffer: Vec<Token> = Vec::with_capacity(vul.len());
    let mut cursor = 0;
    let mut shift: isize = 0;

    let emit = |items: &mut Vec<Item>, buffer: &mut Vec<Token>, tokens: &[Token]| {
        for t in tokens {
            items.push(Item::Code(t.clone()));
            buffer.push(t.clone());
        }
    };

    for (i, hunk) in hunks.iter().enumerate() {
        emit(&mut items, &mut buffer, &vul[cursor..hunk.end]);
        cursor = hunk.end;

        let limit = hunks.get(i + 1).map_or(vul.len(), |next| next.start);
        let drawn = rng.random_range(0..=options.latency_k);
        let delay = drawn.min(limit - hunk.end);
        emit(&mut items, &mut buffer, &vul[cursor..cursor + delay]);
        cursor += delay;

        let end = (hunk.end as isize + shift) as usize;
        let start = end - hunk.del_span.len();
        debug_assert_eq!(&buffer[start..end], hunk.del_span.as_slice());

        let mut scope_start = start;
        while locate_rightmost(&buffer, &buffer[scope_start..end])
            .map_err(|_| ForgeError::InvalidHunk { hunk: i })?
            .end
            != end
        {
            if scope_start == 0 {
                return Err(ForgeError::ScopeAmbiguityUnresolvable { hunk: i });
            }
            scope_start -= 1;
        }

        let context = &buffer[scope_start..start];
        let scope = buffer[scope_start..end].to_vec();
        let patch: Vec<Token> = context.iter().chain(&hunk.ins_span).cloned().collect();
        buffer.splice(start..end, hunk.ins_span.iter().cloned());
        items.push(Item::Episode(
            RevisionEpisode::new(scope, patch).expect("del_span is non-empty"),
        ));
        shift += hunk.ins_span.len() as isize - hunk.del_span.len() as isize;
    }
    emit(&mut items, &mut buffer, &vul[cursor..]);

    let trajectory = Trajectory::new(items);
    let (rendered, _) = render(
        &serialize(&trajectory, &sentinels),
        &sentinels,
        Mode::Strict,
    )
    .map_err(|_| ForgeError::RoundTripMismatch)?;
    if rendered != patched {
        return Err(ForgeError::RoundTripMismatch);
    }

    let mut provenance = pair.meta.clone();
    provenance.remove("tier");
    provenance.remove("latency_k");
    provenance.remove("profile");
    Ok(TrajectoryRecord {
        id: pair.id.clone(),
        spec: spec.to_string(),
        trajectory,
        meta: RecordMeta {
            tier,
            latency_k: options.latency_k,
            profile: options.profile,
            provenance,
        },
    })
}
