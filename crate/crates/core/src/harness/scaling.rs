//! Overhead as a function of context length.

use rayon::prelude::*;
use serde::Serialize;

use super::cost::{cost_agent, AgentSteps};
use super::policy::Policy;
use super::session::{decode_session, SessionConfig};
use super::HarnessError;
use crate::episode::{serialize, Item, RevisionEpisode, SentinelSet, Trajectory};
use crate::token::Token;

pub const CSV_HEADER: &str = "L,delta_agent,delta_ours_measured,episodes";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ScalingRow {
    #[serde(rename = "L")]
    pub l: u64,
    pub delta_agent: u64,
    pub delta_ours_measured: u64,
    pub episodes: u64,
}

/// Draft of `n_v` distinct tokens followed by one episode rewriting the
/// whole draft into `n_s` tokens. No episode when `n_v = 0`.
pub fn synthetic_script(n_v: u64, n_s: u64, sentinels: &SentinelSet) -> Vec<Token> {
    let draft: Vec<Token> = (0..n_v)
        .map(|i| Token::from(format!("v{i} ").as_str()))
        .collect();
    let patch: Vec<Token> = (0..n_s)
        .map(|i| Token::from(format!("s{i} ").as_str()))
        .collect();
    let mut items: Vec<Item> = draft.iter().cloned().map(Item::Code).collect();
    if let Ok(episode) = RevisionEpisode::new(draft, patch) {
        items.push(Item::Episode(episode));
    }
    serialize(&Trajectory::new(items), sentinels)
}

/// For each `L`, the 3-step agent overhead `L + 2N_v` next to the measured
/// overhead of a decoded single-episode session. Rows are sorted by `L`.
pub fn scaling_experiment(
    l_values: &[u64],
    n_v: u64,
    n_s: u64,
) -> Result<Vec<ScalingRow>, HarnessError> {
    let sentinels = SentinelSet::canonical();
    let policy = Policy::Scripted(synthetic_script(n_v, n_s, &sentinels));
    let mut rows = l_values
        .par_iter()
        .map(|&l| {
            let config = SessionConfig {
                context_len: l,
                ..SessionConfig::default()
            };
            let session = decode_session(&policy, &config)?;
            Ok(ScalingRow {
                l,
                delta_agent: cost_agent(l, n_v, n_s, AgentSteps::Three, 0, &[]).idealized_overhead,
                delta_ours_measured: session.cost.measured_overhead,
                episodes: session.cost.episodes,
            })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    rows.sort_by_key(|r| r.l);
    Ok(rows)
}

pub fn to_csv(rows: &[ScalingRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.l, r.delta_agent, r.delta_ours_measured, r.episodes
        ));
    }
    out
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.abs()
}

/// Least-squares slope of `y` on `x` as a reduced fraction `(num, den)`,
/// `den > 0`. `None` when all `x` coincide.
pub fn exact_slope(points: &[(u64, u64)]) -> Option<(i128, i128)> {
    let n = points.len() as i128;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0i128, 0i128, 0i128, 0i128);
    for &(x, y) in points {
        let (x, y) = (x as i128, y as i128);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let den = n * sxx - sx * sx;
    if den == 0 {
        return None;
    }
    let num = n * sxy - sx * sy;
    let g = gcd(num, den).max(1);
    let sign = den.signum();
    Some((sign * num / g, sign * den / g))
}
