//! Token cost accounting for single-pass revision and post-hoc agents.
//!
//! Overheads are measured against an ideal single pass that reads the
//! context once and writes only the secure code: `L + N_s`.

use serde::{Deserialize, Serialize};

use crate::episode::RevisionEpisode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CostReport {
    #[serde(rename = "L")]
    pub l: u64,
    pub n_v: u64,
    pub n_s: u64,
    pub measured_input: u64,
    pub measured_output: u64,
    pub idealized_overhead: u64,
    pub measured_overhead: u64,
    pub episodes: u64,
    pub total: u64,
}

/// Agent workflows: generate→detect→repair, or with a separate localization
/// read before the repair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgentSteps {
    Three,
    Four,
}

impl TryFrom<u8> for AgentSteps {
    type Error = String;

    fn try_from(n: u8) -> Result<Self, Self::Error> {
        match n {
            3 => Ok(AgentSteps::Three),
            4 => Ok(AgentSteps::Four),
            _ => Err(format!("agent steps must be 3 or 4, got {n}")),
        }
    }
}

/// Post-hoc agent cost. Every step after generation re-reads context and
/// draft; `critic_prompts` are added to the input of those steps.
///
/// 3-step: `2L + 2N_v + N_s`. 4-step: `3L + 3N_v + N_s + loc_output`.
pub fn cost_agent(
    l: u64,
    n_v: u64,
    n_s: u64,
    steps: AgentSteps,
    loc_output: u64,
    critic_prompts: &[u64],
) -> CostReport {
    let prompts: u64 = critic_prompts.iter().sum();
    let (input, output) = match steps {
        AgentSteps::Three => (l + (l + n_v), n_v + n_s),
        AgentSteps::Four => (l + 2 * (l + n_v), n_v + loc_output + n_s),
    };
    let input = input + prompts;
    let total = input + output;
    let overhead = total - (l + n_s);
    CostReport {
        l,
        n_v,
        n_s,
        measured_input: input,
        measured_output: output,
        idealized_overhead: overhead,
        measured_overhead: overhead,
        episodes: 0,
        total,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SorAccounting {
    /// One trigger token per revision.
    Idealized,
    /// Every token of the episode plus the code that follows it.
    Measured,
}

/// Single-pass cost. Idealized: `L + 1 + N_s`. Measured:
/// `L + (|s| + |s'| + 5) + n_resume`, with overhead `|s| + |s'| + 5`.
pub fn cost_sor(
    l: u64,
    n_s: u64,
    accounting: SorAccounting,
    episode: Option<&RevisionEpisode>,
    n_resume: u64,
) -> CostReport {
    match accounting {
        SorAccounting::Idealized => CostReport {
            l,
            n_s,
            measured_input: l,
            measured_output: 1 + n_s,
            idealized_overhead: 1,
            measured_overhead: 1,
            episodes: 1,
            total: l + 1 + n_s,
            ..CostReport::default()
        },
        SorAccounting::Measured => {
            let revision = episode.map_or(0, |e| e.serialized_len() as u64);
            CostReport {
                l,
                n_s: episode.map_or(n_s, |e| e.patch().len() as u64),
                measured_input: l,
                measured_output: revision + n_resume,
                idealized_overhead: u64::from(episode.is_some()),
                measured_overhead: revision,
                episodes: u64::from(episode.is_some()),
                total: l + revision + n_resume,
                ..CostReport::default()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::token::Token;

    #[test]
    fn three_step_agent() {
        let r = cost_agent(100, 10, 5, AgentSteps::Three, 0, &[]);
        assert_eq!(r.total, 225);
        assert_eq!(r.idealized_overhead, 100 + 2 * 10);
        assert_eq!(cost_agent(0, 0, 0, AgentSteps::Three, 0, &[]).total, 0);
    }

    #[test]
    fn four_step_agent() {
        let r = cost_agent(100, 10, 5, AgentSteps::Four, 10, &[]);
        assert_eq!(r.total, 345);
        assert_eq!(r.measured_input, 320);
    }

    #[test]
    fn critic_prompts_add_to_input() {
        let r = cost_agent(100, 10, 5, AgentSteps::Three, 0, &[7]);
        assert_eq!(r.total, 232);
        let r = cost_agent(100, 10, 5, AgentSteps::Four, 10, &[7, 3]);
        assert_eq!(r.total, 355);
    }

    #[test]
    fn single_pass_idealized() {
        let r = cost_sor(100, 5, SorAccounting::Idealized, None, 0);
        assert_eq!((r.total, r.idealized_overhead), (106, 1));
    }

    #[test]
    fn overhead_ratio_at_long_context() {
        let agent = cost_agent(1000, 50, 5, AgentSteps::Three, 0, &[]);
        let ours = cost_sor(1000, 5, SorAccounting::Idealized, None, 0);
        assert_eq!(agent.idealized_overhead, 1100);
        assert_eq!(agent.idealized_overhead / ours.idealized_overhead, 1100);
    }

    #[test]
    fn measured_single_pass() {
        let t = |s: &str| Token::from(s);
        let ep = RevisionEpisode::new(vec![t("gets"), t("(b)")], vec![t("fgets"), t("(b,n,f)")])
            .unwrap();
        let r = cost_sor(100, 0, SorAccounting::Measured, Some(&ep), 3);
        assert_eq!(r.measured_overhead, 9);
        assert_eq!(r.total, 112);
        let none = cost_sor(100, 0, SorAccounting::Measured, None, 20);
        assert_eq!((none.total, none.measured_overhead), (120, 0));
    }
}
