//! Simulated decoding sessions and token cost accounting.
//!
//! No model is involved: a [`Policy`] proposes tokens, the scope mask
//! filters them during localization, and the renderer consumes the accepted
//! stream while costs are counted.

pub mod cost;
pub mod embed;
pub mod policy;
pub mod scaling;
pub mod session;

use crate::render::RenderError;
use crate::token::Token;

pub use cost::{cost_agent, cost_sor, AgentSteps, CostReport, SorAccounting};
pub use embed::{semantic_init, EmbeddingInitSpec};
pub use policy::{Policy, TriggerBias, WeightTable, EOS};
pub use scaling::{exact_slope, scaling_experiment, to_csv, ScalingRow, CSV_HEADER};
pub use session::{decode_session, SessionConfig, SessionOutput};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("token {index} ({token:?}) violates the scope mask")]
    InvalidScript { index: usize, token: Token },
    #[error("policy ended inside an episode after {index} tokens")]
    PolicyExhausted { index: usize },
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("weight table: {0}")]
    InvalidWeightTable(String),
    #[error("script: {0}")]
    MalformedScript(String),
    #[error("description has no vectors")]
    EmptyDescription,
    #[error("vector {index} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("weights: {0}")]
    InvalidWeights(String),
}
