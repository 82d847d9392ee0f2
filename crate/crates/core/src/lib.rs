//! Single-pass revision decoding without a model.
//!
//! A generated program is a flat stream of code tokens interleaved with
//! revision episodes (`trigger ⊕ <scope> s </scope> ⊕ <patch> s' </patch>`).
//! This crate provides the pieces needed to produce, check and consume such
//! streams:
//!
//! * [`episode`]: the augmented vocabulary and stream (de)serialization.
//! * [`scope`]: substring-constrained masking for scope localization.
//! * [`render`]: the deterministic renderer that compiles a stream into the
//!   final program.
//! * [`forge`]: turning vulnerable/patched function pairs into training
//!   trajectories.
//! * [`harness`]: simulated decoding sessions and token cost accounting.
//! * [`audit`]: pre/post-revision well-formedness statistics.

pub mod audit;
pub mod episode;
pub mod forge;
pub mod harness;
pub mod render;
pub mod scope;
pub mod token;

pub use episode::{Item, Mode, RevisionEpisode, SentinelKind, SentinelSet, Trajectory};
pub use token::{detokenize, tokenize, Profile, Token};
