//! Local blinded ranking service.
//!
//! Annotators receive one image at a time with the candidate cut-outs behind
//! shuffled labels (A, B, ...). Submitted orderings are mapped back to model
//! names, appended to a JSON-lines file and fed to the concordance report.
//!
//! - [`session`]: task sequencing, label permutations, persistence
//! - [`composite`]: checkerboard previews of predicted alpha mattes
//! - [`http`]: the JSON/HTTP surface

pub mod composite;
pub mod http;
pub mod session;

pub use http::{router, serve, RankingSubmission};
pub use session::{
    Acknowledgment, Candidate, RankingTask, ReviewError, ReviewSession, SessionConfig, TaskResponse,
};
