//! Lifted parent-to-child propagation. Each top region's belief is computed
//! by exact lifted inference on one representative copy with incoming
//! messages attached as potentials; messages to atom groups shared by whole
//! regions travel in count space.

mod engine;
mod message;

pub use engine::{run_lgbp, EngineOptions, LgbpResult, LgbpState};
pub use message::{bernoulli_kl, damp_weighted, kl_divergence, Message};
