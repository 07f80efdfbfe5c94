//! Lifted generalized belief propagation for Markov logic networks.
//!
//! Region-graph belief propagation is simulated on the ground network without
//! building it: each lifted region runs exact lifted inference over one
//! representative grounding, and regions exchange either per-atom messages or
//! joint count-space messages over exchangeable atom groups.

pub mod error;
pub mod experiments;
pub mod lgbp;
pub mod lifted;
pub mod mln;
pub mod numeric;
pub mod oracle;
pub mod regions;

pub use error::{Error, Result};
