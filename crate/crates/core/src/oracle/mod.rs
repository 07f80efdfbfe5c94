//! Propositional ground truth: brute-force inference, explicit region graphs
//! and parent-to-child generalized belief propagation.

mod brute;
mod factor_graph;
mod gbp;
mod region_graph;

pub use brute::{
    brute_force_atom_marginals, brute_force_marginal, brute_force_marginals, brute_force_z,
    brute_force_z_capped, DEFAULT_CAP,
};
pub use factor_graph::{clause_factor, ground_markov_network, Factor, FactorGraph};
pub use gbp::{damp, gbp_run, BeliefResult, GroundGbp, PropagationConfig, Schedule};
pub use region_graph::{
    validate_running_intersection, GroundRegion, GroundRegionGraph, RipViolation,
};
