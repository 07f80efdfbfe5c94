//! Markov logic networks: model types, parsing, grounding and shattering
//! into exchangeable normal form.

mod csp;
mod ground;
mod model;
mod parse;
mod shatter;

pub use csp::{solve_csp, Csp, Substitution};
pub use ground::{
    ground_atoms, ground_clause, ground_formulas, ground_literal, predicate_groundings,
    world_log_score, GroundAtom, GroundClause,
};
pub use model::{
    Constraint, Domain, DomainId, Literal, Mln, Predicate, PredicateId, Term, WeightedClause,
};
pub use parse::parse_mln;
pub use shatter::{
    atom_groups, is_enf, set_partitions, shatter_to_enf, variable_classes, AtomGroup, GroupSlot,
};
