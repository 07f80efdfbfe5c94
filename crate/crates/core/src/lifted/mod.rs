//! Exact lifted inference over lifted factorizations: lifted sum (count a
//! part of exchangeable atoms), lifted product (evaluate one of several
//! identical independent copies) and grounding.

mod compile;
mod eval;
mod factorization;
mod model;
mod plan;
mod query;

pub use compile::{
    compile, validate_factorization, Circuit, CircuitNode, Decomposition, Part, PartMode, PosClass,
    Symmetry, MAX_ENUM_PART, MAX_NODE_STATES,
};
pub use eval::{Evaluation, Extra};
pub use factorization::{FactorNode, LiftedFactorization, Tag};
pub use model::{Grounding, LiftedModel, ModelClause};
pub use plan::{default_factorization, enumerate_factorizations, PlanOptions};
pub use query::{
    atom_marginals, atom_positions, evaluate_z, exact_atom_marginals, jd_contains, jd_sets,
    joint_marginal, leaf_count, JdIndex, JointMarginal,
};
