//! Lifted region graphs: regions over first-order formulas standing for
//! families of identical ground regions, the standard GG, LG and LL
//! structures, and the ground graphs they simulate.

mod graph;
mod region;

pub use graph::{
    construct_structure, simulate_ground_graph, validate_lifted, EdgeClass, LiftedEdge,
    LiftedRegionGraph, SimulatedGraph, Structure, WITNESS_DOMAIN_SIZE,
};
pub use region::{
    group_clause, make_lifted_region, region_copies, substitute, LiftedRegion, RegionCopy,
};
