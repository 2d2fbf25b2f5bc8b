//! Bilevel truss topology and sizing optimization.
//!
//! The upper level decides which member groups of a ground structure to
//! include (a bit string), the lower level sizes the included groups from
//! a discrete catalog. Two upper-level drivers are provided: exhaustive
//! enumeration of the topology space for small instances, and a
//! novelty-driven binary particle swarm that explores topologies by
//! maximising distance to previously visited designs instead of weight.
//!
//! Modules follow the pipeline: [`instance`] defines and loads problems,
//! [`analysis`] runs direct-stiffness evaluations, [`feasibility`] covers
//! upper-level constraints and repair, [`sizing`] is the lower-level
//! discrete optimizer and [`search`] hosts the two upper-level drivers.

pub mod analysis;
pub mod feasibility;
pub mod instance;
pub mod search;
pub mod seed;
pub mod sizing;

pub use analysis::{
    analyze, check_internal_stability, evaluate_constraints, weight, AnalysisError, AnalysisResult,
    ConstraintReport, StructuralModel, CONSTRAINT_TOL,
};
pub use feasibility::{check_g1, check_g2, dominates, repair, violations, RepairError, ViolationVector};
pub use instance::{
    AxialLimits, DisplacementLimit, Instance, InstanceError, LoadCase, Member, Node, PointLoad,
    StressLimit, Topology,
};
pub use search::{
    enumerate, flip_positions, novelty, run_nbpso, top_k_distinct, transfer, update_velocity,
    EnumerateConfig, EvaluatedDesign, FlipRule, NoveltyArchive, Particle, SearchError, SearchParams,
    SearchRun,
};
pub use sizing::{
    mapping_adjust, optimize_sizing, probabilistic_round, resize_near_boundary, LowerConfig,
    SizingError, SizingSolution,
};
