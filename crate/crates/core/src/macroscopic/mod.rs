//! Macroscopic functionals on uniform space-time grids: the hydrodynamic
//! heat equation, the energy, the functional `J_H` and the dynamical rate
//! functional, the entropy lower bound on the quasi-potential and a
//! numerical upper estimate by path minimization.

mod functional;
mod heat;
mod path;
mod quasi;

pub use functional::{
    energy, gradient_check, j_functional, rate_functional, rate_functional_gradient, RateDiagnostics, RateFunctionalResult,
};
pub use heat::{heat_solve, heat_solve_nodes};
pub use path::{profile_nodes, SpaceTimePath, TestField};
pub use quasi::{
    pathspace_infimum_check, quasipotential_estimate, quasipotential_ladder, quasipotential_lower_bound,
    sample_set_profiles, CandidateRow, LadderStep, OptimizerOptions, PathspaceReport, QuasiPotentialEstimate,
    QuasiPotentialLadder,
};
