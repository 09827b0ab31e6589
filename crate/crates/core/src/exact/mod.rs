//! Exact analysis of the finite chain: generator assembly, stationary and
//! adjoint laws, hitting means, potentials and capacities, semigroup
//! quantities and the enlarged chain.

mod conditions;
mod enlarge;
mod generator;
pub mod linalg;
mod potential;
mod stationary;
mod transient;

pub use conditions::{check_theorem_conditions, ConditionOptions, ConditionReport};
pub use enlarge::{enlarge, lift};
pub use generator::{
    build_generator, build_generator_capped, configuration_of, RateMatrix, StateSet, DEFAULT_STATE_CAP,
};
pub use potential::{
    average_jump_rate, capacity, capacity_representation_mean, conditioned_distribution, density_l2_norm,
    equilibrium_potential, l2_norm, mean_hitting_times, outer_boundary, representation_terms,
    stationary_mean_hitting, EquilibriumPotential, RepresentationTerm,
};
pub use stationary::{
    adjoint_rates, bernoulli_product, detailed_balance_defect, site_densities, solve_stationary,
    StationaryDistribution,
};
pub use transient::{
    hitting_cdf_exact, mixing_time, mixing_time_capped, quantile_time, relaxation_time, worst_case_tv,
    HittingQuantile, MixingTime, MIXING_STATE_CAP, RELAXATION_STATE_CAP,
};
