//! Kinetic Monte Carlo: trajectories and hitting times, the stirring
//! coupling, the entrance-counting martingale and hydrodynamic averages.

mod counting;
mod coupling;
mod hydro;
mod kmc;
mod rng;
mod walk;

pub use counting::{counting_martingale, counting_martingale_with, rate_into_set, CountingSample};
pub use coupling::{
    coupled_rate, coupled_step, coupling_mixing_bound, coupling_time, log_grid, marginal_fidelity_pvalue, wilson_upper, CoupledEvent,
    CoupledState, CouplingBound, Exceedance,
};
pub use hydro::{hydrodynamic_trajectory, smoothed_sup_deviation, window_average, HydroFrame};
pub use kmc::{
    kmc_advance, kmc_step, ks_exponential, ks_exponential_values, sample_hitting_time, sample_hitting_time_with,
    mean_and_error, run_replicas, sample_many, HitOutcome, HittingSampleSet, Initial, Normalizer, SetMembership,
};
pub use rng::RngStream;
pub use walk::{absorbed_walk_mean, absorbed_walk_means};
