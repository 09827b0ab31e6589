//! Boundary driven symmetric simple exclusion process on `{1, ..., N-1}`.
//!
//! * [`model`]: configurations, transitions, empirical profiles, the weak
//!   metric and profile balls.
//! * [`exact`]: finite-state analysis of the generator (stationary law,
//!   hitting times, capacities, mixing and relaxation times).
//! * [`sim`]: kinetic Monte Carlo, the stirring coupling, counting processes
//!   and hydrodynamic averages.
//! * [`macroscopic`]: heat flow, energy, the dynamical rate functional and
//!   quasi-potential estimates.
//! * [`experiments`]: configuration files, reports and the acceptance suite
//!   behind the `bdssep` binary.

pub mod error;
pub mod exact;
pub mod experiments;
pub mod macroscopic;
pub mod model;
pub mod sim;

pub use error::{Error, Result};
