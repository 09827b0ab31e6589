//! Microscopic model: parameters, configurations, transitions, empirical
//! density profiles, the weak metric on profiles and profile balls.

mod configuration;
mod profile;
mod set;

pub(crate) use configuration::boundary_rate;

pub use configuration::{enumerate_transitions, total_exit_rate, Configuration, Transition, TransitionKind};
pub use profile::{
    default_mesh, empirical_profile, profile_distance, site_profile, stationary_density, stationary_profile,
    DensityProfile, TestBasis, DEFAULT_BASIS_ORDER,
};
pub use set::{in_set, ProfileSet, SetIndicator};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scale and reservoir densities of the boundary driven exclusion process.
///
/// Sites are `1..=n-1`; `alpha` is the left reservoir density, `beta` the
/// right one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl ModelParams {
    pub fn new(n: usize, alpha: f64, beta: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Argument(format!("scale N must be at least 2, got {n}")));
        }
        if !(alpha > 0.0 && alpha <= beta && beta < 1.0) {
            return Err(Error::Argument(format!(
                "reservoir densities must satisfy 0 < alpha <= beta < 1, got alpha={alpha}, beta={beta}"
            )));
        }
        Ok(Self { n, alpha, beta })
    }

    /// Number of lattice sites, `N - 1`.
    pub fn sites(&self) -> usize {
        self.n - 1
    }

    /// Number of configurations, `2^(N-1)`, if it fits in a `usize`.
    pub fn state_count(&self) -> Option<usize> {
        1usize.checked_shl(self.sites() as u32)
    }

    pub fn is_reversible(&self) -> bool {
        self.alpha == self.beta
    }
}

/// Mobility `a(1 - a)`.
pub fn mobility(a: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::Domain(format!("mobility needs a density in [0,1], got {a}")));
    }
    Ok(a * (1.0 - a))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(1, 0.2, 0.8).is_err());
        assert!(ModelParams::new(4, 0.8, 0.2).is_err());
        assert!(ModelParams::new(4, 0.0, 0.2).is_err());
        assert!(ModelParams::new(4, 0.2, 1.0).is_err());
        let p = ModelParams::new(4, 0.3, 0.3).unwrap();
        assert_eq!(p.sites(), 3);
        assert_eq!(p.state_count(), Some(8));
        assert!(p.is_reversible());
    }

    #[test]
    fn mobility_values() {
        assert_eq!(mobility(0.0).unwrap(), 0.0);
        assert_eq!(mobility(1.0).unwrap(), 0.0);
        assert_eq!(mobility(0.5).unwrap(), 0.25);
        for a in [0.1, 0.27, 0.4] {
            assert!((mobility(a).unwrap() - mobility(1.0 - a).unwrap()).abs() < 1e-15);
        }
        assert!(matches!(mobility(1.2), Err(Error::Domain(_))));
        assert!(matches!(mobility(-0.1), Err(Error::Domain(_))));
    }
}
