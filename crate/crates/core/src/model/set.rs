use serde::{Deserialize, Serialize};

use super::profile::{empirical_profile, profile_distance, stationary_profile, DensityProfile, TestBasis};
use super::{Configuration, ModelParams};
use crate::error::{Error, Result};

/// Open ball `{g : d(g, center) < radius}` in the weak metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSet {
    pub center: DensityProfile,
    pub radius: f64,
    pub basis: TestBasis,
}

impl ProfileSet {
    pub fn new(center: DensityProfile, radius: f64, basis: TestBasis) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Argument(format!("ball radius must be positive, got {radius}")));
        }
        Ok(Self { center, radius, basis })
    }

    /// Ball whose center samples `f` on the default mesh for scale `n`.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64, radius: f64, basis: TestBasis) -> Result<Self> {
        let center = DensityProfile::from_fn(super::default_mesh(n), f)?;
        Self::new(center, radius, basis)
    }

    /// `d(rho_bar, center) - radius`; positive iff the ball stays away from
    /// the stationary profile.
    pub fn separation(&self, p: &ModelParams) -> Result<f64> {
        let rho = stationary_profile(p, self.center.mesh())?;
        Ok(profile_distance(&rho, &self.center, &self.basis)? - self.radius)
    }

    pub fn is_rare(&self, p: &ModelParams) -> Result<bool> {
        Ok(self.separation(p)? > 0.0)
    }

    pub fn contains_profile(&self, g: &DensityProfile) -> Result<bool> {
        Ok(profile_distance(g, &self.center, &self.basis)? < self.radius)
    }
}

/// Whether the empirical profile of `eta` lies in the ball.
pub fn in_set(eta: &Configuration, s: &ProfileSet, p: &ModelParams) -> Result<bool> {
    let g = empirical_profile(eta, p, s.center.mesh())?;
    s.contains_profile(&g)
}

/// Precomputed membership test for one scale.
///
/// `<pi^N(eta) - center, F_k> = sum_x eta(x) c[k][x] - g[k]`, so membership
/// costs `K (N-1)` flops instead of a profile rebuild.
#[derive(Debug, Clone)]
pub struct SetIndicator {
    params: ModelParams,
    radius: f64,
    weights: Vec<f64>,
    site_coeffs: Vec<Vec<f64>>,
    center_coeffs: Vec<f64>,
}

impl SetIndicator {
    pub fn new(s: &ProfileSet, p: &ModelParams) -> Result<Self> {
        let mesh = s.center.mesh();
        if mesh % p.n != 0 {
            return Err(Error::Resolution(format!(
                "center mesh {mesh} is not a multiple of N={}",
                p.n
            )));
        }
        let table = s.basis.table(mesh);
        let sites = p.sites();
        let mut site_coeffs = vec![vec![0.0; sites]; table.len()];
        for x in 0..sites {
            let one = Configuration::from_index(1usize << x, sites);
            let prof = empirical_profile(&one, p, mesh)?;
            for (k, row) in table.iter().enumerate() {
                site_coeffs[k][x] = dot(prof.values(), row) / mesh as f64;
            }
        }
        let center_coeffs = table.iter().map(|row| dot(s.center.values(), row) / mesh as f64).collect();
        let weights = (1..=s.basis.order()).map(|k| s.basis.weight(k)).collect();
        Ok(Self {
            params: *p,
            radius: s.radius,
            weights,
            site_coeffs,
            center_coeffs,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn distance(&self, eta: &Configuration) -> f64 {
        let mut d = 0.0;
        for (k, coeffs) in self.site_coeffs.iter().enumerate() {
            let mut ip = -self.center_coeffs[k];
            for (x, c) in coeffs.iter().enumerate() {
                if eta.get(x) {
                    ip += c;
                }
            }
            d += self.weights[k] * ip.abs();
        }
        d
    }

    pub fn contains(&self, eta: &Configuration) -> bool {
        self.distance(eta) < self.radius
    }

    /// Membership of every state index `0..2^(N-1)`.
    pub fn membership_table(&self) -> Result<Vec<bool>> {
        let sites = self.params.sites();
        let count = self
            .params
            .state_count()
            .ok_or_else(|| Error::Capacity { states: usize::MAX, cap: usize::MAX })?;
        Ok((0..count).map(|i| self.contains(&Configuration::from_index(i, sites))).collect())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ball(n: usize, c: f64, r: f64) -> ProfileSet {
        ProfileSet::from_fn(n, |_| c, r, TestBasis::default()).unwrap()
    }

    #[test]
    fn own_profile_is_member() {
        let p = ModelParams::new(6, 0.3, 0.3).unwrap();
        let eta = Configuration::from_occupancy(&[1, 0, 1, 1, 0]).unwrap();
        let s = ProfileSet::new(empirical_profile(&eta, &p, 120).unwrap(), 1e-9, TestBasis::default()).unwrap();
        assert!(in_set(&eta, &s, &p).unwrap());
    }

    #[test]
    fn large_radius_contains_everything() {
        let p = ModelParams::new(5, 0.3, 0.3).unwrap();
        let s = ball(5, 0.9, 1.01);
        for i in 0..16 {
            assert!(in_set(&Configuration::from_index(i, 4), &s, &p).unwrap());
        }
    }

    #[test]
    fn full_configuration_distance_matches_closed_form() {
        // pi^N(full) = 1 on [1/2N, 1 - 1/2N]; center 0.9 everywhere
        let n = 8;
        let p = ModelParams::new(n, 0.3, 0.3).unwrap();
        let s = ball(n, 0.9, 0.05);
        let a = 0.5 / n as f64;
        let mut d = 0.0;
        for k in 1..=16usize {
            let ip = if k == 1 {
                (1.0 - 2.0 * a) - 0.9
            } else {
                let w = (k - 1) as f64 * PI;
                // int_a^{1-a} cos(w x) dx - 0.9 int_0^1 cos(w x) dx
                ((w * (1.0 - a)).sin() - (w * a).sin()) / w
            };
            d += 0.5f64.powi(k as i32) * ip.abs();
        }
        let full = Configuration::full(n - 1);
        let ind = SetIndicator::new(&s, &p).unwrap();
        let prof = empirical_profile(&full, &p, s.center.mesh()).unwrap();
        let got = profile_distance(&prof, &s.center, &s.basis).unwrap();
        // midpoint rule is not exact for cosines; the mesh keeps it close
        assert!((got - d).abs() < 1e-4, "{got} vs {d}");
        assert!((ind.distance(&full) - got).abs() < 1e-13);
        assert_eq!(in_set(&full, &s, &p).unwrap(), got < 0.05);
    }

    #[test]
    fn indicator_agrees_with_in_set() {
        for (n, c, r) in [(6, 0.85, 0.05), (8, 0.7, 0.05), (7, 0.45, 0.05), (9, 0.2, 0.1)] {
            let p = ModelParams::new(n, 0.3, 0.3).unwrap();
            let s = ball(n, c, r);
            let ind = SetIndicator::new(&s, &p).unwrap();
            let table = ind.membership_table().unwrap();
            for (i, &m) in table.iter().enumerate() {
                let eta = Configuration::from_index(i, n - 1);
                let d = profile_distance(&empirical_profile(&eta, &p, s.center.mesh()).unwrap(), &s.center, &s.basis)
                    .unwrap();
                assert!((ind.distance(&eta) - d).abs() < 1e-13);
                assert_eq!(m, in_set(&eta, &s, &p).unwrap());
            }
        }
    }

    #[test]
    fn rarity() {
        let p = ModelParams::new(8, 0.3, 0.3).unwrap();
        assert!(ball(8, 0.85, 0.05).is_rare(&p).unwrap());
        assert!(!ball(8, 0.3, 0.05).is_rare(&p).unwrap());
        assert!(ProfileSet::new(DensityProfile::constant(16, 0.5).unwrap(), 0.0, TestBasis::default()).is_err());
    }
}
