use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{Configuration, ModelParams};
use crate::error::{Error, Result};

/// Default number of test functions in the weak metric.
pub const DEFAULT_BASIS_ORDER: usize = 16;

/// Density profile on `[0, 1]`, piecewise constant on `mesh` equal cells.
///
/// `values[m]` is the average of the profile over `[m/M, (m+1)/M)`; inner
/// products use the midpoint rule on these cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    values: Vec<f64>,
}

impl DensityProfile {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Argument("profile needs at least one cell".into()));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Domain(format!("profile values must lie in [0,1], found {v}")));
        }
        Ok(Self { values })
    }

    /// Samples `f` at the cell midpoints.
    pub fn from_fn(mesh: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new((0..mesh).map(|m| f((m as f64 + 0.5) / mesh as f64)).collect())
    }

    pub fn constant(mesh: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; mesh])
    }

    pub fn mesh(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn midpoint(&self, m: usize) -> f64 {
        (m as f64 + 0.5) / self.mesh() as f64
    }

    /// Value of the cell containing `x`; `x = 1` maps to the last cell.
    pub fn eval(&self, x: f64) -> f64 {
        let m = ((x * self.mesh() as f64).floor() as isize).clamp(0, self.mesh() as isize - 1);
        self.values[m as usize]
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.mesh() as f64
    }

    /// Midpoint-rule inner product with a function.
    pub fn inner(&self, f: impl Fn(f64) -> f64) -> f64 {
        let m = self.mesh();
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| v * f((i as f64 + 0.5) / m as f64))
            .sum::<f64>()
            / m as f64
    }

    pub fn l2_distance(&self, other: &Self) -> Result<f64> {
        same_mesh(self, other)?;
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a - b) * (a - b)).sum();
        Ok((s / self.mesh() as f64).sqrt())
    }

    pub fn sup_distance(&self, other: &Self) -> Result<f64> {
        same_mesh(self, other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Pointwise convex combination `(1 - s) self + s other`.
    pub fn interpolate(&self, other: &Self, s: f64) -> Result<Self> {
        same_mesh(self, other)?;
        Self::new(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| ((1.0 - s) * a + s * b).clamp(0.0, 1.0))
                .collect(),
        )
    }
}

fn same_mesh(a: &DensityProfile, b: &DensityProfile) -> Result<()> {
    if a.mesh() != b.mesh() {
        return Err(Error::Dimension(format!(
            "profiles on meshes {} and {}",
            a.mesh(),
            b.mesh()
        )));
    }
    Ok(())
}

/// Test functions of the weak metric: `F_1 = 1` and `F_k(x) = cos((k-1) pi x)`
/// for `k >= 2`, all bounded by one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestBasis {
    order: usize,
}

impl TestBasis {
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::Argument("test basis needs at least one function".into()));
        }
        Ok(Self { order })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// `F_k(x)` for `k` in `1..=order`.
    #[inline]
    pub fn eval(&self, k: usize, x: f64) -> f64 {
        debug_assert!(k >= 1 && k <= self.order);
        if k == 1 {
            1.0
        } else {
            ((k - 1) as f64 * PI * x).cos()
        }
    }

    pub fn weight(&self, k: usize) -> f64 {
        0.5f64.powi(k as i32)
    }

    /// `table[k-1][m] = F_k(midpoint m)` on a mesh of `mesh` cells.
    pub(crate) fn table(&self, mesh: usize) -> Vec<Vec<f64>> {
        (1..=self.order)
            .map(|k| (0..mesh).map(|m| self.eval(k, (m as f64 + 0.5) / mesh as f64)).collect())
            .collect()
    }
}

impl Default for TestBasis {
    fn default() -> Self {
        Self {
            order: DEFAULT_BASIS_ORDER,
        }
    }
}

/// Truncated weak distance `sum_k 2^-k |<g1 - g2, F_k>|`.
pub fn profile_distance(g1: &DensityProfile, g2: &DensityProfile, basis: &TestBasis) -> Result<f64> {
    same_mesh(g1, g2)?;
    let mesh = g1.mesh();
    let diff: Vec<f64> = g1.values.iter().zip(&g2.values).map(|(a, b)| a - b).collect();
    let mut d = 0.0;
    for k in 1..=basis.order() {
        let ip: f64 = diff
            .iter()
            .enumerate()
            .map(|(m, v)| v * basis.eval(k, (m as f64 + 0.5) / mesh as f64))
            .sum::<f64>()
            / mesh as f64;
        d += basis.weight(k) * ip.abs();
    }
    Ok(d)
}

/// Smallest multiple of `2N` that is at least 128. Every site interval
/// `[x/N - 1/2N, x/N + 1/2N)` is then a union of whole cells.
pub fn default_mesh(n: usize) -> usize {
    let step = 2 * n;
    step * 128usize.div_ceil(step)
}

/// Empirical density: `eta(x)` on `[x/N - 1/2N, x/N + 1/2N)`, zero elsewhere,
/// stored as exact cell averages.
pub fn empirical_profile(eta: &Configuration, p: &ModelParams, mesh: usize) -> Result<DensityProfile> {
    if eta.len() != p.sites() {
        return Err(Error::Dimension(format!(
            "configuration has {} sites, model needs {}",
            eta.len(),
            p.sites()
        )));
    }
    let values: Vec<f64> = (0..eta.len()).map(|i| if eta.get(i) { 1.0 } else { 0.0 }).collect();
    site_profile(&values, p, mesh)
}

/// Step profile equal to `values[x-1]` on `[x/N - 1/2N, x/N + 1/2N)` for each
/// site `x`, zero elsewhere; the replica average of empirical profiles is the
/// site profile of the mean occupations.
pub fn site_profile(values: &[f64], p: &ModelParams, mesh: usize) -> Result<DensityProfile> {
    if values.len() != p.sites() {
        return Err(Error::Dimension(format!(
            "{} site values, model has {} sites",
            values.len(),
            p.sites()
        )));
    }
    if mesh == 0 || mesh % p.n != 0 {
        return Err(Error::Resolution(format!(
            "mesh {mesh} is not a positive multiple of N={}",
            p.n
        )));
    }
    let q = mesh / p.n;
    // Work in half-cells: site x covers half-cells [q(2x-1), q(2x+1)).
    let mut half = vec![0.0; 2 * mesh];
    for (i, &v) in values.iter().enumerate() {
        let x = i + 1;
        for h in &mut half[q * (2 * x - 1)..q * (2 * x + 1)] {
            *h = v;
        }
    }
    let cells = (0..mesh).map(|m| 0.5 * (half[2 * m] + half[2 * m + 1])).collect();
    DensityProfile::new(cells)
}

/// Linear solution of the Laplace equation with boundary values `alpha`, `beta`.
pub fn stationary_density(p: &ModelParams, x: f64) -> f64 {
    p.alpha + (p.beta - p.alpha) * x
}

pub fn stationary_profile(p: &ModelParams, mesh: usize) -> Result<DensityProfile> {
    DensityProfile::from_fn(mesh.max(1), |x| stationary_density(p, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(bits: &[u8]) -> Configuration {
        Configuration::from_occupancy(bits).unwrap()
    }

    #[test]
    fn empirical_integral_and_intervals() {
        let p = ModelParams::new(4, 0.3, 0.3).unwrap();
        let prof = empirical_profile(&cfg(&[1, 0, 1]), &p, 128).unwrap();
        assert!((prof.integral() - 0.5).abs() < 1e-15);
        // [1/4 - 1/8, 1/4 + 1/8) = cells 16..48
        for m in 16..48 {
            assert_eq!(prof.values()[m], 1.0);
        }
        for m in 48..80 {
            assert_eq!(prof.values()[m], 0.0);
        }
        for m in 0..16 {
            assert_eq!(prof.values()[m], 0.0);
        }
        let zero = empirical_profile(&cfg(&[0, 0, 0]), &p, 128).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empirical_profile_odd_multiple_keeps_mass() {
        // mesh/N odd: interval edges fall on cell midpoints, cells get 1/2
        let p = ModelParams::new(5, 0.3, 0.3).unwrap();
        let prof = empirical_profile(&cfg(&[1, 1, 0, 1]), &p, 15).unwrap();
        assert!((prof.integral() - 3.0 / 5.0).abs() < 1e-15);
        assert!(prof.values().contains(&0.5));
    }

    #[test]
    fn empirical_profile_rejects_bad_mesh() {
        let p = ModelParams::new(4, 0.3, 0.3).unwrap();
        assert!(matches!(empirical_profile(&cfg(&[1, 0, 1]), &p, 130), Err(Error::Resolution(_))));
        assert!(matches!(empirical_profile(&cfg(&[1, 0]), &p, 128), Err(Error::Dimension(_))));
    }

    #[test]
    fn default_mesh_resolves_sites() {
        for n in 2..70 {
            let m = default_mesh(n);
            assert!(m >= 128 && m % (2 * n) == 0);
        }
    }

    #[test]
    fn stationary_profile_linear() {
        let p = ModelParams::new(10, 0.2, 0.8).unwrap();
        assert!((stationary_density(&p, 0.5) - 0.5).abs() < 1e-15);
        assert_eq!(stationary_density(&p, 0.0), 0.2);
        assert!((stationary_density(&p, 1.0) - 0.8).abs() < 1e-15);
        let q = ModelParams::new(10, 0.4, 0.4).unwrap();
        let flat = stationary_profile(&q, 64).unwrap();
        assert!(flat.values().iter().all(|&v| (v - 0.4).abs() < 1e-15));
        let prof = stationary_profile(&p, 128).unwrap();
        assert!((prof.integral() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn distance_identity_and_bound() {
        let b = TestBasis::default();
        let g = DensityProfile::from_fn(128, |x| 0.5 + 0.4 * (3.0 * x).sin()).unwrap();
        assert_eq!(profile_distance(&g, &g, &b).unwrap(), 0.0);
        let zero = DensityProfile::constant(128, 0.0).unwrap();
        let one = DensityProfile::constant(128, 1.0).unwrap();
        assert!(profile_distance(&zero, &one, &b).unwrap() <= 1.0);
        let other = DensityProfile::constant(64, 0.0).unwrap();
        assert!(matches!(profile_distance(&g, &other, &b), Err(Error::Dimension(_))));
    }

    #[test]
    fn constant_profiles_are_separated() {
        let b = TestBasis::default();
        let a = DensityProfile::constant(128, 0.3).unwrap();
        let c = DensityProfile::constant(128, 0.9).unwrap();
        let d = profile_distance(&a, &c, &b).unwrap();
        assert!((d - 0.3).abs() < 1e-12, "{d}");
    }

    fn profile_strategy(mesh: usize) -> impl Strategy<Value = DensityProfile> {
        proptest::collection::vec(0.0f64..=1.0, mesh).prop_map(|v| DensityProfile::new(v).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 64, rng_seed: proptest::test_runner::RngSeed::Fixed(7), ..ProptestConfig::default() })]
        #[test]
        fn metric_axioms(a in profile_strategy(64), b in profile_strategy(64), c in profile_strategy(64)) {
            let basis = TestBasis::default();
            let ab = profile_distance(&a, &b, &basis).unwrap();
            let ba = profile_distance(&b, &a, &basis).unwrap();
            let bc = profile_distance(&b, &c, &basis).unwrap();
            let ac = profile_distance(&a, &c, &basis).unwrap();
            prop_assert!((ab - ba).abs() < 1e-14);
            prop_assert!(ac <= ab + bc + 1e-14);
            prop_assert!(ab <= 1.0);
            // distance is dominated by the L2 norm of the difference
            prop_assert!(ab <= a.l2_distance(&b).unwrap() + 1e-12);
        }
    }
}
