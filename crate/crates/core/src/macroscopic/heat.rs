use super::path::{profile_nodes, SpaceTimePath};
use crate::error::{Error, Result};
use crate::exact::linalg::solve_tridiagonal;
use crate::model::{DensityProfile, ModelParams};

/// Crank–Nicolson solution of `u_t = u_xx / 2` with `u(t,0) = alpha`,
/// `u(t,1) = beta`, `u(0,.) = gamma`, recorded at `n_t + 1` equally spaced
/// times on `n_x + 1` nodes.
pub fn heat_solve(gamma: &DensityProfile, p: &ModelParams, horizon: f64, n_t: usize, n_x: usize) -> Result<SpaceTimePath> {
    heat_solve_nodes(&profile_nodes(gamma, n_x, p), p, horizon, n_t, n_x)
}

/// As [`heat_solve`] from node values; the end values are replaced by the
/// reservoir densities. Each frame is split into substeps with
/// `dt / (2 h^2) <= 1`, which keeps the scheme monotone.
pub fn heat_solve_nodes(initial: &[f64], p: &ModelParams, horizon: f64, n_t: usize, n_x: usize) -> Result<SpaceTimePath> {
    if initial.len() != n_x + 1 {
        return Err(Error::Dimension(format!("{} initial nodes for n_x = {n_x}", initial.len())));
    }
    if n_t == 0 || n_x < 2 || !(horizon > 0.0) {
        return Err(Error::Argument(format!("heat grid {n_t}x{n_x} over T = {horizon}")));
    }
    if let Some(v) = initial.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Domain(format!("initial value {v} outside [0,1]")));
    }
    let h = 1.0 / n_x as f64;
    let dt = horizon / n_t as f64;
    let substeps = (0.5 * dt / (h * h)).ceil().max(1.0) as usize;
    let lam = 0.5 * dt / substeps as f64 / (h * h);
    let m = n_x - 1;
    let mut sub = vec![-0.5 * lam; m];
    let mut sup = vec![-0.5 * lam; m];
    sub[0] = 0.0;
    sup[m - 1] = 0.0;
    let diag = vec![1.0 + lam; m];

    let mut u = initial.to_vec();
    u[0] = p.alpha;
    u[n_x] = p.beta;
    let mut values = Vec::with_capacity((n_t + 1) * (n_x + 1));
    values.extend_from_slice(&u);
    let mut rhs = vec![0.0; m];
    for _ in 0..n_t {
        for _ in 0..substeps {
            for j in 1..n_x {
                rhs[j - 1] = (1.0 - lam) * u[j] + 0.5 * lam * (u[j - 1] + u[j + 1]);
            }
            rhs[0] += 0.5 * lam * p.alpha;
            rhs[m - 1] += 0.5 * lam * p.beta;
            let next = solve_tridiagonal(&sub, &diag, &sup, &rhs)?;
            u[1..n_x].copy_from_slice(&next);
        }
        values.extend_from_slice(&u);
    }
    // Monotone steps keep values in [0,1] up to rounding.
    for v in &mut values {
        *v = v.clamp(0.0, 1.0);
    }
    SpaceTimePath::new(horizon, n_t, n_x, p, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::stationary_density;
    use proptest::prelude::*;
    use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
    use std::f64::consts::PI;

    /// Dirichlet heat kernel series for `gamma = 1`.
    fn series(p: &ModelParams, t: f64, x: f64) -> f64 {
        let mut u = stationary_density(p, x);
        for k in 1..2000 {
            let kf = k as f64;
            // 2 int_0^1 (1 - rho_bar) sin(k pi x) dx
            let b = 2.0 * ((1.0 - p.alpha) - (1.0 - p.beta) * (-1f64).powi(k)) / (kf * PI);
            u += b * (-kf * kf * PI * PI * t / 2.0).exp() * (kf * PI * x).sin();
        }
        u
    }

    #[test]
    fn stationary_and_constant_data_are_fixed() {
        let p = ModelParams::new(4, 0.2, 0.8).unwrap();
        let rho = DensityProfile::from_fn(100, |x| 0.2 + 0.6 * x).unwrap();
        let u = heat_solve(&rho, &p, 1.0, 10, 50).unwrap();
        for j in 0..=50 {
            assert!((u.at(10, j) - u.at(0, j)).abs() < 1e-13);
        }
        let q = ModelParams::new(4, 0.4, 0.4).unwrap();
        let c = DensityProfile::constant(10, 0.4).unwrap();
        let v = heat_solve(&c, &q, 1.0, 10, 20).unwrap();
        assert!(v.values().iter().all(|&x| (x - 0.4).abs() < 1e-14));
    }

    #[test]
    fn matches_eigenfunction_series() {
        let p = ModelParams::new(4, 0.2, 0.8).unwrap();
        let ones = DensityProfile::constant(200, 1.0).unwrap();
        let u = heat_solve(&ones, &p, 2.0, 200, 200).unwrap();
        let mut to_rho = 0.0f64;
        let mut to_series = 0.0f64;
        for j in 0..=200 {
            let x = j as f64 / 200.0;
            to_rho = to_rho.max((u.at(200, j) - stationary_density(&p, x)).abs());
            to_series = to_series.max((u.at(10, j) - series(&p, 0.1, x)).abs());
        }
        assert!(to_rho < 1e-3, "{to_rho}");
        assert!(to_series < 1e-3, "{to_series}");
    }

    #[test]
    fn maximum_principle() {
        let mut runner = TestRunner::new_with_rng(
            Config { cases: 32, ..Config::default() },
            TestRng::from_seed(RngAlgorithm::ChaCha, &[3; 32]),
        );
        let strategy = (0.01..0.99f64, 0.0..1.0f64, proptest::collection::vec(0.0..1.0f64, 8));
        runner
            .run(&strategy, |(a, s, cells)| {
                let b = a + s * (0.99 - a);
                let p = ModelParams::new(4, a, b).unwrap();
                let g = DensityProfile::new(cells.clone()).unwrap();
                let u = heat_solve(&g, &p, 0.3, 15, 40).unwrap();
                let lo = cells.iter().copied().fold(a.min(b), f64::min);
                let hi = cells.iter().copied().fold(a.max(b), f64::max);
                prop_assert!(u.values().iter().all(|&v| v >= lo - 1e-12 && v <= hi + 1e-12));
                Ok(())
            })
            .unwrap();
    }
}
