use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::functional::{evaluate, rate_functional_nodes};
use super::heat::heat_solve_nodes;
use super::path::{profile_nodes, SpaceTimePath};
use crate::error::{Error, Result};
use crate::model::{profile_distance, stationary_density, DensityProfile, ModelParams, ProfileSet};

fn entropy_density(g: f64, r: f64) -> f64 {
    let term = |a: f64, b: f64| if a <= 0.0 { 0.0 } else { a * (a / b).ln() };
    term(g, r) + term(1.0 - g, 1.0 - r)
}

/// Relative entropy of the Bernoulli profile `gamma` with respect to the
/// stationary profile, by the midpoint rule on the cells of `gamma`.
pub fn quasipotential_lower_bound(gamma: &DensityProfile, p: &ModelParams) -> Result<f64> {
    let m = gamma.mesh();
    let s: f64 = gamma
        .values()
        .iter()
        .enumerate()
        .map(|(k, &g)| entropy_density(g, stationary_density(p, (k as f64 + 0.5) / m as f64)))
        .sum();
    Ok((s / m as f64).max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerOptions {
    pub max_iter: usize,
    /// Stop once the projected step `|P(u - g) - u|` (sup norm over the
    /// scaled gradient) falls below this.
    pub tol: f64,
    /// Interior values are kept in `[clip, 1 - clip]`.
    pub clip: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            max_iter: 20_000,
            tol: 1e-9,
            clip: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiPotentialEstimate {
    pub value: f64,
    pub path: SpaceTimePath,
    pub converged: bool,
    pub iterations: usize,
    pub projected_gradient: f64,
}

/// Projected gradient descent on the interior nodes of rows `1..n_t` with
/// Barzilai–Borwein steps and Armijo backtracking. The end rows and the
/// boundary columns stay fixed.
fn minimize(mut u: SpaceTimePath, opts: &OptimizerOptions) -> Result<QuasiPotentialEstimate> {
    let (nt, n) = (u.n_t, u.n_x);
    let w = n + 1;
    let free: Vec<usize> = (1..nt).flat_map(|i| (1..n).map(move |j| i * w + j)).collect();
    // Gradients carry the quadrature weight h dt; undo it so steps are in
    // density units.
    let scale = 1.0 / (u.h() * u.dt());
    let (lo, hi) = (opts.clip, 1.0 - opts.clip);
    for &k in &free {
        let v = &mut u.values_mut()[k];
        *v = v.clamp(lo, hi);
    }
    let eval = |u: &SpaceTimePath| -> Result<(f64, Vec<f64>)> {
        let ev = evaluate(u, true)?;
        let g = ev.gradient.unwrap_or_default();
        Ok((ev.value, g))
    };
    let (mut f, mut g) = eval(&u)?;
    if !f.is_finite() {
        return Err(Error::Degenerate("initial path has degenerate mobility".into()));
    }
    let proj_norm = |u: &SpaceTimePath, g: &[f64]| {
        free.iter()
            .map(|&k| {
                let x = u.values()[k];
                ((x - scale * g[k]).clamp(lo, hi) - x).abs()
            })
            .fold(0.0, f64::max)
    };
    let mut step = 1.0;
    let mut iterations = 0;
    let mut pg = proj_norm(&u, &g);
    if nt < 2 {
        return Ok(QuasiPotentialEstimate { value: f, path: u, converged: true, iterations, projected_gradient: 0.0 });
    }
    while iterations < opts.max_iter && pg > opts.tol {
        iterations += 1;
        let mut trial_step = step;
        let mut accepted = None;
        for _ in 0..60 {
            let mut v = u.clone();
            let mut decrease = 0.0;
            for &k in &free {
                let x = u.values()[k];
                let y = (x - trial_step * scale * g[k]).clamp(lo, hi);
                decrease += g[k] * (x - y);
                v.values_mut()[k] = y;
            }
            let ev = evaluate(&v, true)?;
            if ev.value.is_finite() && ev.value <= f - 1e-4 * decrease {
                accepted = Some((v, ev.value, ev.gradient.unwrap_or_default()));
                break;
            }
            trial_step *= 0.5;
        }
        let Some((v, fv, gv)) = accepted else { break };
        let (mut ss, mut sy) = (0.0, 0.0);
        for &k in &free {
            let s = v.values()[k] - u.values()[k];
            let y = scale * (gv[k] - g[k]);
            ss += s * s;
            sy += s * y;
        }
        step = if sy > 0.0 { (ss / sy).clamp(1e-12, 1e6) } else { (2.0 * trial_step).min(1e6) };
        u = v;
        f = fv;
        g = gv;
        pg = proj_norm(&u, &g);
    }
    Ok(QuasiPotentialEstimate {
        value: f,
        path: u,
        converged: pg <= opts.tol,
        iterations,
        projected_gradient: pg,
    })
}

fn check_target(gamma: &DensityProfile) -> Result<()> {
    if let Some(v) = gamma.values().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Domain(format!("profile value {v} outside [0,1]")));
    }
    Ok(())
}

/// Initial guess: the heat flow from `gamma` run backwards, with a linear in
/// time correction so that it starts exactly at the stationary profile.
fn reversed_heat_guess(target: &[f64], p: &ModelParams, horizon: f64, n_t: usize, n_x: usize) -> Result<SpaceTimePath> {
    let fwd = heat_solve_nodes(target, p, horizon, n_t, n_x)?;
    let rho: Vec<f64> = (0..=n_x).map(|j| stationary_density(p, j as f64 / n_x as f64)).collect();
    let mut values = Vec::with_capacity((n_t + 1) * (n_x + 1));
    for i in 0..=n_t {
        let s = 1.0 - i as f64 / n_t as f64;
        let src = fwd.row(n_t - i);
        let end = fwd.row(n_t);
        values.extend((0..=n_x).map(|j| (src[j] + s * (rho[j] - end[j])).clamp(0.0, 1.0)));
    }
    for (j, v) in target.iter().enumerate() {
        values[n_t * (n_x + 1) + j] = *v;
    }
    SpaceTimePath::new(horizon, n_t, n_x, p, values)
}

/// Upper estimate of `V(gamma)` over paths of duration `horizon`: the
/// minimum of the rate functional over paths from the stationary profile to
/// `gamma` on an `n_t x n_x` grid.
pub fn quasipotential_estimate(
    gamma: &DensityProfile,
    p: &ModelParams,
    horizon: f64,
    n_t: usize,
    n_x: usize,
    opts: &OptimizerOptions,
) -> Result<QuasiPotentialEstimate> {
    check_target(gamma)?;
    let target = profile_nodes(gamma, n_x, p);
    minimize(reversed_heat_guess(&target, p, horizon, n_t, n_x)?, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderStep {
    pub horizon: f64,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiPotentialLadder {
    /// Smallest estimate over the ladder.
    pub value: f64,
    pub steps: Vec<LadderStep>,
    pub path: SpaceTimePath,
}

/// Estimates over increasing horizons at a fixed time step. Each horizon
/// after the first is warm-started from the previous optimum preceded by a
/// constant stationary segment, which costs nothing, so the estimates do not
/// increase along the ladder.
pub fn quasipotential_ladder(
    gamma: &DensityProfile,
    p: &ModelParams,
    ladder: &[f64],
    dt: f64,
    n_x: usize,
    opts: &OptimizerOptions,
) -> Result<QuasiPotentialLadder> {
    check_target(gamma)?;
    if ladder.is_empty() || ladder.windows(2).any(|w| w[1] <= w[0]) || !(dt > 0.0) {
        return Err(Error::Argument("horizon ladder must be nonempty and increasing, with dt > 0".into()));
    }
    let target = profile_nodes(gamma, n_x, p);
    let rho: Vec<f64> = (0..=n_x).map(|j| stationary_density(p, j as f64 / n_x as f64)).collect();
    let mut steps = Vec::new();
    let mut best: Option<QuasiPotentialEstimate> = None;
    let mut prev: Option<SpaceTimePath> = None;
    for &horizon in ladder {
        let n_t = (horizon / dt).round().max(1.0) as usize;
        let horizon = n_t as f64 * dt;
        let fresh = minimize(reversed_heat_guess(&target, p, horizon, n_t, n_x)?, opts)?;
        let est = match prev.take() {
            Some(old) if old.n_t <= n_t => {
                let pad = n_t - old.n_t;
                let mut values = Vec::with_capacity((n_t + 1) * (n_x + 1));
                for _ in 0..pad {
                    values.extend_from_slice(&rho);
                }
                values.extend_from_slice(old.values());
                let warm = minimize(SpaceTimePath::new(horizon, n_t, n_x, p, values)?, opts)?;
                if warm.value <= fresh.value {
                    warm
                } else {
                    fresh
                }
            }
            _ => fresh,
        };
        steps.push(LadderStep {
            horizon,
            value: est.value,
            converged: est.converged,
            iterations: est.iterations,
        });
        prev = Some(est.path.clone());
        if best.as_ref().is_none_or(|b| est.value <= b.value) {
            best = Some(est);
        }
    }
    let best = best.expect("nonempty ladder");
    Ok(QuasiPotentialLadder {
        value: best.value,
        steps,
        path: best.path,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRow {
    pub index: usize,
    pub touches: bool,
    /// First grid time at which the path lies in the set.
    pub first_touch: Option<f64>,
    pub rate: f64,
    pub start_quasipotential: f64,
    pub lhs: f64,
    pub slack: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathspaceReport {
    /// Smallest entropy bound over the sampled profiles of the set.
    pub rhs: f64,
    pub samples: usize,
    pub tolerance: f64,
    pub rows: Vec<CandidateRow>,
}

impl PathspaceReport {
    pub fn all_hold(&self) -> bool {
        self.rows.iter().filter(|r| r.touches).all(|r| r.holds)
    }
}

/// Profiles of `s`: the center and random perturbations along the test
/// functions, kept when they stay in `[0,1]` and in the ball.
pub fn sample_set_profiles(s: &ProfileSet, count: usize, seed: u64) -> Result<Vec<DensityProfile>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let center = &s.center;
    let mesh = center.mesh();
    let mut out = vec![center.clone()];
    let mut attempts = 0;
    while out.len() < count && attempts < 50 * count.max(1) {
        attempts += 1;
        let coef: Vec<f64> = (1..=s.basis.order()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let raw: Vec<f64> = (0..mesh)
            .map(|m| {
                let x = (m as f64 + 0.5) / mesh as f64;
                coef.iter().enumerate().map(|(k, c)| c * s.basis.eval(k + 1, x)).sum::<f64>()
            })
            .collect();
        let norm = weak_norm(&raw, s);
        if norm == 0.0 {
            continue;
        }
        let r = rng.random_range(0.0..1.0) * s.radius / norm;
        let values: Vec<f64> = center.values().iter().zip(&raw).map(|(c, d)| c + r * d).collect();
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            continue;
        }
        let g = DensityProfile::new(values)?;
        if s.contains_profile(&g)? {
            out.push(g);
        }
    }
    Ok(out)
}

fn weak_norm(raw: &[f64], s: &ProfileSet) -> f64 {
    let m = raw.len();
    (1..=s.basis.order())
        .map(|k| {
            let c: f64 = raw
                .iter()
                .enumerate()
                .map(|(i, v)| v * s.basis.eval(k, (i as f64 + 0.5) / m as f64))
                .sum::<f64>()
                / m as f64;
            s.basis.weight(k) * c.abs()
        })
        .sum()
}

/// For each candidate that enters `s`, checks
/// `I(u | u_0) + V(u_0) >= min over sampled rho in s of the entropy bound`,
/// with `V(u_0)` from [`quasipotential_estimate`] over `v_horizon`.
#[allow(clippy::too_many_arguments)]
pub fn pathspace_infimum_check(
    s: &ProfileSet,
    p: &ModelParams,
    candidates: &[SpaceTimePath],
    samples: usize,
    seed: u64,
    v_horizon: f64,
    opts: &OptimizerOptions,
    tolerance: f64,
) -> Result<PathspaceReport> {
    let profiles = sample_set_profiles(s, samples, seed)?;
    let rhs = profiles
        .iter()
        .map(|g| quasipotential_lower_bound(g, p))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let mesh = s.center.mesh();
    let mut rows = Vec::with_capacity(candidates.len());
    for (index, u) in candidates.iter().enumerate() {
        let mut first_touch = None;
        for i in 0..=u.n_t {
            if s.contains_profile(&u.profile_at(i, mesh)?)? {
                first_touch = Some(u.horizon * i as f64 / u.n_t as f64);
                break;
            }
        }
        if first_touch.is_none() {
            rows.push(CandidateRow {
                index,
                touches: false,
                first_touch,
                rate: f64::NAN,
                start_quasipotential: f64::NAN,
                lhs: f64::NAN,
                slack: f64::NAN,
                holds: true,
            });
            continue;
        }
        let rate = rate_functional_nodes(u, u.row(0), p)?.value;
        let u0 = u.profile_at(0, mesh)?;
        let n_t = ((v_horizon * u.n_x as f64).round() as usize).max(1);
        let v0 = if profile_distance(&u0, &DensityProfile::from_fn(mesh, |x| stationary_density(p, x))?, &s.basis)? < 1e-12 {
            0.0
        } else {
            quasipotential_estimate(&u0, p, v_horizon, n_t, u.n_x, opts)?.value
        };
        let lhs = rate + v0;
        rows.push(CandidateRow {
            index,
            touches: true,
            first_touch,
            rate,
            start_quasipotential: v0,
            lhs,
            slack: lhs - rhs,
            holds: lhs >= rhs - tolerance,
        });
    }
    Ok(PathspaceReport {
        rhs,
        samples: profiles.len(),
        tolerance,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{stationary_profile, TestBasis};
    use proptest::prelude::*;
    use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
    use std::f64::consts::PI;

    fn quick() -> OptimizerOptions {
        OptimizerOptions {
            max_iter: 2000,
            ..OptimizerOptions::default()
        }
    }

    #[test]
    fn entropy_bound_closed_forms() {
        let p = ModelParams::new(4, 0.3, 0.3).unwrap();
        let rho = stationary_profile(&p, 64).unwrap();
        assert_eq!(quasipotential_lower_bound(&rho, &p).unwrap(), 0.0);
        let half = DensityProfile::constant(64, 0.5).unwrap();
        let exact = 0.5 * (0.5f64 / 0.3).ln() + 0.5 * (0.5f64 / 0.7).ln();
        assert!((quasipotential_lower_bound(&half, &p).unwrap() - exact).abs() < 1e-14);
        assert!((exact - 0.0872).abs() < 1e-4);
        let empty = DensityProfile::constant(8, 0.0).unwrap();
        assert!((quasipotential_lower_bound(&empty, &p).unwrap() - (1.0f64 / 0.7).ln()).abs() < 1e-14);
    }

    /// Bernoulli relative entropy dominates `2 (a - b)^2`, and the weak
    /// distance is dominated by the L2 distance, so the bound dominates
    /// `2 d(gamma, rho_bar)^2`.
    #[test]
    fn entropy_bound_dominates_squared_distance() {
        let mut runner = TestRunner::new_with_rng(
            Config { cases: 64, ..Config::default() },
            TestRng::from_seed(RngAlgorithm::ChaCha, &[11; 32]),
        );
        let basis = TestBasis::default();
        runner
            .run(&(0.05..0.5f64, 0.0..1.0f64, proptest::collection::vec(0.0..1.0f64, 32)), |(a, s, cells)| {
                let p = ModelParams::new(4, a, a + s * (0.95 - a)).unwrap();
                let g = DensityProfile::new(cells).unwrap();
                let rho = stationary_profile(&p, 32).unwrap();
                let d = profile_distance(&g, &rho, &basis).unwrap();
                prop_assert!(quasipotential_lower_bound(&g, &p).unwrap() >= 2.0 * d * d - 1e-12);
                Ok(())
            })
            .unwrap();
    }

    #[test]
    fn stationary_target_costs_nothing() {
        let p = ModelParams::new(4, 0.2, 0.7).unwrap();
        let rho = stationary_profile(&p, 64).unwrap();
        let est = quasipotential_estimate(&rho, &p, 1.0, 16, 16, &quick()).unwrap();
        assert!(est.value <= 1e-4, "{}", est.value);
    }

    /// At equal reservoir densities the quasi-potential is the relative
    /// entropy, so the estimate sits just above the bound.
    #[test]
    fn equilibrium_sandwich_and_ladder_monotone() {
        let p = ModelParams::new(4, 0.3, 0.3).unwrap();
        let g = DensityProfile::from_fn(64, |x| 0.3 + 0.25 * (PI * x).sin()).unwrap();
        let lb = quasipotential_lower_bound(&g, &p).unwrap();
        let ladder = quasipotential_ladder(&g, &p, &[0.5, 1.0, 2.0], 1.0 / 16.0, 32, &quick()).unwrap();
        assert!(ladder.steps.windows(2).all(|w| w[1].value <= w[0].value + 1e-12));
        assert!(ladder.value >= lb - 1e-3, "{} vs {lb}", ladder.value);
        assert!(ladder.value <= lb * 1.1, "{} vs {lb}", ladder.value);
        assert_eq!(ladder.path.row(ladder.path.n_t), profile_nodes(&g, 32, &p).as_slice());
    }

    #[test]
    fn pathspace_inequality() {
        let p = ModelParams::new(8, 0.3, 0.3).unwrap();
        let s = ProfileSet::from_fn(8, |x| 0.3 + 0.3 * (PI * x).sin(), 0.02, TestBasis::default()).unwrap();
        let opts = quick();
        let stay = SpaceTimePath::from_fn(1.0, 16, 32, &p, |_, _| 0.3).unwrap();
        let driven = quasipotential_estimate(&s.center, &p, 1.0, 16, 32, &opts).unwrap().path;
        let report = pathspace_infimum_check(&s, &p, &[stay, driven], 8, 3, 1.0, &opts, 1e-3).unwrap();
        assert!(!report.rows[0].touches);
        assert!(report.rows[1].touches && report.rows[1].holds, "{:?}", report.rows[1]);
        assert!(report.rhs > 0.0 && report.samples > 1);
        assert!(report.all_hold());

        let around = ProfileSet::new(stationary_profile(&p, 128).unwrap(), 0.05, TestBasis::default()).unwrap();
        let stay = SpaceTimePath::from_fn(1.0, 4, 16, &p, |_, _| 0.3).unwrap();
        let trivial = pathspace_infimum_check(&around, &p, &[stay], 4, 1, 1.0, &opts, 1e-3).unwrap();
        assert!(trivial.rhs < 1e-3 && trivial.all_hold());
    }
}
