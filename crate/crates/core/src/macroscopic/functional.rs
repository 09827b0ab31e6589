use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::path::{profile_nodes, SpaceTimePath, TestField};
use crate::error::{Error, Result};
use crate::exact::linalg::solve_tridiagonal;
use crate::model::{DensityProfile, ModelParams};

/// Mobility below which the elliptic problem is treated as degenerate.
const CHI_FLOOR: f64 = 1e-14;
/// Integrand size past which the energy is reported as infinite.
const OVERFLOW: f64 = 1e300;

/// Tolerance for the pinned boundary columns and the initial row.
const PIN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateDiagnostics {
    /// Largest residual of the per-interval elliptic solves.
    pub elliptic_residual: f64,
    /// `|J_H(u) - I|` at the certificate.
    pub duality_gap: f64,
    /// Intervals whose mobility vanished somewhere in the interior.
    pub degenerate_intervals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFunctionalResult {
    /// `+inf` when the energy diverges or the mobility degenerates.
    pub value: f64,
    pub certificate: TestField,
    pub energy: f64,
    pub diagnostics: RateDiagnostics,
}

impl RateFunctionalResult {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

#[inline]
fn chi(a: f64) -> f64 {
    a * (1.0 - a)
}

/// Time average `(u_i + u_{i+1}) / 2` of interval `i`.
fn interval_mean(u: &SpaceTimePath, i: usize, out: &mut [f64]) {
    for ((o, a), b) in out.iter_mut().zip(u.row(i)).zip(u.row(i + 1)) {
        *o = 0.5 * (a + b);
    }
}

/// Mobility at the midpoint of edge `(k, k+1)`.
fn edge_chi(ubar: &[f64], out: &mut [f64]) {
    for (k, c) in out.iter_mut().enumerate() {
        *c = chi(0.5 * (ubar[k] + ubar[k + 1]));
    }
}

/// `Q(u) = 1/2 int int (grad u)^2 / chi(u)`, with gradients and mobilities
/// taken on the interval averages of the path and the mobility at edge
/// midpoints; `+inf` if an edge with nonzero gradient has an end where the
/// mobility vanishes.
pub fn energy(u: &SpaceTimePath) -> f64 {
    let (n, h, dt) = (u.n_x, u.h(), u.dt());
    let mut ubar = vec![0.0; n + 1];
    let mut total = 0.0;
    for i in 0..u.n_t {
        interval_mean(u, i, &mut ubar);
        for k in 0..n {
            let g = (ubar[k + 1] - ubar[k]) / h;
            if g == 0.0 {
                continue;
            }
            let c = chi(0.5 * (ubar[k] + ubar[k + 1]));
            let term = g * g / c;
            if chi(ubar[k]) <= 0.0 || chi(ubar[k + 1]) <= 0.0 || !(term < OVERFLOW) {
                return f64::INFINITY;
            }
            total += 0.5 * dt * h * term;
        }
    }
    total
}

fn check_grids(u: &SpaceTimePath, h: &TestField) -> Result<()> {
    if (u.n_t, u.n_x) != (h.n_t, h.n_x) || u.horizon != h.horizon {
        return Err(Error::Dimension(format!(
            "path grid {}x{} over {} and test field grid {}x{} over {}",
            u.n_t, u.n_x, u.horizon, h.n_t, h.n_x, h.horizon
        )));
    }
    Ok(())
}

/// `J_H(u | gamma)` term by term: the two endpoint pairings, the time
/// derivative of `H` (a jump at each interior time, `H` being constant on
/// each interval), the Laplacian pairing with the interval mean of `u`, the
/// boundary fluxes with one-sided first-order differences, and the quadratic
/// mobility term.
pub fn j_functional(u: &SpaceTimePath, gamma: &DensityProfile, hf: &TestField, p: &ModelParams) -> Result<f64> {
    check_grids(u, hf)?;
    j_functional_nodes(u, &profile_nodes(gamma, u.n_x, p), hf, p)
}

pub(crate) fn j_functional_nodes(u: &SpaceTimePath, gamma: &[f64], hf: &TestField, p: &ModelParams) -> Result<f64> {
    check_grids(u, hf)?;
    let (n, nt, h, dt) = (u.n_x, u.n_t, u.h(), u.dt());
    let pair = |a: &[f64], b: &[f64]| h * (1..n).map(|j| a[j] * b[j]).sum::<f64>();
    let mut total = pair(u.row(nt), hf.interval(nt - 1)) - pair(gamma, hf.interval(0));
    for i in 1..nt {
        let (cur, prev) = (hf.interval(i), hf.interval(i - 1));
        total -= h * (1..n).map(|j| u.at(i, j) * (cur[j] - prev[j])).sum::<f64>();
    }
    let mut ubar = vec![0.0; n + 1];
    let mut c = vec![0.0; n];
    for i in 0..nt {
        let hi = hf.interval(i);
        interval_mean(u, i, &mut ubar);
        edge_chi(&ubar, &mut c);
        let lap: f64 = (1..n).map(|j| ubar[j] * (hi[j + 1] - 2.0 * hi[j] + hi[j - 1]) / (h * h)).sum::<f64>() * h;
        let flux = 0.5 * p.beta * (hi[n] - hi[n - 1]) / h - 0.5 * p.alpha * (hi[1] - hi[0]) / h;
        let quad: f64 = (0..n).map(|k| c[k] * ((hi[k + 1] - hi[k]) / h).powi(2)).sum::<f64>() * h;
        total += dt * (-0.5 * lap + flux - 0.5 * quad);
    }
    Ok(total)
}

/// Per-interval maximizers of `J_H`, value and optionally the gradient of
/// the value with respect to every node of `u`.
pub(crate) struct Evaluation {
    pub value: f64,
    pub certificate: TestField,
    pub elliptic_residual: f64,
    pub degenerate_intervals: usize,
    pub gradient: Option<Vec<f64>>,
}

/// For each interval, `H` solves `(chi H')' = -(du/dt - u''/2)` with `H = 0`
/// at both ends, discretized so that it is the exact maximizer of the
/// discrete `J_H`; the value is `1/2 sum dt <chi, (H')^2>`. The gradient uses
/// the envelope theorem: `dI/du = dJ_H/du` at the maximizer.
pub(crate) fn evaluate(u: &SpaceTimePath, want_gradient: bool) -> Result<Evaluation> {
    let (n, nt, h, dt) = (u.n_x, u.n_t, u.h(), u.dt());
    let m = n - 1;
    let mut cert = TestField::zeros(u.horizon, nt, n)?;
    let mut ubar = vec![0.0; n + 1];
    let mut c = vec![0.0; n];
    let (mut sub, mut diag, mut sup, mut rhs) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    let mut value = 0.0;
    let mut residual = 0.0f64;
    let mut degenerate = 0;
    let mut grad = want_gradient.then(|| vec![0.0; (nt + 1) * (n + 1)]);
    for i in 0..nt {
        interval_mean(u, i, &mut ubar);
        edge_chi(&ubar, &mut c);
        if c.iter().any(|&x| x <= CHI_FLOOR) {
            degenerate += 1;
            continue;
        }
        for j in 1..n {
            let r = (u.at(i + 1, j) - u.at(i, j)) / dt - 0.5 * (ubar[j + 1] - 2.0 * ubar[j] + ubar[j - 1]) / (h * h);
            let k = j - 1;
            diag[k] = c[j - 1] + c[j];
            sub[k] = if k == 0 { 0.0 } else { -c[j - 1] };
            sup[k] = if k == m - 1 { 0.0 } else { -c[j] };
            rhs[k] = h * h * r;
        }
        let sol = solve_tridiagonal(&sub, &diag, &sup, &rhs)?;
        for k in 0..m {
            let mut ax = diag[k] * sol[k];
            if k > 0 {
                ax += sub[k] * sol[k - 1];
            }
            if k + 1 < m {
                ax += sup[k] * sol[k + 1];
            }
            residual = residual.max((ax - rhs[k]).abs() / (h * h));
        }
        let hi = cert.interval_mut(i);
        hi[1..n].copy_from_slice(&sol);
        let mut quad = 0.0;
        for k in 0..n {
            let d = (hi[k + 1] - hi[k]) / h;
            quad += c[k] * d * d;
        }
        value += 0.5 * dt * h * quad;
    }
    if degenerate > 0 {
        value = f64::INFINITY;
    }
    if let Some(g) = grad.as_mut().filter(|_| degenerate == 0) {
        let w = n + 1;
        for i in 0..nt {
            let hi = cert.interval(i);
            interval_mean(u, i, &mut ubar);
            // Pairing with the next row's time jump and this interval's
            // Laplacian and mobility terms; both rows of the interval share
            // the mean with weight 1/2.
            for j in 1..n {
                let lap = (hi[j + 1] - 2.0 * hi[j] + hi[j - 1]) / (h * h);
                let mut d = -0.25 * dt * h * lap;
                for k in [j - 1, j] {
                    let dk = (hi[k + 1] - hi[k]) / h;
                    let dchi = 1.0 - (ubar[k] + ubar[k + 1]);
                    d -= 0.5 * dt * h * dchi * 0.25 * dk * dk;
                }
                g[i * w + j] += d - h * hi[j];
                g[(i + 1) * w + j] += d + h * hi[j];
            }
        }
    }
    Ok(Evaluation {
        value,
        certificate: cert,
        elliptic_residual: residual,
        degenerate_intervals: degenerate,
        gradient: grad,
    })
}

fn check_pinned(u: &SpaceTimePath, gamma: &[f64], p: &ModelParams) -> Result<()> {
    if (u.alpha - p.alpha).abs() > PIN_TOL || (u.beta - p.beta).abs() > PIN_TOL || u.boundary_defect() > PIN_TOL {
        return Err(Error::Domain("path boundary columns are not pinned to the reservoir densities".into()));
    }
    let defect = (1..u.n_x).map(|j| (u.at(0, j) - gamma[j]).abs()).fold(0.0, f64::max);
    if defect > PIN_TOL {
        return Err(Error::Domain(format!("initial row differs from gamma by {defect:e}")));
    }
    Ok(())
}

/// `I_[0,T](u | gamma)` through the per-interval elliptic solves, with the
/// maximizing test field as certificate.
pub fn rate_functional(u: &SpaceTimePath, gamma: &DensityProfile, p: &ModelParams) -> Result<RateFunctionalResult> {
    rate_functional_nodes(u, &profile_nodes(gamma, u.n_x, p), p)
}

pub(crate) fn rate_functional_nodes(u: &SpaceTimePath, gamma: &[f64], p: &ModelParams) -> Result<RateFunctionalResult> {
    check_pinned(u, gamma, p)?;
    let q = energy(u);
    let diagnostics = |residual, gap, degenerate| RateDiagnostics {
        elliptic_residual: residual,
        duality_gap: gap,
        degenerate_intervals: degenerate,
    };
    if !q.is_finite() {
        return Ok(RateFunctionalResult {
            value: f64::INFINITY,
            certificate: TestField::zeros(u.horizon, u.n_t, u.n_x)?,
            energy: q,
            diagnostics: diagnostics(0.0, 0.0, 0),
        });
    }
    let ev = evaluate(u, false)?;
    let gap = if ev.value.is_finite() {
        (j_functional_nodes(u, gamma, &ev.certificate, p)? - ev.value).abs()
    } else {
        0.0
    };
    Ok(RateFunctionalResult {
        value: ev.value.max(0.0),
        certificate: ev.certificate,
        energy: q,
        diagnostics: diagnostics(ev.elliptic_residual, gap, ev.degenerate_intervals),
    })
}

/// Value and gradient with respect to all nodes; entries for the boundary
/// columns are zero.
pub fn rate_functional_gradient(u: &SpaceTimePath) -> Result<(f64, Vec<f64>)> {
    let ev = evaluate(u, true)?;
    if !ev.value.is_finite() {
        return Err(Error::Degenerate("mobility vanishes in the interior of the path".into()));
    }
    Ok((ev.value, ev.gradient.expect("gradient requested")))
}

/// Largest relative gap between the analytic directional derivative and a
/// central difference, over `directions` random interior directions.
pub fn gradient_check(u: &SpaceTimePath, directions: usize, seed: u64) -> Result<f64> {
    let (_, g) = rate_functional_gradient(u)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = u.n_x + 1;
    let p = ModelParams::new(2, u.alpha, u.beta)?;
    let eps = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..directions {
        let dir: Vec<f64> = (0..u.values().len())
            .map(|k| {
                let (i, j) = (k / w, k % w);
                if i == 0 || i == u.n_t || j == 0 || j == u.n_x {
                    0.0
                } else {
                    rng.random_range(-1.0..1.0)
                }
            })
            .collect();
        let shifted = |s: f64| -> Result<f64> {
            let v: Vec<f64> = u.values().iter().zip(&dir).map(|(a, d)| a + s * d).collect();
            Ok(evaluate(&SpaceTimePath::new(u.horizon, u.n_t, u.n_x, &p, v)?, false)?.value)
        };
        let fd = (shifted(eps)? - shifted(-eps)?) / (2.0 * eps);
        let an: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
        worst = worst.max((fd - an).abs() / an.abs().max(1e-8));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::macroscopic::heat_solve;
    use crate::model::stationary_density;

    fn params(a: f64, b: f64) -> ModelParams {
        ModelParams::new(4, a, b).unwrap()
    }

    fn bump_path(p: &ModelParams, amp: f64, n_t: usize, n_x: usize) -> (SpaceTimePath, DensityProfile) {
        let g = DensityProfile::from_fn(n_x * 4, |x| stationary_density(p, x) + 0.1 * (std::f64::consts::PI * x).sin()).unwrap();
        let heat = heat_solve(&g, p, 0.5, n_t, n_x).unwrap();
        let mut v = heat.values().to_vec();
        for i in 1..=n_t {
            let t = i as f64 / n_t as f64;
            for j in 1..n_x {
                let x = j as f64 / n_x as f64;
                v[i * (n_x + 1) + j] += amp * (std::f64::consts::PI * t).sin() * (std::f64::consts::PI * x).sin().powi(2);
            }
        }
        (SpaceTimePath::new(0.5, n_t, n_x, p, v).unwrap(), g)
    }

    #[test]
    fn energy_closed_forms() {
        let p = params(0.2, 0.8);
        let c = SpaceTimePath::from_fn(1.0, 4, 10, &params(0.4, 0.4), |_, _| 0.4).unwrap();
        assert_eq!(energy(&c), 0.0);
        let rho = SpaceTimePath::from_fn(2.0, 4, 400, &p, |_, x| stationary_density(&p, x)).unwrap();
        let exact = 0.5 * 0.36 * (2.0 * 4f64.ln() / 0.6);
        assert!((energy(&rho) - exact * 2.0).abs() < 1e-5, "{}", energy(&rho));
        let q = params(0.5, 0.5);
        let touching = SpaceTimePath::from_fn(1.0, 2, 10, &q, |_, x| if (0.3..0.6).contains(&x) { 0.0 } else { 0.5 }).unwrap();
        assert!(energy(&touching).is_infinite());
    }

    #[test]
    fn zero_field_and_zero_cost_heat_path() {
        let p = params(0.2, 0.8);
        let (u, g) = bump_path(&p, 0.0, 100, 100);
        let zero = TestField::zeros(0.5, 100, 100).unwrap();
        assert_eq!(j_functional(&u, &g, &zero, &p).unwrap(), 0.0);
        let r = rate_functional(&u, &g, &p).unwrap();
        assert!(r.value >= 0.0 && r.value < 1e-6, "{}", r.value);
        // The linear part of J_H vanishes along the heat flow for any H.
        let hf = TestField::from_fn(0.5, 100, 100, |t, x| (1.0 + t) * (3.0 * x).sin() * x * (1.0 - x)).unwrap();
        let j = j_functional(&u, &g, &hf, &p).unwrap();
        let two_j = j_functional(&u, &g, &zero.axpy(2.0, &hf).unwrap(), &p).unwrap();
        // J(2H) = 2 lin - 4 quad, J(H) = lin - quad, so lin = 2 J(H) - J(2H) / 2.
        let lin = 2.0 * j - 0.5 * two_j;
        assert!(lin.abs() < 1e-4, "{lin}");
    }

    #[test]
    fn bump_costs_and_certificate_is_optimal() {
        let p = params(0.3, 0.6);
        let (u, g) = bump_path(&p, 0.05, 40, 30);
        let r = rate_functional(&u, &g, &p).unwrap();
        assert!(r.value > 1e-4);
        assert!(r.diagnostics.duality_gap < 1e-10 * r.value.max(1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let scale = rng.random_range(-1.0..1.0);
            let dir = TestField::from_fn(0.5, 40, 30, |_, _| rng.random_range(-1.0..1.0)).unwrap();
            let j = j_functional(&u, &g, &r.certificate.axpy(scale, &dir).unwrap(), &p).unwrap();
            assert!(j <= r.value + 1e-8);
        }
    }

    #[test]
    fn concave_in_h() {
        let p = params(0.3, 0.6);
        let (u, g) = bump_path(&p, 0.05, 20, 20);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let a = TestField::from_fn(0.5, 20, 20, |_, _| rng.random_range(-2.0..2.0)).unwrap();
            let b = TestField::from_fn(0.5, 20, 20, |_, _| rng.random_range(-2.0..2.0)).unwrap();
            let mid = a.axpy(1.0, &b).unwrap();
            let mid = TestField::zeros(0.5, 20, 20).unwrap().axpy(0.5, &mid).unwrap();
            let ja = j_functional(&u, &g, &a, &p).unwrap();
            let jb = j_functional(&u, &g, &b, &p).unwrap();
            let jm = j_functional(&u, &g, &mid, &p).unwrap();
            assert!(jm >= 0.5 * (ja + jb) - 1e-12);
        }
    }

    #[test]
    fn energy_is_convex() {
        let p = params(0.3, 0.6);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let a: Vec<f64> = (0..3).map(|_| rng.random_range(-0.2..0.2)).collect();
            let b: Vec<f64> = (0..3).map(|_| rng.random_range(-0.2..0.2)).collect();
            let make = |c: &[f64]| {
                SpaceTimePath::from_fn(1.0, 6, 24, &p, |t, x| {
                    let s = (std::f64::consts::PI * x).sin();
                    (0.3 + 0.3 * x + s * (c[0] + c[1] * t + c[2] * (3.0 * x).cos())).clamp(0.01, 0.99)
                })
                .unwrap()
            };
            let (u, v) = (make(&a), make(&b));
            let mid: Vec<f64> = u.values().iter().zip(v.values()).map(|(x, y)| 0.5 * (x + y)).collect();
            let m = SpaceTimePath::new(1.0, 6, 24, &p, mid).unwrap();
            assert!(energy(&m) <= 0.5 * (energy(&u) + energy(&v)) + 1e-12);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let p = params(0.3, 0.6);
        let (u, _) = bump_path(&p, 0.05, 12, 16);
        let err = gradient_check(&u, 10, 23).unwrap();
        assert!(err <= 1e-4, "relative error {err}");
    }

    /// At equal reservoir densities the reversed heat flow costs its energy,
    /// which is also the entropy it produces.
    #[test]
    fn reversed_heat_flow_costs_the_entropy_drop() {
        let p = params(0.3, 0.3);
        let (nt, nx) = (200, 200);
        let g = DensityProfile::from_fn(800, |x| 0.3 + 0.3 * (std::f64::consts::PI * x).sin()).unwrap();
        let fwd = heat_solve(&g, &p, 0.2, nt, nx).unwrap();
        let rev: Vec<f64> = (0..=nt).rev().flat_map(|i| fwd.row(i).to_vec()).collect();
        let v = SpaceTimePath::new(0.2, nt, nx, &p, rev).unwrap();
        let r = rate_functional_nodes(&v, v.row(0), &p).unwrap();
        let entropy = |row: &[f64]| {
            let s = |a: f64| a * (a / 0.3).ln() + (1.0 - a) * ((1.0 - a) / 0.7).ln();
            row[1..nx].iter().map(|&a| s(a)).sum::<f64>() / nx as f64
        };
        let drop = entropy(fwd.row(0)) - entropy(fwd.row(nt));
        let q = energy(&v);
        assert!((r.value - q).abs() < 2e-3 * q, "{} vs {q}", r.value);
        assert!((r.value - drop).abs() < 2e-3 * drop, "{} vs {drop}", r.value);
    }

    #[test]
    fn unpinned_paths_are_rejected() {
        let p = params(0.3, 0.6);
        let (u, g) = bump_path(&p, 0.0, 4, 8);
        assert!(rate_functional(&u, &g, &params(0.3, 0.7)).is_err());
        let other = DensityProfile::constant(32, 0.9).unwrap();
        assert!(rate_functional(&u, &other, &p).is_err());
    }
}
