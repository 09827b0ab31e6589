//! Semigroup quantities by uniformization: hitting-time survival curves,
//! the `e^{-1}` quantile, the total-variation mixing time and the relaxation
//! time.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generator::{RateMatrix, StateSet};
use super::stationary::StationaryDistribution;
use crate::error::{Error, Result};

/// Default state-space bound for semigroup evaluation.
pub const MIXING_STATE_CAP: usize = 1 << 14;
/// Largest chain handled by the dense symmetric eigensolver.
pub const RELAXATION_STATE_CAP: usize = 2048;

const MAX_SUBSTEP: f64 = 50.0;
const TOTAL_TRUNCATION: f64 = 1e-10;
const MIXING_CHUNK: usize = 64;

/// `P = I + Q / Lambda`, acting on columns (`P v`) or rows (`v P`), with
/// states outside `alive` killed.
struct Uniformized<'a> {
    q: &'a RateMatrix,
    lambda: f64,
    alive: Option<&'a [bool]>,
}

impl<'a> Uniformized<'a> {
    fn new(q: &'a RateMatrix, alive: Option<&'a [bool]>) -> Self {
        let lambda = q.max_exit_rate().max(f64::MIN_POSITIVE);
        Self { q, lambda, alive }
    }

    fn is_alive(&self, i: usize) -> bool {
        self.alive.is_none_or(|a| a[i])
    }

    fn column(&self, v: &[f64], out: &mut [f64]) {
        for i in 0..self.q.dim() {
            if !self.is_alive(i) {
                out[i] = 0.0;
                continue;
            }
            let mut s = v[i] * (1.0 - self.q.exit_rate(i) / self.lambda);
            for (j, r) in self.q.row(i) {
                if self.is_alive(j) {
                    s += r / self.lambda * v[j];
                }
            }
            out[i] = s;
        }
    }

    fn row(&self, v: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = v[j] * (1.0 - self.q.exit_rate(j) / self.lambda);
        }
        for (i, &vi) in v.iter().enumerate() {
            if vi != 0.0 {
                for (j, r) in self.q.row(i) {
                    out[j] += vi * r / self.lambda;
                }
            }
        }
    }

    /// `e^{tQ}` applied to `v` in place (as a column or a row vector).
    fn propagate(&self, v: &mut Vec<f64>, t: f64, as_row: bool) {
        if t <= 0.0 {
            return;
        }
        let total = self.lambda * t;
        let substeps = (total / MAX_SUBSTEP).ceil().max(1.0);
        let tau = total / substeps;
        let tail = (TOTAL_TRUNCATION / substeps).min(1e-12);
        let n = v.len();
        let mut term = vec![0.0; n];
        let mut next = vec![0.0; n];
        let mut acc = vec![0.0; n];
        for _ in 0..substeps as usize {
            term.copy_from_slice(v);
            let mut w = (-tau).exp();
            let mut mass = w;
            for (a, t) in acc.iter_mut().zip(&term) {
                *a = w * t;
            }
            let mut k = 0usize;
            while 1.0 - mass > tail && k < 10_000 {
                k += 1;
                if as_row {
                    self.row(&term, &mut next);
                } else {
                    self.column(&term, &mut next);
                }
                std::mem::swap(&mut term, &mut next);
                w *= tau / k as f64;
                mass += w;
                for (a, t) in acc.iter_mut().zip(&term) {
                    *a += w * t;
                }
            }
            v.copy_from_slice(&acc);
        }
    }
}

fn check_init(q: &RateMatrix, a: &StateSet, init: &[f64]) -> Result<()> {
    a.check_chain(q)?;
    if init.len() != q.dim() {
        return Err(Error::Dimension(format!("initial law over {} states, chain has {}", init.len(), q.dim())));
    }
    if a.is_empty() {
        return Err(Error::Structure("hitting target is empty".into()));
    }
    Ok(())
}

fn check_cap(q: &RateMatrix, cap: usize) -> Result<()> {
    if q.dim() > cap {
        return Err(Error::Capacity { states: q.dim(), cap });
    }
    Ok(())
}

/// `P_init[H_A > t]` on a nondecreasing grid of times; mass of `init` on `A`
/// counts as `H = 0`.
pub fn hitting_cdf_exact(q: &RateMatrix, a: &StateSet, init: &[f64], times: &[f64]) -> Result<Vec<f64>> {
    check_init(q, a, init)?;
    check_cap(q, MIXING_STATE_CAP)?;
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::Argument("time grid must be nonnegative and nondecreasing".into()));
    }
    let alive: Vec<bool> = a.membership().iter().map(|m| !m).collect();
    let u = Uniformized::new(q, Some(&alive));
    let mut s: Vec<f64> = alive.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
    let mut now = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        u.propagate(&mut s, t - now, false);
        now = t;
        out.push(init.iter().zip(&s).map(|(m, v)| m * v).sum::<f64>().clamp(0.0, 1.0));
    }
    Ok(out)
}

/// `e^{-1}` quantiles of the hitting time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HittingQuantile {
    /// `theta = inf{t : P_init[H_A > t] < e^{-1}}`.
    pub theta: f64,
    /// `max_eta theta(eta)` over point starts.
    pub theta_hat: f64,
}

/// First `t` with `f(S(t)) < level`, where `S(t) = e^{tG} 1` on `A^c`;
/// doubling bracket then bisection from the stored lower vector.
fn first_crossing(
    u: &Uniformized,
    start: &[f64],
    f: impl Fn(&[f64]) -> f64,
    level: f64,
    rel: f64,
    horizon: f64,
) -> Result<f64> {
    if f(start) < level {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut lo_vec = start.to_vec();
    let mut hi = 1.0 / u.lambda;
    loop {
        let mut v = lo_vec.clone();
        u.propagate(&mut v, hi - lo, false);
        if f(&v) < level {
            break;
        }
        lo = hi;
        lo_vec = v;
        if hi >= horizon {
            return Err(Error::Horizon(format!("survival stays above e^-1 up to t = {horizon}")));
        }
        hi = (2.0 * hi).min(horizon);
    }
    while hi - lo > rel * hi {
        let mid = 0.5 * (lo + hi);
        let mut v = lo_vec.clone();
        u.propagate(&mut v, mid - lo, false);
        if f(&v) < level {
            hi = mid;
        } else {
            lo = mid;
            lo_vec = v;
        }
    }
    Ok(hi)
}

/// `theta` for `init` and the worst point start `theta_hat`, to relative
/// precision `1e-6`.
pub fn quantile_time(q: &RateMatrix, a: &StateSet, init: &[f64], horizon: f64) -> Result<HittingQuantile> {
    check_init(q, a, init)?;
    check_cap(q, MIXING_STATE_CAP)?;
    let alive: Vec<bool> = a.membership().iter().map(|m| !m).collect();
    let u = Uniformized::new(q, Some(&alive));
    let start: Vec<f64> = alive.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
    let level = (-1.0f64).exp();
    let theta = first_crossing(&u, &start, |s| init.iter().zip(s).map(|(m, v)| m * v).sum(), level, 1e-6, horizon)?;
    let theta_hat = first_crossing(&u, &start, |s| s.iter().copied().fold(0.0, f64::max), level, 1e-6, horizon)?;
    Ok(HittingQuantile { theta, theta_hat })
}

fn tv_rows(rows: &[Vec<f64>], nu: &[f64]) -> f64 {
    rows.iter()
        .map(|r| 0.5 * r.iter().zip(nu).map(|(a, b)| (a - b).abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn propagate_rows(u: &Uniformized, rows: &[Vec<f64>], t: f64) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|r| {
            let mut v = r.clone();
            u.propagate(&mut v, t, true);
            v
        })
        .collect()
}

/// Mixing time with the worst-case distance evaluated along the way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingTime {
    pub t_mix: f64,
    /// `(t, max_eta ||P_t(eta, .) - nu||_TV)` on a grid up to `2 t_mix`.
    pub trace: Vec<(f64, f64)>,
}

/// Smallest `t` with `max_eta ||P_t(eta, .) - nu||_TV <= 1/4`, by bisection
/// to relative precision `1e-3`.
pub fn mixing_time(q: &RateMatrix, nu: &StationaryDistribution) -> Result<MixingTime> {
    mixing_time_capped(q, nu, MIXING_STATE_CAP)
}

pub fn mixing_time_capped(q: &RateMatrix, nu: &StationaryDistribution, cap: usize) -> Result<MixingTime> {
    check_cap(q, cap)?;
    if nu.dim() != q.dim() {
        return Err(Error::Dimension(format!("{} weights for {} states", nu.dim(), q.dim())));
    }
    let n = q.dim();
    let u = Uniformized::new(q, None);
    let horizon = 1e9 / u.lambda;
    let starts: Vec<usize> = (0..n).collect();
    let per_chunk: Vec<f64> = starts
        .par_chunks(MIXING_CHUNK)
        .map(|chunk| {
            let rows: Vec<Vec<f64>> = chunk
                .iter()
                .map(|&s| {
                    let mut e = vec![0.0; n];
                    e[s] = 1.0;
                    e
                })
                .collect();
            if tv_rows(&rows, &nu.weights) <= 0.25 {
                return Ok(0.0);
            }
            let (mut lo, mut lo_rows, mut hi) = (0.0, rows, 1.0 / u.lambda);
            loop {
                let next = propagate_rows(&u, &lo_rows, hi - lo);
                if tv_rows(&next, &nu.weights) <= 0.25 {
                    break;
                }
                if hi >= horizon {
                    return Err(Error::Horizon("total variation stays above 1/4".into()));
                }
                lo = hi;
                lo_rows = next;
                hi *= 2.0;
            }
            while hi - lo > 1e-3 * hi {
                let mid = 0.5 * (lo + hi);
                let next = propagate_rows(&u, &lo_rows, mid - lo);
                if tv_rows(&next, &nu.weights) <= 0.25 {
                    hi = mid;
                } else {
                    lo = mid;
                    lo_rows = next;
                }
            }
            Ok(hi)
        })
        .collect::<Result<_>>()?;
    let t_mix = per_chunk.iter().copied().fold(0.0, f64::max);
    let trace = tv_trace(&u, nu, (0..=16).map(|k| 2.0 * t_mix * k as f64 / 16.0).collect::<Vec<_>>().as_slice());
    Ok(MixingTime { t_mix, trace })
}

/// Worst-case total-variation distance on a nondecreasing grid.
fn tv_trace(u: &Uniformized, nu: &StationaryDistribution, times: &[f64]) -> Vec<(f64, f64)> {
    let n = nu.dim();
    let starts: Vec<usize> = (0..n).collect();
    let per_chunk: Vec<Vec<f64>> = starts
        .par_chunks(MIXING_CHUNK)
        .map(|chunk| {
            let mut rows: Vec<Vec<f64>> = chunk
                .iter()
                .map(|&s| {
                    let mut e = vec![0.0; n];
                    e[s] = 1.0;
                    e
                })
                .collect();
            let mut now = 0.0;
            times
                .iter()
                .map(|&t| {
                    rows = propagate_rows(u, &rows, t - now);
                    now = t;
                    tv_rows(&rows, &nu.weights)
                })
                .collect()
        })
        .collect();
    times
        .iter()
        .enumerate()
        .map(|(k, &t)| (t, per_chunk.iter().map(|c| c[k]).fold(0.0, f64::max)))
        .collect()
}

/// Worst-case total-variation distance to `nu` at the given times.
pub fn worst_case_tv(q: &RateMatrix, nu: &StationaryDistribution, times: &[f64]) -> Result<Vec<(f64, f64)>> {
    check_cap(q, MIXING_STATE_CAP)?;
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::Argument("time grid must be nonnegative and nondecreasing".into()));
    }
    Ok(tv_trace(&Uniformized::new(q, None), nu, times))
}

/// Inverse spectral gap of the symmetric part of the generator in
/// `L^2(nu)`.
pub fn relaxation_time(q: &RateMatrix, nu: &StationaryDistribution) -> Result<f64> {
    check_cap(q, RELAXATION_STATE_CAP)?;
    let n = q.dim();
    if n < 2 {
        return Err(Error::Degenerate("relaxation time needs at least two states".into()));
    }
    let s: Vec<f64> = nu.weights.iter().map(|w| w.sqrt()).collect();
    let mut m = nalgebra::DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = q.exit_rate(i);
        for (j, r) in q.row(i) {
            // -1/2 (D^{1/2} Q D^{-1/2} + its transpose)
            let v = 0.5 * s[i] * r / s[j];
            m[(i, j)] -= v;
            m[(j, i)] -= v;
        }
    }
    let mut eig: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    if eig.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("eigenvalue solver failed", f64::NAN));
    }
    eig.sort_by(f64::total_cmp);
    let gap = eig[1];
    if !(gap > 1e-14 * eig[n - 1].abs().max(1.0)) {
        return Err(Error::numerical("spectral gap indistinguishable from zero", gap));
    }
    Ok(1.0 / gap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{build_generator, solve_stationary};
    use crate::model::ModelParams;

    fn two_state(a: f64, b: f64) -> (RateMatrix, StationaryDistribution) {
        let q = RateMatrix::from_triplets(2, &[(0, 1, a), (1, 0, b)]).unwrap();
        let nu = solve_stationary(&q).unwrap();
        (q, nu)
    }

    #[test]
    fn exponential_survival() {
        let (q, _) = two_state(0.7, 2.0);
        let a = StateSet::singleton(2, 1).unwrap();
        let times = [0.0, 0.5, 1.0, 3.0, 40.0];
        let s = hitting_cdf_exact(&q, &a, &[1.0, 0.0], &times).unwrap();
        for (t, v) in times.iter().zip(&s) {
            assert!((v - (-0.7 * t).exp()).abs() < 1e-10, "{t}: {v}");
        }
        let inside = hitting_cdf_exact(&q, &a, &[0.0, 1.0], &times).unwrap();
        assert!(inside.iter().all(|&v| v == 0.0));
        let mixed = hitting_cdf_exact(&q, &a, &[0.4, 0.6], &[0.0]).unwrap();
        assert!((mixed[0] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn exponential_quantile() {
        let (q, _) = two_state(0.25, 1.0);
        let a = StateSet::singleton(2, 1).unwrap();
        let th = quantile_time(&q, &a, &[1.0, 0.0], 1e6).unwrap();
        assert!((th.theta - 4.0).abs() < 1e-5);
        assert!(th.theta <= th.theta_hat);
        assert!(matches!(quantile_time(&q, &a, &[1.0, 0.0], 1.0), Err(Error::Horizon(_))));
    }

    #[test]
    fn two_state_mixing_closed_form() {
        let (q, nu) = two_state(1.0, 1.0);
        let m = mixing_time(&q, &nu).unwrap();
        let exact = 2f64.ln() / 2.0;
        assert!((m.t_mix - exact).abs() <= 1e-3 * exact, "{}", m.t_mix);
        assert!(m.trace.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12));
    }

    #[test]
    fn two_state_relaxation() {
        let (q, nu) = two_state(0.3, 1.2);
        assert!((relaxation_time(&q, &nu).unwrap() - 1.0 / 1.5).abs() < 1e-12);
    }

    #[test]
    fn small_chain_mixing_respects_cubic_bound() {
        let p = ModelParams::new(6, 0.2, 0.8).unwrap();
        let q = build_generator(&p).unwrap();
        let nu = solve_stationary(&q).unwrap();
        let m = mixing_time(&q, &nu).unwrap();
        assert!(m.t_mix <= 108.0);
        assert!(m.trace.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12));
        // the bisected time sits where the worst-case distance crosses 1/4
        let d = worst_case_tv(&q, &nu, &[0.99 * m.t_mix, m.t_mix]).unwrap();
        assert!(d[0].1 > 0.25 && d[1].1 <= 0.25);
        assert!(relaxation_time(&q, &nu).unwrap() > 0.0);
    }

    #[test]
    fn survival_is_monotone_and_matches_mean() {
        let p = ModelParams::new(5, 0.3, 0.3).unwrap();
        let q = build_generator(&p).unwrap();
        let nu = solve_stationary(&q).unwrap();
        let a = StateSet::singleton(16, 15).unwrap();
        let mean = crate::exact::stationary_mean_hitting(&q, &nu, &a).unwrap();
        let dt = 15.0 * mean / 2000.0;
        let grid: Vec<f64> = (0..=2000).map(|k| k as f64 * dt).collect();
        let s = hitting_cdf_exact(&q, &a, &nu.weights, &grid).unwrap();
        assert!(s.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        // E[H] = int survival, by the trapezoid rule
        let tail: f64 = s.windows(2).map(|w| 0.5 * (w[0] + w[1]) * dt).sum();
        assert!(s[2000] < 1e-5);
        assert!((tail - mean).abs() < 1e-2 * mean, "{tail} vs {mean}");
    }
}
