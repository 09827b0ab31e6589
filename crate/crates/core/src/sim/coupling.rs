use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::kmc::run_replicas;
use super::rng::RngStream;
use crate::error::{Error, Result};
use crate::model::{enumerate_transitions, total_exit_rate, Configuration, ModelParams};

/// Pair of configurations driven by shared stirring and boundary clocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoupledState {
    pub first: Configuration,
    pub second: Configuration,
    pub coupled: bool,
}

impl CoupledState {
    pub fn new(first: Configuration, second: Configuration) -> Result<Self> {
        if first.len() != second.len() {
            return Err(Error::Dimension(format!(
                "coupled configurations of lengths {} and {}",
                first.len(),
                second.len()
            )));
        }
        let coupled = first == second;
        Ok(Self { first, second, coupled })
    }
}

/// Which clock rang in a coupled step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoupledEvent {
    /// Stirring of bond `(x, x+1)`, `x` one-based.
    Stir(usize),
    /// Boundary clock at site `z` resetting both copies to `value`.
    Reservoir { site: usize, value: bool },
}

/// Total clock rate: `1/2` per bond and per boundary site.
pub fn coupled_rate(sites: usize) -> f64 {
    0.5 * sites.saturating_sub(1) as f64 + 1.0
}

/// Advances the pair by one ring of the shared clocks and returns the event
/// and elapsed time. Every bond carries a rate-1/2 stirring clock applied to
/// both copies; each boundary site carries a rate-1/2 clock whose uniform
/// mark sets both copies to occupied below the reservoir density and to
/// empty otherwise.
pub fn coupled_step(cs: &mut CoupledState, p: &ModelParams, rng: &mut RngStream) -> (CoupledEvent, f64) {
    let len = cs.first.len();
    let bonds = len.saturating_sub(1);
    let total = coupled_rate(len);
    let dt = rng.exponential(total);
    let u = rng.uniform() * total;
    let event = if u < 0.5 * bonds as f64 {
        let i = ((u / 0.5) as usize).min(bonds - 1);
        cs.first.swap_with_next(i);
        cs.second.swap_with_next(i);
        CoupledEvent::Stir(i + 1)
    } else {
        let (site, density) = if u < 0.5 * bonds as f64 + 0.5 { (0, p.alpha) } else { (len - 1, p.beta) };
        let value = rng.uniform() < density;
        cs.first.set(site, value);
        cs.second.set(site, value);
        CoupledEvent::Reservoir { site: site + 1, value }
    };
    let now = cs.first == cs.second;
    debug_assert!(!cs.coupled || now, "coupled copies separated");
    cs.coupled = now;
    (event, dt)
}

/// Time until the copies first agree, or `None` past `horizon`.
pub fn coupling_time(cs: &mut CoupledState, p: &ModelParams, rng: &mut RngStream, horizon: f64) -> Option<f64> {
    let mut t = 0.0;
    while !cs.coupled {
        t += coupled_step(cs, p, rng).1;
        if t > horizon {
            return None;
        }
    }
    Some(t)
}

/// Exceedance estimate at one grid time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exceedance {
    pub t: f64,
    /// Fraction of runs with coupling time `>= t`.
    pub fraction: f64,
    /// One-sided 95% Wilson upper bound on `P[H_D >= t]`.
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingBound {
    /// Smallest grid time whose upper bound is at most `1/4`.
    pub t: f64,
    pub table: Vec<Exceedance>,
    pub runs: usize,
}

const WILSON_Z: f64 = 1.644_853_626_951_472_2;

/// One-sided Wilson score upper bound for a binomial proportion.
pub fn wilson_upper(successes: usize, n: usize, z: f64) -> f64 {
    let n = n as f64;
    let ph = successes as f64 / n;
    let z2 = z * z;
    let centre = ph + z2 / (2.0 * n);
    let spread = z * (ph * (1.0 - ph) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre + spread) / (1.0 + z2 / n)).min(1.0)
}

/// Coupling bound on the mixing time from the pair (full, empty).
pub fn coupling_mixing_bound(p: &ModelParams, grid: &[f64], runs: usize, seed: u64, workers: usize) -> Result<CouplingBound> {
    if runs < 100 {
        return Err(Error::Argument(format!("need at least 100 coupling runs, got {runs}")));
    }
    if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) || grid[0] < 0.0 {
        return Err(Error::Argument("coupling grid must be nonempty and increasing".into()));
    }
    let horizon = *grid.last().unwrap();
    let sites = p.sites();
    let times = run_replicas(runs, workers, |i| {
        let mut rng = RngStream::new(seed, i as u64);
        let mut cs = CoupledState::new(Configuration::full(sites), Configuration::empty(sites)).expect("equal lengths");
        coupling_time(&mut cs, p, &mut rng, horizon)
    })?;
    let table: Vec<Exceedance> = grid
        .iter()
        .map(|&t| {
            let k = times.iter().filter(|h| h.is_none_or(|h| h >= t)).count();
            Exceedance {
                t,
                fraction: k as f64 / runs as f64,
                upper: wilson_upper(k, runs, WILSON_Z),
            }
        })
        .collect();
    match table.iter().find(|e| e.upper <= 0.25) {
        Some(e) => Ok(CouplingBound { t: e.t, table, runs }),
        None => Err(Error::Horizon(format!("coupling exceedance above 1/4 up to t = {horizon}"))),
    }
}

/// `count` log-spaced points from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|k| (a + (b - a) * k as f64 / (count.max(2) - 1) as f64).exp())
        .collect()
}

/// Chi-square p-value that one coupled step moves `first` with the law of
/// a single step of the chain: each move with probability rate / total
/// clock rate, no move otherwise. `trials` independent steps from the pair
/// `(first, second)`.
pub fn marginal_fidelity_pvalue(
    p: &ModelParams,
    first: &Configuration,
    second: &Configuration,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let moves = enumerate_transitions(first, p)?;
    let total = coupled_rate(first.len());
    let lambda = total_exit_rate(first, p)?;
    let mut expected: Vec<f64> = moves.iter().map(|m| m.rate / total).collect();
    expected.push(1.0 - lambda / total);
    let mut counts = vec![0usize; expected.len()];
    let mut rng = RngStream::new(seed, 0);
    for _ in 0..trials {
        let mut cs = CoupledState::new(first.clone(), second.clone())?;
        coupled_step(&mut cs, p, &mut rng);
        let k = moves.iter().position(|m| m.target == cs.first).unwrap_or(moves.len());
        counts[k] += 1;
    }
    let kept: Vec<(usize, f64)> = counts.into_iter().zip(expected).filter(|(_, e)| *e > 0.0).collect();
    if kept.len() < 2 {
        return Err(Error::Degenerate("fewer than two outcome categories".into()));
    }
    let stat: f64 = kept
        .iter()
        .map(|&(c, e)| {
            let e = e * trials as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    let dof = (kept.len() - 1) as f64;
    let chi2 = ChiSquared::new(dof).map_err(|e| Error::Argument(e.to_string()))?;
    Ok(1.0 - chi2.cdf(stat))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_copies_start_coupled() {
        let p = ModelParams::new(5, 0.3, 0.6).unwrap();
        let c = Configuration::from_occupancy(&[1, 0, 1, 1]).unwrap();
        let mut cs = CoupledState::new(c.clone(), c).unwrap();
        assert!(cs.coupled);
        let mut rng = RngStream::new(2, 0);
        assert_eq!(coupling_time(&mut cs, &p, &mut rng, 1.0), Some(0.0));
        assert!(CoupledState::new(Configuration::empty(3), Configuration::empty(4)).is_err());
    }

    #[test]
    fn diagonal_is_absorbing() {
        let p = ModelParams::new(8, 0.2, 0.8).unwrap();
        let mut rng = RngStream::new(4, 0);
        let mut cs = CoupledState::new(Configuration::full(7), Configuration::empty(7)).unwrap();
        let mut seen = false;
        for _ in 0..20_000 {
            coupled_step(&mut cs, &p, &mut rng);
            seen |= cs.coupled;
            if seen {
                assert!(cs.coupled && cs.first == cs.second);
            }
        }
        assert!(seen);
    }

    #[test]
    fn marginal_fidelity_chi_square() {
        let p = ModelParams::new(6, 0.25, 0.65).unwrap();
        let eta = Configuration::from_occupancy(&[1, 0, 0, 1, 1]).unwrap();
        let other = Configuration::from_occupancy(&[0, 1, 1, 0, 1]).unwrap();
        let pval = marginal_fidelity_pvalue(&p, &eta, &other, 100_000, 21).unwrap();
        assert!(pval > 0.01, "p = {pval}");
        let pval = marginal_fidelity_pvalue(&p, &other, &eta, 100_000, 22).unwrap();
        assert!(pval > 0.01, "p = {pval}");
    }

    #[test]
    fn coupling_is_reproducible() {
        let p = ModelParams::new(3, 0.3, 0.6).unwrap();
        let run = |seed| {
            let mut cs = CoupledState::new(Configuration::full(2), Configuration::empty(2)).unwrap();
            coupling_time(&mut cs, &p, &mut RngStream::new(seed, 0), 1e6)
        };
        assert_eq!(run(8), run(8));
    }

    #[test]
    fn wilson_bound_properties() {
        assert!(wilson_upper(0, 100, WILSON_Z) > 0.0);
        assert!(wilson_upper(50, 100, WILSON_Z) > 0.5);
        assert!(wilson_upper(100, 100, WILSON_Z) <= 1.0);
        assert!(wilson_upper(10, 1000, WILSON_Z) < wilson_upper(10, 100, WILSON_Z));
    }

    #[test]
    fn small_scale_bound() {
        let p = ModelParams::new(6, 0.3, 0.6).unwrap();
        let b = coupling_mixing_bound(&p, &log_grid(1.0, 400.0, 40), 400, 1, 2).unwrap();
        assert!(b.t <= 108.0);
        assert!(b.table.windows(2).all(|w| w[1].fraction <= w[0].fraction));
        assert!(coupling_mixing_bound(&p, &[1.0], 10, 1, 1).is_err());
    }
}
