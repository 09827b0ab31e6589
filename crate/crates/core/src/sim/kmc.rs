use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rng::RngStream;
use crate::error::{Error, Result};
use crate::model::{boundary_rate, total_exit_rate, Configuration, ModelParams, ProfileSet, SetIndicator, TransitionKind};

/// Largest site count for which membership is tabulated over the index.
const TABLE_SITES: usize = 22;

/// Fast membership test for the preimage `A_N` of a profile ball.
#[derive(Debug, Clone)]
pub enum SetMembership {
    Table(Vec<bool>),
    Indicator(SetIndicator),
}

impl SetMembership {
    pub fn new(s: &ProfileSet, p: &ModelParams) -> Result<Self> {
        let ind = SetIndicator::new(s, p)?;
        if p.sites() <= TABLE_SITES {
            Ok(Self::Table(ind.membership_table()?))
        } else {
            Ok(Self::Indicator(ind))
        }
    }

    #[inline]
    pub fn contains(&self, eta: &Configuration) -> bool {
        match self {
            Self::Table(t) => t[eta.index()],
            Self::Indicator(ind) => ind.contains(eta),
        }
    }
}

/// Initial condition of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Initial {
    Fixed(Configuration),
    /// Law over the packed state index.
    Weights(Vec<f64>),
    /// Product Bernoulli law with the given density.
    Bernoulli(f64),
    /// Product Bernoulli law with one density per site.
    Product(Vec<f64>),
}

impl Initial {
    pub fn sample(&self, p: &ModelParams, rng: &mut RngStream) -> Result<Configuration> {
        match self {
            Self::Fixed(c) => {
                if c.len() != p.sites() {
                    return Err(Error::Dimension(format!("initial configuration has {} sites", c.len())));
                }
                Ok(c.clone())
            }
            Self::Weights(w) => {
                if Some(w.len()) != p.state_count() {
                    return Err(Error::Dimension(format!("initial law over {} states", w.len())));
                }
                let total: f64 = w.iter().sum();
                let mut u = rng.uniform() * total;
                let mut pick = w.len() - 1;
                for (i, &wi) in w.iter().enumerate() {
                    if u < wi {
                        pick = i;
                        break;
                    }
                    u -= wi;
                }
                Ok(Configuration::from_index(pick, p.sites()))
            }
            Self::Bernoulli(rho) => {
                let mut c = Configuration::empty(p.sites());
                for i in 0..p.sites() {
                    if rng.uniform() < *rho {
                        c.set(i, true);
                    }
                }
                Ok(c)
            }
            Self::Product(rho) => {
                if rho.len() != p.sites() {
                    return Err(Error::Dimension(format!("{} site densities for {} sites", rho.len(), p.sites())));
                }
                let mut c = Configuration::empty(p.sites());
                for (i, r) in rho.iter().enumerate() {
                    if rng.uniform() < *r {
                        c.set(i, true);
                    }
                }
                Ok(c)
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Self::Fixed(c) => format!("fixed {c:?}"),
            Self::Weights(w) => format!("law over {} states", w.len()),
            Self::Bernoulli(rho) => format!("Bernoulli product with density {rho}"),
            Self::Product(rho) => format!("Bernoulli product over {} sites", rho.len()),
        }
    }
}

/// Applies one jump to `eta` in place and returns its kind and the holding
/// time before it.
pub fn kmc_advance(eta: &mut Configuration, p: &ModelParams, rng: &mut RngStream) -> (TransitionKind, f64) {
    let len = eta.len();
    let bonds = eta.discordant_bonds();
    let left = boundary_rate(eta.get(0), p.alpha);
    let right = boundary_rate(eta.get(len - 1), p.beta);
    let total = 0.5 * bonds as f64 + left + right;
    let dt = rng.exponential(total);
    let mut u = rng.uniform() * total;
    let exchange = 0.5 * bonds as f64;
    let kind = if u < exchange {
        let k = ((u / 0.5) as usize).min(bonds - 1);
        let i = eta.nth_discordant_bond(k).expect("bond index below discordant count");
        eta.swap_with_next(i);
        TransitionKind::Exchange(i + 1)
    } else {
        u -= exchange;
        if u < left {
            eta.flip(0);
            TransitionKind::BoundaryFlip(1)
        } else {
            eta.flip(len - 1);
            TransitionKind::BoundaryFlip(len)
        }
    };
    (kind, dt)
}

/// One step of the jump chain: the next configuration and the exponential
/// holding time (rate `lambda(eta)`) spent in `eta`.
pub fn kmc_step(eta: &Configuration, p: &ModelParams, rng: &mut RngStream) -> Result<(Configuration, f64)> {
    total_exit_rate(eta, p)?;
    let mut next = eta.clone();
    let (_, dt) = kmc_advance(&mut next, p, rng);
    Ok((next, dt))
}

/// Result of one hitting-time run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum HitOutcome {
    Hit(f64),
    Timeout,
}

pub fn sample_hitting_time(
    p: &ModelParams,
    s: &ProfileSet,
    init: &Initial,
    rng: &mut RngStream,
    horizon: f64,
) -> Result<HitOutcome> {
    sample_hitting_time_with(p, &SetMembership::new(s, p)?, init, rng, horizon)
}

/// First time the trajectory enters the set; 0 when it starts inside.
pub fn sample_hitting_time_with(
    p: &ModelParams,
    set: &SetMembership,
    init: &Initial,
    rng: &mut RngStream,
    horizon: f64,
) -> Result<HitOutcome> {
    if !(horizon > 0.0) {
        return Err(Error::Argument(format!("horizon must be positive, got {horizon}")));
    }
    let mut eta = init.sample(p, rng)?;
    let mut t = 0.0;
    while !set.contains(&eta) {
        let (_, dt) = kmc_advance(&mut eta, p, rng);
        t += dt;
        if t > horizon {
            return Ok(HitOutcome::Timeout);
        }
    }
    Ok(HitOutcome::Hit(t))
}

/// Simulated hitting times with provenance. Sample `i` uses stream `i` of
/// `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingSampleSet {
    pub params: ModelParams,
    pub set: ProfileSet,
    pub init: String,
    pub seed: u64,
    pub horizon: f64,
    /// Hitting time, or the horizon for timed-out runs.
    pub samples: Vec<f64>,
    pub timeouts: Vec<bool>,
}

impl HittingSampleSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn finite(&self) -> Vec<f64> {
        self.samples
            .iter()
            .zip(&self.timeouts)
            .filter(|(_, t)| !**t)
            .map(|(s, _)| *s)
            .collect()
    }

    pub fn timeout_count(&self) -> usize {
        self.timeouts.iter().filter(|&&t| t).count()
    }

    /// Mean and standard error of the finite samples.
    pub fn mean_and_error(&self) -> (f64, f64) {
        mean_and_error(&self.finite())
    }

    /// CSV with columns `stream_id, sample, timeout_flag`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["stream_id", "sample", "timeout_flag"])?;
        for (i, (s, t)) in self.samples.iter().zip(&self.timeouts).enumerate() {
            out.write_record([i.to_string(), format!("{s:e}"), (*t as u8).to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Mean and standard error of the mean.
pub fn mean_and_error(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    if x.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs `f(i)` for `i in 0..n` on a pool of `workers` threads, keeping order.
pub fn run_replicas<T: Send>(n: usize, workers: usize, f: impl Fn(usize) -> T + Sync + Send) -> Result<Vec<T>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Argument(format!("thread pool: {e}")))?;
    Ok(pool.install(|| (0..n).into_par_iter().map(f).collect()))
}

/// `n` independent hitting times; deterministic given `seed` whatever the
/// worker count.
pub fn sample_many(
    p: &ModelParams,
    s: &ProfileSet,
    init: &Initial,
    n: usize,
    seed: u64,
    horizon: f64,
    workers: usize,
) -> Result<HittingSampleSet> {
    if n == 0 {
        return Err(Error::Argument("sample count must be at least one".into()));
    }
    let set = SetMembership::new(s, p)?;
    let runs = run_replicas(n, workers, |i| {
        let mut rng = RngStream::new(seed, i as u64);
        sample_hitting_time_with(p, &set, init, &mut rng, horizon)
    })?;
    let mut samples = Vec::with_capacity(n);
    let mut timeouts = Vec::with_capacity(n);
    for r in runs {
        match r? {
            HitOutcome::Hit(t) => {
                samples.push(t);
                timeouts.push(false);
            }
            HitOutcome::Timeout => {
                samples.push(horizon);
                timeouts.push(true);
            }
        }
    }
    Ok(HittingSampleSet {
        params: *p,
        set: s.clone(),
        init: init.describe(),
        seed,
        horizon,
        samples,
        timeouts,
    })
}

/// Scale used to normalize hitting times before the exponential fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Normalizer {
    SampleMean,
    Exact(f64),
}

/// `sup_t |F_n(t) - (1 - e^{-t})|` for the samples divided by the
/// normalizer; timed-out runs are left out.
pub fn ks_exponential(samples: &HittingSampleSet, normalizer: Normalizer) -> Result<f64> {
    ks_exponential_values(&samples.finite(), normalizer)
}

pub fn ks_exponential_values(samples: &[f64], normalizer: Normalizer) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::Degenerate(format!("{} finite samples, need at least two", samples.len())));
    }
    let scale = match normalizer {
        Normalizer::SampleMean => samples.iter().sum::<f64>() / samples.len() as f64,
        Normalizer::Exact(m) => m,
    };
    if !(scale > 0.0) {
        return Err(Error::Degenerate(format!("normalizer {scale} is not positive")));
    }
    let mut x: Vec<f64> = samples.iter().map(|s| s / scale).collect();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    Ok(x.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = 1.0 - (-v).exp();
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{build_generator, solve_stationary, stationary_mean_hitting, StateSet};
    use crate::model::{enumerate_transitions, TestBasis};

    #[test]
    fn holding_time_mean() {
        let p = ModelParams::new(6, 0.2, 0.7).unwrap();
        let eta = Configuration::from_occupancy(&[1, 0, 0, 1, 1]).unwrap();
        let lambda = total_exit_rate(&eta, &p).unwrap();
        let mut rng = RngStream::new(3, 0);
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| kmc_step(&eta, &p, &mut rng).unwrap().1).sum::<f64>() / n as f64;
        assert!((mean - 1.0 / lambda).abs() < 3.0 / lambda / (n as f64).sqrt());
    }

    #[test]
    fn jump_frequencies_follow_rates() {
        let p = ModelParams::new(5, 0.2, 0.7).unwrap();
        let eta = Configuration::from_occupancy(&[0, 1, 1, 0]).unwrap();
        let moves = enumerate_transitions(&eta, &p).unwrap();
        let lambda = total_exit_rate(&eta, &p).unwrap();
        let mut rng = RngStream::new(9, 1);
        let n = 100_000;
        let mut counts = vec![0usize; moves.len()];
        for _ in 0..n {
            let (next, _) = kmc_step(&eta, &p, &mut rng).unwrap();
            let k = moves.iter().position(|m| m.target == next).unwrap();
            counts[k] += 1;
        }
        for (m, c) in moves.iter().zip(&counts) {
            let pr = m.rate / lambda;
            let se = (pr * (1.0 - pr) / n as f64).sqrt();
            assert!((*c as f64 / n as f64 - pr).abs() < 4.0 * se);
        }
    }

    #[test]
    fn fixed_seed_repeats() {
        let p = ModelParams::new(7, 0.3, 0.6).unwrap();
        let eta = Configuration::from_occupancy(&[1, 1, 0, 0, 1, 0]).unwrap();
        let a = kmc_step(&eta, &p, &mut RngStream::new(77, 4)).unwrap();
        let b = kmc_step(&eta, &p, &mut RngStream::new(77, 4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn trivial_hits() {
        let p = ModelParams::new(6, 0.3, 0.3).unwrap();
        let everything = ProfileSet::from_fn(6, |_| 0.9, 1.5, TestBasis::default()).unwrap();
        let mut rng = RngStream::new(1, 0);
        let init = Initial::Fixed(Configuration::empty(5));
        assert_eq!(sample_hitting_time(&p, &everything, &init, &mut rng, 1.0).unwrap(), HitOutcome::Hit(0.0));
        let far = ProfileSet::from_fn(6, |_| 0.9, 0.05, TestBasis::default()).unwrap();
        assert_eq!(sample_hitting_time(&p, &far, &init, &mut rng, 1e-3).unwrap(), HitOutcome::Timeout);
    }

    #[test]
    fn sample_many_is_worker_independent() {
        let p = ModelParams::new(6, 0.3, 0.3).unwrap();
        let s = ProfileSet::from_fn(6, |_| 0.7, 0.05, TestBasis::default()).unwrap();
        let init = Initial::Bernoulli(0.3);
        let a = sample_many(&p, &s, &init, 40, 11, 1e6, 1).unwrap();
        let b = sample_many(&p, &s, &init, 40, 11, 1e6, 4).unwrap();
        assert_eq!(a.samples, b.samples);
        assert!(sample_many(&p, &s, &init, 0, 11, 1e6, 1).is_err());
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("stream_id,sample,timeout_flag\n"));
        assert_eq!(text.lines().count(), 41);
    }

    #[test]
    fn simulated_mean_matches_exact() {
        let p = ModelParams::new(8, 0.3, 0.3).unwrap();
        let s = ProfileSet::from_fn(8, |_| 0.7, 0.05, TestBasis::default()).unwrap();
        let q = build_generator(&p).unwrap();
        let nu = solve_stationary(&q).unwrap();
        let a = StateSet::from_profile_set(&s, &p).unwrap();
        let exact = stationary_mean_hitting(&q, &nu, &a).unwrap();
        let set = sample_many(&p, &s, &Initial::Weights(nu.weights.clone()), 2000, 5, 1e4 * exact, 1).unwrap();
        assert_eq!(set.timeout_count(), 0);
        let (m, se) = set.mean_and_error();
        assert!((m - exact).abs() < 3.0 * se, "{m} +- {se} vs {exact}");
    }

    #[test]
    fn ks_reference_values() {
        let n = 500;
        let q: Vec<f64> = (1..=n).map(|i| -(1.0 - (i as f64 - 0.5) / n as f64).ln()).collect();
        assert!(ks_exponential_values(&q, Normalizer::Exact(1.0)).unwrap() <= 0.5 / n as f64 + 1e-12);
        let ones = vec![1.0; 10];
        let d = ks_exponential_values(&ones, Normalizer::Exact(1.0)).unwrap();
        assert!((d - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
        assert!(matches!(ks_exponential_values(&[1.0], Normalizer::SampleMean), Err(Error::Degenerate(_))));
    }
}
