use std::collections::BTreeMap;

use serde::Serialize;

use super::config::{ExperimentConfig, ProfileExpr};
use super::report::{cell, CsvBlock, Report};
use crate::error::{Error, Result};
use crate::exact::{
    bernoulli_product, build_generator_capped, capacity_representation_mean, conditioned_distribution,
    detailed_balance_defect, hitting_cdf_exact, mean_hitting_times, mixing_time_capped, quantile_time,
    relaxation_time, site_densities, solve_stationary, stationary_mean_hitting, RateMatrix, StateSet,
    StationaryDistribution, MIXING_STATE_CAP, RELAXATION_STATE_CAP,
};
use crate::exact::average_jump_rate;
use crate::macroscopic::{
    energy, heat_solve, profile_nodes, quasipotential_ladder, quasipotential_lower_bound, rate_functional,
    sample_set_profiles, OptimizerOptions, RateFunctionalResult, SpaceTimePath,
};
use crate::model::{
    default_mesh, profile_distance, stationary_density, stationary_profile, Configuration, DensityProfile, ModelParams,
    ProfileSet,
};
use crate::sim::{
    coupling_mixing_bound, hydrodynamic_trajectory, ks_exponential, log_grid, run_replicas, sample_many,
    smoothed_sup_deviation, CouplingBound, HittingSampleSet, Initial, Normalizer,
};

/// Generator and stationary law at one scale, refusing state spaces above
/// `cap`.
pub fn solve_chain(p: &ModelParams, cap: usize) -> Result<(RateMatrix, StationaryDistribution)> {
    let q = build_generator_capped(p, cap)?;
    let nu = solve_stationary(&q)?;
    Ok((q, nu))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationarySummary {
    pub n: usize,
    pub states: usize,
    pub site_density: Vec<f64>,
    /// `max |nu - Bernoulli product|`, for equal reservoir densities only.
    pub product_deviation: Option<f64>,
    /// `max_x |rho(x) - rho_bar(x/N)|`.
    pub linear_gap: f64,
    pub detailed_balance_defect: f64,
}

pub fn stationary_summary(p: &ModelParams, cap: usize) -> Result<StationarySummary> {
    let (q, nu) = solve_chain(p, cap)?;
    let site_density = site_densities(p, &nu);
    let product_deviation = p.is_reversible().then(|| {
        let prod = bernoulli_product(p, p.alpha);
        nu.weights.iter().zip(&prod).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    });
    let linear_gap = site_density
        .iter()
        .enumerate()
        .map(|(i, r)| (r - stationary_density(p, (i + 1) as f64 / p.n as f64)).abs())
        .fold(0.0, f64::max);
    Ok(StationarySummary {
        n: p.n,
        states: q.dim(),
        site_density,
        product_deviation,
        linear_gap,
        detailed_balance_defect: detailed_balance_defect(&q, &nu),
    })
}

pub fn cmd_stationary(cfg: &ExperimentConfig) -> Result<Report> {
    let rows = run_replicas(cfg.model.n.len(), cfg.run.workers, |k| {
        stationary_summary(&cfg.params(cfg.model.n[k])?, cfg.run.cap)
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut block = CsvBlock::new("densities", &["n", "site", "x", "density", "rho_bar"]);
    for r in &rows {
        let p = cfg.params(r.n)?;
        for (i, d) in r.site_density.iter().enumerate() {
            let x = (i + 1) as f64 / r.n as f64;
            block.push(vec![r.n.to_string(), (i + 1).to_string(), cell(x), cell(*d), cell(stationary_density(&p, x))]);
        }
    }
    Report::new("stationary", cfg, BTreeMap::new(), &rows, vec![block])
}

/// Exact hitting quantities of a ball at one scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactHitting {
    pub n: usize,
    pub states: usize,
    pub set_size: usize,
    pub nu_a: f64,
    /// `E_nu[H_A]` by the direct solve.
    pub mean: f64,
    /// `r_N(A^c, A)`.
    pub r: f64,
    pub r_mean: f64,
    /// `E_nu[H_A]` through the capacity representation.
    pub representation_mean: Option<f64>,
    pub theta: Option<f64>,
}

impl ExactHitting {
    pub fn representation_gap(&self) -> Option<f64> {
        self.representation_mean.map(|m| (m - self.mean).abs() / self.mean)
    }
}

/// Largest state space on which the capacity representation is evaluated
/// by default; it costs two solves per state outside the set.
pub const REPRESENTATION_STATE_CAP: usize = 1024;

pub fn exact_hitting(q: &RateMatrix, nu: &StationaryDistribution, a: &StateSet, n: usize, representation: bool, theta: bool) -> Result<ExactHitting> {
    let mean = stationary_mean_hitting(q, nu, a)?;
    let r = average_jump_rate(q, nu, a)?;
    let representation_mean = if representation {
        Some(capacity_representation_mean(q, nu, a)?)
    } else {
        None
    };
    let theta = if theta {
        Some(quantile_time(q, a, &nu.weights, 1e3 * mean)?.theta)
    } else {
        None
    };
    Ok(ExactHitting {
        n,
        states: q.dim(),
        set_size: a.len(),
        nu_a: a.measure(&nu.weights),
        mean,
        r,
        r_mean: r * mean,
        representation_mean,
        theta,
    })
}

/// Preimage of a ball, rejected unless it stays away from the stationary
/// profile and has a nonempty preimage.
pub fn rare_target(s: &ProfileSet, p: &ModelParams, field: &str) -> Result<StateSet> {
    if !s.is_rare(p)? {
        return Err(Error::validation(
            field,
            format!("ball contains the stationary profile at N = {} (separation {:.3e})", p.n, s.separation(p)?),
        ));
    }
    let a = StateSet::from_profile_set(s, p)?;
    if a.is_empty() {
        return Err(Error::validation(field, format!("ball has no configurations at N = {}", p.n)));
    }
    Ok(a)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulatedHitting {
    pub n: usize,
    pub start: String,
    /// Exact mean from the same start.
    pub exact_start_mean: f64,
    /// Exact stationary mean used to normalize.
    pub normalizer: f64,
    pub sample_mean: f64,
    pub standard_error: f64,
    pub timeouts: usize,
    pub ks: f64,
    pub ks_sample_mean: f64,
}

/// Simulated hitting times from `init`, normalized by `e_nu` before the
/// Kolmogorov-Smirnov distance to `Exp(1)`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_hitting(
    p: &ModelParams,
    s: &ProfileSet,
    init: &Initial,
    start: &str,
    exact_start_mean: f64,
    e_nu: f64,
    samples: usize,
    seed: u64,
    horizon: f64,
    workers: usize,
) -> Result<(SimulatedHitting, HittingSampleSet)> {
    let set = sample_many(p, s, init, samples, seed, horizon, workers)?;
    let (sample_mean, standard_error) = set.mean_and_error();
    let summary = SimulatedHitting {
        n: p.n,
        start: start.into(),
        exact_start_mean,
        normalizer: e_nu,
        sample_mean,
        standard_error,
        timeouts: set.timeout_count(),
        ks: ks_exponential(&set, Normalizer::Exact(e_nu))?,
        ks_sample_mean: ks_exponential(&set, Normalizer::SampleMean)?,
    };
    Ok((summary, set))
}

/// Law of the stationary chain conditioned on a ball disjoint from `a`,
/// with the exact mean hitting time of `a` from it.
pub fn conditioned_start(
    q: &RateMatrix,
    nu: &StationaryDistribution,
    a: &StateSet,
    b: &ProfileSet,
    p: &ModelParams,
) -> Result<(Vec<f64>, f64)> {
    let bset = StateSet::from_profile_set(b, p)?;
    if bset.is_empty() {
        return Err(Error::validation("hitting.conditioned_center", format!("conditioning ball is empty at N = {}", p.n)));
    }
    if !bset.is_disjoint(a) {
        return Err(Error::validation("hitting.conditioned_center", "conditioning ball meets the target"));
    }
    let mu = conditioned_distribution(nu, &bset)?;
    let m = mean_hitting_times(q, a)?;
    let mean = mu.iter().zip(&m).map(|(w, h)| w * h).sum();
    Ok((mu, mean))
}

fn sample_block(name: &str, set: &HittingSampleSet) -> CsvBlock {
    let mut b = CsvBlock::new(name, &["stream_id", "sample", "timeout_flag"]);
    for (i, (s, t)) in set.samples.iter().zip(&set.timeouts).enumerate() {
        b.push(vec![i.to_string(), cell(*s), (*t as u8).to_string()]);
    }
    b
}

/// Smallest entropy bound over sampled profiles of a ball.
pub fn sampled_entropy_bound(s: &ProfileSet, p: &ModelParams, count: usize, seed: u64) -> Result<f64> {
    sample_set_profiles(s, count, seed)?
        .iter()
        .map(|g| quasipotential_lower_bound(g, p))
        .try_fold(f64::INFINITY, |m, v| Ok(m.min(v?)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct HittingResults {
    sweep: Vec<ExactHitting>,
    stationary_start: SimulatedHitting,
    conditioned_start: SimulatedHitting,
    conditioned_set_size: usize,
    /// Entropy of the conditioning center and smallest entropy over sampled
    /// profiles of the target, both relative to the stationary profile.
    entropy_conditioned_center: f64,
    entropy_target_sampled: f64,
}

pub fn cmd_hitting(cfg: &ExperimentConfig) -> Result<Report> {
    let ns = &cfg.model.n;
    let sweep = run_replicas(ns.len(), cfg.run.workers, |k| -> Result<ExactHitting> {
        let p = cfg.params(ns[k])?;
        let a = rare_target(&cfg.target_set(ns[k])?, &p, "set.center")?;
        let (q, nu) = solve_chain(&p, cfg.run.cap)?;
        let small = q.dim() <= REPRESENTATION_STATE_CAP;
        exact_hitting(&q, &nu, &a, p.n, small, q.dim() <= MIXING_STATE_CAP)
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut sweep_block = CsvBlock::new(
        "sweep",
        &["n", "states", "set_size", "nu_a", "mean", "r", "r_mean", "representation_mean", "theta"],
    );
    for e in &sweep {
        let opt = |v: Option<f64>| v.map(cell).unwrap_or_default();
        sweep_block.push(vec![
            e.n.to_string(),
            e.states.to_string(),
            e.set_size.to_string(),
            cell(e.nu_a),
            cell(e.mean),
            cell(e.r),
            cell(e.r_mean),
            opt(e.representation_mean),
            opt(e.theta),
        ]);
    }

    let n = cfg.hitting.sim_n;
    let p = cfg.params(n)?;
    let s = cfg.target_set(n)?;
    let a = rare_target(&s, &p, "set.center")?;
    let (q, nu) = solve_chain(&p, cfg.run.cap)?;
    let e_nu = stationary_mean_hitting(&q, &nu, &a)?;
    let seed = cfg.run.seed;
    let h = &cfg.hitting;
    let (stat, stat_set) = simulate_hitting(
        &p,
        &s,
        &Initial::Weights(nu.weights.clone()),
        "stationary",
        e_nu,
        e_nu,
        h.samples,
        seed,
        h.horizon,
        cfg.run.workers,
    )?;
    let b = cfg.conditioned_set(n)?;
    let (mu, e_mu) = conditioned_start(&q, &nu, &a, &b, &p)?;
    let b_size = mu.iter().filter(|w| **w > 0.0).count();
    let (cond, cond_set) = simulate_hitting(
        &p,
        &s,
        &Initial::Weights(mu),
        "conditioned",
        e_mu,
        e_nu,
        h.samples,
        seed + 1,
        h.horizon,
        cfg.run.workers,
    )?;

    let times: Vec<f64> = (0..h.cdf_points).map(|k| 3.0 * e_nu * k as f64 / (h.cdf_points - 1) as f64).collect();
    let survival_values = hitting_cdf_exact(&q, &a, &nu.weights, &times)?;
    let r = average_jump_rate(&q, &nu, &a)?;
    let nu_a = a.measure(&nu.weights);
    let mut survival = CsvBlock::new("cdf", &["t", "cdf", "bound"]);
    for (t, sv) in times.iter().zip(&survival_values) {
        survival.push(vec![cell(*t), cell(1.0 - sv), cell(nu_a + t * (1.0 - nu_a) * r)]);
    }

    let results = HittingResults {
        sweep,
        stationary_start: stat,
        conditioned_start: cond,
        conditioned_set_size: b_size,
        entropy_conditioned_center: quasipotential_lower_bound(&b.center, &p)?,
        entropy_target_sampled: sampled_entropy_bound(&s, &p, 16, seed)?,
    };
    let seeds = BTreeMap::from([
        ("stationary_samples".to_string(), seed),
        ("conditioned_samples".to_string(), seed + 1),
        ("target_profiles".to_string(), seed),
    ]);
    let blocks = vec![
        sweep_block,
        survival,
        sample_block("samples_stationary", &stat_set),
        sample_block("samples_conditioned", &cond_set),
    ];
    Report::new("hitting", cfg, seeds, &results, blocks)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingRow {
    pub n: usize,
    pub method: String,
    pub t_mix: f64,
    pub t_rel: Option<f64>,
    pub cubic_bound: f64,
}

pub fn exact_mixing(p: &ModelParams, cap: usize) -> Result<MixingRow> {
    let (q, nu) = solve_chain(p, cap.min(MIXING_STATE_CAP))?;
    let t_mix = mixing_time_capped(&q, &nu, MIXING_STATE_CAP)?.t_mix;
    let t_rel = if q.dim() <= RELAXATION_STATE_CAP {
        Some(relaxation_time(&q, &nu)?)
    } else {
        None
    };
    Ok(MixingRow {
        n: p.n,
        method: "exact".into(),
        t_mix,
        t_rel,
        cubic_bound: 0.5 * (p.n as f64).powi(3),
    })
}

/// Coupling bound on a log grid from 1 to `N^3`.
pub fn coupling_mixing(p: &ModelParams, runs: usize, grid_points: usize, seed: u64, workers: usize) -> Result<(MixingRow, CouplingBound)> {
    let grid = log_grid(1.0, (p.n as f64).powi(3), grid_points);
    let b = coupling_mixing_bound(p, &grid, runs, seed, workers)?;
    Ok((
        MixingRow {
            n: p.n,
            method: "coupling".into(),
            t_mix: b.t,
            t_rel: None,
            cubic_bound: 0.5 * (p.n as f64).powi(3),
        },
        b,
    ))
}

/// Mixing time of the two-state chain with unit rates, `ln 2 / 2` in
/// closed form.
pub fn two_state_mixing() -> Result<f64> {
    let q = RateMatrix::from_triplets(2, &[(0, 1, 1.0), (1, 0, 1.0)])?;
    let nu = solve_stationary(&q)?;
    Ok(mixing_time_capped(&q, &nu, 2)?.t_mix)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct MixingResults {
    rows: Vec<MixingRow>,
    two_state: f64,
    two_state_closed_form: f64,
}

pub fn cmd_mixing(cfg: &ExperimentConfig) -> Result<Report> {
    let m = &cfg.mixing;
    let mut rows = Vec::new();
    for &n in &m.exact_n {
        rows.push(exact_mixing(&cfg.params(n)?, cfg.run.cap)?);
    }
    let mut seeds = BTreeMap::new();
    let mut table = CsvBlock::new("coupling", &["n", "t", "fraction", "upper"]);
    for &n in &m.coupling_n {
        let seed = cfg.run.seed + n as u64;
        seeds.insert(format!("coupling_n{n}"), seed);
        let (row, b) = coupling_mixing(&cfg.params(n)?, m.coupling_runs, m.grid_points, seed, cfg.run.workers)?;
        for e in &b.table {
            table.push(vec![n.to_string(), cell(e.t), cell(e.fraction), cell(e.upper)]);
        }
        rows.push(row);
    }
    let mut summary = CsvBlock::new("table", &["n", "method", "t_mix", "t_rel", "cubic_bound"]);
    for r in &rows {
        summary.push(vec![
            r.n.to_string(),
            r.method.clone(),
            cell(r.t_mix),
            r.t_rel.map(cell).unwrap_or_default(),
            cell(r.cubic_bound),
        ]);
    }
    let results = MixingResults {
        rows,
        two_state: two_state_mixing()?,
        two_state_closed_form: 2f64.ln() / 2.0,
    };
    Report::new("mixing", cfg, seeds, &results, vec![summary, table])
}

/// Least-squares fit `y = a + b / N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InverseFit {
    pub intercept: f64,
    pub slope: f64,
}

pub fn inverse_fit(ns: &[usize], ys: &[f64]) -> Result<InverseFit> {
    if ns.len() != ys.len() || ns.len() < 2 {
        return Err(Error::Argument("fit needs at least two matching points".into()));
    }
    let xs: Vec<f64> = ns.iter().map(|&n| 1.0 / n as f64).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok(InverseFit {
        intercept: my - slope * mx,
        slope,
    })
}

/// Successive differences of `(1/N) log E_nu[H]` and two readings of
/// "shrinking": mean absolute difference over the second half below the
/// first half, and last below first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendDiagnostics {
    pub differences: Vec<f64>,
    pub first_half_mean: f64,
    pub second_half_mean: f64,
    pub first: f64,
    pub last: f64,
}

impl TrendDiagnostics {
    pub fn new(ys: &[f64]) -> Self {
        let differences: Vec<f64> = ys.windows(2).map(|w| w[1] - w[0]).collect();
        let k = differences.len();
        let half = k / 2;
        let mean_abs = |v: &[f64]| v.iter().map(|d| d.abs()).sum::<f64>() / v.len().max(1) as f64;
        Self {
            first_half_mean: mean_abs(&differences[..half]),
            second_half_mean: mean_abs(&differences[k - half..]),
            first: differences.first().map_or(f64::NAN, |d| d.abs()),
            last: differences.last().map_or(f64::NAN, |d| d.abs()),
            differences,
        }
    }
}

/// Entropy bound and numerical quasi-potential of one sampled profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileEstimate {
    pub index: usize,
    pub distance_to_center: f64,
    pub lower_bound: f64,
    pub estimate: f64,
    pub converged: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn sampled_quasipotentials(
    s: &ProfileSet,
    p: &ModelParams,
    count: usize,
    seed: u64,
    ladder: &[f64],
    dt: f64,
    n_x: usize,
    max_iter: usize,
    workers: usize,
) -> Result<Vec<ProfileEstimate>> {
    let profiles = sample_set_profiles(s, count, seed)?;
    let opts = OptimizerOptions {
        max_iter,
        ..OptimizerOptions::default()
    };
    run_replicas(profiles.len(), workers, |i| -> Result<ProfileEstimate> {
        let g = &profiles[i];
        let lad = quasipotential_ladder(g, p, ladder, dt, n_x, &opts)?;
        Ok(ProfileEstimate {
            index: i,
            distance_to_center: profile_distance(g, &s.center, &s.basis)?,
            lower_bound: quasipotential_lower_bound(g, p)?,
            estimate: lad.value,
            converged: lad.steps.iter().all(|s| s.converged),
        })
    })?
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingResults {
    pub n: Vec<usize>,
    pub mean: Vec<f64>,
    pub log_mean_over_n: Vec<f64>,
    pub trend: TrendDiagnostics,
    pub fit: InverseFit,
    pub profiles: Vec<ProfileEstimate>,
    pub lower_bound: f64,
    pub estimate: f64,
}

pub fn scaling_sweep(cfg: &ExperimentConfig) -> Result<ScalingResults> {
    let ns = &cfg.model.n;
    let means = run_replicas(ns.len(), cfg.run.workers, |k| -> Result<f64> {
        let p = cfg.params(ns[k])?;
        let a = rare_target(&cfg.target_set(ns[k])?, &p, "set.center")?;
        let (q, nu) = solve_chain(&p, cfg.run.cap)?;
        stationary_mean_hitting(&q, &nu, &a)
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let ys: Vec<f64> = means.iter().zip(ns).map(|(e, &n)| e.ln() / n as f64).collect();
    let n_max = *ns.last().expect("nonempty sweep");
    let p = cfg.params(n_max)?;
    let sc = &cfg.scaling;
    let profiles = sampled_quasipotentials(
        &cfg.target_set(n_max)?,
        &p,
        sc.profiles,
        cfg.run.seed,
        &sc.ladder,
        sc.dt,
        sc.n_x,
        sc.max_iter,
        cfg.run.workers,
    )?;
    Ok(ScalingResults {
        n: ns.clone(),
        trend: TrendDiagnostics::new(&ys),
        fit: inverse_fit(ns, &ys)?,
        lower_bound: profiles.iter().map(|e| e.lower_bound).fold(f64::INFINITY, f64::min),
        estimate: profiles.iter().map(|e| e.estimate).fold(f64::INFINITY, f64::min),
        profiles,
        mean: means,
        log_mean_over_n: ys,
    })
}

pub fn cmd_scaling(cfg: &ExperimentConfig) -> Result<Report> {
    let r = scaling_sweep(cfg)?;
    let mut sweep = CsvBlock::new("sweep", &["n", "mean", "log_mean_over_n"]);
    for ((n, e), y) in r.n.iter().zip(&r.mean).zip(&r.log_mean_over_n) {
        sweep.push(vec![n.to_string(), cell(*e), cell(*y)]);
    }
    let mut prof = CsvBlock::new("profiles", &["index", "distance_to_center", "lower_bound", "estimate", "converged"]);
    for e in &r.profiles {
        prof.push(vec![
            e.index.to_string(),
            cell(e.distance_to_center),
            cell(e.lower_bound),
            cell(e.estimate),
            e.converged.to_string(),
        ]);
    }
    let seeds = BTreeMap::from([("target_profiles".to_string(), cfg.run.seed)]);
    Report::new("scaling", cfg, seeds, &r, vec![sweep, prof])
}

/// Initial law for a profile expression: all sites occupied or empty for
/// the constants 1 and 0, otherwise independent sites with density
/// `gamma(x/N)`.
pub fn initial_from_profile(expr: &ProfileExpr, p: &ModelParams) -> Initial {
    match expr {
        ProfileExpr::Constant(c) if *c == 1.0 => Initial::Fixed(Configuration::full(p.sites())),
        ProfileExpr::Constant(c) if *c == 0.0 => Initial::Fixed(Configuration::empty(p.sites())),
        ProfileExpr::Constant(c) => Initial::Bernoulli(*c),
        other => Initial::Product((1..p.n).map(|x| other.eval(p, x as f64 / p.n as f64)).collect()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HydroComparison {
    pub t: f64,
    /// Sup of the difference after the moving average.
    pub smoothed_sup: f64,
    pub raw_sup: f64,
    pub simulated: Vec<f64>,
    /// Crank-Nicolson solution at `x = k/N`.
    pub reference: Vec<f64>,
}

/// Replica-averaged occupations at `t N^2` against the heat equation from
/// the same initial profile.
#[allow(clippy::too_many_arguments)]
pub fn hydro_comparison(
    p: &ModelParams,
    init: &ProfileExpr,
    frames: &[f64],
    replicas: usize,
    window: usize,
    n_x: usize,
    n_t: usize,
    seed: u64,
    workers: usize,
) -> Result<Vec<HydroComparison>> {
    if n_x % p.n != 0 {
        return Err(Error::validation("hydro.n_x", "must be a multiple of hydro.n"));
    }
    let t_max = *frames.last().ok_or_else(|| Error::validation("hydro.frames", "needs at least one frame"))?;
    let dt = t_max / n_t as f64;
    let rows: Vec<usize> = frames
        .iter()
        .map(|&t| {
            let i = (t / dt).round();
            if (i * dt - t).abs() > 1e-9 * t_max.max(1.0) {
                Err(Error::validation("hydro.frames", format!("frame {t} is not a multiple of the time step {dt}")))
            } else {
                Ok(i as usize)
            }
        })
        .collect::<Result<_>>()?;
    let sim = hydrodynamic_trajectory(p, &initial_from_profile(init, p), t_max, frames, replicas, seed, workers, default_mesh(p.n))?;
    let gamma = init.profile(p, 4 * n_x)?;
    let heat = heat_solve(&gamma, p, t_max, n_t, n_x)?;
    let stride = n_x / p.n;
    sim.into_iter()
        .zip(rows)
        .map(|(frame, i)| {
            let reference: Vec<f64> = (1..p.n).map(|k| heat.at(i, k * stride)).collect();
            let raw_sup = frame
                .site_means
                .iter()
                .zip(&reference)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            Ok(HydroComparison {
                t: frame.t,
                smoothed_sup: smoothed_sup_deviation(&frame.site_means, &reference, window)?,
                raw_sup,
                simulated: frame.site_means,
                reference,
            })
        })
        .collect()
}

pub fn cmd_hydro(cfg: &ExperimentConfig) -> Result<Report> {
    let d = &cfg.hydro;
    let p = cfg.params(d.n)?;
    let frames = hydro_comparison(&p, &d.init, &d.frames, d.replicas, d.window, d.n_x, d.n_t, cfg.run.seed, cfg.run.workers)?;
    let mut block = CsvBlock::new("frames", &["t", "site", "x", "simulated", "reference"]);
    for f in &frames {
        for (k, (s, r)) in f.simulated.iter().zip(&f.reference).enumerate() {
            let x = (k + 1) as f64 / p.n as f64;
            block.push(vec![cell(f.t), (k + 1).to_string(), cell(x), cell(*s), cell(*r)]);
        }
    }
    let seeds = BTreeMap::from([("replicas".to_string(), cfg.run.seed)]);
    Report::new("hydro", cfg, seeds, &frames, vec![block])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathCost {
    pub path: String,
    pub rate: f64,
    pub energy: f64,
    pub duality_gap: f64,
    pub elliptic_residual: f64,
}

/// Rate functional of the heat flow from `gamma` on an `n_t x n_x` grid.
pub fn heat_path_cost(gamma: &DensityProfile, p: &ModelParams, horizon: f64, n_t: usize, n_x: usize) -> Result<(SpaceTimePath, RateFunctionalResult)> {
    let u = heat_solve(gamma, p, horizon, n_t, n_x)?;
    let r = rate_functional(&u, gamma, p)?;
    Ok((u, r))
}

fn certificate_block(name: &str, r: &RateFunctionalResult) -> CsvBlock {
    let h = &r.certificate;
    let mut b = CsvBlock::new(name, &["t", "x", "h"]);
    let dt = h.horizon / h.n_t as f64;
    for i in 0..h.n_t {
        for (j, v) in h.interval(i).iter().enumerate() {
            b.push(vec![cell(i as f64 * dt), cell(j as f64 / h.n_x as f64), cell(*v)]);
        }
    }
    b
}

fn path_cost(name: &str, u: &SpaceTimePath, r: &RateFunctionalResult) -> PathCost {
    PathCost {
        path: name.into(),
        rate: r.value,
        energy: energy(u),
        duality_gap: r.diagnostics.duality_gap,
        elliptic_residual: r.diagnostics.elliptic_residual,
    }
}

pub fn cmd_ldp(cfg: &ExperimentConfig) -> Result<Report> {
    let l = &cfg.ldp;
    let p = cfg.params(cfg.model.n[0])?;
    let gamma = l.profile.profile(&p, 4 * l.n_x)?;
    let (heat, hr) = heat_path_cost(&gamma, &p, l.horizon, l.n_t, l.n_x)?;
    let mut costs = vec![path_cost("heat", &heat, &hr)];
    let mut blocks = vec![certificate_block("heat_certificate", &hr)];
    if let Some(target) = &l.target {
        let a = profile_nodes(&gamma, l.n_x, &p);
        let b = profile_nodes(&target.profile(&p, 4 * l.n_x)?, l.n_x, &p);
        let mut values = Vec::with_capacity((l.n_t + 1) * (l.n_x + 1));
        for i in 0..=l.n_t {
            let s = i as f64 / l.n_t as f64;
            values.extend(a.iter().zip(&b).map(|(x, y)| (1.0 - s) * x + s * y));
        }
        let u = SpaceTimePath::new(l.horizon, l.n_t, l.n_x, &p, values)?;
        let r = rate_functional(&u, &gamma, &p)?;
        costs.push(path_cost("straight", &u, &r));
        blocks.push(certificate_block("straight_certificate", &r));
    }
    Report::new("ldp", cfg, BTreeMap::new(), &costs, blocks)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct QuasiResults {
    lower_bound: f64,
    estimate: f64,
    ladder: Vec<crate::macroscopic::LadderStep>,
}

pub fn cmd_quasipotential(cfg: &ExperimentConfig) -> Result<Report> {
    let q = &cfg.quasipotential;
    let p = cfg.params(cfg.model.n[0])?;
    let gamma = q.profile.profile(&p, 4 * q.n_x)?;
    let opts = OptimizerOptions {
        max_iter: q.max_iter,
        ..OptimizerOptions::default()
    };
    let lad = quasipotential_ladder(&gamma, &p, &q.ladder, q.dt, q.n_x, &opts)?;
    let mut steps = CsvBlock::new("ladder", &["horizon", "value", "converged", "iterations"]);
    for s in &lad.steps {
        steps.push(vec![cell(s.horizon), cell(s.value), s.converged.to_string(), s.iterations.to_string()]);
    }
    let u = &lad.path;
    let mut path = CsvBlock::new("path", &["t", "x", "u"]);
    for i in 0..=u.n_t {
        for (j, v) in u.row(i).iter().enumerate() {
            path.push(vec![cell(i as f64 * u.dt()), cell(j as f64 * u.h()), cell(*v)]);
        }
    }
    let results = QuasiResults {
        lower_bound: quasipotential_lower_bound(&gamma, &p)?,
        estimate: lad.value,
        ladder: lad.steps,
    };
    Report::new("quasipotential", cfg, BTreeMap::new(), &results, vec![steps, path])
}

/// Distance of the target center from the stationary profile.
pub fn center_separation(s: &ProfileSet, p: &ModelParams) -> Result<f64> {
    profile_distance(&s.center, &stationary_profile(p, s.center.mesh())?, &s.basis)
}
