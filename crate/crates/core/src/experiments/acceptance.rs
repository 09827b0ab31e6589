use std::fmt;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use super::commands::{
    center_separation, conditioned_start, coupling_mixing, exact_hitting, exact_mixing, heat_path_cost,
    hydro_comparison, inverse_fit, rare_target, sampled_quasipotentials, simulate_hitting, solve_chain,
    stationary_summary, TrendDiagnostics,
};
use super::config::ProfileExpr;
use super::invariants::all_suites;
use crate::error::Result;
use crate::exact::{capacity_representation_mean, hitting_cdf_exact, outer_boundary, stationary_mean_hitting, StateSet};
use crate::macroscopic::{quasipotential_ladder, quasipotential_lower_bound, OptimizerOptions};
use crate::model::{default_mesh, stationary_density, stationary_profile, DensityProfile, ModelParams, ProfileSet, TestBasis};
use crate::sim::{absorbed_walk_means, counting_martingale_with, mean_and_error, run_replicas, Initial, RngStream, SetMembership};

// Pinned tolerances and sizes.
const PRODUCT_TOL: f64 = 1e-12;
const WALK_TOL: f64 = 1e-9;
const WALK_MAX_N: usize = 64;
const REPRESENTATION_TOL: f64 = 1e-8;
/// Absolute accuracy of the uniformized matrix exponential.
const CDF_BOUND_SLACK: f64 = 1e-10;
const CDF_POINTS: usize = 50;
const RE_BAND: (f64, f64) = (0.5, 2.0);
const KS_TOL: f64 = 0.05;
const HIT_SAMPLES: usize = 2000;
const MEAN_RANGE: (f64, f64) = (1e3, 1e5);
const SEPARATION_MIN: f64 = 0.15;
const THETA_BAND: (f64, f64) = (0.8, 1.2);
const HYDRO_TOL: f64 = 0.05;
const HYDRO_WINDOW: usize = 3;
const ZERO_COST_TOL: f64 = 1e-4;
const QUASI_SLACK: f64 = 1e-3;
const QUASI_CLOSED_FORM: f64 = 0.0872;
const QUASI_EQUILIBRIUM_TOL: f64 = 1e-4;
const MARTINGALE_SIGMAS: f64 = 3.0;
const MARTINGALE_REPLICAS: usize = 10_000;
const MARTINGALE_HORIZON: f64 = 1000.0;
const BAND_FACTORS: (f64, f64) = (0.5, 1.5);

/// Target ball shared by the hitting, trend and scaling criteria:
/// radius 0.05 around the constant 0.85 at `alpha = beta = 0.3`.
const RARE_CENTER: f64 = 0.85;
const RARE_RADIUS: f64 = 0.05;
const RARE_RESERVOIR: f64 = 0.3;
/// Conditioning ball for the conditioned start.
const CONDITIONED_CENTER: f64 = 0.45;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    AtMost,
    AtLeast,
}

/// One comparison of an observed value against a pinned bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub label: String,
    pub observed: f64,
    pub relation: Relation,
    pub bound: f64,
    pub holds: bool,
}

impl Check {
    pub fn at_most(label: impl Into<String>, observed: f64, bound: f64) -> Self {
        Self::new(label.into(), observed, Relation::AtMost, bound)
    }

    pub fn at_least(label: impl Into<String>, observed: f64, bound: f64) -> Self {
        Self::new(label.into(), observed, Relation::AtLeast, bound)
    }

    fn new(label: String, observed: f64, relation: Relation, bound: f64) -> Self {
        let holds = match relation {
            Relation::AtMost => observed <= bound,
            Relation::AtLeast => observed >= bound,
        };
        Self {
            label,
            observed,
            relation,
            bound,
            holds,
        }
    }

    /// Same check against a bound nothing finite can meet.
    fn unattainable(&self) -> Self {
        let bound = match self.relation {
            Relation::AtMost => f64::NEG_INFINITY,
            Relation::AtLeast => f64::INFINITY,
        };
        Self::new(self.label.clone(), self.observed, self.relation, bound)
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rel = match self.relation {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
        };
        write!(f, "{} = {:.6e} (expected {rel} {:.6e})", self.label, self.observed, self.bound)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: usize,
    pub name: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub error: Option<String>,
    pub evidence: Value,
}

impl CriterionResult {
    /// One line: id, verdict, name and the checks that decided it.
    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let detail = match &self.error {
            Some(e) => format!("error: {e}"),
            None => {
                let shown: Vec<String> = if self.passed {
                    self.checks.iter().map(|c| c.to_string()).collect()
                } else {
                    self.checks.iter().filter(|c| !c.holds).map(|c| c.to_string()).collect()
                };
                shown.join("; ")
            }
        };
        format!("criterion {:>2} {verdict} {}: {detail}", self.id, self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcceptanceSummary {
    pub results: Vec<CriterionResult>,
    pub passed: bool,
    pub failed: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct AcceptanceOptions {
    pub criteria: Vec<usize>,
    /// Criterion evaluated against unattainable bounds.
    pub perturb: Option<usize>,
    pub seed: u64,
    pub workers: usize,
}

impl Default for AcceptanceOptions {
    fn default() -> Self {
        Self {
            criteria: (1..=14).collect(),
            perturb: None,
            seed: 1,
            workers: 1,
        }
    }
}

pub const CRITERION_NAMES: [&str; 14] = [
    "product measure",
    "random-walk identity",
    "mixing bound",
    "capacity representation",
    "hitting CDF bound",
    "jump-rate product trend",
    "exponentiality",
    "quantile consistency",
    "hydrodynamics",
    "zero-cost path",
    "quasi-potential sandwich",
    "martingale and compensator",
    "scaling trend",
    "invariant suites",
];

type Outcome = Result<(Vec<Check>, Value)>;

/// Runs one criterion; errors become failures with the message attached.
pub fn run_criterion(id: usize, opts: &AcceptanceOptions) -> CriterionResult {
    let seed = opts.seed;
    let w = opts.workers;
    let out: Outcome = match id {
        1 => product_measure(),
        2 => walk_identity(),
        3 => mixing_bound(seed, w),
        4 => representation(),
        5 => cdf_bound(),
        6 => jump_rate_trend(),
        7 => exponentiality(seed, w),
        8 => quantile_consistency(),
        9 => hydrodynamics(seed, w),
        10 => zero_cost(),
        11 => sandwich(),
        12 => martingale(seed, w),
        13 => scaling_trend(seed, w),
        14 => invariant_suites(),
        _ => Err(crate::Error::Argument(format!("no criterion {id}"))),
    };
    let name = CRITERION_NAMES.get(id.wrapping_sub(1)).copied().unwrap_or("unknown").to_string();
    match out {
        Ok((mut checks, evidence)) => {
            if opts.perturb == Some(id) {
                checks = checks.iter().map(Check::unattainable).collect();
            }
            CriterionResult {
                id,
                name,
                passed: !checks.is_empty() && checks.iter().all(|c| c.holds),
                checks,
                error: None,
                evidence,
            }
        }
        Err(e) => CriterionResult {
            id,
            name,
            passed: false,
            checks: Vec::new(),
            error: Some(e.to_string()),
            evidence: Value::Null,
        },
    }
}

/// Runs the selected criteria in order, calling `progress` after each with
/// the result and its wall time in seconds.
pub fn run_acceptance(opts: &AcceptanceOptions, mut progress: impl FnMut(&CriterionResult, f64)) -> AcceptanceSummary {
    let mut results = Vec::new();
    for &id in &opts.criteria {
        let start = Instant::now();
        let r = run_criterion(id, opts);
        progress(&r, start.elapsed().as_secs_f64());
        results.push(r);
    }
    let failed: Vec<usize> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    AcceptanceSummary {
        passed: failed.is_empty(),
        failed,
        results,
    }
}

fn rare_params(n: usize) -> Result<ModelParams> {
    ModelParams::new(n, RARE_RESERVOIR, RARE_RESERVOIR)
}

fn ball(n: usize, center: f64) -> Result<ProfileSet> {
    ProfileSet::from_fn(n, |_| center, RARE_RADIUS, TestBasis::default())
}

fn product_measure() -> Outcome {
    let mut checks = Vec::new();
    for n in [5, 8, 12] {
        let p = ModelParams::new(n, 0.3, 0.3)?;
        let s = stationary_summary(&p, usize::MAX)?;
        checks.push(Check::at_most(format!("max |nu - product| at N={n}"), s.product_deviation.unwrap_or(f64::NAN), PRODUCT_TOL));
    }
    Ok((checks, Value::Null))
}

fn walk_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in 2..=WALK_MAX_N {
        for (i, m) in absorbed_walk_means(n)?.iter().enumerate() {
            let j = (i + 1) as f64;
            worst = worst.max((m - 0.5 * j * (n as f64 - j)).abs());
        }
    }
    Ok((vec![Check::at_most("max |E_j[H] - j(N-j)/2| over N<=64", worst, WALK_TOL)], Value::Null))
}

fn mixing_bound(seed: u64, workers: usize) -> Outcome {
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    for n in [5, 6, 8] {
        let r = exact_mixing(&ModelParams::new(n, 0.3, 0.6)?, usize::MAX)?;
        checks.push(Check::at_most(format!("exact T_mix at N={n}"), r.t_mix, r.cubic_bound));
        rows.push(r);
    }
    for n in [12, 16] {
        let (r, _) = coupling_mixing(&ModelParams::new(n, 0.3, 0.6)?, 400, 80, seed + n as u64, workers)?;
        checks.push(Check::at_most(format!("coupling bound at N={n}"), r.t_mix, r.cubic_bound));
        rows.push(r);
    }
    Ok((checks, json!(rows)))
}

fn representation() -> Outcome {
    let mut checks = Vec::new();
    for n in [5, 6, 8] {
        let p = ModelParams::new(n, 0.3, 0.6)?;
        let (q, nu) = solve_chain(&p, usize::MAX)?;
        let full = StateSet::singleton(q.dim(), q.dim() - 1)?;
        let ballset = StateSet::from_profile_set(&ProfileSet::from_fn(n, |_| 0.8, 0.05, TestBasis::default())?, &p)?;
        let boundary = outer_boundary(&full, &p)?;
        for (label, a) in [("singleton", full), ("ball", ballset), ("boundary-adjacent", boundary)] {
            let direct = stationary_mean_hitting(&q, &nu, &a)?;
            let rep = capacity_representation_mean(&q, &nu, &a)?;
            checks.push(Check::at_most(
                format!("relative gap, {label} set at N={n}"),
                (rep - direct).abs() / direct,
                REPRESENTATION_TOL,
            ));
        }
    }
    Ok((checks, Value::Null))
}

fn cdf_bound() -> Outcome {
    let p = rare_params(8)?;
    let a = rare_target(&ball(8, RARE_CENTER)?, &p, "target")?;
    let (q, nu) = solve_chain(&p, usize::MAX)?;
    let e = exact_hitting(&q, &nu, &a, 8, false, false)?;
    let times: Vec<f64> = (0..CDF_POINTS).map(|k| 3.0 * e.mean * k as f64 / (CDF_POINTS - 1) as f64).collect();
    let survival = hitting_cdf_exact(&q, &a, &nu.weights, &times)?;
    let excess = times
        .iter()
        .zip(&survival)
        .map(|(t, s)| (1.0 - s) - (e.nu_a + t * (1.0 - e.nu_a) * e.r))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((
        vec![Check::at_most("max over grid of CDF minus bound", excess, CDF_BOUND_SLACK)],
        json!({"mean": e.mean, "r": e.r, "nu_a": e.nu_a}),
    ))
}

fn rare_sweep(ns: &[usize], theta: bool) -> Result<Vec<super::commands::ExactHitting>> {
    ns.iter()
        .map(|&n| {
            let p = rare_params(n)?;
            let a = rare_target(&ball(n, RARE_CENTER)?, &p, "target")?;
            let (q, nu) = solve_chain(&p, usize::MAX)?;
            exact_hitting(&q, &nu, &a, n, false, theta)
        })
        .collect()
}

fn jump_rate_trend() -> Outcome {
    let sweep = rare_sweep(&[6, 8, 10, 12], false)?;
    let first = sweep[0].r_mean;
    let last = sweep[sweep.len() - 1].r_mean;
    let checks = vec![
        Check::at_most("|rE - 1| at N=12 minus |rE - 1| at N=6", (last - 1.0).abs() - (first - 1.0).abs(), 0.0),
        Check::at_least("rE at N=12", last, RE_BAND.0),
        Check::at_most("rE at N=12", last, RE_BAND.1),
    ];
    let table: Vec<Value> = sweep.iter().map(|e| json!({"n": e.n, "r_mean": e.r_mean, "set_size": e.set_size})).collect();
    Ok((checks, json!(table)))
}

fn exponentiality(seed: u64, workers: usize) -> Outcome {
    let n = 10;
    let p = rare_params(n)?;
    let s = ball(n, RARE_CENTER)?;
    let a = rare_target(&s, &p, "target")?;
    let (q, nu) = solve_chain(&p, usize::MAX)?;
    let e_nu = stationary_mean_hitting(&q, &nu, &a)?;
    let horizon = 1e4 * e_nu;
    let (stat, _) = simulate_hitting(&p, &s, &Initial::Weights(nu.weights.clone()), "stationary", e_nu, e_nu, HIT_SAMPLES, seed, horizon, workers)?;
    let (mu, e_mu) = conditioned_start(&q, &nu, &a, &ball(n, CONDITIONED_CENTER)?, &p)?;
    let (cond, _) = simulate_hitting(&p, &s, &Initial::Weights(mu), "conditioned", e_mu, e_nu, HIT_SAMPLES, seed + 1, horizon, workers)?;
    let mesh = default_mesh(n);
    let entropy_b = quasipotential_lower_bound(&DensityProfile::constant(mesh, CONDITIONED_CENTER)?, &p)?;
    let entropy_o = quasipotential_lower_bound(&DensityProfile::constant(mesh, RARE_CENTER)?, &p)?;
    let checks = vec![
        Check::at_least("d(center, rho_bar)", center_separation(&s, &p)?, SEPARATION_MIN),
        Check::at_least("exact E_nu[H]", e_nu, MEAN_RANGE.0),
        Check::at_most("exact E_nu[H]", e_nu, MEAN_RANGE.1),
        Check::at_most("stationary start timeouts", stat.timeouts as f64, 0.0),
        Check::at_most("KS, stationary start", stat.ks, KS_TOL),
        Check::at_most("conditioned start timeouts", cond.timeouts as f64, 0.0),
        Check::at_most("KS, conditioned start", cond.ks, KS_TOL),
    ];
    Ok((
        checks,
        json!({
            "stationary": stat,
            "conditioned": cond,
            "entropy_conditioned_center": entropy_b,
            "entropy_target_center": entropy_o,
        }),
    ))
}

fn quantile_consistency() -> Outcome {
    let e = rare_sweep(&[10], true)?.remove(0);
    let ratio = e.theta.unwrap_or(f64::NAN) / e.mean;
    Ok((
        vec![
            Check::at_least("theta / E_nu[H] at N=10", ratio, THETA_BAND.0),
            Check::at_most("theta / E_nu[H] at N=10", ratio, THETA_BAND.1),
        ],
        json!(e),
    ))
}

fn hydrodynamics(seed: u64, workers: usize) -> Outcome {
    let p = ModelParams::new(64, 0.2, 0.8)?;
    let frames = hydro_comparison(&p, &ProfileExpr::Constant(1.0), &[0.05, 0.1, 0.2], 200, HYDRO_WINDOW, 256, 800, seed, workers)?;
    let checks = frames
        .iter()
        .map(|f| Check::at_most(format!("smoothed sup deviation at t={}", f.t), f.smoothed_sup, HYDRO_TOL))
        .collect();
    let raw: Vec<Value> = frames.iter().map(|f| json!({"t": f.t, "raw_sup": f.raw_sup})).collect();
    Ok((checks, json!(raw)))
}

/// Smoothstep from 0 at `s = 0` to 1 at `s = 1`.
fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * (3.0 - 2.0 * s)
}

/// `g` in the interior, joined to the stationary profile by ramps of width
/// 0.2 so that the profile meets the reservoir densities at the ends.
fn compatible(p: &ModelParams, mesh: usize, g: impl Fn(f64) -> f64) -> Result<DensityProfile> {
    DensityProfile::from_fn(mesh, |x| {
        let r = stationary_density(p, x);
        r + (g(x) - r) * smoothstep(x / 0.2) * smoothstep((1.0 - x) / 0.2)
    })
}

fn zero_cost() -> Outcome {
    let p = ModelParams::new(2, 0.2, 0.8)?;
    let mesh = 400;
    let profiles = [
        ("constant", compatible(&p, mesh, |_| 0.5)?),
        ("linear", compatible(&p, mesh, |x| 0.8 - 0.6 * x)?),
        ("bump", DensityProfile::from_fn(mesh, |x| stationary_density(&p, x) + 0.15 * (std::f64::consts::PI * x).sin())?),
    ];
    let mut checks = Vec::new();
    for (label, g) in &profiles {
        let (_, r) = heat_path_cost(g, &p, 1.0, 200, 200)?;
        checks.push(Check::at_most(format!("I(heat flow), {label} start"), r.value, ZERO_COST_TOL));
    }
    Ok((checks, Value::Null))
}

fn sandwich() -> Outcome {
    let p = ModelParams::new(2, 0.3, 0.3)?;
    let half = DensityProfile::constant(256, 0.5)?;
    let opts = OptimizerOptions {
        max_iter: 5000,
        ..OptimizerOptions::default()
    };
    let ladder = [0.5, 1.0, 2.0, 4.0];
    let lb = quasipotential_lower_bound(&half, &p)?;
    let est = quasipotential_ladder(&half, &p, &ladder, 1.0 / 32.0, 128, &opts)?;
    let rho = stationary_profile(&p, 256)?;
    let eq = quasipotential_ladder(&rho, &p, &ladder, 1.0 / 32.0, 128, &opts)?;
    let checks = vec![
        Check::at_most("|entropy bound - 0.0872|", (lb - QUASI_CLOSED_FORM).abs(), 5e-5),
        Check::at_least("estimate for gamma = 0.5", est.value, QUASI_CLOSED_FORM - QUASI_SLACK),
        Check::at_most("estimate for gamma = rho_bar", eq.value, QUASI_EQUILIBRIUM_TOL),
    ];
    Ok((checks, json!({"lower_bound": lb, "ladder": est.steps})))
}

fn martingale(seed: u64, workers: usize) -> Outcome {
    let n = 8;
    let p = rare_params(n)?;
    let s = ball(n, 0.7)?;
    let a = rare_target(&s, &p, "target")?;
    let (q, nu) = solve_chain(&p, usize::MAX)?;
    let e = exact_hitting(&q, &nu, &a, n, false, false)?;
    let target = (1.0 - e.nu_a) * e.r;
    let set = SetMembership::new(&s, &p)?;
    let init = Initial::Weights(nu.weights.clone());
    let samples = run_replicas(MARTINGALE_REPLICAS, workers, |i| {
        counting_martingale_with(&p, &set, &init, MARTINGALE_HORIZON, &mut RngStream::new(seed, i as u64))
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let m: Vec<f64> = samples.iter().map(|c| c.martingale).collect();
    let rate: Vec<f64> = samples.iter().map(|c| c.count as f64 / MARTINGALE_HORIZON).collect();
    let (m_mean, m_se) = mean_and_error(&m);
    let (r_mean, r_se) = mean_and_error(&rate);
    let checks = vec![
        Check::at_most("|mean M_T| / standard error", m_mean.abs() / m_se, MARTINGALE_SIGMAS),
        Check::at_most("|mean N_T/T - nu(A^c) r| / standard error", (r_mean - target).abs() / r_se, MARTINGALE_SIGMAS),
    ];
    Ok((
        checks,
        json!({"mean_martingale": m_mean, "martingale_se": m_se, "mean_rate": r_mean, "rate_se": r_se, "exact_rate": target, "exact_mean": e.mean}),
    ))
}

fn scaling_trend(seed: u64, workers: usize) -> Outcome {
    let ns: Vec<usize> = (6..=12).collect();
    let sweep = rare_sweep(&ns, false)?;
    let ys: Vec<f64> = sweep.iter().map(|e| e.mean.ln() / e.n as f64).collect();
    let trend = TrendDiagnostics::new(&ys);
    let fit = inverse_fit(&ns, &ys)?;
    let p = rare_params(12)?;
    let profiles = sampled_quasipotentials(&ball(12, RARE_CENTER)?, &p, 4, seed, &[0.5, 1.0, 2.0, 4.0], 1.0 / 32.0, 64, 3000, workers)?;
    let lb = profiles.iter().map(|e| e.lower_bound).fold(f64::INFINITY, f64::min);
    let est = profiles.iter().map(|e| e.estimate).fold(f64::INFINITY, f64::min);
    let checks = vec![
        Check::at_most("second-half minus first-half mean |difference|", trend.second_half_mean - trend.first_half_mean, 0.0),
        Check::at_most("|last difference| minus |first difference|", trend.last - trend.first, 0.0),
        Check::at_least("extrapolated value", fit.intercept, BAND_FACTORS.0 * lb),
        Check::at_most("extrapolated value", fit.intercept, BAND_FACTORS.1 * est),
    ];
    Ok((
        checks,
        json!({"log_mean_over_n": ys, "trend": trend, "fit": fit, "lower_bound": lb, "estimate": est, "profiles": profiles}),
    ))
}

fn invariant_suites() -> Outcome {
    let suites = all_suites();
    let checks = suites
        .iter()
        .map(|s| Check::at_most(format!("{} counterexamples", s.name), s.failure.is_some() as u8 as f64, 0.0))
        .collect();
    Ok((checks, json!(suites)))
}
