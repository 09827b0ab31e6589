//! Property suites behind the last acceptance criterion. Each runs a fixed
//! number of cases from a fixed seed and returns the first counterexample.

use proptest::collection::vec;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestError, TestRng, TestRunner};
use serde::Serialize;

use crate::exact::build_generator;
use crate::macroscopic::{gradient_check, heat_solve, SpaceTimePath};
use crate::model::{profile_distance, stationary_density, Configuration, DensityProfile, ModelParams, ProfileSet, TestBasis};
use crate::sim::{marginal_fidelity_pvalue, sample_many, Initial};

/// Outcome of one suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteOutcome {
    pub name: String,
    pub cases: u32,
    pub failure: Option<String>,
}

fn runner(cases: u32, seed: u8) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::from_seed(RngAlgorithm::ChaCha, &[seed; 32]),
    )
}

fn outcome<T: std::fmt::Debug>(name: &str, cases: u32, r: Result<(), TestError<T>>) -> SuiteOutcome {
    SuiteOutcome {
        name: name.into(),
        cases,
        failure: r.err().map(|e| e.to_string()),
    }
}

/// Reservoir densities with `0 < alpha <= beta < 1`.
fn reservoirs() -> impl Strategy<Value = (f64, f64)> {
    (0.01..0.99f64, 0.0..1.0f64).prop_map(|(a, s)| (a, a + s * (0.99 - a)))
}

pub fn metric_axioms(cases: u32) -> SuiteOutcome {
    let profile = || vec(0.0..=1.0f64, 32).prop_map(|v| DensityProfile::new(v).expect("values in [0,1]"));
    let basis = TestBasis::default();
    let r = runner(cases, 31).run(&(profile(), profile(), profile()), |(a, b, c)| {
        let d = |x: &DensityProfile, y: &DensityProfile| profile_distance(x, y, &basis).expect("same mesh");
        prop_assert_eq!(d(&a, &a), 0.0);
        prop_assert!((d(&a, &b) - d(&b, &a)).abs() <= 1e-15);
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-15);
        if a != b {
            prop_assert!(d(&a, &b) > 0.0);
        }
        Ok(())
    });
    outcome("metric axioms", cases, r)
}

pub fn generator_row_sums(cases: u32) -> SuiteOutcome {
    let r = runner(cases, 32).run(&(2usize..10, reservoirs()), |(n, (a, b))| {
        let p = ModelParams::new(n, a, b).expect("valid parameters");
        let q = build_generator(&p).expect("small chain");
        prop_assert!(q.row_sum_defect() <= 1e-12, "row sum defect {}", q.row_sum_defect());
        for i in 0..q.dim() {
            prop_assert!(q.row(i).all(|(_, rate)| rate >= 0.0));
        }
        prop_assert!(q.is_irreducible());
        Ok(())
    });
    outcome("generator row sums", cases, r)
}

/// Same seed, same samples, whatever the worker count.
pub fn determinism(cases: u32) -> SuiteOutcome {
    let basis = TestBasis::default();
    let r = runner(cases, 33).run(&(5usize..9, reservoirs(), 0u64..1000), |(n, (a, b), seed)| {
        let p = ModelParams::new(n, a, b).expect("valid parameters");
        let s = ProfileSet::from_fn(n, |_| 0.9, 0.05, basis.clone()).expect("valid ball");
        let run = |workers| sample_many(&p, &s, &Initial::Bernoulli(0.5), 20, seed, 1e4, workers).expect("sampling");
        let one = run(1);
        prop_assert_eq!(&one.samples, &run(2).samples);
        prop_assert_eq!(&one.samples, &run(1).samples);
        Ok(())
    });
    outcome("determinism", cases, r)
}

/// Chi-square test of each copy's one-step law, Bonferroni-corrected over
/// the cases at overall level 0.01.
pub fn coupling_marginals(cases: u32) -> SuiteOutcome {
    let level = 0.01 / cases as f64;
    let bits = || vec(0u8..2, 5);
    let r = runner(cases, 34).run(&(bits(), bits(), reservoirs(), 0u64..1000), |(x, y, (a, b), seed)| {
        let p = ModelParams::new(6, a, b).expect("valid parameters");
        let first = Configuration::from_occupancy(&x).expect("bits");
        let second = Configuration::from_occupancy(&y).expect("bits");
        let pval = marginal_fidelity_pvalue(&p, &first, &second, 20_000, seed).expect("test runs");
        prop_assert!(pval > level, "p-value {pval} below {level}");
        Ok(())
    });
    outcome("coupling marginal fidelity", cases, r)
}

pub fn maximum_principle(cases: u32) -> SuiteOutcome {
    let r = runner(cases, 35).run(&(reservoirs(), vec(0.0..1.0f64, 8)), |((a, b), cells)| {
        let p = ModelParams::new(4, a, b).expect("valid parameters");
        let g = DensityProfile::new(cells.clone()).expect("values in [0,1]");
        let u = heat_solve(&g, &p, 0.3, 15, 40).expect("heat flow");
        let lo = cells.iter().copied().fold(a, f64::min);
        let hi = cells.iter().copied().fold(b, f64::max);
        prop_assert!(u.values().iter().all(|&v| v >= lo - 1e-12 && v <= hi + 1e-12));
        Ok(())
    });
    outcome("maximum principle", cases, r)
}

/// Analytic gradient of the rate functional against central differences at
/// relative tolerance `1e-4`, on perturbed heat paths.
pub fn gradient(cases: u32) -> SuiteOutcome {
    let r = runner(cases, 36).run(&(reservoirs(), -0.08..0.08f64, 0.0..0.1f64), |((a, b), amp, bump)| {
        let p = ModelParams::new(4, a, b).expect("valid parameters");
        let (n_t, n_x) = (10, 14);
        let room = stationary_density(&p, 0.5).min(1.0 - stationary_density(&p, 0.5));
        let g = DensityProfile::from_fn(4 * n_x, |x| {
            stationary_density(&p, x) + bump.min(0.5 * room) * (std::f64::consts::PI * x).sin()
        })
        .expect("profile in [0,1]");
        let heat = heat_solve(&g, &p, 0.5, n_t, n_x).expect("heat flow");
        let mut v = heat.values().to_vec();
        for i in 1..=n_t {
            for j in 1..n_x {
                let (t, x) = (i as f64 / n_t as f64, j as f64 / n_x as f64);
                let shift = amp * room * (std::f64::consts::PI * t).sin() * (std::f64::consts::PI * x).sin().powi(2);
                v[i * (n_x + 1) + j] = (v[i * (n_x + 1) + j] + shift).clamp(0.02, 0.98);
            }
        }
        let u = SpaceTimePath::new(0.5, n_t, n_x, &p, v).expect("valid path");
        let err = gradient_check(&u, 4, 7).expect("finite functional");
        prop_assert!(err <= 1e-4, "relative gradient error {err}");
        Ok(())
    });
    outcome("gradient check", cases, r)
}

/// Every suite with its default case count.
pub fn all_suites() -> Vec<SuiteOutcome> {
    vec![
        metric_axioms(64),
        generator_row_sums(24),
        determinism(8),
        coupling_marginals(8),
        maximum_principle(32),
        gradient(12),
    ]
}
