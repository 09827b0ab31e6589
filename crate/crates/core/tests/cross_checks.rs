//! Exact answers against simulation and against each other.

use bdssep::exact::{
    average_jump_rate, build_generator, capacity_representation_mean, mixing_time, solve_stationary,
    stationary_mean_hitting, StateSet,
};
use bdssep::macroscopic::{
    heat_solve, pathspace_infimum_check, quasipotential_estimate, quasipotential_lower_bound, OptimizerOptions,
    SpaceTimePath,
};
use bdssep::model::{stationary_density, DensityProfile, ModelParams, ProfileSet, TestBasis};
use bdssep::sim::{
    coupling_mixing_bound, counting_martingale, log_grid, mean_and_error, run_replicas, sample_many, Initial,
    RngStream,
};

#[test]
fn coupling_bound_dominates_exact_mixing_time() {
    for n in [5, 6] {
        let p = ModelParams::new(n, 0.3, 0.6).unwrap();
        let q = build_generator(&p).unwrap();
        let exact = mixing_time(&q, &solve_stationary(&q).unwrap()).unwrap().t_mix;
        let bound = coupling_mixing_bound(&p, &log_grid(0.5, 200.0, 120), 2000, 11, 2).unwrap();
        assert!(bound.t >= exact, "N={n}: coupling {} below exact {exact}", bound.t);
        assert!(bound.t <= (n * n * n) as f64 / 2.0);
    }
}

#[test]
fn simulated_mean_hitting_time_matches_exact_solve() {
    let p = ModelParams::new(6, 0.3, 0.3).unwrap();
    let s = ProfileSet::from_fn(6, |_| 0.8, 0.05, TestBasis::default()).unwrap();
    let q = build_generator(&p).unwrap();
    let nu = solve_stationary(&q).unwrap();
    let a = StateSet::from_profile_set(&s, &p).unwrap();
    let exact = stationary_mean_hitting(&q, &nu, &a).unwrap();
    let rel = (capacity_representation_mean(&q, &nu, &a).unwrap() - exact).abs() / exact;
    assert!(rel < 1e-8);

    let set = sample_many(&p, &s, &Initial::Weights(nu.weights.clone()), 4000, 5, 1e9, 2).unwrap();
    let (mean, se) = set.mean_and_error();
    assert_eq!(set.timeout_count(), 0);
    assert!((mean - exact).abs() < 4.0 * se, "simulated {mean} +/- {se}, exact {exact}");
}

#[test]
fn counting_process_compensator() {
    let p = ModelParams::new(6, 0.3, 0.3).unwrap();
    let s = ProfileSet::from_fn(6, |_| 0.8, 0.05, TestBasis::default()).unwrap();
    let q = build_generator(&p).unwrap();
    let nu = solve_stationary(&q).unwrap();
    let a = StateSet::from_profile_set(&s, &p).unwrap();
    let rate = (1.0 - a.measure(&nu.weights)) * average_jump_rate(&q, &nu, &a).unwrap();
    let t = 2000.0;
    let init = Initial::Weights(nu.weights.clone());
    let runs = run_replicas(2000, 2, |i| counting_martingale(&p, &s, &init, t, &mut RngStream::new(3, i as u64))).unwrap();
    let runs: Vec<_> = runs.into_iter().collect::<Result<_, _>>().unwrap();
    let (m, m_se) = mean_and_error(&runs.iter().map(|c| c.martingale).collect::<Vec<_>>());
    let (n, n_se) = mean_and_error(&runs.iter().map(|c| c.count as f64 / t).collect::<Vec<_>>());
    assert!(m.abs() < 4.0 * m_se, "mean martingale {m} +/- {m_se}");
    assert!((n - rate).abs() < 4.0 * n_se, "rate {n} +/- {n_se}, exact {rate}");
}

#[test]
fn driven_path_satisfies_the_pathspace_inequality() {
    let p = ModelParams::new(2, 0.3, 0.3).unwrap();
    let s = ProfileSet::from_fn(16, |_| 0.45, 0.02, TestBasis::default()).unwrap();
    let (n_t, n_x) = (16, 32);
    // linear interpolation from rho_bar to the center of the ball
    let values: Vec<f64> = (0..=n_t)
        .flat_map(|i| {
            let t = i as f64 / n_t as f64;
            (0..=n_x).map(move |j| {
                let interior = j > 0 && j < n_x;
                if interior { 0.3 + t * 0.15 } else { 0.3 }
            })
        })
        .collect();
    let driven = SpaceTimePath::new(1.0, n_t, n_x, &p, values).unwrap();
    let idle = heat_solve(&DensityProfile::from_fn(64, |x| stationary_density(&p, x)).unwrap(), &p, 1.0, n_t, n_x).unwrap();
    let opts = OptimizerOptions { max_iter: 500, ..OptimizerOptions::default() };
    let report = pathspace_infimum_check(&s, &p, &[driven, idle], 8, 4, 1.0, &opts, 1e-3).unwrap();
    assert!(report.rows[0].touches && report.rows[0].holds, "{:?}", report.rows[0]);
    assert!(!report.rows[1].touches);
    assert!(report.all_hold());
}

#[test]
fn quasipotential_vanishes_at_the_stationary_profile() {
    let p = ModelParams::new(2, 0.2, 0.8).unwrap();
    let rho = DensityProfile::from_fn(128, |x| stationary_density(&p, x)).unwrap();
    assert!(quasipotential_lower_bound(&rho, &p).unwrap().abs() < 1e-12);
    let est = quasipotential_estimate(&rho, &p, 1.0, 16, 32, &OptimizerOptions::default()).unwrap();
    assert!(est.value <= 1e-4, "{}", est.value);
}
