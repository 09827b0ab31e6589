//! Hitting a rare ball: exact mean, the jump-rate product, the quantile
//! time, and simulated hitting times rescaled by the exact mean.

use bdssep::exact::{
    average_jump_rate, build_generator, hitting_cdf_exact, quantile_time, solve_stationary, stationary_mean_hitting,
    StateSet,
};
use bdssep::model::{ModelParams, ProfileSet, TestBasis};
use bdssep::sim::{ks_exponential, sample_many, Initial, Normalizer};

fn main() -> bdssep::Result<()> {
    let p = ModelParams::new(8, 0.3, 0.3)?;
    let s = ProfileSet::from_fn(p.n, |_| 0.85, 0.05, TestBasis::default())?;
    println!("ball separation from rho_bar: {:.3}", s.separation(&p)?);

    let q = build_generator(&p)?;
    let nu = solve_stationary(&q)?;
    let a = StateSet::from_profile_set(&s, &p)?;
    let mean = stationary_mean_hitting(&q, &nu, &a)?;
    let r = average_jump_rate(&q, &nu, &a)?;
    let theta = quantile_time(&q, &a, &nu.weights, 1e3 * mean)?.theta;
    println!("|A| = {}, nu(A) = {:.3e}", a.len(), a.measure(&nu.weights));
    println!("E_nu[H] = {mean:.2}, r * E = {:.4}, theta / E = {:.4}", r * mean, theta / mean);

    let times: Vec<f64> = (0..=4).map(|k| k as f64 * mean).collect();
    let survival = hitting_cdf_exact(&q, &a, &nu.weights, &times)?;
    for (t, sv) in times.iter().zip(&survival) {
        println!("  P[H > {:>3.0} E] = {sv:.4}   (exp: {:.4})", t / mean, (-t / mean).exp());
    }

    // equal reservoirs: nu is Bernoulli(0.3) on every site
    let samples = sample_many(&p, &s, &Initial::Bernoulli(0.3), 1000, 7, 1e9, 4)?;
    let (m, se) = samples.mean_and_error();
    println!("simulated mean {m:.1} +/- {se:.1}");
    println!("KS against Exp(1): {:.4}", ks_exponential(&samples, Normalizer::Exact(mean))?);
    Ok(())
}
