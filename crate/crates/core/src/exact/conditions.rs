use serde::{Deserialize, Serialize};

use super::generator::{build_generator_capped, StateSet, DEFAULT_STATE_CAP};
use super::potential::{average_jump_rate, density_l2_norm, l2_norm, outer_boundary, representation_terms};
use super::stationary::solve_stationary;
use super::transient::{mixing_time_capped, relaxation_time, MIXING_STATE_CAP, RELAXATION_STATE_CAP};
use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Inputs for [`check_theorem_conditions`] beyond the target set.
#[derive(Debug, Clone, Default)]
pub struct ConditionOptions {
    /// Set `B_N` inside `A_N^c` for the two quantities of condition (07).
    pub b_set: Option<StateSet>,
    /// Initial law `mu_N`; the stationary law when absent.
    pub mu: Option<Vec<f64>>,
    /// Time scale `S_N` for the enlarged-chain and spectral products.
    pub time_scale: Option<f64>,
    pub mixing: bool,
    pub relaxation: bool,
    pub state_cap: Option<usize>,
}

/// Finite-`N` quantities entering the hypotheses of the hitting-time
/// results; no verdicts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub n: usize,
    pub nu_a: f64,
    pub nu_outer_boundary: f64,
    pub r: f64,
    pub t_mix: Option<f64>,
    pub t_mix_times_r: Option<f64>,
    pub t_rel: Option<f64>,
    /// `sup_{eta in B, xi notin A} P*_xi[H_A < H_eta]`.
    pub eq07_sup: Option<f64>,
    /// `sum_{eta notin A ∪ B} nu(eta) / Cap(eta, A)`.
    pub eq07_sum: Option<f64>,
    pub mu_a: f64,
    /// `S ||d mu/d nu||_2^2 (1/S + max_{eta in A} R(eta, Omega)) nu(A)`.
    pub eq22_product: Option<f64>,
    /// `||R'(., A)||_2` with `R'(eta, A) = 1{eta notin A} R(eta, A)`.
    pub r_prime_l2: f64,
    pub density_l2: f64,
    /// `||R'||_2 ||d mu/d nu||_2 T_rel (1 - e^{-S / T_rel})`.
    pub spectral_product: Option<f64>,
}

pub fn check_theorem_conditions(p: &ModelParams, a: &StateSet, options: &ConditionOptions) -> Result<ConditionReport> {
    let q = build_generator_capped(p, options.state_cap.unwrap_or(DEFAULT_STATE_CAP))?;
    a.check_chain(&q)?;
    let nu = solve_stationary(&q)?;
    let r = average_jump_rate(&q, &nu, a)?;
    let nu_a = a.measure(&nu.weights);
    let nu_outer_boundary = outer_boundary(a, p)?.measure(&nu.weights);

    let t_mix = if options.mixing {
        Some(mixing_time_capped(&q, &nu, MIXING_STATE_CAP)?.t_mix)
    } else {
        None
    };
    let t_rel = if options.relaxation && q.dim() <= RELAXATION_STATE_CAP {
        Some(relaxation_time(&q, &nu)?)
    } else {
        None
    };

    let (eq07_sup, eq07_sum) = match &options.b_set {
        Some(b) => {
            b.check_chain(&q)?;
            if !b.is_disjoint(a) {
                return Err(Error::Argument("B_N must lie in the complement of A_N".into()));
            }
            let outside = a.complement().indices();
            let terms = representation_terms(&q, &nu, a, &outside)?;
            let mut sup: f64 = 0.0;
            let mut sum = 0.0;
            for t in &terms {
                if b.contains(t.state) {
                    sup = sup.max(1.0 - t.min_adjoint_potential);
                } else {
                    sum += nu.weights[t.state] / t.capacity;
                }
            }
            (Some(sup), Some(sum))
        }
        None => (None, None),
    };

    let mu = options.mu.clone().unwrap_or_else(|| nu.weights.clone());
    let density_l2 = density_l2_norm(&nu, &mu)?;
    let mu_a = a.measure(&mu);
    let r_prime: Vec<f64> = (0..q.dim())
        .map(|i| if a.contains(i) { 0.0 } else { q.rate_into(i, a) })
        .collect();
    let r_prime_l2 = l2_norm(&nu, &r_prime);
    let max_exit_a = a.indices().iter().map(|&i| q.exit_rate(i)).fold(0.0, f64::max);
    let eq22_product = options
        .time_scale
        .map(|s| s * density_l2 * density_l2 * (1.0 / s + max_exit_a) * nu_a);
    let spectral_product = match (options.time_scale, t_rel) {
        (Some(s), Some(tr)) => Some(r_prime_l2 * density_l2 * tr * (1.0 - (-s / tr).exp())),
        _ => None,
    };

    Ok(ConditionReport {
        n: p.n,
        nu_a,
        nu_outer_boundary,
        r,
        t_mix,
        t_mix_times_r: t_mix.map(|t| t * r),
        t_rel,
        eq07_sup,
        eq07_sum,
        mu_a,
        eq22_product,
        r_prime_l2,
        density_l2,
        spectral_product,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ProfileSet, TestBasis};

    #[test]
    fn stationary_start_and_full_complement() {
        let p = ModelParams::new(6, 0.3, 0.3).unwrap();
        let ball = ProfileSet::from_fn(6, |_| 0.85, 0.05, TestBasis::default()).unwrap();
        let a = StateSet::from_profile_set(&ball, &p).unwrap();
        let opts = ConditionOptions {
            b_set: Some(a.complement()),
            time_scale: Some(10.0),
            mixing: true,
            relaxation: true,
            ..Default::default()
        };
        let rep = check_theorem_conditions(&p, &a, &opts).unwrap();
        assert!((rep.density_l2 - 1.0).abs() < 1e-12);
        assert_eq!(rep.eq07_sum, Some(0.0));
        assert!(rep.eq07_sup.unwrap() > 0.0 && rep.eq07_sup.unwrap() <= 1.0);
        assert!(rep.t_mix.unwrap() > 0.0 && rep.t_rel.unwrap() > 0.0);
        assert!((rep.mu_a - rep.nu_a).abs() < 1e-15);
        assert!(rep.eq22_product.unwrap() > 0.0 && rep.spectral_product.unwrap() > 0.0);
        // ||R'||_2^2 <= ||R'||_inf ||R'||_1 with ||R'||_1 = nu(A^c) r
        assert!(rep.r_prime_l2 * rep.r_prime_l2 <= 6.0 * (1.0 - rep.nu_a) * rep.r + 1e-15);
    }

    #[test]
    fn overlapping_b_rejected() {
        let p = ModelParams::new(4, 0.3, 0.3).unwrap();
        let a = StateSet::singleton(8, 7).unwrap();
        let opts = ConditionOptions {
            b_set: Some(StateSet::from_indices(8, &[7, 0], "b").unwrap()),
            ..Default::default()
        };
        assert!(matches!(check_theorem_conditions(&p, &a, &opts), Err(Error::Argument(_))));
    }
}
