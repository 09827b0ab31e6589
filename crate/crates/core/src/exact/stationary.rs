use serde::{Deserialize, Serialize};

use super::generator::RateMatrix;
use super::linalg::{self, CsrMatrix};
use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Invariant law of an irreducible generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryDistribution {
    pub weights: Vec<f64>,
    /// `||nu Q||_inf` of the returned weights.
    pub residual: f64,
}

impl StationaryDistribution {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn expectation(&self, f: &[f64]) -> f64 {
        linalg::dot(&self.weights, f)
    }
}

/// Solves `nu Q = 0`, `sum nu = 1` with the last balance equation replaced by
/// the normalization.
pub fn solve_stationary(q: &RateMatrix) -> Result<StationaryDistribution> {
    let n = q.dim();
    if !q.is_irreducible() {
        return Err(Error::Structure("generator is not irreducible".into()));
    }
    if n == 1 {
        return Ok(StationaryDistribution {
            weights: vec![1.0],
            residual: 0.0,
        });
    }
    let pred = q.predecessors();
    let mut m = CsrMatrix::with_capacity(n, q.nnz() + 2 * n);
    for (j, into) in pred.iter().enumerate().take(n - 1) {
        for &(i, r) in into {
            m.push(i, r);
        }
        m.push(j, -q.exit_rate(j));
        m.finish_row();
    }
    for i in 0..n {
        m.push(i, 1.0);
    }
    m.finish_row();
    let mut rhs = vec![0.0; n];
    rhs[n - 1] = 1.0;
    let mut w = linalg::solve(&m, &rhs)?;
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    let residual = linalg::inf_norm(&q.apply_left(&w));
    let tol = 1e-12 * q.norm_inf();
    if !(residual <= tol) {
        return Err(Error::numerical("stationary balance residual above tolerance", residual));
    }
    if let Some(i) = w.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::numerical(format!("non-positive stationary weight at state {i}"), w[i]));
    }
    Ok(StationaryDistribution { weights: w, residual })
}

/// Rates of the time-reversed chain, `R*(xi, eta) = nu(eta) R(eta, xi) / nu(xi)`.
pub fn adjoint_rates(q: &RateMatrix, nu: &StationaryDistribution) -> Result<RateMatrix> {
    if nu.dim() != q.dim() {
        return Err(Error::Dimension(format!("{} weights for {} states", nu.dim(), q.dim())));
    }
    if let Some(i) = nu.weights.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Domain(format!("stationary weight of state {i} is not positive")));
    }
    let pred = q.predecessors();
    let mut row_ptr = Vec::with_capacity(q.dim() + 1);
    let mut cols = Vec::with_capacity(q.nnz());
    let mut rates = Vec::with_capacity(q.nnz());
    row_ptr.push(0);
    for (xi, into) in pred.iter().enumerate() {
        let mut sorted = into.clone();
        sorted.sort_by_key(|&(eta, _)| eta);
        for (eta, r) in sorted {
            cols.push(eta);
            rates.push(nu.weights[eta] * r / nu.weights[xi]);
        }
        row_ptr.push(cols.len());
    }
    Ok(RateMatrix::from_parts(row_ptr, cols, rates, q.lanes()))
}

/// Largest `|nu(i) R(i,j) - nu(j) R(j,i)|` over pairs.
pub fn detailed_balance_defect(q: &RateMatrix, nu: &StationaryDistribution) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..q.dim() {
        for (j, r) in q.row(i) {
            worst = worst.max((nu.weights[i] * r - nu.weights[j] * q.rate(j, i)).abs());
        }
    }
    worst
}

/// Bernoulli product weights with density `rho` over the packed index.
pub fn bernoulli_product(p: &ModelParams, rho: f64) -> Vec<f64> {
    let sites = p.sites();
    (0..1usize << sites)
        .map(|i| {
            let k = i.count_ones() as i32;
            rho.powi(k) * (1.0 - rho).powi(sites as i32 - k)
        })
        .collect()
}

/// Per-site occupation probabilities `nu(eta(x) = 1)`.
pub fn site_densities(p: &ModelParams, nu: &StationaryDistribution) -> Vec<f64> {
    (0..p.sites())
        .map(|x| {
            nu.weights
                .iter()
                .enumerate()
                .filter(|(i, _)| (i >> x) & 1 == 1)
                .map(|(_, w)| w)
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::build_generator;

    #[test]
    fn two_state_chain() {
        let q = RateMatrix::from_triplets(2, &[(0, 1, 1.0), (1, 0, 3.0)]).unwrap();
        let nu = solve_stationary(&q).unwrap();
        assert!((nu.weights[0] - 0.75).abs() < 1e-15);
        assert!((nu.weights[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn equal_densities_give_product_measure() {
        let p = ModelParams::new(5, 0.3, 0.3).unwrap();
        let nu = solve_stationary(&build_generator(&p).unwrap()).unwrap();
        assert!((nu.weights[15] - 0.0081).abs() < 1e-14);
        let prod = bernoulli_product(&p, 0.3);
        for (a, b) in nu.weights.iter().zip(&prod) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn three_site_balance_by_hand() {
        // oracle: dense inverse of the bordered balance system
        let p = ModelParams::new(3, 0.2, 0.8).unwrap();
        let q = build_generator(&p).unwrap();
        let nu = solve_stationary(&q).unwrap();
        let mut a = q.to_dense().transpose();
        for j in 0..4 {
            a[(3, j)] = 1.0;
        }
        let x = a.try_inverse().unwrap().column(3).into_owned();
        for i in 0..4 {
            assert!((nu.weights[i] - x[i]).abs() < 1e-14);
        }
        assert!(nu.residual <= 1e-12 * q.norm_inf());
    }

    #[test]
    fn adjoint_preserves_holding_rates_and_balance() {
        let p = ModelParams::new(3, 0.2, 0.8).unwrap();
        let q = build_generator(&p).unwrap();
        let nu = solve_stationary(&q).unwrap();
        let qs = adjoint_rates(&q, &nu).unwrap();
        for i in 0..4 {
            assert!((qs.exit_rate(i) - q.exit_rate(i)).abs() < 1e-14);
            for (j, r) in q.row(i) {
                assert!((nu.weights[i] * r - nu.weights[j] * qs.rate(j, i)).abs() < 1e-15);
            }
        }
        assert!(linalg::inf_norm(&qs.apply_left(&nu.weights)) < 1e-14);
        assert!(detailed_balance_defect(&q, &nu) > 1e-4);
    }

    #[test]
    fn reversible_adjoint_is_identity() {
        let p = ModelParams::new(6, 0.4, 0.4).unwrap();
        let q = build_generator(&p).unwrap();
        let nu = solve_stationary(&q).unwrap();
        let qs = adjoint_rates(&q, &nu).unwrap();
        for i in 0..q.dim() {
            for (j, r) in q.row(i) {
                assert!((qs.rate(i, j) - r).abs() < 1e-12);
            }
        }
        assert!(detailed_balance_defect(&q, &nu) < 1e-15);
    }

    #[test]
    fn zero_weight_rejected() {
        let q = RateMatrix::from_triplets(2, &[(0, 1, 1.0), (1, 0, 3.0)]).unwrap();
        let nu = StationaryDistribution {
            weights: vec![1.0, 0.0],
            residual: 0.0,
        };
        assert!(matches!(adjoint_rates(&q, &nu), Err(Error::Domain(_))));
    }

    #[test]
    fn reducible_chain_rejected() {
        let q = RateMatrix::from_triplets(2, &[(0, 1, 1.0)]).unwrap();
        assert!(matches!(solve_stationary(&q), Err(Error::Structure(_))));
    }
}
