use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generator::{build_generator_capped, RateMatrix, StateSet};
use super::linalg::{self, CsrMatrix};
use super::stationary::{adjoint_rates, StationaryDistribution};
use crate::error::{Error, Result};
use crate::model::ModelParams;

/// `-Q` restricted to the states with `local[i] = Some(_)`, plus the map back
/// to global indices.
fn restricted(q: &RateMatrix, keep: &[bool]) -> (CsrMatrix, Vec<usize>, Vec<Option<usize>>) {
    let globals: Vec<usize> = (0..q.dim()).filter(|&i| keep[i]).collect();
    let mut local = vec![None; q.dim()];
    for (k, &g) in globals.iter().enumerate() {
        local[g] = Some(k);
    }
    let mut m = CsrMatrix::with_capacity(globals.len(), q.nnz());
    for &g in &globals {
        for (j, r) in q.row(g) {
            if let Some(l) = local[j] {
                m.push(l, -r);
            }
        }
        m.push(local[g].unwrap(), q.exit_rate(g));
        m.finish_row();
    }
    (m, globals, local)
}

/// States from which `target` is reachable.
fn reaches(q: &RateMatrix, target: &[bool]) -> Vec<bool> {
    let pred = q.predecessors();
    let mut seen = target.to_vec();
    let mut stack: Vec<usize> = (0..q.dim()).filter(|&i| target[i]).collect();
    while let Some(j) = stack.pop() {
        for &(i, _) in &pred[j] {
            if !seen[i] {
                seen[i] = true;
                stack.push(i);
            }
        }
    }
    seen
}

/// `E_eta[H_A]` for every state: zero on `A`, `-Q u = 1` on the complement.
pub fn mean_hitting_times(q: &RateMatrix, a: &StateSet) -> Result<Vec<f64>> {
    a.check_chain(q)?;
    if a.is_empty() {
        return Err(Error::Structure("hitting target is empty".into()));
    }
    if let Some(i) = reaches(q, a.membership()).iter().position(|&r| !r) {
        return Err(Error::Structure(format!("state {i} cannot reach the target")));
    }
    let keep: Vec<bool> = a.membership().iter().map(|m| !m).collect();
    let (m, globals, _) = restricted(q, &keep);
    let u = linalg::solve(&m, &vec![1.0; globals.len()])?;
    let mut out = vec![0.0; q.dim()];
    for (k, &g) in globals.iter().enumerate() {
        out[g] = u[k];
    }
    Ok(out)
}

/// `E_nu[H_A]`.
pub fn stationary_mean_hitting(q: &RateMatrix, nu: &StationaryDistribution, a: &StateSet) -> Result<f64> {
    Ok(nu.expectation(&mean_hitting_times(q, a)?))
}

/// Equilibrium potential between `A` (value 0) and `B` (value 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumPotential {
    /// `h(xi) = P_xi[H_B < H_A]`.
    pub h: Vec<f64>,
    /// `(eta, P_eta[H_B < H_A^+])` for `eta` in `A`.
    pub escape: Vec<(usize, f64)>,
}

pub fn equilibrium_potential(q: &RateMatrix, a: &StateSet, b: &StateSet) -> Result<EquilibriumPotential> {
    a.check_chain(q)?;
    b.check_chain(q)?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::Argument("equilibrium potential needs nonempty sets".into()));
    }
    if !a.is_disjoint(b) {
        return Err(Error::Argument("sets A and B overlap".into()));
    }
    let keep: Vec<bool> = (0..q.dim()).map(|i| !a.contains(i) && !b.contains(i)).collect();
    let (m, globals, _) = restricted(q, &keep);
    let rhs: Vec<f64> = globals.iter().map(|&g| q.rate_into(g, b)).collect();
    let interior = linalg::solve(&m, &rhs)?;
    let mut h: Vec<f64> = (0..q.dim()).map(|i| if b.contains(i) { 1.0 } else { 0.0 }).collect();
    for (k, &g) in globals.iter().enumerate() {
        h[g] = interior[k];
    }
    let escape = a
        .indices()
        .into_iter()
        .map(|eta| {
            let lambda = q.exit_rate(eta);
            (eta, q.row(eta).map(|(j, r)| r * h[j]).sum::<f64>() / lambda)
        })
        .collect();
    Ok(EquilibriumPotential { h, escape })
}

/// `Cap(A, B) = sum_{eta in A} nu(eta) lambda(eta) P_eta[H_B < H_A^+]`.
pub fn capacity(q: &RateMatrix, nu: &StationaryDistribution, a: &StateSet, b: &StateSet) -> Result<f64> {
    let pot = equilibrium_potential(q, a, b)?;
    Ok(pot
        .escape
        .iter()
        .map(|&(eta, e)| nu.weights[eta] * q.exit_rate(eta) * e)
        .sum())
}

/// `r(A^c, A) = nu(A^c)^{-1} sum_{xi notin A} nu(xi) R(xi, A)`.
pub fn average_jump_rate(q: &RateMatrix, nu: &StationaryDistribution, a: &StateSet) -> Result<f64> {
    a.check_chain(q)?;
    let mass: f64 = (0..q.dim()).filter(|&i| !a.contains(i)).map(|i| nu.weights[i]).sum();
    if a.is_full() || !(mass > 0.0) {
        return Err(Error::Degenerate("complement of the target has no stationary mass".into()));
    }
    let flux: f64 = (0..q.dim())
        .filter(|&i| !a.contains(i))
        .map(|i| nu.weights[i] * q.rate_into(i, a))
        .sum();
    Ok(flux / mass)
}

/// Per-state ingredients of the capacity representation of `E_eta[H_A]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentationTerm {
    pub state: usize,
    /// `Cap(eta, A)` from the forward chain.
    pub capacity: f64,
    /// `sum_{xi notin A} nu(xi) P*_xi[H_eta < H_A]`.
    pub adjoint_mass: f64,
    /// `min_{xi notin A} P*_xi[H_eta < H_A]`.
    pub min_adjoint_potential: f64,
}

impl RepresentationTerm {
    /// `E_eta[H_A]` recovered from the representation.
    pub fn mean(&self) -> f64 {
        self.adjoint_mass / self.capacity
    }
}

/// Representation terms for the listed states outside `A`; solves run in
/// parallel.
pub fn representation_terms(
    q: &RateMatrix,
    nu: &StationaryDistribution,
    a: &StateSet,
    states: &[usize],
) -> Result<Vec<RepresentationTerm>> {
    a.check_chain(q)?;
    if a.is_empty() || a.is_full() {
        return Err(Error::Structure("target must be neither empty nor the full space".into()));
    }
    let qs = adjoint_rates(q, nu)?;
    states
        .par_iter()
        .map(|&eta| {
            if a.contains(eta) {
                return Err(Error::Argument(format!("state {eta} lies in the target")));
            }
            let single = StateSet::singleton(q.dim(), eta)?;
            let capacity = capacity(q, nu, &single, a)?;
            let adj = equilibrium_potential(&qs, a, &single)?;
            let mut mass = 0.0;
            let mut min_h = f64::INFINITY;
            for xi in (0..q.dim()).filter(|&xi| !a.contains(xi)) {
                mass += nu.weights[xi] * adj.h[xi];
                min_h = min_h.min(adj.h[xi]);
            }
            Ok(RepresentationTerm {
                state: eta,
                capacity,
                adjoint_mass: mass,
                min_adjoint_potential: min_h,
            })
        })
        .collect()
}

/// `E_nu[H_A] = sum_{eta notin A} nu(eta) sum_{xi notin A} nu(xi)
/// P*_xi[H_eta < H_A] / Cap(eta, A)`, one forward and one adjoint potential
/// solve per state.
pub fn capacity_representation_mean(q: &RateMatrix, nu: &StationaryDistribution, a: &StateSet) -> Result<f64> {
    let outside: Vec<usize> = a.complement().indices();
    let terms = representation_terms(q, nu, a, &outside)?;
    Ok(terms.iter().map(|t| nu.weights[t.state] * t.mean()).sum())
}

/// `{xi notin A : one exchange or boundary flip maps xi into A}`.
pub fn outer_boundary(a: &StateSet, p: &ModelParams) -> Result<StateSet> {
    let q = build_generator_capped(p, a.dim())?;
    a.check_chain(&q)?;
    let membership = (0..q.dim())
        .map(|xi| !a.contains(xi) && q.row(xi).any(|(j, _)| a.contains(j)))
        .collect();
    Ok(StateSet::from_membership(membership, format!("outer boundary of {}", a.description)))
}

/// `nu` conditioned on `B`.
pub fn conditioned_distribution(nu: &StationaryDistribution, b: &StateSet) -> Result<Vec<f64>> {
    if b.dim() != nu.dim() {
        return Err(Error::Dimension(format!("set over {} states, law over {}", b.dim(), nu.dim())));
    }
    let mass = b.measure(&nu.weights);
    if !(mass > 0.0) {
        return Err(Error::Degenerate("conditioning set has zero stationary mass".into()));
    }
    Ok((0..nu.dim())
        .map(|i| if b.contains(i) { nu.weights[i] / mass } else { 0.0 })
        .collect())
}

/// `||f||_2` in `L^2(nu)`.
pub fn l2_norm(nu: &StationaryDistribution, f: &[f64]) -> f64 {
    nu.weights.iter().zip(f).map(|(w, v)| w * v * v).sum::<f64>().sqrt()
}

/// `||d mu / d nu||_2`.
pub fn density_l2_norm(nu: &StationaryDistribution, mu: &[f64]) -> Result<f64> {
    if mu.len() != nu.dim() {
        return Err(Error::Dimension(format!("{} weights for {} states", mu.len(), nu.dim())));
    }
    let ratio: Vec<f64> = mu.iter().zip(&nu.weights).map(|(m, w)| m / w).collect();
    Ok(l2_norm(nu, &ratio))
}
