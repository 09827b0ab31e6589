use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::boundary_rate;
use crate::model::{Configuration, ModelParams, ProfileSet, SetIndicator};

/// Default bound on the number of states the exact layer will index.
pub const DEFAULT_STATE_CAP: usize = 1 << 20;

/// Generator of a finite continuous-time chain: off-diagonal rates in
/// compressed rows, diagonal `-sum_j R(i, j)`.
///
/// `lanes` is 1 for the plain chain and 2 for an enlarged chain, whose state
/// `lane * base + i` is the copy of state `i` in that lane.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    rates: Vec<f64>,
    exit: Vec<f64>,
    lanes: usize,
}

impl RateMatrix {
    /// Builds a generator from `(from, to, rate)` triplets; repeated pairs
    /// are summed, zero rates dropped.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Argument("generator needs at least one state".into()));
        }
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); dim];
        for &(i, j, r) in triplets {
            if i >= dim || j >= dim {
                return Err(Error::Dimension(format!("entry ({i},{j}) outside {dim} states")));
            }
            if i == j {
                return Err(Error::Argument(format!("self-loop at state {i}")));
            }
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::Argument(format!("rate {r} at ({i},{j}) is not a finite nonnegative number")));
            }
            if r > 0.0 {
                *rows[i].entry(j).or_insert(0.0) += r;
            }
        }
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut rates = Vec::new();
        let mut exit = Vec::with_capacity(dim);
        row_ptr.push(0);
        for row in rows {
            let mut total = 0.0;
            for (j, r) in row {
                cols.push(j);
                rates.push(r);
                total += r;
            }
            exit.push(total);
            row_ptr.push(cols.len());
        }
        Ok(Self {
            row_ptr,
            cols,
            rates,
            exit,
            lanes: 1,
        })
    }

    pub(crate) fn from_parts(row_ptr: Vec<usize>, cols: Vec<usize>, rates: Vec<f64>, lanes: usize) -> Self {
        let exit = row_ptr
            .windows(2)
            .map(|w| rates[w[0]..w[1]].iter().sum())
            .collect();
        Self {
            row_ptr,
            cols,
            rates,
            exit,
            lanes,
        }
    }

    pub fn dim(&self) -> usize {
        self.exit.len()
    }

    pub fn lanes(&self) -> usize {
        self.lanes
    }

    /// Number of states per lane.
    pub fn base_dim(&self) -> usize {
        self.dim() / self.lanes
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    /// Off-diagonal entries `(j, R(i, j))` of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[a..b].iter().copied().zip(self.rates[a..b].iter().copied())
    }

    /// Holding rate `lambda(i) = -Q(i, i)`.
    #[inline]
    pub fn exit_rate(&self, i: usize) -> f64 {
        self.exit[i]
    }

    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(k, _)| k == j).map_or(0.0, |(_, r)| r)
    }

    pub fn max_exit_rate(&self) -> f64 {
        self.exit.iter().copied().fold(0.0, f64::max)
    }

    /// `||Q||_inf = 2 max_i lambda(i)`.
    pub fn norm_inf(&self) -> f64 {
        2.0 * self.max_exit_rate()
    }

    /// `(Q v)(i)`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|i| self.row(i).map(|(j, r)| r * v[j]).sum::<f64>() - self.exit[i] * v[i])
            .collect()
    }

    /// `(mu Q)(j)`.
    pub fn apply_left(&self, mu: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = (0..self.dim()).map(|i| -self.exit[i] * mu[i]).collect();
        for i in 0..self.dim() {
            for (j, r) in self.row(i) {
                out[j] += mu[i] * r;
            }
        }
        out
    }

    /// Total rate from `i` into the states flagged by `set`.
    pub fn rate_into(&self, i: usize, set: &StateSet) -> f64 {
        self.row(i).filter(|&(j, _)| set.contains(j)).map(|(_, r)| r).sum()
    }

    /// Largest `|(Q 1)(i)|`; zero for a proper generator.
    pub fn row_sum_defect(&self) -> f64 {
        (0..self.dim())
            .map(|i| (self.row(i).map(|(_, r)| r).sum::<f64>() - self.exit[i]).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.dim();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = -self.exit[i];
            for (j, r) in self.row(i) {
                m[(i, j)] += r;
            }
        }
        m
    }

    /// Reverse adjacency: for each state, the states that jump into it.
    pub(crate) fn predecessors(&self) -> Vec<Vec<(usize, f64)>> {
        let mut pred = vec![Vec::new(); self.dim()];
        for i in 0..self.dim() {
            for (j, r) in self.row(i) {
                pred[j].push((i, r));
            }
        }
        pred
    }

    /// Every state reaches every other, checked by forward and backward
    /// search from state 0.
    pub fn is_irreducible(&self) -> bool {
        let n = self.dim();
        let forward = self.reach(0, |i, f: &mut dyn FnMut(usize)| self.row(i).for_each(|(j, _)| f(j)));
        if forward.iter().any(|&v| !v) {
            return false;
        }
        let pred = self.predecessors();
        let backward = self.reach(0, |i, f: &mut dyn FnMut(usize)| pred[i].iter().for_each(|&(j, _)| f(j)));
        n > 0 && backward.iter().all(|&v| v)
    }

    fn reach(&self, start: usize, neighbours: impl Fn(usize, &mut dyn FnMut(usize))) -> Vec<bool> {
        let mut seen = vec![false; self.dim()];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            neighbours(i, &mut |j| {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            });
        }
        seen
    }
}

/// Generator of the exclusion process, indexed by packed occupancy.
pub fn build_generator(p: &ModelParams) -> Result<RateMatrix> {
    build_generator_capped(p, DEFAULT_STATE_CAP)
}

pub fn build_generator_capped(p: &ModelParams, cap: usize) -> Result<RateMatrix> {
    let dim = state_count_capped(p, cap)?;
    let sites = p.sites();
    let mut row_ptr = Vec::with_capacity(dim + 1);
    let mut cols = Vec::with_capacity(dim * (sites + 1));
    let mut rates = Vec::with_capacity(dim * (sites + 1));
    row_ptr.push(0);
    for i in 0..dim {
        // exchanges, then left flip, then right flip: the order of
        // enumerate_transitions, so holding rates agree bit for bit
        for x in 0..sites.saturating_sub(1) {
            if (i >> x) & 1 != (i >> (x + 1)) & 1 {
                cols.push(i ^ (3 << x));
                rates.push(0.5);
            }
        }
        let left = boundary_rate(i & 1 == 1, p.alpha);
        let right = boundary_rate((i >> (sites - 1)) & 1 == 1, p.beta);
        if sites == 1 {
            cols.push(i ^ 1);
            rates.push(left + right);
        } else {
            cols.push(i ^ 1);
            rates.push(left);
            cols.push(i ^ (1 << (sites - 1)));
            rates.push(right);
        }
        row_ptr.push(cols.len());
    }
    Ok(RateMatrix::from_parts(row_ptr, cols, rates, 1))
}

pub(crate) fn state_count_capped(p: &ModelParams, cap: usize) -> Result<usize> {
    match p.state_count() {
        Some(n) if n <= cap => Ok(n),
        Some(n) => Err(Error::Capacity { states: n, cap }),
        None => Err(Error::Capacity { states: usize::MAX, cap }),
    }
}

/// Subset of the state index with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSet {
    membership: Vec<bool>,
    pub description: String,
}

impl StateSet {
    pub fn from_membership(membership: Vec<bool>, description: impl Into<String>) -> Self {
        Self {
            membership,
            description: description.into(),
        }
    }

    pub fn from_indices(dim: usize, indices: &[usize], description: impl Into<String>) -> Result<Self> {
        let mut membership = vec![false; dim];
        for &i in indices {
            if i >= dim {
                return Err(Error::Dimension(format!("state {i} outside {dim} states")));
            }
            membership[i] = true;
        }
        Ok(Self::from_membership(membership, description))
    }

    pub fn singleton(dim: usize, i: usize) -> Result<Self> {
        Self::from_indices(dim, &[i], format!("singleton {{{i}}}"))
    }

    /// Microscopic preimage `A_N` of a profile ball.
    pub fn from_profile_set(s: &ProfileSet, p: &ModelParams) -> Result<Self> {
        let ind = SetIndicator::new(s, p)?;
        Ok(Self::from_membership(
            ind.membership_table()?,
            format!("profile ball of radius {} at scale N={}", s.radius, p.n),
        ))
    }

    pub fn dim(&self) -> usize {
        self.membership.len()
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        self.membership[i]
    }

    pub fn membership(&self) -> &[bool] {
        &self.membership
    }

    pub fn len(&self) -> usize {
        self.membership.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.membership.iter().any(|&m| m)
    }

    pub fn is_full(&self) -> bool {
        self.membership.iter().all(|&m| m)
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.membership[i]).collect()
    }

    pub fn complement(&self) -> Self {
        Self {
            membership: self.membership.iter().map(|m| !m).collect(),
            description: format!("complement of {}", self.description),
        }
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(Self {
            membership: self.membership.iter().zip(&other.membership).map(|(a, b)| *a || *b).collect(),
            description: format!("{} or {}", self.description, other.description),
        })
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        self.membership.iter().zip(&other.membership).all(|(a, b)| !(*a && *b))
    }

    pub(crate) fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension(format!("state sets over {} and {} states", self.dim(), other.dim())));
        }
        Ok(())
    }

    pub(crate) fn check_chain(&self, q: &RateMatrix) -> Result<()> {
        if self.dim() != q.dim() {
            return Err(Error::Dimension(format!(
                "state set over {} states, chain has {}",
                self.dim(),
                q.dim()
            )));
        }
        Ok(())
    }

    /// Mass of the set under `weights`.
    pub fn measure(&self, weights: &[f64]) -> f64 {
        self.membership.iter().zip(weights).filter(|(m, _)| **m).map(|(_, w)| w).sum()
    }
}

/// Configuration of a state index.
pub fn configuration_of(p: &ModelParams, index: usize) -> Configuration {
    Configuration::from_index(index, p.sites())
}
