use super::generator::{RateMatrix, StateSet};
use super::stationary::StationaryDistribution;
use crate::error::{Error, Result};

/// Enlarged chain on `Omega ∪ Omega*`: the original rates on both lanes and
/// jumps `eta <-> eta*` at rate `gamma` in each direction, so that
/// `(nu / 2, nu / 2)` is stationary. State `i` of the starred lane has index
/// `dim + i`.
pub fn enlarge(q: &RateMatrix, nu: &StationaryDistribution, gamma: f64) -> Result<RateMatrix> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Argument(format!("enlargement rate must be positive, got {gamma}")));
    }
    if q.lanes() != 1 {
        return Err(Error::Argument("chain is already enlarged".into()));
    }
    if nu.dim() != q.dim() {
        return Err(Error::Dimension(format!("{} weights for {} states", nu.dim(), q.dim())));
    }
    let n = q.dim();
    let mut row_ptr = Vec::with_capacity(2 * n + 1);
    let mut cols = Vec::with_capacity(2 * (q.nnz() + n));
    let mut rates = Vec::with_capacity(2 * (q.nnz() + n));
    row_ptr.push(0);
    for lane in 0..2 {
        let (offset, copy) = if lane == 0 { (0, n) } else { (n, 0) };
        for i in 0..n {
            for (j, r) in q.row(i) {
                cols.push(offset + j);
                rates.push(r);
            }
            cols.push(copy + i);
            rates.push(gamma);
            row_ptr.push(cols.len());
        }
    }
    Ok(RateMatrix::from_parts(row_ptr, cols, rates, 2))
}

/// Copy of `set` in lane 0 (`starred = false`) or lane 1 of an enlarged chain.
pub fn lift(set: &StateSet, starred: bool) -> StateSet {
    let n = set.dim();
    let mut membership = vec![false; 2 * n];
    let offset = if starred { n } else { 0 };
    for i in set.indices() {
        membership[offset + i] = true;
    }
    let tag = if starred { "starred copy" } else { "copy" };
    StateSet::from_membership(membership, format!("{tag} of {}", set.description))
}
