use crate::error::{Error, Result};
use crate::exact::linalg::solve_tridiagonal;

/// Mean absorption times `E_j[H]`, `j = 1..N-1`, of the walk on `{0,...,N}`
/// jumping to each neighbor at rate 1 and absorbed at `{0, N}`.
pub fn absorbed_walk_means(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::Argument(format!("walk needs N >= 2, got {n}")));
    }
    let m = n - 1;
    let mut sub = vec![-1.0; m];
    let mut sup = vec![-1.0; m];
    sub[0] = 0.0;
    sup[m - 1] = 0.0;
    solve_tridiagonal(&sub, &vec![2.0; m], &sup, &vec![1.0; m])
}

pub fn absorbed_walk_mean(n: usize, j: usize) -> Result<f64> {
    if n < 2 || j == 0 || j >= n {
        return Err(Error::Argument(format!("start {j} outside 1..{}", n.saturating_sub(1))));
    }
    Ok(absorbed_walk_means(n)?[j - 1])
}
