use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DensityProfile, ModelParams};

/// Density path `u(t_i, x_j)` on the uniform grid `t_i = i T / n_t`,
/// `x_j = j / n_x`, stored row by row in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimePath {
    pub horizon: f64,
    pub n_t: usize,
    pub n_x: usize,
    pub alpha: f64,
    pub beta: f64,
    values: Vec<f64>,
}

impl SpaceTimePath {
    pub fn new(horizon: f64, n_t: usize, n_x: usize, p: &ModelParams, values: Vec<f64>) -> Result<Self> {
        check_grid(horizon, n_t, n_x)?;
        if values.len() != (n_t + 1) * (n_x + 1) {
            return Err(Error::Dimension(format!(
                "{} path values for a {}x{} node grid",
                values.len(),
                n_t + 1,
                n_x + 1
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Domain(format!("path value {v} outside [0,1]")));
        }
        Ok(Self {
            horizon,
            n_t,
            n_x,
            alpha: p.alpha,
            beta: p.beta,
            values,
        })
    }

    /// Path with `u(t, x) = f(t, x)` at interior nodes and boundary columns
    /// pinned to the reservoir densities.
    pub fn from_fn(horizon: f64, n_t: usize, n_x: usize, p: &ModelParams, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        check_grid(horizon, n_t, n_x)?;
        let mut values = Vec::with_capacity((n_t + 1) * (n_x + 1));
        for i in 0..=n_t {
            let t = horizon * i as f64 / n_t as f64;
            values.push(p.alpha);
            values.extend((1..n_x).map(|j| f(t, j as f64 / n_x as f64)));
            values.push(p.beta);
        }
        Self::new(horizon, n_t, n_x, p, values)
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_t as f64
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n_x as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * (self.n_x + 1)..(i + 1) * (self.n_x + 1)]
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * (self.n_x + 1) + j]
    }

    /// Largest distance of the boundary columns from the reservoir densities.
    pub fn boundary_defect(&self) -> f64 {
        (0..=self.n_t)
            .map(|i| {
                let r = self.row(i);
                (r[0] - self.alpha).abs().max((r[self.n_x] - self.beta).abs())
            })
            .fold(0.0, f64::max)
    }

    /// Row `i` as a cell profile on `mesh` cells, by linear interpolation
    /// between nodes at the cell midpoints.
    pub fn profile_at(&self, i: usize, mesh: usize) -> Result<DensityProfile> {
        let row = self.row(i);
        DensityProfile::from_fn(mesh, |x| {
            let s = x * self.n_x as f64;
            let j = (s.floor() as usize).min(self.n_x - 1);
            let w = s - j as f64;
            (1.0 - w) * row[j] + w * row[j + 1]
        })
    }

    /// Dense CSV block: a header line `T,n_t,n_x,alpha,beta`, its values,
    /// then one line per time row.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write_block(&mut w, self.horizon, self.n_t, self.n_x, self.alpha, self.beta, &self.values, self.n_x + 1)
    }
}

/// Test field `H`, one spatial field per time interval `[t_i, t_{i+1})`,
/// vanishing at `x = 0` and `x = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestField {
    pub horizon: f64,
    pub n_t: usize,
    pub n_x: usize,
    values: Vec<f64>,
}

impl TestField {
    pub fn zeros(horizon: f64, n_t: usize, n_x: usize) -> Result<Self> {
        check_grid(horizon, n_t, n_x)?;
        Ok(Self {
            horizon,
            n_t,
            n_x,
            values: vec![0.0; n_t * (n_x + 1)],
        })
    }

    /// `H = f(t_i, x_j)` at the left end `t_i` of each interval, zeroed at the
    /// spatial endpoints.
    pub fn from_fn(horizon: f64, n_t: usize, n_x: usize, mut f: impl FnMut(f64, f64) -> f64) -> Result<Self> {
        let mut h = Self::zeros(horizon, n_t, n_x)?;
        for i in 0..n_t {
            let t = horizon * i as f64 / n_t as f64;
            for j in 1..n_x {
                h.values[i * (n_x + 1) + j] = f(t, j as f64 / n_x as f64);
            }
        }
        Ok(h)
    }

    pub fn interval(&self, i: usize) -> &[f64] {
        &self.values[i * (self.n_x + 1)..(i + 1) * (self.n_x + 1)]
    }

    pub(crate) fn interval_mut(&mut self, i: usize) -> &mut [f64] {
        let w = self.n_x + 1;
        &mut self.values[i * w..(i + 1) * w]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `self + s * other`, kept zero at the endpoints.
    pub fn axpy(&self, s: f64, other: &Self) -> Result<Self> {
        if (self.n_t, self.n_x) != (other.n_t, other.n_x) {
            return Err(Error::Dimension("test fields on different grids".into()));
        }
        let mut out = self.clone();
        for (a, b) in out.values.iter_mut().zip(&other.values) {
            *a += s * b;
        }
        Ok(out)
    }

    pub fn write_csv<W: Write>(&self, mut w: W, p: &ModelParams) -> Result<()> {
        write_block(&mut w, self.horizon, self.n_t, self.n_x, p.alpha, p.beta, &self.values, self.n_x + 1)
    }
}

fn check_grid(horizon: f64, n_t: usize, n_x: usize) -> Result<()> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Argument(format!("horizon must be positive, got {horizon}")));
    }
    if n_t == 0 || n_x < 2 {
        return Err(Error::Argument(format!("grid needs n_t >= 1 and n_x >= 2, got {n_t}x{n_x}")));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn write_block<W: Write>(
    w: &mut W,
    horizon: f64,
    n_t: usize,
    n_x: usize,
    alpha: f64,
    beta: f64,
    values: &[f64],
    width: usize,
) -> Result<()> {
    writeln!(w, "T,n_t,n_x,alpha,beta")?;
    writeln!(w, "{horizon},{n_t},{n_x},{alpha},{beta}")?;
    for row in values.chunks(width) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

/// Node values of a cell profile on `n_x + 1` nodes: interior nodes by
/// linear interpolation between cell midpoints, ends pinned to `alpha` and
/// `beta`.
pub fn profile_nodes(gamma: &DensityProfile, n_x: usize, p: &ModelParams) -> Vec<f64> {
    let m = gamma.mesh();
    let v = gamma.values();
    let mut out = Vec::with_capacity(n_x + 1);
    out.push(p.alpha);
    for j in 1..n_x {
        let s = j as f64 / n_x as f64 * m as f64 - 0.5;
        let value = if s <= 0.0 {
            v[0]
        } else if s >= (m - 1) as f64 {
            v[m - 1]
        } else {
            let k = s.floor() as usize;
            let w = s - k as f64;
            (1.0 - w) * v[k] + w * v[k + 1]
        };
        out.push(value);
    }
    out.push(p.beta);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_of_linear_profile_are_exact() {
        let p = ModelParams::new(4, 0.2, 0.8).unwrap();
        let g = DensityProfile::from_fn(50, |x| 0.2 + 0.6 * x).unwrap();
        let nodes = profile_nodes(&g, 20, &p);
        for (j, v) in nodes.iter().enumerate().take(19).skip(1) {
            let x = j as f64 / 20.0;
            if (0.01..=0.99).contains(&x) {
                assert!((v - (0.2 + 0.6 * x)).abs() < 1e-12);
            }
        }
        assert_eq!((nodes[0], nodes[20]), (0.2, 0.8));
    }

    #[test]
    fn path_validation_and_csv() {
        let p = ModelParams::new(4, 0.3, 0.3).unwrap();
        assert!(SpaceTimePath::from_fn(1.0, 2, 4, &p, |_, _| 1.5).is_err());
        assert!(SpaceTimePath::new(1.0, 2, 4, &p, vec![0.3; 14]).is_err());
        let u = SpaceTimePath::from_fn(1.0, 2, 4, &p, |t, x| 0.3 + 0.1 * t * x).unwrap();
        assert_eq!(u.boundary_defect(), 0.0);
        let mut buf = Vec::new();
        u.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("T,n_t,n_x,alpha,beta\n1,2,4,0.3,0.3\n"));
        assert_eq!(text.lines().count(), 5);
        let g = u.profile_at(0, 8).unwrap();
        assert!(g.values().iter().all(|&v| (v - 0.3).abs() < 1e-15));
    }
}
