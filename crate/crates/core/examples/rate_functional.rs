//! The dynamical rate functional: zero along the heat flow, positive along
//! a path that ignores it.

use bdssep::macroscopic::{heat_solve, rate_functional, SpaceTimePath};
use bdssep::model::{stationary_density, DensityProfile, ModelParams};

fn main() -> bdssep::Result<()> {
    let p = ModelParams::new(2, 0.2, 0.8)?;
    let gamma = DensityProfile::from_fn(400, |x| stationary_density(&p, x) + 0.15 * (std::f64::consts::PI * x).sin())?;

    for n in [50, 100, 200] {
        let u = heat_solve(&gamma, &p, 1.0, n, n)?;
        let r = rate_functional(&u, &gamma, &p)?;
        println!("heat flow {n}x{n}: I = {:.3e} (elliptic residual {:.1e})", r.value, r.diagnostics.elliptic_residual);
    }

    // hold the bump in place for unit time: pay to resist diffusion
    let n = 100;
    let start = heat_solve(&gamma, &p, 1.0, n, n)?;
    let first = start.row(0).to_vec();
    let frozen: Vec<f64> = (0..=n).flat_map(|_| first.iter().copied()).collect();
    let u = SpaceTimePath::new(1.0, n, n, &p, frozen)?;
    let r = rate_functional(&u, &gamma, &p)?;
    println!("frozen bump: I = {:.4}, energy {:.4}", r.value, r.energy);
    Ok(())
}
