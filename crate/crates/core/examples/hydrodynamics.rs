//! Replica-averaged density profiles under diffusive scaling, compared with
//! the heat equation started from the same profile.

use bdssep::macroscopic::heat_solve_nodes;
use bdssep::model::{Configuration, ModelParams};
use bdssep::sim::{hydrodynamic_trajectory, smoothed_sup_deviation, Initial};

fn main() -> bdssep::Result<()> {
    let p = ModelParams::new(32, 0.2, 0.8)?;
    let frames = [0.05, 0.1, 0.2];
    let sim = hydrodynamic_trajectory(&p, &Initial::Fixed(Configuration::full(p.sites())), 0.2, &frames, 400, 3, 4, 128)?;

    // 160 time steps of 1/800 puts every frame on the grid
    let (n_x, n_t) = (128, 160);
    let heat = heat_solve_nodes(&vec![1.0; n_x + 1], &p, 0.2, n_t, n_x)?;
    let stride = n_x / p.n;
    for f in &sim {
        let row = heat.row((f.t / 0.2 * n_t as f64).round() as usize);
        let reference: Vec<f64> = (1..p.n).map(|k| row[k * stride]).collect();
        let raw = f.site_means.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let smooth = smoothed_sup_deviation(&f.site_means, &reference, 2)?;
        println!("t = {:.2}: raw sup {raw:.3}, smoothed sup {smooth:.3}", f.t);
    }
    Ok(())
}
