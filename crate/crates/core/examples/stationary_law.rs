//! Stationary law of a small chain: site densities against the linear
//! profile, and the product-measure check when the reservoirs agree.
//!
//! ```text
//! cargo run --release --example stationary_law
//! ```

use bdssep::exact::{bernoulli_product, build_generator, detailed_balance_defect, site_densities, solve_stationary};
use bdssep::model::{stationary_density, ModelParams};

fn main() -> bdssep::Result<()> {
    let p = ModelParams::new(10, 0.2, 0.8)?;
    let q = build_generator(&p)?;
    let nu = solve_stationary(&q)?;
    println!("N = {}, {} states, detailed balance defect {:.3e}", p.n, q.dim(), detailed_balance_defect(&q, &nu));
    println!("{:>4} {:>10} {:>10}", "x", "density", "rho_bar");
    for (i, d) in site_densities(&p, &nu).iter().enumerate() {
        let x = (i + 1) as f64 / p.n as f64;
        println!("{:>4} {:>10.6} {:>10.6}", i + 1, d, stationary_density(&p, x));
    }

    // equal densities: the stationary law is Bernoulli(alpha) on every site
    let p = ModelParams::new(8, 0.3, 0.3)?;
    let nu = solve_stationary(&build_generator(&p)?)?;
    let prod = bernoulli_product(&p, 0.3);
    let dev = nu.weights.iter().zip(&prod).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("alpha = beta = 0.3, N = 8: max |nu - product| = {dev:.2e}");
    Ok(())
}
