//! Mixing times: exact worst-case total variation on small chains, and the
//! stirring-coupling upper bound where the state space is too large.

use bdssep::exact::{build_generator, mixing_time, relaxation_time, solve_stationary};
use bdssep::model::ModelParams;
use bdssep::sim::{coupling_mixing_bound, log_grid};

fn main() -> bdssep::Result<()> {
    println!("{:>3} {:>10} {:>10} {:>8}", "N", "T_mix", "T_rel", "N^3/2");
    for n in [4, 6, 8] {
        let p = ModelParams::new(n, 0.3, 0.6)?;
        let q = build_generator(&p)?;
        let nu = solve_stationary(&q)?;
        let t_mix = mixing_time(&q, &nu)?.t_mix;
        println!("{n:>3} {t_mix:>10.3} {:>10.3} {:>8.0}", relaxation_time(&q, &nu)?, half_cube(n));
    }

    for n in [12, 16] {
        let p = ModelParams::new(n, 0.3, 0.6)?;
        let grid = log_grid(1.0, (n * n * n) as f64, 60);
        let bound = coupling_mixing_bound(&p, &grid, 300, n as u64, 4)?;
        println!("N = {n}: coupling bound {:.1} from {} runs (N^3/2 = {})", bound.t, bound.runs, half_cube(n));
    }
    Ok(())
}

fn half_cube(n: usize) -> f64 {
    (n * n * n) as f64 / 2.0
}
