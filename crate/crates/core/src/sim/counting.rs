use serde::{Deserialize, Serialize};

use super::kmc::{kmc_advance, Initial, SetMembership};
use super::rng::RngStream;
use crate::error::{Error, Result};
use crate::model::{boundary_rate, Configuration, ModelParams, ProfileSet};

/// Counting process of entrances into `A_N` and its compensator on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountingSample {
    pub count: u64,
    pub compensator: f64,
    pub martingale: f64,
}

/// `R_N(eta, A)`: total rate of the moves from `eta` that land in `A`.
pub fn rate_into_set(eta: &mut Configuration, p: &ModelParams, set: &SetMembership) -> f64 {
    let len = eta.len();
    let mut rate = 0.0;
    for i in 0..len.saturating_sub(1) {
        if eta.get(i) != eta.get(i + 1) {
            eta.swap_with_next(i);
            if set.contains(eta) {
                rate += 0.5;
            }
            eta.swap_with_next(i);
        }
    }
    let ends = if len == 1 { vec![(0, p.alpha), (0, p.beta)] } else { vec![(0, p.alpha), (len - 1, p.beta)] };
    for (site, density) in ends {
        let occupied = eta.get(site);
        eta.flip(site);
        if set.contains(eta) {
            rate += boundary_rate(occupied, density);
        }
        eta.flip(site);
    }
    rate
}

pub fn counting_martingale(
    p: &ModelParams,
    s: &ProfileSet,
    init: &Initial,
    t: f64,
    rng: &mut RngStream,
) -> Result<CountingSample> {
    counting_martingale_with(p, &SetMembership::new(s, p)?, init, t, rng)
}

/// Runs one trajectory to time `t`, counting jumps from `A^c` into `A` and
/// integrating `R_N(eta(s), A) 1{eta(s) not in A}`.
pub fn counting_martingale_with(
    p: &ModelParams,
    set: &SetMembership,
    init: &Initial,
    t: f64,
    rng: &mut RngStream,
) -> Result<CountingSample> {
    if !(t > 0.0) {
        return Err(Error::Argument(format!("counting horizon must be positive, got {t}")));
    }
    let mut eta = init.sample(p, rng)?;
    let mut inside = set.contains(&eta);
    let mut rate = if inside { 0.0 } else { rate_into_set(&mut eta, p, set) };
    let mut now = 0.0;
    let mut count = 0u64;
    let mut compensator = 0.0;
    loop {
        let (_, dt) = kmc_advance(&mut eta, p, rng);
        let stop = now + dt >= t;
        compensator += rate * if stop { t - now } else { dt };
        if stop {
            break;
        }
        now += dt;
        let was_inside = inside;
        inside = set.contains(&eta);
        if inside && !was_inside {
            count += 1;
        }
        rate = if inside { 0.0 } else { rate_into_set(&mut eta, p, set) };
    }
    Ok(CountingSample {
        count,
        compensator,
        martingale: count as f64 - compensator,
    })
}
