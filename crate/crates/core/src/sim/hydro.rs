use serde::{Deserialize, Serialize};

use super::kmc::{kmc_advance, run_replicas, Initial};
use super::rng::RngStream;
use crate::error::{Error, Result};
use crate::model::{site_profile, Configuration, DensityProfile, ModelParams, TransitionKind};

/// Replica-averaged profile at macroscopic time `t`, i.e. microscopic time
/// `t N^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HydroFrame {
    pub t: f64,
    /// Averaged occupation of sites `1..=N-1`.
    pub site_means: Vec<f64>,
    pub profile: DensityProfile,
}

#[allow(clippy::too_many_arguments)]
pub fn hydrodynamic_trajectory(
    p: &ModelParams,
    init: &Initial,
    t_max: f64,
    frames: &[f64],
    replicas: usize,
    seed: u64,
    workers: usize,
    mesh: usize,
) -> Result<Vec<HydroFrame>> {
    if replicas == 0 {
        return Err(Error::Argument("need at least one replica".into()));
    }
    if frames.is_empty() || frames.windows(2).any(|w| w[1] < w[0]) || frames[0] < 0.0 || frames[frames.len() - 1] > t_max {
        return Err(Error::Argument(format!("frame times must be sorted within [0, {t_max}]")));
    }
    let scale = (p.n * p.n) as f64;
    let sites = p.sites();
    let runs = run_replicas(replicas, workers, |i| -> Result<Vec<Vec<u8>>> {
        let mut rng = RngStream::new(seed, i as u64);
        let mut eta = init.sample(p, &mut rng)?;
        let mut out = Vec::with_capacity(frames.len());
        let mut now = 0.0;
        while out.len() < frames.len() {
            let (kind, dt) = kmc_advance(&mut eta, p, &mut rng);
            undo(&mut eta, kind);
            while out.len() < frames.len() && now + dt > frames[out.len()] * scale {
                out.push(eta.occupancy());
            }
            undo(&mut eta, kind);
            now += dt;
        }
        Ok(out)
    })?;
    let mut sums = vec![vec![0.0; sites]; frames.len()];
    for run in runs {
        for (acc, occ) in sums.iter_mut().zip(run?) {
            for (a, o) in acc.iter_mut().zip(occ) {
                *a += o as f64;
            }
        }
    }
    frames
        .iter()
        .zip(sums)
        .map(|(&t, s)| {
            let site_means: Vec<f64> = s.into_iter().map(|v| v / replicas as f64).collect();
            let profile = site_profile(&site_means, p, mesh)?;
            Ok(HydroFrame { t, site_means, profile })
        })
        .collect()
}

/// Moves are involutions, so applying one twice restores the configuration.
fn undo(eta: &mut Configuration, kind: TransitionKind) {
    match kind {
        TransitionKind::Exchange(x) => eta.swap_with_next(x - 1),
        TransitionKind::BoundaryFlip(z) => eta.flip(z - 1),
    }
}

/// Average over the window `[i - w, i + w]`, truncated at the ends.
pub fn window_average(values: &[f64], w: usize) -> Vec<f64> {
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(w);
            let hi = (i + w + 1).min(values.len());
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Sup distance between two site series after window averaging both.
pub fn smoothed_sup_deviation(a: &[f64], b: &[f64], w: usize) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("series of lengths {} and {}", a.len(), b.len())));
    }
    Ok(window_average(a, w)
        .iter()
        .zip(window_average(b, w))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}
