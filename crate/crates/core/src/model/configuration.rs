use std::fmt;

use serde::{Deserialize, Serialize};

use super::ModelParams;
use crate::error::{Error, Result};

const WORD: usize = 64;

/// Occupancy of the sites `1..=N-1`, packed 64 sites per word.
///
/// Bit `i` of the packed representation is the occupation of site `i + 1`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Configuration {
    words: Vec<u64>,
    len: usize,
}

impl Configuration {
    pub fn empty(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(WORD).max(1)],
            len,
        }
    }

    pub fn full(len: usize) -> Self {
        let mut c = Self::empty(len);
        for i in 0..len {
            c.set(i, true);
        }
        c
    }

    pub fn from_occupancy(occupancy: &[u8]) -> Result<Self> {
        let mut c = Self::empty(occupancy.len());
        for (i, &v) in occupancy.iter().enumerate() {
            match v {
                0 => {}
                1 => c.set(i, true),
                _ => return Err(Error::Argument(format!("occupancy values are 0 or 1, got {v}"))),
            }
        }
        Ok(c)
    }

    /// Configuration whose bit `i` is bit `i` of `index`.
    pub fn from_index(index: usize, len: usize) -> Self {
        debug_assert!(len < usize::BITS as usize);
        let mut c = Self::empty(len);
        c.words[0] = index as u64;
        c
    }

    /// Inverse of [`Configuration::from_index`]; only meaningful for `len < 64`.
    pub fn index(&self) -> usize {
        self.words[0] as usize
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Occupation of the zero-based position `i` (site `i + 1`).
    #[inline]
    pub fn get(&self, i: usize) -> bool {
        (self.words[i / WORD] >> (i % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        let mask = 1u64 << (i % WORD);
        if value {
            self.words[i / WORD] |= mask;
        } else {
            self.words[i / WORD] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        self.words[i / WORD] ^= 1u64 << (i % WORD);
    }

    /// Exchange the contents of positions `i` and `i + 1`.
    #[inline]
    pub fn swap_with_next(&mut self, i: usize) {
        if self.get(i) != self.get(i + 1) {
            self.flip(i);
            self.flip(i + 1);
        }
    }

    pub fn particles(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn occupancy(&self) -> Vec<u8> {
        (0..self.len).map(|i| self.get(i) as u8).collect()
    }

    /// Number of bonds `(i, i+1)` with unequal occupations.
    pub fn discordant_bonds(&self) -> usize {
        if self.len < 2 {
            return 0;
        }
        let mut count = 0;
        for w in 0..self.words.len() {
            let cur = self.words[w];
            let next_bit0 = if w + 1 < self.words.len() { self.words[w + 1] & 1 } else { 0 };
            let shifted = (cur >> 1) | (next_bit0 << 63);
            let mut diff = cur ^ shifted;
            // only bonds whose left site i satisfies i + 1 < len
            let base = w * WORD;
            if base + WORD > self.len - 1 {
                let valid = (self.len - 1).saturating_sub(base);
                diff &= if valid >= WORD { u64::MAX } else { (1u64 << valid) - 1 };
            }
            count += diff.count_ones() as usize;
        }
        count
    }

    /// Left position of the `k`-th discordant bond (zero-based), scanning left to right.
    pub fn nth_discordant_bond(&self, mut k: usize) -> Option<usize> {
        if self.len < 2 {
            return None;
        }
        for w in 0..self.words.len() {
            let cur = self.words[w];
            let next_bit0 = if w + 1 < self.words.len() { self.words[w + 1] & 1 } else { 0 };
            let mut diff = cur ^ ((cur >> 1) | (next_bit0 << 63));
            let base = w * WORD;
            if base >= self.len - 1 {
                break;
            }
            if base + WORD > self.len - 1 {
                let valid = self.len - 1 - base;
                diff &= if valid >= WORD { u64::MAX } else { (1u64 << valid) - 1 };
            }
            let ones = diff.count_ones() as usize;
            if k < ones {
                for _ in 0..k {
                    diff &= diff - 1;
                }
                return Some(base + diff.trailing_zeros() as usize);
            }
            k -= ones;
        }
        None
    }
}

impl fmt::Debug for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Configuration(")?;
        for i in 0..self.len {
            write!(f, "{}", self.get(i) as u8)?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransitionKind {
    /// Exchange of sites `x` and `x + 1`, `1 <= x <= N - 2`.
    Exchange(usize),
    /// Creation or removal at the boundary site `z`, `z` in `{1, N - 1}`.
    BoundaryFlip(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub kind: TransitionKind,
    pub target: Configuration,
    pub rate: f64,
}

fn check_len(eta: &Configuration, p: &ModelParams) -> Result<()> {
    if eta.len() != p.sites() {
        return Err(Error::Dimension(format!(
            "configuration has {} sites, model with N={} needs {}",
            eta.len(),
            p.n,
            p.sites()
        )));
    }
    Ok(())
}

/// Flip rate at a boundary site with reservoir density `density`.
#[inline]
pub(crate) fn boundary_rate(occupied: bool, density: f64) -> f64 {
    if occupied {
        (1.0 - density) / 2.0
    } else {
        density / 2.0
    }
}

/// All state-changing moves out of `eta`: exchanges across discordant bonds
/// followed by the two boundary flips.
pub fn enumerate_transitions(eta: &Configuration, p: &ModelParams) -> Result<Vec<Transition>> {
    check_len(eta, p)?;
    let len = eta.len();
    let mut out = Vec::with_capacity(len + 1);
    for i in 0..len.saturating_sub(1) {
        if eta.get(i) != eta.get(i + 1) {
            let mut target = eta.clone();
            target.swap_with_next(i);
            out.push(Transition {
                kind: TransitionKind::Exchange(i + 1),
                target,
                rate: 0.5,
            });
        }
    }
    let mut left = eta.clone();
    left.flip(0);
    out.push(Transition {
        kind: TransitionKind::BoundaryFlip(1),
        target: left,
        rate: boundary_rate(eta.get(0), p.alpha),
    });
    let mut right = eta.clone();
    right.flip(len - 1);
    out.push(Transition {
        kind: TransitionKind::BoundaryFlip(len),
        target: right,
        rate: boundary_rate(eta.get(len - 1), p.beta),
    });
    Ok(out)
}

/// Holding rate of `eta`. Summed in the same order as
/// [`enumerate_transitions`] lists its moves, so the two agree bit for bit.
pub fn total_exit_rate(eta: &Configuration, p: &ModelParams) -> Result<f64> {
    check_len(eta, p)?;
    let len = eta.len();
    let mut total = 0.0;
    for _ in 0..eta.discordant_bonds() {
        total += 0.5;
    }
    total += boundary_rate(eta.get(0), p.alpha);
    total += boundary_rate(eta.get(len - 1), p.beta);
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(bits: &[u8]) -> Configuration {
        Configuration::from_occupancy(bits).unwrap()
    }

    #[test]
    fn transitions_n3_empty() {
        let p = ModelParams::new(3, 0.2, 0.8).unwrap();
        let t = enumerate_transitions(&cfg(&[0, 0]), &p).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].kind, TransitionKind::BoundaryFlip(1));
        assert_eq!(t[0].target, cfg(&[1, 0]));
        assert!((t[0].rate - 0.1).abs() < 1e-15);
        assert_eq!(t[1].kind, TransitionKind::BoundaryFlip(2));
        assert_eq!(t[1].target, cfg(&[0, 1]));
        assert!((t[1].rate - 0.4).abs() < 1e-15);
        assert!((total_exit_rate(&cfg(&[0, 0]), &p).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn transitions_n3_left_particle() {
        let p = ModelParams::new(3, 0.2, 0.8).unwrap();
        let t = enumerate_transitions(&cfg(&[1, 0]), &p).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t[0].kind, TransitionKind::Exchange(1));
        assert_eq!(t[0].target, cfg(&[0, 1]));
        assert_eq!(t[0].rate, 0.5);
        assert_eq!(t[1].target, cfg(&[0, 0]));
        assert!((t[1].rate - 0.4).abs() < 1e-15);
        assert_eq!(t[2].target, cfg(&[1, 1]));
        assert!((t[2].rate - 0.4).abs() < 1e-15);
    }

    #[test]
    fn symmetric_boundary_rates() {
        let p = ModelParams::new(6, 0.5, 0.5).unwrap();
        for idx in 0..32 {
            let eta = Configuration::from_index(idx, 5);
            for t in enumerate_transitions(&eta, &p).unwrap() {
                if let TransitionKind::BoundaryFlip(_) = t.kind {
                    assert_eq!(t.rate, 0.25);
                }
            }
        }
    }

    #[test]
    fn alternating_has_three_exchanges() {
        let p = ModelParams::new(5, 0.3, 0.6).unwrap();
        let eta = cfg(&[1, 0, 1, 0]);
        let t = enumerate_transitions(&eta, &p).unwrap();
        let exchanges = t.iter().filter(|t| matches!(t.kind, TransitionKind::Exchange(_))).count();
        assert_eq!(exchanges, 3);
        let expected = 1.5 + (1.0 - 0.3) / 2.0 + 0.6 / 2.0;
        assert!((total_exit_rate(&eta, &p).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn length_mismatch_is_dimension_error() {
        let p = ModelParams::new(5, 0.3, 0.6).unwrap();
        assert!(matches!(enumerate_transitions(&cfg(&[1, 0]), &p), Err(Error::Dimension(_))));
        assert!(matches!(total_exit_rate(&cfg(&[1, 0]), &p), Err(Error::Dimension(_))));
    }

    #[test]
    fn discordant_bonds_across_words() {
        let mut eta = Configuration::empty(130);
        eta.set(63, true);
        eta.set(64, true);
        eta.set(129, true);
        // bonds (62,63), (64,65), (128,129)
        assert_eq!(eta.discordant_bonds(), 3);
        assert_eq!(eta.nth_discordant_bond(0), Some(62));
        assert_eq!(eta.nth_discordant_bond(1), Some(64));
        assert_eq!(eta.nth_discordant_bond(2), Some(128));
        assert_eq!(eta.nth_discordant_bond(3), None);
        let full = Configuration::full(64);
        assert_eq!(full.discordant_bonds(), 0);
        assert_eq!(full.particles(), 64);
    }

    proptest! {
        #[test]
        fn rate_conservation_and_particle_changes(bits in proptest::collection::vec(0u8..2, 1..90),
                                                 alpha in 0.01f64..0.5, gap in 0.0f64..0.49) {
            let beta = alpha + gap;
            let p = ModelParams::new(bits.len() + 1, alpha, beta).unwrap();
            let eta = cfg(&bits);
            let ts = enumerate_transitions(&eta, &p).unwrap();
            let mut sum = 0.0;
            for t in &ts {
                sum += t.rate;
                prop_assert!(t.target != eta);
                match t.kind {
                    TransitionKind::Exchange(x) => {
                        prop_assert!(eta.get(x - 1) != eta.get(x));
                        prop_assert_eq!(t.target.particles(), eta.particles());
                    }
                    TransitionKind::BoundaryFlip(_) => {
                        let diff = t.target.particles() as i64 - eta.particles() as i64;
                        prop_assert!(diff == 1 || diff == -1);
                    }
                }
            }
            let total = total_exit_rate(&eta, &p).unwrap();
            prop_assert_eq!(sum, total);
            prop_assert!(total <= p.n as f64);
            prop_assert_eq!(eta.discordant_bonds(),
                (0..bits.len().saturating_sub(1)).filter(|&i| bits[i] != bits[i + 1]).count());
        }
    }
}
