//! Frequency grids, alias bookkeeping and the normalized-frequency map.
//!
//! The low-resolution grid is `D_LR = [-N/2, N/2)^2`, the high-resolution
//! grid is `D_HR = [-rN/2, rN/2)^2`. A high-resolution frequency `k'`
//! decomposes uniquely as `k' = k + gamma*N` with `k` in `D_LR`; the aliases
//! of `k` are the `r^2` frequencies `k + alpha*N` that land in `D_HR`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

pub type Freq = [i64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    n: usize,
    r: usize,
}

/// `k' = k + gamma*N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AliasIndex {
    pub k: Freq,
    pub gamma: Freq,
}

impl FrequencyGrid {
    pub fn new(n: usize, r: usize) -> Result<Self> {
        if n < 2 || n % 2 != 0 {
            return domain(format!("low-resolution side must be even and >= 2, got {n}"));
        }
        if r < 2 {
            return domain(format!("decimation factor must be >= 2, got {r}"));
        }
        Ok(FrequencyGrid { n, r })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn hr_side(&self) -> usize {
        self.n * self.r
    }

    fn half_lr(&self) -> i64 {
        self.n as i64 / 2
    }

    fn half_hr(&self) -> i64 {
        (self.n * self.r) as i64 / 2
    }

    pub fn in_lr(&self, k: Freq) -> bool {
        let h = self.half_lr();
        k.iter().all(|&c| (-h..h).contains(&c))
    }

    pub fn in_hr(&self, k: Freq) -> bool {
        let h = self.half_hr();
        k.iter().all(|&c| (-h..h).contains(&c))
    }

    /// In the high-resolution grid but outside the low-resolution one.
    pub fn in_hf_band(&self, k: Freq) -> bool {
        self.in_hr(k) && !self.in_lr(k)
    }

    /// Frequencies with a component at `-rN/2` are left out of every
    /// per-frequency map and bound.
    pub fn is_excluded(&self, k: Freq) -> bool {
        k.iter().any(|&c| c == -self.half_hr())
    }

    pub fn decompose(&self, kp: Freq) -> Result<AliasIndex> {
        if !self.in_hr(kp) {
            return domain(format!("frequency {kp:?} outside the high-resolution grid"));
        }
        let n = self.n as i64;
        let h = self.half_lr();
        let gamma = [(kp[0] + h).div_euclid(n), (kp[1] + h).div_euclid(n)];
        Ok(AliasIndex { k: [kp[0] - gamma[0] * n, kp[1] - gamma[1] * n], gamma })
    }

    fn axis_aliases(&self, kc: i64) -> std::ops::RangeInclusive<i64> {
        let n = self.n as i64;
        let h = self.half_hr();
        let lo = (-h - kc + n - 1).div_euclid(n);
        let hi = (h - 1 - kc).div_euclid(n);
        lo..=hi
    }

    /// Alias indices `alpha` of a low-resolution frequency, lexicographic.
    pub fn alias_set(&self, k: Freq) -> Result<Vec<Freq>> {
        if !self.in_lr(k) {
            return domain(format!("frequency {k:?} outside the low-resolution grid"));
        }
        let mut out = Vec::with_capacity(self.r * self.r);
        for a0 in self.axis_aliases(k[0]) {
            for a1 in self.axis_aliases(k[1]) {
                out.push([a0, a1]);
            }
        }
        debug_assert_eq!(out.len(), self.r * self.r);
        Ok(out)
    }

    pub fn alias_freq(&self, k: Freq, alpha: Freq) -> Freq {
        let n = self.n as i64;
        [k[0] + alpha[0] * n, k[1] + alpha[1] * n]
    }

    /// `q = 2 pi k' / (rN)`, each component in `[-pi, pi)` on `D_HR`.
    pub fn q(&self, kp: Freq) -> [f64; 2] {
        let s = 2.0 * PI / self.hr_side() as f64;
        [kp[0] as f64 * s, kp[1] as f64 * s]
    }

    /// Every frequency of `D_HR`, row-major over signed components.
    pub fn hr_freqs(&self) -> impl Iterator<Item = Freq> + '_ {
        let h = self.half_hr();
        (-h..h).flat_map(move |a| (-h..h).map(move |b| [a, b]))
    }
}

pub fn l1(q: [f64; 2]) -> f64 {
    q[0].abs() + q[1].abs()
}

pub fn l2(q: [f64; 2]) -> f64 {
    q[0].hypot(q[1])
}

/// Spectral factor of a real translation along one axis, for bin `kc` of a
/// grid of side `m`. Off the Nyquist bin this is `exp(-i q shift)`; on it,
/// where a real signal has no phase freedom, it is `cos(pi shift)`.
pub fn shift_factor(kc: i64, m: usize, shift: f64) -> Complex64 {
    let mi = m as i64;
    let kc = crate::plane::signed_freq(kc.rem_euclid(mi) as usize, m);
    if kc == -mi / 2 {
        Complex64::new((PI * shift).cos(), 0.0)
    } else {
        let q = 2.0 * PI * kc as f64 / m as f64;
        Complex64::from_polar(1.0, -q * shift)
    }
}

/// Sums of `cos`, `sin`, `cos^2`, `sin^2` of `theta = (2 pi / r) delta . d`
/// over `d` in `[0, r)^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrigSums {
    pub cos: f64,
    pub sin: f64,
    pub cos2: f64,
    pub sin2: f64,
}

pub fn trig_sums(delta: Freq, r: usize) -> TrigSums {
    let ri = r as i64;
    let rr = (r * r) as f64;
    let zero = delta.iter().all(|&c| c.rem_euclid(ri) == 0);
    let half = delta.iter().all(|&c| (2 * c).rem_euclid(ri) == 0);
    // sum of exp(2 i theta) is r^2 when every 2*delta_c vanishes mod r, else 0
    let double = if half { rr } else { 0.0 };
    TrigSums {
        cos: if zero { rr } else { 0.0 },
        sin: 0.0,
        cos2: 0.5 * (rr + double),
        sin2: 0.5 * (rr - double),
    }
}
