//! Frame-count bounds.
//!
//! The fused spectrum splits as `X~ = Z~ G_gamma + B`. The approximation side
//! bounds `|G_gamma - 1| <= p1` with probability `P1` through Hoeffding on the
//! empirical characteristic function; the aliasing side bounds `|B / Z~| <= p2`
//! with probability `P2` term by term over the `r^2 - 1` aliases. Together the
//! relative error is at most `p1 + p2` with probability `P2 - (1 - P1)`.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{domain, Result};
use crate::fusion::AMPLITUDE_FLOOR;
use crate::grid::{l1, l2, FrequencyGrid};
use crate::plane::{signed_freq, Plane};
use crate::scene::Psf;

pub const FORMULA_VERSION: &str = "srpac-bounds/1";

/// Default LR side for spectral maps of analytic spectra.
pub const DEFAULT_N: usize = 32;

/// A frame count per targeted position, or not reachable at any count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NdBound {
    Frames(u64),
    NotReachable,
}

impl NdBound {
    pub fn frames(&self) -> Option<u64> {
        match self {
            NdBound::Frames(n) => Some(*n),
            NdBound::NotReachable => None,
        }
    }

    pub fn is_reachable(&self) -> bool {
        matches!(self, NdBound::Frames(_))
    }
}

impl std::fmt::Display for NdBound {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NdBound::Frames(n) => write!(f, "{n}"),
            NdBound::NotReachable => write!(f, "NR"),
        }
    }
}

impl Serialize for NdBound {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            NdBound::Frames(n) => s.serialize_u64(*n),
            NdBound::NotReachable => s.serialize_str("NR"),
        }
    }
}

impl<'de> Deserialize<'de> for NdBound {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(u64),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(n) => Ok(NdBound::Frames(n)),
            Raw::S(s) if s == "NR" => Ok(NdBound::NotReachable),
            Raw::S(s) => Err(serde::de::Error::custom(format!("expected a count or NR, got {s}"))),
        }
    }
}

/// `ceil(x)` clamped to `[1, u64::MAX]`.
fn frames_from(x: f64) -> NdBound {
    if x.is_nan() {
        return NdBound::NotReachable;
    }
    let c = x.ceil();
    if c >= u64::MAX as f64 {
        NdBound::Frames(u64::MAX)
    } else {
        NdBound::Frames((c as u64).max(1))
    }
}

/// Amplitude model used by the aliasing side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectrumModel {
    /// `|Z~(k')| = |k'|^-(1+eta)`, unit DC.
    PowerLaw { eta: f64 },
    /// Measured amplitude of the unblurred scene on `D_HR`, bin-indexed.
    Measured {
        #[serde(skip)]
        amplitude: Option<Plane<f64>>,
        label: String,
    },
}

impl SpectrumModel {
    pub fn measured(amplitude: Plane<f64>, label: impl Into<String>) -> Self {
        SpectrumModel::Measured { amplitude: Some(amplitude), label: label.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsConfig {
    pub r: usize,
    /// Max displacement error per axis, LR pixels.
    pub epsilon: f64,
    /// Norm of the mean displacement error, HR pixels.
    #[serde(default)]
    pub bias: f64,
    pub p1: f64,
    #[serde(rename = "P1")]
    pub big_p1: f64,
    pub p2: f64,
    #[serde(rename = "P2")]
    pub big_p2: f64,
    pub spectrum: SpectrumModel,
    #[serde(default)]
    pub psf: Psf,
    /// LR side of the spectral grid for analytic spectra.
    #[serde(default = "default_n")]
    pub n: usize,
    /// Keep the cubic Taylor term in the approximation side.
    #[serde(default)]
    pub strict_cubic: bool,
    #[serde(default)]
    pub seconds_per_frame: Option<f64>,
}

fn default_n() -> usize {
    DEFAULT_N
}

impl BoundsConfig {
    /// Unbiased power-law configuration with `p1 = p2 = p`, `P1 = P2 = big_p`.
    pub fn power_law(r: usize, epsilon: f64, p: f64, big_p: f64, eta: f64) -> Self {
        BoundsConfig {
            r,
            epsilon,
            bias: 0.0,
            p1: p,
            big_p1: big_p,
            p2: p,
            big_p2: big_p,
            spectrum: SpectrumModel::PowerLaw { eta },
            psf: Psf::Dirac,
            n: DEFAULT_N,
            strict_cubic: false,
            seconds_per_frame: None,
        }
    }

    pub fn eps_r(&self) -> f64 {
        self.epsilon * self.r as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.r < 2 {
            return domain(format!("decimation factor must be >= 2, got {}", self.r));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return domain(format!("epsilon must be finite and >= 0, got {}", self.epsilon));
        }
        let lim = 1.0 / (PI * self.r as f64);
        if self.epsilon >= lim {
            return domain(format!("epsilon {} violates epsilon < 1/(pi r) = {lim:.6}", self.epsilon));
        }
        if !(self.bias.is_finite() && self.bias >= 0.0) {
            return domain(format!("bias norm must be finite and >= 0, got {}", self.bias));
        }
        for (name, v) in [("p1", self.p1), ("p2", self.p2), ("P1", self.big_p1), ("P2", self.big_p2)] {
            if !(v > 0.0 && v < 1.0) {
                return domain(format!("{name} must lie in (0, 1), got {v}"));
            }
        }
        self.psf.validate()?;
        if let Some(s) = self.seconds_per_frame {
            if !(s.is_finite() && s >= 0.0) {
                return domain(format!("seconds per frame must be >= 0, got {s}"));
            }
        }
        match &self.spectrum {
            SpectrumModel::PowerLaw { eta } => {
                if !eta.is_finite() {
                    return domain("eta must be finite");
                }
                FrequencyGrid::new(self.n, self.r)?;
            }
            SpectrumModel::Measured { amplitude, .. } => {
                let Some(a) = amplitude else {
                    return domain("measured spectrum has no amplitude data");
                };
                let m = a.side();
                if m % self.r != 0 {
                    return domain(format!("spectrum side {m} is not a multiple of r = {}", self.r));
                }
                FrequencyGrid::new(m / self.r, self.r)?;
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<FrequencyGrid> {
        match &self.spectrum {
            SpectrumModel::Measured { amplitude: Some(a), .. } => FrequencyGrid::new(a.side() / self.r, self.r),
            _ => FrequencyGrid::new(self.n, self.r),
        }
    }

    /// Blurred amplitude on the HR grid, bin-indexed.
    pub fn amplitude(&self) -> Result<Plane<f64>> {
        let grid = self.grid()?;
        let m = grid.hr_side();
        let h = self.psf.transfer_plane(m);
        let base = match &self.spectrum {
            SpectrumModel::PowerLaw { eta } => Plane::from_fn(m, |i, j| {
                let k = (signed_freq(i, m) as f64).hypot(signed_freq(j, m) as f64);
                if k == 0.0 {
                    1.0
                } else {
                    k.powf(-(1.0 + eta))
                }
            }),
            SpectrumModel::Measured { amplitude, .. } => amplitude.clone().expect("validated"),
        };
        Ok(Plane::from_fn(m, |i, j| base[(i, j)] * h[(i, j)]))
    }
}

/// Hoeffding constant of the approximation side.
pub fn c1(cfg: &BoundsConfig) -> f64 {
    let er = cfg.eps_r();
    let mut num = cfg.p1 - SQRT_2 * PI * cfg.bias - 2.0 * PI * PI * er * er;
    if cfg.strict_cubic {
        num -= SQRT_2 * 8.0 * PI.powi(3) * er.powi(3) / 3.0;
    }
    if cfg.epsilon == 0.0 {
        return if num > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
    }
    num / (2.0 * SQRT_2 * PI * cfg.epsilon)
}

/// Smallest approximation error reachable with unlimited frames.
pub fn p_best(epsilon: f64, r: usize) -> f64 {
    let er = epsilon * r as f64;
    2.0 * PI * PI * er * er
}

pub fn nd_min_approx(cfg: &BoundsConfig) -> Result<NdBound> {
    cfg.validate()?;
    let c = c1(cfg);
    if c <= 0.0 {
        return Ok(NdBound::NotReachable);
    }
    Ok(frames_from(8.0 / (c * c) * (4.0 / (1.0 - cfg.big_p1)).ln()))
}

/// Second-order Taylor remainder bound of one alias term.
pub fn f_alias(q: [f64; 2], eps_r: f64) -> f64 {
    let s = l1(q) * eps_r;
    s * s / 2.0 + s * s * s / 6.0
}

/// Per-frequency constants of the aliasing side.
#[derive(Debug, Clone)]
pub struct AliasMaps {
    pub grid: FrequencyGrid,
    /// Deterministic floor on the aliasing error.
    pub p0: Plane<f64>,
    /// Slope multiplying the Hoeffding deviation.
    pub a: Plane<f64>,
    pub valid: Plane<bool>,
}

pub fn alias_maps(cfg: &BoundsConfig) -> Result<AliasMaps> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let amp = cfg.amplitude()?;
    let m = grid.hr_side();
    let er = cfg.eps_r();
    let peak = amp.data().iter().cloned().fold(0.0, f64::max);
    let mut p0 = Plane::filled(m, 0.0);
    let mut a = Plane::filled(m, 0.0);
    let mut valid = Plane::filled(m, false);
    for i in 0..m {
        for j in 0..m {
            let kp = [signed_freq(i, m), signed_freq(j, m)];
            let ak = amp[(i, j)];
            if grid.is_excluded(kp) || ak <= AMPLITUDE_FLOOR * peak {
                continue;
            }
            let idx = grid.decompose(kp)?;
            let (mut sp, mut sa) = (0.0, 0.0);
            for alpha in grid.alias_set(idx.k)? {
                if alpha == idx.gamma {
                    continue;
                }
                let ka = grid.alias_freq(idx.k, alpha);
                let ratio = *amp.at_freq(ka) / ak;
                let q = grid.q(ka);
                sp += ratio * f_alias(q, er);
                sa += ratio * l1(q) * cfg.epsilon;
            }
            p0[(i, j)] = SQRT_2 * sp;
            a[(i, j)] = SQRT_2 * sa;
            valid[(i, j)] = true;
        }
    }
    Ok(AliasMaps { grid, p0, a, valid })
}

/// Target the aliasing constant is measured against: `sqrt(2) p2` for
/// `r = 2`, where the three aliases admit a tighter union bound.
pub fn alias_target(cfg: &BoundsConfig) -> f64 {
    if cfg.r == 2 {
        SQRT_2 * cfg.p2
    } else {
        cfg.p2
    }
}

fn c2_of(target: f64, p0: f64, a: f64) -> f64 {
    let num = target - p0;
    if a == 0.0 {
        if num > 0.0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    } else {
        num / a
    }
}

/// Per-frequency `c2`; `None` on masked bins.
pub fn c2_map(cfg: &BoundsConfig, maps: &AliasMaps) -> Plane<Option<f64>> {
    let t = alias_target(cfg);
    let m = maps.grid.hr_side();
    Plane::from_fn(m, |i, j| maps.valid[(i, j)].then(|| c2_of(t, maps.p0[(i, j)], maps.a[(i, j)])))
}

/// `ln` factor of the aliasing side for confidence `big_p2`.
pub fn alias_log_factor(r: usize, big_p2: f64) -> f64 {
    if r == 2 {
        (2.0 / (1.0 - big_p2.powf(1.0 / 3.0))).ln()
    } else {
        let e = 1.0 / (r * r - 1) as f64;
        (4.0 / (1.0 - big_p2.powf(e))).ln()
    }
}

pub fn nd_from_c2(c2: f64, r: usize, big_p2: f64) -> NdBound {
    if c2 <= 0.0 || c2.is_nan() {
        return NdBound::NotReachable;
    }
    if c2.is_infinite() {
        return NdBound::Frames(1);
    }
    frames_from(alias_log_factor(r, big_p2) / (c2 * c2))
}

/// Aliasing-side summary over all valid bins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AliasSummary {
    /// Infimum of `c2` over valid bins.
    pub c2: f64,
    /// Supremum of `p0` over valid bins.
    pub p0: f64,
    pub nd: NdBound,
    /// Worst bin, signed frequency.
    pub worst: [i64; 2],
}

pub fn alias_summary(cfg: &BoundsConfig) -> Result<AliasSummary> {
    let maps = alias_maps(cfg)?;
    let c2 = c2_map(cfg, &maps);
    let m = maps.grid.hr_side();
    let mut best = (f64::INFINITY, [0i64, 0i64]);
    let mut p0 = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            if let Some(c) = c2[(i, j)] {
                if c < best.0 {
                    best = (c, [signed_freq(i, m), signed_freq(j, m)]);
                }
                p0 = p0.max(maps.p0[(i, j)]);
            }
        }
    }
    Ok(AliasSummary { c2: best.0, p0, nd: nd_from_c2(best.0, cfg.r, cfg.big_p2), worst: best.1 })
}

pub fn nd_min_alias(cfg: &BoundsConfig) -> Result<NdBound> {
    Ok(alias_summary(cfg)?.nd)
}

/// Per-frequency minimal frame count of the aliasing side.
pub fn nd_map(cfg: &BoundsConfig) -> Result<(AliasMaps, Plane<Option<NdBound>>)> {
    let maps = alias_maps(cfg)?;
    let c2 = c2_map(cfg, &maps);
    let nd = c2.map(|c| c.map(|c| nd_from_c2(c, cfg.r, cfg.big_p2)));
    Ok((maps, nd))
}

/// Power-law coefficients of the highest-frequency aliasing constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawCoefficients {
    pub r: usize,
    pub n: usize,
    pub eta: f64,
    pub f_sum: f64,
    pub a_sum: f64,
    pub b0: f64,
    pub a0: f64,
}

impl PowerLawCoefficients {
    /// Quadratic part of `p0` at the highest frequency.
    pub fn p0_star(&self, epsilon: f64) -> f64 {
        let r = self.r as f64;
        self.b0 * SQRT_2.powf(self.eta) * PI * PI * epsilon * epsilon * r * r * (r * r - 1.0)
    }

    pub fn a_star(&self, epsilon: f64) -> f64 {
        let r = self.r as f64;
        self.a0 * 2f64.powf(1.0 + self.eta / 2.0) * epsilon * (r * r - 1.0)
    }
}

/// Sums over the `r^2 - 1` aliases of the corner frequency
/// `k' = (rN/2 - 1)(1, 1)`, written as `u = v - 2 beta / r` with
/// `v = (1 - 2/(rN))(1, 1)`. The alias next to DC (`u -> 0`) is left out:
/// its amplitude ratio grows with `N` while its weight vanishes.
pub fn power_law_coefficients(r: usize, n: usize, eta: f64) -> Result<PowerLawCoefficients> {
    FrequencyGrid::new(n, r)?;
    let rf = r as f64;
    let vc = 1.0 - 2.0 / (rf * n as f64);
    let pref = vc.powf(1.0 + eta);
    let (mut fs, mut as_) = (0.0, 0.0);
    for b0 in 0..r {
        for b1 in 0..r {
            if (b0, b1) == (0, 0) || (2 * b0 == r && 2 * b1 == r) {
                continue;
            }
            let u = [vc - 2.0 * b0 as f64 / rf, vc - 2.0 * b1 as f64 / rf];
            let (n1, n2) = (l1(u), l2(u));
            let w = n2.powf(-(1.0 + eta));
            fs += n1 * n1 * w;
            as_ += n1 * w;
        }
    }
    let k = (r * r - 1) as f64;
    let (f_sum, a_sum) = (pref * fs, pref * as_);
    Ok(PowerLawCoefficients { r, n, eta, f_sum, a_sum, b0: f_sum / k, a0: a_sum / k })
}

/// Largest `epsilon` with `p0* < p`, from the power-law coefficients.
pub fn feasible_epsilon_max(r: usize, p: f64, eta: f64) -> Result<f64> {
    if !(p > 0.0) {
        return domain(format!("p must be > 0, got {p}"));
    }
    let c = power_law_coefficients(r, DEFAULT_N, eta)?;
    let rf = r as f64;
    Ok((p / (c.b0 * SQRT_2.powf(eta) * PI * PI * rf * rf * (rf * rf - 1.0))).sqrt())
}

/// Slope of the high-frequency SNR lower bound, dB per decade of frames.
pub fn snr_lower_bound_slope() -> f64 {
    10.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Ok,
    NrApprox,
    NrAlias,
    NrBoth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Guarantee {
    /// Bound on `|X~ - Z~| / |Z~|`.
    pub error_bound: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub formula_version: String,
    pub config: BoundsConfig,
    pub c1: f64,
    pub p_best: f64,
    pub nd_approx: NdBound,
    pub alias: AliasSummary,
    pub nd_alias: NdBound,
    pub nd_total: NdBound,
    pub verdict: Verdict,
    pub guarantee: Guarantee,
    /// Total frames `r^2 nd_total`.
    pub total_frames: Option<u64>,
    pub acquisition_time_s: Option<f64>,
    pub assumptions: Vec<String>,
    pub units: Units,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Units {
    pub epsilon: String,
    pub bias: String,
    pub nd: String,
}

impl Default for Units {
    fn default() -> Self {
        Units {
            epsilon: "LR pixels".into(),
            bias: "HR pixels".into(),
            nd: "frames per targeted position".into(),
        }
    }
}

pub fn plan(cfg: &BoundsConfig) -> Result<BoundsReport> {
    cfg.validate()?;
    let nd_approx = nd_min_approx(cfg)?;
    let alias = alias_summary(cfg)?;
    let nd_alias = alias.nd;
    let verdict = match (nd_approx.is_reachable(), nd_alias.is_reachable()) {
        (true, true) => Verdict::Ok,
        (false, true) => Verdict::NrApprox,
        (true, false) => Verdict::NrAlias,
        (false, false) => Verdict::NrBoth,
    };
    let nd_total = if verdict == Verdict::Ok { nd_approx.max(nd_alias) } else { NdBound::NotReachable };
    let total_frames = nd_total.frames().map(|n| n.saturating_mul((cfg.r * cfg.r) as u64));
    let acquisition_time_s = match (total_frames, cfg.seconds_per_frame) {
        (Some(f), Some(s)) => Some(f as f64 * s),
        _ => None,
    };
    let mut assumptions = vec![
        "periodic band-limited scene".to_string(),
        "independent displacement errors bounded by epsilon per axis".to_string(),
        format!("epsilon < 1/(pi r) = {:.6}", 1.0 / (PI * cfg.r as f64)),
    ];
    if !cfg.strict_cubic {
        assumptions.push("cubic Taylor term neglected on the approximation side".into());
    }
    if cfg.r == 2 {
        assumptions.push("aliasing side measured against sqrt(2) p2".into());
    }
    Ok(BoundsReport {
        formula_version: FORMULA_VERSION.into(),
        config: cfg.clone(),
        c1: c1(cfg),
        p_best: p_best(cfg.epsilon, cfg.r),
        nd_approx,
        alias,
        nd_alias,
        nd_total,
        verdict,
        guarantee: Guarantee { error_bound: cfg.p1 + cfg.p2, confidence: cfg.big_p2 - (1.0 - cfg.big_p1) },
        total_frames,
        acquisition_time_s,
        assumptions,
        units: Units::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nd_bound_serializes_nr() {
        assert_eq!(serde_json::to_string(&NdBound::NotReachable).unwrap(), "\"NR\"");
        assert_eq!(serde_json::to_string(&NdBound::Frames(4)).unwrap(), "4");
        let x: NdBound = serde_json::from_str("\"NR\"").unwrap();
        assert_eq!(x, NdBound::NotReachable);
    }

    #[test]
    fn zero_epsilon_needs_one_frame() {
        let cfg = BoundsConfig::power_law(3, 0.0, 0.05, 0.95, 0.0);
        assert_eq!(nd_min_approx(&cfg).unwrap(), NdBound::Frames(1));
        assert_eq!(nd_min_alias(&cfg).unwrap(), NdBound::Frames(1));
    }

    #[test]
    fn rejects_out_of_domain() {
        let mut cfg = BoundsConfig::power_law(2, 0.01, 0.05, 0.95, 0.0);
        cfg.big_p1 = 1.0;
        assert!(plan(&cfg).is_err());
        let cfg = BoundsConfig::power_law(2, 0.2, 0.05, 0.95, 0.0);
        assert!(plan(&cfg).is_err());
    }

    #[test]
    fn composition() {
        let cfg = BoundsConfig::power_law(2, 0.01, 0.05, 0.95, 0.0);
        let rep = plan(&cfg).unwrap();
        assert!((rep.guarantee.error_bound - 0.1).abs() < 1e-15);
        assert!((rep.guarantee.confidence - 0.9).abs() < 1e-12);
        assert_eq!(rep.nd_total, rep.nd_approx.max(rep.nd_alias));
    }
}
