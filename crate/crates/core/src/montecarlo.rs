//! Monte-Carlo estimation of error statistics, exceedance maps, SNR sweeps
//! and the spatial footprint of the unreliable band.
//!
//! Trials run in parallel but every random draw is keyed by
//! `(seed, trial, target, repeat)` and results are reduced in trial order,
//! so output does not depend on the thread count.

use std::path::PathBuf;

use num_complex::Complex64;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acquisition::{sample_positions, PositioningModel};
use crate::bounds::{self, BoundsConfig, NdBound, SpectrumModel};
use crate::dft::Fft2;
use crate::error::{domain, input, Result};
use crate::fusion::{decompose_spectrum, fuse_positions, g_coefficient, g_expected, hf_snr, valid_mask, Band};
use crate::grid::{Freq, FrequencyGrid};
use crate::plane::{signed_freq, Plane};
use crate::rng::{frame_rng, Stream};
use crate::scene::{apply_blur, load_scene, synth_power_law, HrScene, Psf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SceneSpec {
    PowerLaw { side: usize, eta: f64, seed: u64 },
    File { path: PathBuf },
}

impl SceneSpec {
    pub fn build(&self) -> Result<HrScene> {
        match self {
            SceneSpec::PowerLaw { side, eta, seed } => synth_power_law(*side, *eta, *seed),
            SceneSpec::File { path } => load_scene(path),
        }
    }
}

/// Which per-frequency quantities to keep for every trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quantities {
    #[serde(default)]
    pub approx: bool,
    #[serde(default)]
    pub alias: bool,
    #[serde(default)]
    pub total: bool,
}

impl Quantities {
    pub const NONE: Quantities = Quantities { approx: false, alias: false, total: false };
    pub const ALL: Quantities = Quantities { approx: true, alias: true, total: true };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McExperiment {
    pub scene: SceneSpec,
    #[serde(default)]
    pub psf: Psf,
    /// Positioning model; its `nd` is overridden by each entry of `nd`.
    pub model: PositioningModel,
    pub nd: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub noise_sigma: f64,
    pub quantities: Quantities,
}

impl McExperiment {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return input("trials must be >= 1");
        }
        if self.nd.is_empty() || self.nd.contains(&0) {
            return input("nd list must be non-empty and positive");
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return domain("noise sigma must be >= 0");
        }
        self.model.validate()
    }
}

/// Which stored quantity to read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Approx,
    Alias,
    Total,
}

/// Results for one `nd`. Per-frequency samples are `[trial][bin]`.
#[derive(Debug, Clone)]
pub struct NdResult {
    pub nd: usize,
    pub approx: Option<Vec<Vec<f32>>>,
    pub alias: Option<Vec<Vec<f32>>>,
    pub total: Option<Vec<Vec<f32>>>,
    /// Max relative error over valid bins, per trial.
    pub max_rel_error: Vec<f64>,
    pub hf_snr_db: Vec<f64>,
    pub full_snr_db: Vec<f64>,
}

impl NdResult {
    pub fn samples(&self, q: Quantity) -> Option<&Vec<Vec<f32>>> {
        match q {
            Quantity::Approx => self.approx.as_ref(),
            Quantity::Alias => self.alias.as_ref(),
            Quantity::Total => self.total.as_ref(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct McResult {
    pub grid: FrequencyGrid,
    pub valid: Plane<bool>,
    pub per_nd: Vec<NdResult>,
}

struct TrialOut {
    approx: Option<Vec<f32>>,
    alias: Option<Vec<f32>>,
    total: Option<Vec<f32>>,
    max_rel: f64,
    hf: f64,
    full: f64,
}

fn trial_noise(model: &PositioningModel, n: usize, seed: u64, t: u64, sigma: f64) -> Option<Vec<Plane<f64>>> {
    if sigma == 0.0 {
        return None;
    }
    let normal = Normal::new(0.0, sigma).expect("sigma checked");
    let mut out = Vec::with_capacity(model.targets());
    for d_index in 0..model.targets() {
        let mut acc = Plane::filled(n, 0.0);
        for j in 0..model.nd {
            let mut rng = frame_rng(seed, Stream::Noise, t, d_index as u64, j as u64);
            acc.data_mut().iter_mut().for_each(|x| *x += normal.sample(&mut rng));
        }
        let inv = 1.0 / model.nd as f64;
        acc.data_mut().iter_mut().for_each(|x| *x *= inv);
        out.push(acc);
    }
    Some(out)
}

/// Runs the experiment against the blurred scene `z`.
pub fn run_on(exp: &McExperiment, z: &HrScene) -> Result<McResult> {
    exp.validate()?;
    let r = exp.model.r;
    let m = z.side();
    if m % r != 0 {
        return domain(format!("scene side {m} is not a multiple of r = {r}"));
    }
    let grid = FrequencyGrid::new(m / r, r)?;
    let valid = valid_mask(&grid, z.spectrum());
    let mut per_nd = Vec::with_capacity(exp.nd.len());
    for &nd in &exp.nd {
        let mut model = exp.model.clone();
        model.nd = nd;
        let q = exp.quantities;
        let outs: Vec<TrialOut> = (0..exp.trials as u64)
            .into_par_iter()
            .map(|t| {
                let pos = sample_positions(&model, exp.seed, t);
                let noise = trial_noise(&model, grid.n(), exp.seed, t, exp.noise_sigma);
                let x = fuse_positions(z, &model, &pos, noise.as_deref());
                let d = decompose_spectrum(&grid, &x, z.spectrum(), &pos);
                let to32 = |p: &Plane<f64>| p.data().iter().map(|&v| v as f32).collect::<Vec<f32>>();
                TrialOut {
                    approx: q.approx.then(|| to32(&d.approx_err)),
                    alias: q.alias.then(|| to32(&d.alias_rel)),
                    total: q.total.then(|| to32(&d.rel_error)),
                    max_rel: d.max_rel_error(),
                    hf: hf_snr(&grid, &x, z.spectrum(), Band::HfOnly),
                    full: hf_snr(&grid, &x, z.spectrum(), Band::Full),
                }
            })
            .collect();
        let mut res = NdResult {
            nd,
            approx: q.approx.then(Vec::new),
            alias: q.alias.then(Vec::new),
            total: q.total.then(Vec::new),
            max_rel_error: Vec::with_capacity(outs.len()),
            hf_snr_db: Vec::with_capacity(outs.len()),
            full_snr_db: Vec::with_capacity(outs.len()),
        };
        for o in outs {
            if let (Some(v), Some(s)) = (res.approx.as_mut(), o.approx) {
                v.push(s);
            }
            if let (Some(v), Some(s)) = (res.alias.as_mut(), o.alias) {
                v.push(s);
            }
            if let (Some(v), Some(s)) = (res.total.as_mut(), o.total) {
                v.push(s);
            }
            res.max_rel_error.push(o.max_rel);
            res.hf_snr_db.push(o.hf);
            res.full_snr_db.push(o.full);
        }
        per_nd.push(res);
    }
    Ok(McResult { grid, valid, per_nd })
}

pub fn run(exp: &McExperiment) -> Result<McResult> {
    let z = apply_blur(&exp.scene.build()?, &exp.psf)?;
    run_on(exp, &z)
}

/// A per-frequency map with an explicit validity mask.
#[derive(Debug, Clone)]
pub struct FreqMap {
    pub values: Plane<f64>,
    pub valid: Plane<bool>,
}

impl FreqMap {
    pub fn valid_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.data().iter().zip(self.valid.data()).filter(|(_, &v)| v).map(|(x, _)| *x)
    }
}

/// Empirical `P(quantity >= p)` per bin.
pub fn exceedance_map(res: &McResult, nd_index: usize, q: Quantity, p: f64) -> Result<FreqMap> {
    let nr = res.per_nd.get(nd_index).ok_or_else(|| crate::Error::Input("nd index out of range".into()))?;
    let s = nr.samples(q).ok_or_else(|| crate::Error::Input(format!("{q:?} was not recorded")))?;
    let m = res.grid.hr_side();
    let t = s.len() as f64;
    let mut values = Plane::filled(m, 0.0);
    for (b, v) in values.data_mut().iter_mut().enumerate() {
        *v = s.iter().filter(|trial| trial[b] as f64 >= p).count() as f64 / t;
    }
    let values = Plane::from_fn(m, |i, j| if res.valid[(i, j)] { values[(i, j)] } else { 0.0 });
    Ok(FreqMap { values, valid: res.valid.clone() })
}

/// Deterministic aliasing floor of a measured scene.
#[derive(Debug, Clone)]
pub struct FloorMap {
    pub p0: FreqMap,
    pub threshold: f64,
    /// Share of valid bins with `p0 > threshold`.
    pub fraction_above: f64,
}

pub fn p2_lower_bound_map(scene: &HrScene, psf: &Psf, r: usize, epsilon: f64, threshold: f64) -> Result<FloorMap> {
    let mut cfg = BoundsConfig::power_law(r, epsilon, threshold.clamp(1e-9, 0.5), 0.9, 0.0);
    cfg.spectrum = SpectrumModel::measured(scene.amplitude(), "scene");
    cfg.psf = *psf;
    let maps = bounds::alias_maps(&cfg)?;
    let p0 = FreqMap { values: maps.p0, valid: maps.valid };
    let (mut above, mut tot) = (0usize, 0usize);
    for v in p0.valid_values() {
        tot += 1;
        if v > threshold {
            above += 1;
        }
    }
    Ok(FloorMap { p0, threshold, fraction_above: above as f64 / tot.max(1) as f64 })
}

/// Least-squares fit of `y = slope * x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnrSweep {
    pub nd: Vec<usize>,
    pub mean_db: Vec<f64>,
    pub std_db: Vec<f64>,
    /// Free least-squares slope, dB per decade.
    pub slope: f64,
    pub intercept: f64,
    /// Offset `K` of `10 log10(nd) + K`.
    pub offset: f64,
}

impl SnrSweep {
    /// Mean SNR at `nd` relative to `nd = 1`, when both were swept.
    pub fn gain(&self, nd: usize) -> Option<f64> {
        let a = self.nd.iter().position(|&v| v == 1)?;
        let b = self.nd.iter().position(|&v| v == nd)?;
        Some(self.mean_db[b] - self.mean_db[a])
    }
}

/// Fits `K` in `SNR = 10 log10(nd) + K`.
pub fn snr_offset_fit(nd: &[usize], snr_db: &[f64]) -> f64 {
    let s: f64 = nd.iter().zip(snr_db).map(|(&n, &v)| v - bounds::snr_lower_bound_slope() * (n as f64).log10()).sum();
    s / nd.len() as f64
}

/// `nd,mean_db,std_db` per swept frame count.
pub fn write_snr_csv(sw: &SnrSweep, path: &std::path::Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["nd", "mean_db", "std_db"])?;
    for ((n, m), s) in sw.nd.iter().zip(&sw.mean_db).zip(&sw.std_db) {
        w.write_record([n.to_string(), m.to_string(), s.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn snr_sweep_on(exp: &McExperiment, z: &HrScene) -> Result<SnrSweep> {
    let mut e = exp.clone();
    e.quantities = Quantities::NONE;
    let res = run_on(&e, z)?;
    let mut mean_db = Vec::new();
    let mut std_db = Vec::new();
    for r in &res.per_nd {
        let v = &r.hf_snr_db;
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let s = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len().max(2) - 1) as f64).sqrt();
        mean_db.push(m);
        std_db.push(s);
    }
    let lx: Vec<f64> = exp.nd.iter().map(|&n| (n as f64).log10()).collect();
    let (slope, intercept) = linear_fit(&lx, &mean_db);
    let offset = snr_offset_fit(&exp.nd, &mean_db);
    Ok(SnrSweep { nd: exp.nd.clone(), mean_db, std_db, slope, intercept, offset })
}

pub fn snr_sweep(exp: &McExperiment) -> Result<SnrSweep> {
    let z = apply_blur(&exp.scene.build()?, &exp.psf)?;
    snr_sweep_on(exp, &z)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LocalizeMode {
    /// Bins whose guaranteed failure probability at `nd` exceeds `thr`.
    Theory,
    /// Bins whose empirical exceedance probability at `nd` is at least `thr`.
    MonteCarlo { trials: usize, seed: u64 },
}

/// High-frequency bins where the aliasing error is not under control, and
/// their pixel-domain footprint.
#[derive(Debug, Clone)]
pub struct UnreliableBand {
    pub mask: Plane<bool>,
    /// Inverse transform of the scene spectrum restricted to the mask.
    pub image: Plane<f64>,
    /// Mask energy over high-frequency energy, dB.
    pub weight_db: f64,
    /// Share of high-frequency bins in the mask.
    pub masked_fraction: f64,
}

pub struct LocalizeParams {
    pub r: usize,
    pub epsilon: f64,
    pub nd: usize,
    pub p: f64,
    pub thr: f64,
    pub mode: LocalizeMode,
}

pub fn unreliable_spatial(scene: &HrScene, psf: &Psf, prm: &LocalizeParams) -> Result<UnreliableBand> {
    if !(prm.thr > 0.0 && prm.thr < 1.0) {
        return domain(format!("threshold must lie in (0, 1), got {}", prm.thr));
    }
    if prm.nd == 0 {
        return domain("nd must be >= 1");
    }
    let z = apply_blur(scene, psf)?;
    let m = z.side();
    let grid = FrequencyGrid::new(m / prm.r, prm.r)?;
    let flagged: Plane<bool> = match prm.mode {
        LocalizeMode::Theory => {
            let mut cfg = BoundsConfig::power_law(prm.r, prm.epsilon, prm.p, 1.0 - prm.thr, 0.0);
            cfg.spectrum = SpectrumModel::measured(scene.amplitude(), "scene");
            cfg.psf = *psf;
            let (_, nd) = bounds::nd_map(&cfg)?;
            nd.map(|v| match v {
                Some(NdBound::Frames(k)) => *k > prm.nd as u64,
                Some(NdBound::NotReachable) => true,
                None => false,
            })
        }
        LocalizeMode::MonteCarlo { trials, seed } => {
            let model = PositioningModel::new(prm.r, prm.epsilon, prm.nd);
            model.validate()?;
            let exp = McExperiment {
                scene: SceneSpec::PowerLaw { side: m, eta: 0.0, seed: 0 },
                psf: Psf::Dirac,
                model: model.clone(),
                nd: vec![prm.nd],
                trials,
                seed,
                noise_sigma: 0.0,
                quantities: Quantities { alias: true, ..Quantities::NONE },
            };
            let res = run_on(&exp, &z)?;
            let ex = exceedance_map(&res, 0, Quantity::Alias, prm.p)?;
            Plane::from_fn(m, |i, j| ex.valid[(i, j)] && ex.values[(i, j)] >= prm.thr)
        }
    };
    let mask = Plane::from_fn(m, |i, j| {
        let k = [signed_freq(i, m), signed_freq(j, m)];
        flagged[(i, j)] && grid.in_hf_band(k) && !grid.is_excluded(k)
    });
    let (mut e_hf, mut e_mask, mut n_hf, mut n_mask) = (0.0, 0.0, 0usize, 0usize);
    for i in 0..m {
        for j in 0..m {
            let k = [signed_freq(i, m), signed_freq(j, m)];
            if !grid.in_hf_band(k) {
                continue;
            }
            let e = z.spectrum()[(i, j)].norm_sqr();
            e_hf += e;
            n_hf += 1;
            if mask[(i, j)] {
                e_mask += e;
                n_mask += 1;
            }
        }
    }
    let masked: Plane<Complex64> = Plane::from_fn(m, |i, j| if mask[(i, j)] { z.spectrum()[(i, j)] } else { Complex64::default() });
    let image = Fft2::new(m).inverse_real(&masked);
    let weight_db = if e_mask == 0.0 { f64::NEG_INFINITY } else { 10.0 * (e_mask / e_hf).log10() };
    Ok(UnreliableBand { mask, image, weight_db, masked_fraction: n_mask as f64 / n_hf.max(1) as f64 })
}

/// Periodic box mean over a `w x w` window.
fn box_mean(p: &Plane<f64>, w: usize) -> Plane<f64> {
    let m = p.side();
    let h = (w / 2) as isize;
    let norm = 1.0 / (w * w) as f64;
    let mi = m as isize;
    let rows = Plane::from_fn(m, |i, j| (-h..=h).map(|o| p[(i, (j as isize + o).rem_euclid(mi) as usize)]).sum::<f64>());
    Plane::from_fn(m, |i, j| norm * (-h..=h).map(|o| rows[((i as isize + o).rem_euclid(mi) as usize, j)]).sum::<f64>())
}

fn top_quartile(p: &Plane<f64>) -> Plane<bool> {
    let mut v = p.data().to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let cut = v[(3 * v.len()) / 4];
    p.map(|&x| x >= cut)
}

/// Share of the top quartile of local `band` energy that falls in the top
/// quartile of local scene variance, both over `w x w` periodic windows.
pub fn texture_overlap(scene: &Plane<f64>, band: &Plane<f64>, w: usize) -> f64 {
    let mean = box_mean(scene, w);
    let sq = box_mean(&scene.map(|x| x * x), w);
    let var = Plane::from_vec(scene.side(), sq.data().iter().zip(mean.data()).map(|(s, m)| s - m * m).collect());
    let energy = box_mean(&band.map(|x| x * x), w);
    let tex = top_quartile(&var);
    let hot = top_quartile(&energy);
    let both = hot.data().iter().zip(tex.data()).filter(|(a, b)| **a && **b).count();
    both as f64 / hot.data().iter().filter(|a| **a).count().max(1) as f64
}

/// Average ranks, ties sharing the mean rank.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let rk = (i + j) as f64 / 2.0;
        for &k in &idx[i..=j] {
            out[k] = rk;
        }
        i = j + 1;
    }
    out
}

pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let c: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum::<f64>().sqrt();
    let sy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum::<f64>().sqrt();
    c / (sx * sy)
}

/// Empirical moments of `G_alpha` at one frequency.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GAlphaStats {
    pub kp: Freq,
    pub nd: usize,
    pub trials: usize,
    pub alphas: Vec<Freq>,
    pub gamma: Freq,
    pub mean: Vec<Complex64>,
    /// `E[G_alpha conj(G_beta)]`, row-major over `alphas`.
    pub second: Vec<Complex64>,
    /// Per-entry standard errors of `mean` and `second`.
    pub mean_se: Vec<f64>,
    pub second_se: Vec<f64>,
}

pub fn g_alpha_statistics(grid: &FrequencyGrid, model: &PositioningModel, kp: Freq, trials: usize, seed: u64) -> Result<GAlphaStats> {
    model.validate()?;
    if trials < 2 {
        return input("need at least 2 trials");
    }
    let idx = grid.decompose(kp)?;
    let alphas = grid.alias_set(idx.k)?;
    let na = alphas.len();
    let samples: Vec<Vec<Complex64>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let pos = sample_positions(model, seed, t);
            alphas.iter().map(|&a| g_coefficient(grid, model, &pos, a, kp).expect("alias in range")).collect()
        })
        .collect();
    let tf = trials as f64;
    let mut mean = vec![Complex64::default(); na];
    let mut second = vec![Complex64::default(); na * na];
    for s in &samples {
        for a in 0..na {
            mean[a] += s[a] / tf;
            for b in 0..na {
                second[a * na + b] += s[a] * s[b].conj() / tf;
            }
        }
    }
    let mut mean_se = vec![0.0; na];
    let mut second_se = vec![0.0; na * na];
    for s in &samples {
        for a in 0..na {
            mean_se[a] += (s[a] - mean[a]).norm_sqr();
            for b in 0..na {
                second_se[a * na + b] += (s[a] * s[b].conj() - second[a * na + b]).norm_sqr();
            }
        }
    }
    let se = |v: f64| (v / (tf - 1.0) / tf).sqrt();
    let mean_se = mean_se.into_iter().map(se).collect();
    let second_se = second_se.into_iter().map(se).collect();
    Ok(GAlphaStats { kp, nd: model.nd, trials, alphas, gamma: idx.gamma, mean, second, mean_se, second_se })
}

/// Per-axis frame factor as a sum of exponentials `w exp(-i q b)`.
fn axis_terms(kc: i64, m: usize) -> Vec<(f64, f64)> {
    let q = 2.0 * std::f64::consts::PI * kc as f64 / m as f64;
    if kc == -(m as i64) / 2 {
        vec![(0.5, q), (0.5, -q)]
    } else {
        vec![(1.0, q)]
    }
}

/// `E[G_alpha conj(G_beta)]` under the model.
pub fn g_second_moment(grid: &FrequencyGrid, model: &PositioningModel, kp: Freq, alpha: Freq, beta: Freq) -> Result<Complex64> {
    let idx = grid.decompose(kp)?;
    let m = grid.hr_side();
    let (ka, kb) = (grid.alias_freq(idx.k, alpha), grid.alias_freq(idx.k, beta));
    let ga = g_expected(grid, model, alpha, kp)?;
    let gb = g_expected(grid, model, beta, kp)?;
    let r = grid.r() as f64;
    let delta = [alpha[0] - beta[0], alpha[1] - beta[1]];
    let mut cov = Complex64::default();
    for d_index in 0..model.targets() {
        let d = model.target(d_index);
        let th = -2.0 * std::f64::consts::PI / r * (delta[0] as f64 * d[0] as f64 + delta[1] as f64 * d[1] as f64);
        let mut joint = Complex64::new(1.0, 0.0);
        for c in 0..2 {
            let mut s = Complex64::default();
            for &(wa, qa) in &axis_terms(ka[c], m) {
                for &(wb, qb) in &axis_terms(kb[c], m) {
                    s += wa * wb * model.exp_moment(d_index, c, qa - qb);
                }
            }
            joint *= s;
        }
        let ca = model.chi(d_index, ka, m);
        let cb = model.chi(d_index, kb, m);
        cov += Complex64::from_polar(1.0, th) * (joint - ca * cb.conj());
    }
    let nf = (model.targets() * model.targets() * model.nd) as f64;
    Ok(ga * gb.conj() + cov / nf)
}

/// One cell of the composite-guarantee check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidityCell {
    pub r: usize,
    pub epsilon: f64,
    pub p: f64,
    #[serde(rename = "P")]
    pub big_p: f64,
    #[serde(default)]
    pub eta: f64,
    /// LR side.
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    /// Multiplies the planned frame count (1 to test the plan as is).
    #[serde(default = "one")]
    pub nd_scale: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidityResult {
    pub cell: ValidityCell,
    pub nd_planned: NdBound,
    pub nd_used: Option<usize>,
    pub stated: f64,
    pub empirical: Option<f64>,
    pub sigma: f64,
    /// `None` when the plan is not reachable.
    pub pass: Option<bool>,
}

/// Checks `P(max rel error <= p1 + p2) >= P2 - (1 - P1)` with `p1 = p2 = p`
/// and `P1 = P2 = P`, on a power-law scene at the planned frame count.
pub fn check_validity(cell: &ValidityCell) -> Result<ValidityResult> {
    if cell.trials == 0 {
        return input("trials must be >= 1");
    }
    if !(cell.nd_scale > 0.0) {
        return input("nd_scale must be > 0");
    }
    let mut cfg = BoundsConfig::power_law(cell.r, cell.epsilon, cell.p, cell.big_p, cell.eta);
    cfg.n = cell.n;
    let rep = bounds::plan(&cfg)?;
    let stated = rep.guarantee.confidence;
    let sigma = (stated * (1.0 - stated) / cell.trials as f64).sqrt();
    let Some(nd) = rep.nd_total.frames() else {
        return Ok(ValidityResult { cell: cell.clone(), nd_planned: rep.nd_total, nd_used: None, stated, empirical: None, sigma, pass: None });
    };
    let nd_used = ((nd as f64 * cell.nd_scale).ceil() as usize).max(1);
    let exp = McExperiment {
        scene: SceneSpec::PowerLaw { side: cell.n * cell.r, eta: cell.eta, seed: cell.seed },
        psf: Psf::Dirac,
        model: PositioningModel::new(cell.r, cell.epsilon, nd_used),
        nd: vec![nd_used],
        trials: cell.trials,
        seed: cell.seed,
        noise_sigma: 0.0,
        quantities: Quantities::NONE,
    };
    let res = run(&exp)?;
    let bound = rep.guarantee.error_bound;
    let ok = res.per_nd[0].max_rel_error.iter().filter(|&&e| e <= bound).count();
    let empirical = ok as f64 / cell.trials as f64;
    Ok(ValidityResult {
        cell: cell.clone(),
        nd_planned: rep.nd_total,
        nd_used: Some(nd_used),
        stated,
        empirical: Some(empirical),
        sigma,
        pass: Some(empirical >= stated - 3.0 * sigma),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_basics() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&x, &[10.0, 20.0, 30.0, 40.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&x, &[4.0, 3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        assert_eq!(ranks(&[1.0, 1.0, 2.0]), vec![0.5, 0.5, 2.0]);
    }

    #[test]
    fn linear_fit_recovers_line() {
        let x = [0.0, 1.0, 2.0];
        let (s, i) = linear_fit(&x, &[1.0, 3.0, 5.0]);
        assert!((s - 2.0).abs() < 1e-12 && (i - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_trials_rejected() {
        let exp = McExperiment {
            scene: SceneSpec::PowerLaw { side: 16, eta: 0.0, seed: 0 },
            psf: Psf::Dirac,
            model: PositioningModel::new(2, 0.01, 1),
            nd: vec![1],
            trials: 0,
            seed: 0,
            noise_sigma: 0.0,
            quantities: Quantities::NONE,
        };
        assert!(run(&exp).is_err());
    }

    #[test]
    fn exact_positions_give_no_error() {
        let exp = McExperiment {
            scene: SceneSpec::PowerLaw { side: 32, eta: 0.0, seed: 1 },
            psf: Psf::Dirac,
            model: PositioningModel::new(2, 0.0, 1),
            nd: vec![1, 3],
            trials: 3,
            seed: 0,
            noise_sigma: 0.0,
            quantities: Quantities::ALL,
        };
        let res = run(&exp).unwrap();
        for r in &res.per_nd {
            assert!(r.max_rel_error.iter().all(|&e| e < 1e-10));
        }
    }
}
