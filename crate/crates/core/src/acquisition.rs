//! Positioning model and low-resolution acquisition.
//!
//! Frame `(d, j)` observes the blurred scene translated by
//! `d_e = d + b_dj` high-resolution pixels and decimated by `r`:
//! `Y[m] = Z(r m - d_e)`. Displacement errors `b` are stored in HR pixels;
//! the model's `epsilon` is in LR pixels, so `|b_c| <= epsilon * r`.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dft::Fft2;
use crate::error::{domain, input, Error, Result};
use crate::grid::{shift_factor, FrequencyGrid};
use crate::plane::Plane;
use crate::rng::{frame_rng, Stream};
use crate::scene::{apply_blur, HrScene, Psf};

/// Distribution of the centred part of a displacement error, per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ErrorLaw {
    /// Uniform on the open interval allowed by `epsilon` and the bias.
    #[default]
    Uniform,
    /// Normal with `sigma` HR pixels, truncated to the allowed interval.
    TruncatedGaussian { sigma: f64 },
}

impl ErrorLaw {
    pub fn parse(s: &str) -> Result<ErrorLaw> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("uniform") {
            return Ok(ErrorLaw::Uniform);
        }
        if let Some(v) = s.strip_prefix("truncated-gaussian:").or_else(|| s.strip_prefix("gaussian:")) {
            let sigma: f64 = v.parse().map_err(|_| Error::Input(format!("bad sigma '{v}'")))?;
            if !(sigma.is_finite() && sigma >= 0.0) {
                return domain(format!("sigma must be >= 0, got {sigma}"));
            }
            return Ok(ErrorLaw::TruncatedGaussian { sigma });
        }
        input(format!("unknown error law '{s}', expected uniform or truncated-gaussian:<sigma>"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositioningModel {
    pub r: usize,
    /// Maximum displacement error per axis, LR pixels.
    pub epsilon: f64,
    /// Mean error in HR pixels: empty for none, one entry shared by all
    /// targets, or `r^2` entries in row-major target order.
    #[serde(default)]
    pub bias: Vec<[f64; 2]>,
    #[serde(default)]
    pub law: ErrorLaw,
    /// Repeats per targeted position.
    pub nd: usize,
}

impl PositioningModel {
    pub fn new(r: usize, epsilon: f64, nd: usize) -> Self {
        PositioningModel { r, epsilon, bias: Vec::new(), law: ErrorLaw::Uniform, nd }
    }

    /// Error bound in HR pixels.
    pub fn eps_r(&self) -> f64 {
        self.epsilon * self.r as f64
    }

    pub fn targets(&self) -> usize {
        self.r * self.r
    }

    pub fn frames(&self) -> usize {
        self.targets() * self.nd
    }

    pub fn target(&self, d_index: usize) -> [usize; 2] {
        [d_index / self.r, d_index % self.r]
    }

    pub fn bias_for(&self, d_index: usize) -> [f64; 2] {
        match self.bias.len() {
            0 => [0.0, 0.0],
            1 => self.bias[0],
            _ => self.bias[d_index],
        }
    }

    /// Largest bias norm over targets, HR pixels.
    pub fn bias_norm(&self) -> f64 {
        self.bias.iter().map(|b| b[0].hypot(b[1])).fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        if self.r < 2 {
            return domain(format!("decimation factor must be >= 2, got {}", self.r));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return domain(format!("epsilon must be finite and >= 0, got {}", self.epsilon));
        }
        if self.nd == 0 {
            return domain("nd must be >= 1");
        }
        if !matches!(self.bias.len(), 0 | 1) && self.bias.len() != self.targets() {
            return input(format!("bias needs 0, 1 or {} entries, got {}", self.targets(), self.bias.len()));
        }
        let er = self.eps_r();
        for b in &self.bias {
            if b.iter().any(|c| !c.is_finite() || c.abs() > er) {
                return domain(format!("bias {b:?} exceeds the error bound {er} HR px"));
            }
        }
        if let ErrorLaw::TruncatedGaussian { sigma } = self.law {
            if !(sigma.is_finite() && sigma >= 0.0) {
                return domain(format!("sigma must be >= 0, got {sigma}"));
            }
        }
        Ok(())
    }

    /// Half-width of the centred part on axis `c` for target `d_index`.
    fn half_width(&self, d_index: usize, c: usize) -> f64 {
        (self.eps_r() - self.bias_for(d_index)[c].abs()).max(0.0)
    }

    fn centred(&self, h: f64, rng: &mut impl Rng) -> f64 {
        if h == 0.0 {
            return 0.0;
        }
        match self.law {
            ErrorLaw::Uniform => h * (2.0 * rng.random::<f64>() - 1.0),
            ErrorLaw::TruncatedGaussian { sigma } => {
                if sigma == 0.0 {
                    return 0.0;
                }
                let normal = Normal::new(0.0, sigma).expect("sigma checked");
                for _ in 0..1000 {
                    let x = normal.sample(rng);
                    if x.abs() < h {
                        return x;
                    }
                }
                // sigma far above the bound: the truncated law is near-uniform
                h * (2.0 * rng.random::<f64>() - 1.0)
            }
        }
    }

    /// Draws `b` (HR pixels) for target `d_index`.
    pub fn sample_displacement(&self, d_index: usize, rng: &mut impl Rng) -> [f64; 2] {
        let mu = self.bias_for(d_index);
        let er = self.eps_r();
        let mut b = [0.0; 2];
        for c in 0..2 {
            let x = self.centred(self.half_width(d_index, c), rng);
            b[c] = (mu[c] + x).clamp(-er, er);
        }
        b
    }

    /// `E[cos(q x)]` for the centred part with half-width `h`.
    fn centred_cos(&self, q: f64, h: f64) -> f64 {
        if h == 0.0 {
            return 1.0;
        }
        match self.law {
            ErrorLaw::Uniform => sinc(q * h),
            ErrorLaw::TruncatedGaussian { sigma } => {
                if sigma == 0.0 {
                    return 1.0;
                }
                // Simpson on [0, h]; the density is even
                let n = 2000;
                let dx = h / n as f64;
                let (mut num, mut den) = (0.0, 0.0);
                for i in 0..=n {
                    let x = i as f64 * dx;
                    let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                    let g = (-0.5 * (x / sigma).powi(2)).exp();
                    num += w * g * (q * x).cos();
                    den += w * g;
                }
                num / den
            }
        }
    }

    /// `E[exp(-i q b_c)]` for any real `q`.
    pub fn exp_moment(&self, d_index: usize, c: usize, q: f64) -> Complex64 {
        let mu = self.bias_for(d_index)[c];
        Complex64::from_polar(self.centred_cos(q, self.half_width(d_index, c)), -q * mu)
    }

    /// Expected per-axis frame factor for bin `kc` on a grid of side `m`:
    /// `E[exp(-i q b)]`, or `E[cos(pi b)]` on the Nyquist bin.
    pub fn axis_expectation(&self, d_index: usize, c: usize, kc: i64, m: usize) -> Complex64 {
        let mu = self.bias_for(d_index)[c];
        let q = 2.0 * PI * kc as f64 / m as f64;
        if kc == -(m as i64) / 2 {
            let e = self.centred_cos(q, self.half_width(d_index, c));
            Complex64::new((PI * mu).cos() * e, 0.0)
        } else {
            self.exp_moment(d_index, c, q)
        }
    }

    /// Characteristic function `E[exp(-i q . b)]` at HR frequency `k`.
    pub fn chi(&self, d_index: usize, k: [i64; 2], m: usize) -> Complex64 {
        self.axis_expectation(d_index, 0, k[0], m) * self.axis_expectation(d_index, 1, k[1], m)
    }
}

pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// One realized frame position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FramePosition {
    /// Row-major index of the targeted offset `d` in `[0, r)^2`.
    pub d_index: usize,
    pub repeat: usize,
    /// Realized error `b`, HR pixels.
    pub b: [f64; 2],
}

/// Realized positions of trial `trial`, ordered by target then repeat.
pub fn sample_positions(model: &PositioningModel, seed: u64, trial: u64) -> Vec<FramePosition> {
    let mut out = Vec::with_capacity(model.frames());
    for d_index in 0..model.targets() {
        for repeat in 0..model.nd {
            let mut rng = frame_rng(seed, Stream::Displacement, trial, d_index as u64, repeat as u64);
            let b = model.sample_displacement(d_index, &mut rng);
            out.push(FramePosition { d_index, repeat, b });
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct LrFrame {
    pub position: FramePosition,
    pub pixels: Plane<f64>,
}

/// Frame spectrum `Y~(k) = r^-2 sum_alpha Z~(k_alpha) phi(k_alpha, d_e)` on
/// the LR grid, with `phi` the real-translation factor.
pub fn frame_spectrum(z: &Plane<Complex64>, r: usize, shift: [f64; 2]) -> Plane<Complex64> {
    let m = z.side();
    let n = m / r;
    let t0: Vec<Complex64> = (0..m).map(|i| shift_factor(i as i64, m, shift[0])).collect();
    let t1: Vec<Complex64> = (0..m).map(|i| shift_factor(i as i64, m, shift[1])).collect();
    let s = 1.0 / (r * r) as f64;
    Plane::from_fn(n, |u, v| {
        let mut acc = Complex64::default();
        for a in 0..r {
            let i = u + a * n;
            let mut row = Complex64::default();
            for b in 0..r {
                let j = v + b * n;
                row += z[(i, j)] * t1[j];
            }
            acc += row * t0[i];
        }
        acc * s
    })
}

/// Acquires one frame of the (already blurred) scene at `d + b`.
pub fn acquire_frame(scene: &HrScene, grid: &FrequencyGrid, d: [usize; 2], b: [f64; 2]) -> Result<Plane<f64>> {
    if scene.side() != grid.hr_side() {
        return input(format!("scene side {} does not match grid side {}", scene.side(), grid.hr_side()));
    }
    let shift = [d[0] as f64 + b[0], d[1] as f64 + b[1]];
    let spec = frame_spectrum(scene.spectrum(), grid.r(), shift);
    Ok(Fft2::new(grid.n()).inverse_real(&spec))
}

/// A realized acquisition: frames plus everything needed to replay it.
#[derive(Debug, Clone)]
pub struct AcquisitionStack {
    pub n: usize,
    pub model: PositioningModel,
    pub psf: Psf,
    pub seed: u64,
    pub trial: u64,
    pub noise_sigma: f64,
    pub frames: Vec<LrFrame>,
}

impl AcquisitionStack {
    pub fn positions(&self) -> Vec<FramePosition> {
        self.frames.iter().map(|f| f.position).collect()
    }
}

/// Blurs `scene` and acquires `r^2 * nd` frames.
pub fn acquire_stack(scene: &HrScene, psf: &Psf, model: &PositioningModel, seed: u64, trial: u64) -> Result<AcquisitionStack> {
    model.validate()?;
    let m = scene.side();
    if m % model.r != 0 || (m / model.r) % 2 != 0 {
        return domain(format!("scene side {m} is not r * (even N) for r = {}", model.r));
    }
    let grid = FrequencyGrid::new(m / model.r, model.r)?;
    let z = apply_blur(scene, psf)?;
    let lr = Fft2::new(grid.n());
    let frames = sample_positions(model, seed, trial)
        .into_iter()
        .map(|p| {
            let d = model.target(p.d_index);
            let shift = [d[0] as f64 + p.b[0], d[1] as f64 + p.b[1]];
            let spec = frame_spectrum(z.spectrum(), grid.r(), shift);
            LrFrame { position: p, pixels: lr.inverse_real(&spec) }
        })
        .collect();
    Ok(AcquisitionStack { n: grid.n(), model: model.clone(), psf: *psf, seed, trial, noise_sigma: 0.0, frames })
}

/// Adds i.i.d. N(0, sigma^2) noise to every pixel, seeded per frame.
pub fn add_noise(stack: &mut AcquisitionStack, sigma: f64) -> Result<()> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return domain(format!("noise sigma must be >= 0, got {sigma}"));
    }
    if sigma == 0.0 {
        return Ok(());
    }
    let normal = Normal::new(0.0, sigma).expect("sigma checked");
    for f in &mut stack.frames {
        let p = f.position;
        let mut rng = frame_rng(stack.seed, Stream::Noise, stack.trial, p.d_index as u64, p.repeat as u64);
        f.pixels.data_mut().iter_mut().for_each(|x| *x += normal.sample(&mut rng));
    }
    stack.noise_sigma = (stack.noise_sigma.powi(2) + sigma * sigma).sqrt();
    Ok(())
}

/// On-disk description of a stack directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StackManifest {
    pub format: String,
    pub n: usize,
    pub model: PositioningModel,
    pub psf: Psf,
    pub seed: u64,
    pub trial: u64,
    pub noise_sigma: f64,
    /// Frames are 16-bit PGM: `value = offset + code * scale`.
    pub offset: f64,
    pub scale: f64,
    pub frames: Vec<StackEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StackEntry {
    pub file: String,
    pub position: FramePosition,
}

pub const STACK_FORMAT: &str = "srpac-stack/1";

pub fn save_stack(stack: &AcquisitionStack, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let (lo, hi) = stack
        .frames
        .iter()
        .flat_map(|f| f.pixels.data().iter())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let scale = if hi > lo { (hi - lo) / 65535.0 } else { 1.0 };
    let mut entries = Vec::with_capacity(stack.frames.len());
    for f in &stack.frames {
        let p = f.position;
        let d = stack.model.target(p.d_index);
        let file = format!("frame_{}_{}_{:05}.pgm", d[0], d[1], p.repeat);
        let raw: Vec<u16> = f.pixels.data().iter().map(|&x| ((x - lo) / scale).round() as u16).collect();
        let side = f.pixels.side() as u32;
        let buf: image::ImageBuffer<image::Luma<u16>, Vec<u16>> =
            image::ImageBuffer::from_raw(side, side, raw).expect("size");
        buf.save_with_format(dir.join(&file), image::ImageFormat::Pnm)?;
        entries.push(StackEntry { file, position: p });
    }
    let manifest = StackManifest {
        format: STACK_FORMAT.into(),
        n: stack.n,
        model: stack.model.clone(),
        psf: stack.psf,
        seed: stack.seed,
        trial: stack.trial,
        noise_sigma: stack.noise_sigma,
        offset: lo,
        scale,
        frames: entries,
    };
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(path)
}

/// Reads a stack directory back. Pixels carry the 16-bit quantization.
pub fn load_stack(dir: &Path) -> Result<AcquisitionStack> {
    let m: StackManifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    if m.format != STACK_FORMAT {
        return input(format!("unsupported stack format '{}'", m.format));
    }
    m.model.validate()?;
    if m.frames.len() != m.model.frames() {
        return input(format!("stack lists {} frames, model expects {}", m.frames.len(), m.model.frames()));
    }
    let mut frames = Vec::with_capacity(m.frames.len());
    for e in &m.frames {
        let img = image::open(dir.join(&e.file))?.into_luma16();
        if img.width() as usize != m.n || img.height() as usize != m.n {
            return input(format!("frame {} is not {}x{}", e.file, m.n, m.n));
        }
        let data = img.into_raw().into_iter().map(|c| m.offset + c as f64 * m.scale).collect();
        frames.push(LrFrame { position: e.position, pixels: Plane::from_vec(m.n, data) });
    }
    Ok(AcquisitionStack {
        n: m.n,
        model: m.model,
        psf: m.psf,
        seed: m.seed,
        trial: m.trial,
        noise_sigma: m.noise_sigma,
        frames,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::synth_power_law;

    #[test]
    fn errors_stay_within_bound() {
        let mut m = PositioningModel::new(3, 0.01, 50);
        m.bias = vec![[0.01, -0.02]];
        m.validate().unwrap();
        for p in sample_positions(&m, 4, 0) {
            assert!(p.b.iter().all(|c| c.abs() <= m.eps_r()));
        }
        m.law = ErrorLaw::TruncatedGaussian { sigma: 0.01 };
        for p in sample_positions(&m, 4, 1) {
            assert!(p.b.iter().all(|c| c.abs() <= m.eps_r()));
        }
    }

    #[test]
    fn zero_epsilon_gives_exact_positions() {
        let m = PositioningModel::new(2, 0.0, 3);
        assert!(sample_positions(&m, 1, 0).iter().all(|p| p.b == [0.0, 0.0]));
    }

    #[test]
    fn integer_shift_is_pixel_exact() {
        let scene = synth_power_law(32, 0.0, 5).unwrap();
        let grid = FrequencyGrid::new(16, 2).unwrap();
        for d in [[0usize, 0usize], [0, 1], [1, 0], [1, 1]] {
            let y = acquire_frame(&scene, &grid, d, [0.0, 0.0]).unwrap();
            for i in 0..16 {
                for j in 0..16 {
                    let want = scene.pixels()[((2 * i + 32 - d[0]) % 32, (2 * j + 32 - d[1]) % 32)];
                    assert!((y[(i, j)] - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn bias_validation() {
        let mut m = PositioningModel::new(2, 0.01, 1);
        m.bias = vec![[0.05, 0.0]];
        assert!(m.validate().is_err());
        m.bias = vec![[0.0, 0.0]; 3];
        assert!(m.validate().is_err());
    }

    #[test]
    fn truncated_gaussian_chi_tends_to_uniform() {
        let mut m = PositioningModel::new(2, 0.01, 1);
        let u = m.axis_expectation(0, 0, 20, 64).re;
        m.law = ErrorLaw::TruncatedGaussian { sigma: 1e3 };
        let g = m.axis_expectation(0, 0, 20, 64).re;
        assert!((u - g).abs() < 1e-9);
    }
}
