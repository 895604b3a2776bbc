//! High-resolution scenes, point-spread functions and scene I/O.

use std::f64::consts::PI;
use std::path::Path;

use image::{ImageBuffer, Luma};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dft::Fft2;
use crate::error::{domain, input, Result};
use crate::plane::{signed_freq, Plane};
use crate::rng::{frame_rng, Stream};

/// A periodic high-resolution image with its spectrum.
#[derive(Debug, Clone)]
pub struct HrScene {
    pixels: Plane<f64>,
    spectrum: Plane<Complex64>,
    /// True when the scene was built in the frequency domain.
    pub bandlimited: bool,
}

impl HrScene {
    pub fn from_pixels(pixels: Plane<f64>, bandlimited: bool) -> Result<Self> {
        let m = pixels.side();
        if m < 4 || m % 2 != 0 {
            return input(format!("scene side must be even and >= 4, got {m}"));
        }
        if pixels.data().iter().any(|x| !x.is_finite()) {
            return input("scene contains non-finite pixels");
        }
        let spectrum = Fft2::new(m).forward(&pixels);
        Ok(HrScene { pixels, spectrum, bandlimited })
    }

    pub fn side(&self) -> usize {
        self.pixels.side()
    }

    pub fn pixels(&self) -> &Plane<f64> {
        &self.pixels
    }

    pub fn spectrum(&self) -> &Plane<Complex64> {
        &self.spectrum
    }

    pub fn amplitude(&self) -> Plane<f64> {
        self.spectrum.map(|z| z.norm())
    }
}

/// Point-spread function, described by its transfer function on `D_HR`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Psf {
    #[default]
    Dirac,
    /// Gaussian of standard deviation `width` high-resolution pixels. The
    /// transfer function is `exp(-width^2 |q|^2 / 2)`, the band-limited
    /// restriction of the continuous kernel.
    Gaussian { width: f64 },
}

impl Psf {
    pub fn parse(s: &str) -> Result<Psf> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("dirac") || s.eq_ignore_ascii_case("none") {
            return Ok(Psf::Dirac);
        }
        if let Some(w) = s.strip_prefix("gaussian:").or_else(|| s.strip_prefix("gaussian=")) {
            let width: f64 = w.parse().map_err(|_| crate::Error::Input(format!("bad psf width '{w}'")))?;
            let p = Psf::Gaussian { width };
            p.validate()?;
            return Ok(p);
        }
        input(format!("unknown psf '{s}', expected dirac or gaussian:<width>"))
    }

    pub fn validate(&self) -> Result<()> {
        if let Psf::Gaussian { width } = self {
            if !(width.is_finite() && *width >= 0.0) {
                return domain(format!("psf width must be finite and >= 0, got {width}"));
            }
        }
        Ok(())
    }

    /// Transfer at normalized frequency `q` (radians per HR pixel).
    pub fn transfer(&self, q: [f64; 2]) -> f64 {
        match *self {
            Psf::Dirac => 1.0,
            Psf::Gaussian { width } => (-0.5 * width * width * (q[0] * q[0] + q[1] * q[1])).exp(),
        }
    }

    pub fn transfer_plane(&self, side: usize) -> Plane<f64> {
        let s = 2.0 * PI / side as f64;
        Plane::from_fn(side, |i, j| {
            self.transfer([signed_freq(i, side) as f64 * s, signed_freq(j, side) as f64 * s])
        })
    }

    /// Pixel-domain kernel, centred on pixel (0, 0) with periodic wrap.
    pub fn kernel(&self, side: usize) -> Plane<f64> {
        let h = self.transfer_plane(side).map(|&x| Complex64::new(x, 0.0));
        Fft2::new(side).inverse_real(&h)
    }

    pub fn label(&self) -> String {
        match self {
            Psf::Dirac => "dirac".into(),
            Psf::Gaussian { width } => format!("gaussian:{width}"),
        }
    }
}

/// Random-phase scene with amplitude exactly `|k'|^-(1+eta)` and unit DC.
pub fn synth_power_law(side: usize, eta: f64, seed: u64) -> Result<HrScene> {
    if side < 4 || side % 2 != 0 {
        return domain(format!("scene side must be even and >= 4, got {side}"));
    }
    if !eta.is_finite() {
        return domain("eta must be finite");
    }
    let mut rng = frame_rng(seed, Stream::Scene, 0, 0, 0);
    let m = side;
    let mut spec = Plane::filled(m, Complex64::default());
    for i in 0..m {
        for j in 0..m {
            let (a, b) = ((m - i) % m, (m - j) % m);
            // visit each conjugate pair once
            if (a, b) < (i, j) {
                continue;
            }
            let k = [signed_freq(i, m) as f64, signed_freq(j, m) as f64];
            let norm = k[0].hypot(k[1]);
            let amp = if norm == 0.0 { 1.0 } else { norm.powf(-(1.0 + eta)) };
            if (a, b) == (i, j) {
                let sign = if norm == 0.0 || rng.random::<bool>() { 1.0 } else { -1.0 };
                spec[(i, j)] = Complex64::new(sign * amp, 0.0);
            } else {
                let z = Complex64::from_polar(amp, 2.0 * PI * rng.random::<f64>());
                spec[(i, j)] = z;
                spec[(a, b)] = z.conj();
            }
        }
    }
    let pixels = Fft2::new(m).inverse_real(&spec);
    HrScene::from_pixels(pixels, true)
}

/// Loads a square grayscale PGM or PNG.
pub fn load_scene(path: &Path) -> Result<HrScene> {
    let reader = image::ImageReader::open(path).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    let img = reader.with_guessed_format()?.decode()?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    if w != h {
        return input(format!("scene must be square, got {w}x{h}"));
    }
    let data: Vec<f64> = match img {
        image::DynamicImage::ImageLuma16(b) => b.into_raw().into_iter().map(f64::from).collect(),
        other => other.into_luma8().into_raw().into_iter().map(f64::from).collect(),
    };
    HrScene::from_pixels(Plane::from_vec(w, data), false)
}

/// Writes a scene as binary PGM. Integer images in `[0, 255]` or
/// `[0, 65535]` are stored exactly at 8 or 16 bits; anything else is
/// rescaled linearly onto 16 bits.
pub fn save_scene(scene: &HrScene, path: &Path) -> Result<()> {
    save_gray(scene.pixels(), path)
}

pub(crate) fn save_gray(p: &Plane<f64>, path: &Path) -> Result<()> {
    let side = p.side() as u32;
    let integral = p.data().iter().all(|x| x.fract() == 0.0 && *x >= 0.0);
    let max = p.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if integral && max <= 255.0 {
        let raw: Vec<u8> = p.data().iter().map(|&x| x as u8).collect();
        let buf: ImageBuffer<Luma<u8>, _> = ImageBuffer::from_raw(side, side, raw).expect("size");
        buf.save_with_format(path, image::ImageFormat::Pnm)?;
    } else {
        let raw = if integral && max <= 65535.0 {
            p.data().iter().map(|&x| x as u16).collect()
        } else {
            let (lo, hi) = min_max(p.data());
            let s = if hi > lo { 65535.0 / (hi - lo) } else { 0.0 };
            p.data().iter().map(|&x| ((x - lo) * s).round() as u16).collect()
        };
        let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_raw(side, side, raw).expect("size");
        buf.save_with_format(path, image::ImageFormat::Pnm)?;
    }
    Ok(())
}

pub(crate) fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
}

/// Circular convolution with the PSF, done in the frequency domain.
pub fn apply_blur(scene: &HrScene, psf: &Psf) -> Result<HrScene> {
    psf.validate()?;
    if *psf == Psf::Dirac {
        return Ok(scene.clone());
    }
    let m = scene.side();
    let h = psf.transfer_plane(m);
    let mut spec = scene.spectrum().clone();
    spec.data_mut().iter_mut().zip(h.data()).for_each(|(z, &g)| *z *= g);
    let pixels = Fft2::new(m).inverse_real(&spec);
    HrScene::from_pixels(pixels, scene.bandlimited)
}

/// Mean amplitude over integer rings `round(|k'|) = 1, 2, ..`.
pub fn radial_profile(amplitude: &Plane<f64>) -> Vec<f64> {
    let m = amplitude.side();
    let rings = m / 2;
    let mut sum = vec![0.0; rings];
    let mut cnt = vec![0usize; rings];
    for i in 0..m {
        for j in 0..m {
            let rad = (signed_freq(i, m) as f64).hypot(signed_freq(j, m) as f64).round() as usize;
            if rad >= 1 && rad <= rings {
                sum[rad - 1] += amplitude[(i, j)];
                cnt[rad - 1] += 1;
            }
        }
    }
    sum.iter().zip(&cnt).map(|(s, &c)| s / c.max(1) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_law_amplitude_is_exact() {
        for &eta in &[-0.2, 0.0, 0.2] {
            let s = synth_power_law(32, eta, 3).unwrap();
            let m = 32;
            for i in 0..m {
                for j in 0..m {
                    let k = (signed_freq(i, m) as f64).hypot(signed_freq(j, m) as f64);
                    let want = if k == 0.0 { 1.0 } else { k.powf(-(1.0 + eta)) };
                    let got = s.spectrum()[(i, j)].norm();
                    assert!((got - want).abs() <= 1e-12 * want, "{i},{j}: {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn power_law_is_seeded() {
        let a = synth_power_law(16, 0.0, 9).unwrap();
        let b = synth_power_law(16, 0.0, 9).unwrap();
        let c = synth_power_law(16, 0.0, 10).unwrap();
        assert_eq!(a.pixels(), b.pixels());
        assert_ne!(a.pixels(), c.pixels());
    }

    #[test]
    fn gaussian_transfer_properties() {
        let h = Psf::Gaussian { width: 0.5 }.transfer_plane(32);
        assert_eq!(h[(0, 0)], 1.0);
        assert!(h.data().iter().all(|&x| x > 0.0 && x <= 1.0));
        for k in 1..16 {
            assert!(h[(k, k)] < h[(k - 1, k - 1)]);
        }
        let sum: f64 = Psf::Gaussian { width: 0.5 }.kernel(32).data().iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn blur_matches_direct_convolution() {
        let m = 16;
        let s = synth_power_law(m, 0.0, 1).unwrap();
        let psf = Psf::Gaussian { width: 0.8 };
        let ker = psf.kernel(m);
        let blurred = apply_blur(&s, &psf).unwrap();
        for i in 0..m {
            for j in 0..m {
                let mut acc = 0.0;
                for a in 0..m {
                    for b in 0..m {
                        acc += s.pixels()[(a, b)] * ker[((i + m - a) % m, (j + m - b) % m)];
                    }
                }
                assert!((acc - blurred.pixels()[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn parse_psf() {
        assert_eq!(Psf::parse("dirac").unwrap(), Psf::Dirac);
        assert_eq!(Psf::parse("gaussian:0.5").unwrap(), Psf::Gaussian { width: 0.5 });
        assert!(Psf::parse("gaussian:-1").is_err());
        assert!(Psf::parse("box").is_err());
    }
}
