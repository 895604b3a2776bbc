//! Shift-and-add fusion and the per-frequency error decomposition
//! `X~ = Z~ G_gamma + B`.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;

use crate::acquisition::{AcquisitionStack, FramePosition, PositioningModel};
use crate::dft::Fft2;
use crate::error::{input, Result};
use crate::grid::{Freq, FrequencyGrid};
use crate::plane::{signed_freq, Plane};
use crate::scene::HrScene;

#[derive(Debug, Clone)]
pub struct FusedImage {
    pub pixels: Plane<f64>,
    pub spectrum: Plane<Complex64>,
    pub r: usize,
    pub nd: usize,
    pub seed: u64,
    pub trial: u64,
}

/// Interlaces per-target frame means: `X[(r m - d) mod rN] = mean_j Y_dj[m]`.
pub fn interlace(means: &[Plane<f64>], r: usize) -> Plane<f64> {
    let n = means[0].side();
    let m = n * r;
    let mut x = Plane::filled(m, 0.0);
    for (d_index, y) in means.iter().enumerate() {
        let d = [d_index / r, d_index % r];
        for i in 0..n {
            for j in 0..n {
                x[((r * i + m - d[0]) % m, (r * j + m - d[1]) % m)] = y[(i, j)];
            }
        }
    }
    x
}

pub fn fuse(stack: &AcquisitionStack) -> Result<FusedImage> {
    let model = &stack.model;
    if stack.frames.len() != model.frames() {
        return input(format!("stack has {} frames, model expects {}", stack.frames.len(), model.frames()));
    }
    let n = stack.n;
    let mut sums = vec![Plane::filled(n, 0.0); model.targets()];
    let mut counts = vec![0usize; model.targets()];
    for f in &stack.frames {
        let di = f.position.d_index;
        if f.pixels.side() != n || di >= model.targets() {
            return input("frame size or target out of range");
        }
        sums[di].data_mut().iter_mut().zip(f.pixels.data()).for_each(|(s, &y)| *s += y);
        counts[di] += 1;
    }
    if counts.iter().any(|&c| c != model.nd) {
        return input("every target needs exactly nd frames");
    }
    let inv = 1.0 / model.nd as f64;
    for s in &mut sums {
        s.data_mut().iter_mut().for_each(|v| *v *= inv);
    }
    let pixels = interlace(&sums, model.r);
    let spectrum = Fft2::new(pixels.side()).forward(&pixels);
    Ok(FusedImage { pixels, spectrum, r: model.r, nd: model.nd, seed: stack.seed, trial: stack.trial })
}

/// Fusion without materializing frames. Per target, the frame spectra are
/// averaged through the moments of the sub-pixel offsets (see
/// [`ShiftMoments`]) before a single LR inverse transform. Same result as
/// acquiring and fusing, up to rounding. `z` is the blurred scene.
pub fn fuse_positions(z: &HrScene, model: &PositioningModel, positions: &[FramePosition], noise: Option<&[Plane<f64>]>) -> Plane<Complex64> {
    let m = z.side();
    let r = model.r;
    let n = m / r;
    let lr = Fft2::new(n);
    let s = 1.0 / (r * r) as f64;
    let mut means = Vec::with_capacity(model.targets());
    for d_index in 0..model.targets() {
        let d = model.target(d_index);
        let offsets: Vec<[f64; 2]> = positions.iter().filter(|p| p.d_index == d_index).map(|p| p.b).collect();
        let c = if offsets.is_empty() {
            Plane::filled(m, Complex64::default())
        } else {
            ShiftMoments::new(&offsets).factor_plane(m, [d[0] as i64, d[1] as i64])
        };
        let acc = Plane::from_fn(n, |u, v| {
            let mut acc = Complex64::default();
            for a in 0..r {
                for b in 0..r {
                    let (i, j) = (u + a * n, v + b * n);
                    acc += z.spectrum()[(i, j)] * c[(i, j)];
                }
            }
            acc * s
        });
        let mut y = lr.inverse_real(&acc);
        if let Some(noise) = noise {
            y.data_mut().iter_mut().zip(noise[d_index].data()).for_each(|(a, &e)| *a += e);
        }
        means.push(y);
    }
    Fft2::new(m).forward(&interlace(&means, r))
}

/// Mixed moments `mean_j b0^l b1^l'` of a set of sub-pixel offsets.
///
/// The averaged 2D shift factor `mean_j f(kx, d0 + b0) f(ky, d1 + b1)` is a
/// double power series in the offsets, so it only depends on these moments.
/// Truncation is chosen so the dropped tail is below 1e-18.
#[derive(Debug, Clone)]
pub struct ShiftMoments {
    order: usize,
    mu: Vec<f64>,
}

impl ShiftMoments {
    pub fn new(offsets: &[[f64; 2]]) -> Self {
        let bmax = offsets.iter().flat_map(|b| [b[0].abs(), b[1].abs()]).fold(0.0, f64::max);
        let x = PI * bmax;
        let (mut order, mut term) = (1usize, 1.0f64);
        while term * x.exp() > 1e-18 && order < 60 {
            term *= x / order as f64;
            order += 1;
        }
        let mut mu = vec![0.0; order * order];
        let mut p1 = vec![0.0; order];
        for b in offsets {
            let mut p = 1.0;
            for v in p1.iter_mut() {
                *v = p;
                p *= b[1];
            }
            let mut p0 = 1.0;
            for l in 0..order {
                for (dst, &v) in mu[l * order..(l + 1) * order].iter_mut().zip(&p1) {
                    *dst += p0 * v;
                }
                p0 *= b[0];
            }
        }
        let inv = 1.0 / offsets.len() as f64;
        mu.iter_mut().for_each(|v| *v *= inv);
        ShiftMoments { order, mu }
    }

    /// Power-series coefficients of `shift_factor(k, m, d + b)` in `b`, row-major `m x order`.
    fn axis_coefficients(&self, m: usize, d: i64) -> Vec<Complex64> {
        let l = self.order;
        let mut out = vec![Complex64::default(); m * l];
        for k in 0..m {
            let kc = signed_freq(k, m);
            let row = &mut out[k * l..(k + 1) * l];
            if 2 * kc == -(m as i64) {
                let base = if d.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                let mut t = base;
                for (i, c) in row.iter_mut().enumerate() {
                    if i % 2 == 0 {
                        *c = Complex64::new(t, 0.0);
                        t *= -PI * PI / ((i + 1) * (i + 2)) as f64;
                    }
                }
            } else {
                let q = 2.0 * PI * kc as f64 / m as f64;
                let mut t = Complex64::from_polar(1.0, -q * d as f64);
                let step = Complex64::new(0.0, -q);
                for (i, c) in row.iter_mut().enumerate() {
                    *c = t;
                    t = t * step / (i + 1) as f64;
                }
            }
        }
        out
    }

    /// `mean_j shift_factor(kx, m, d0 + b0) * shift_factor(ky, m, d1 + b1)` on the whole HR grid.
    pub fn factor_plane(&self, m: usize, d: [i64; 2]) -> Plane<Complex64> {
        let l = self.order;
        let a0 = self.axis_coefficients(m, d[0]);
        let a1 = self.axis_coefficients(m, d[1]);
        let mut h = vec![Complex64::default(); m * l];
        for k in 0..m {
            for i in 0..l {
                let c = a0[k * l + i];
                if c == Complex64::default() {
                    continue;
                }
                let mu = &self.mu[i * l..(i + 1) * l];
                for (hv, &w) in h[k * l..(k + 1) * l].iter_mut().zip(mu) {
                    *hv += c * w;
                }
            }
        }
        Plane::from_fn(m, |kx, ky| {
            h[kx * l..(kx + 1) * l].iter().zip(&a1[ky * l..(ky + 1) * l]).map(|(x, y)| x * y).sum()
        })
    }
}

/// Per-axis realized factor: `exp(-i q b)`, or `cos(pi b)` on the Nyquist bin.
fn axis_factor(kc: i64, m: usize, b: f64) -> Complex64 {
    crate::grid::shift_factor(kc, m, b)
}

/// `G_alpha(k') = (r^2 nd)^-1 sum_{d,j} exp(-i 2pi/r (alpha-gamma).d) phi(k_alpha, b_dj)`.
pub fn g_coefficient(grid: &FrequencyGrid, model: &PositioningModel, positions: &[FramePosition], alpha: Freq, kp: Freq) -> Result<Complex64> {
    let idx = grid.decompose(kp)?;
    let ka = grid.alias_freq(idx.k, alpha);
    if !grid.in_hr(ka) {
        return crate::error::domain(format!("alias {alpha:?} of {kp:?} is outside the grid"));
    }
    let m = grid.hr_side();
    let r = grid.r() as f64;
    let delta = [alpha[0] - idx.gamma[0], alpha[1] - idx.gamma[1]];
    let mut acc = Complex64::default();
    for p in positions {
        let d = model.target(p.d_index);
        let th = -2.0 * PI / r * (delta[0] as f64 * d[0] as f64 + delta[1] as f64 * d[1] as f64);
        acc += Complex64::from_polar(1.0, th) * axis_factor(ka[0], m, p.b[0]) * axis_factor(ka[1], m, p.b[1]);
    }
    Ok(acc / positions.len() as f64)
}

/// `E[G_alpha(k')]` under the model.
pub fn g_expected(grid: &FrequencyGrid, model: &PositioningModel, alpha: Freq, kp: Freq) -> Result<Complex64> {
    let idx = grid.decompose(kp)?;
    let ka = grid.alias_freq(idx.k, alpha);
    let m = grid.hr_side();
    let r = grid.r() as f64;
    let delta = [alpha[0] - idx.gamma[0], alpha[1] - idx.gamma[1]];
    let mut acc = Complex64::default();
    for d_index in 0..model.targets() {
        let d = model.target(d_index);
        let th = -2.0 * PI / r * (delta[0] as f64 * d[0] as f64 + delta[1] as f64 * d[1] as f64);
        acc += Complex64::from_polar(1.0, th) * model.chi(d_index, ka, m);
    }
    Ok(acc / model.targets() as f64)
}

/// `G_gamma` on every bin: the empirical mean of `phi(k', b)` over frames.
pub fn g_gamma_plane(m: usize, positions: &[FramePosition]) -> Plane<Complex64> {
    let offsets: Vec<[f64; 2]> = positions.iter().map(|p| p.b).collect();
    ShiftMoments::new(&offsets).factor_plane(m, [0, 0])
}

/// Aliasing term by direct summation, `sum_{alpha != gamma} Z~(k_alpha) G_alpha(k')`.
pub fn alias_sum_direct(grid: &FrequencyGrid, model: &PositioningModel, positions: &[FramePosition], z: &Plane<Complex64>, kp: Freq) -> Result<Complex64> {
    let idx = grid.decompose(kp)?;
    let mut acc = Complex64::default();
    for alpha in grid.alias_set(idx.k)? {
        if alpha == idx.gamma {
            continue;
        }
        let ka = grid.alias_freq(idx.k, alpha);
        acc += *z.at_freq(ka) * g_coefficient(grid, model, positions, alpha, kp)?;
    }
    Ok(acc)
}

/// Amplitudes below this fraction of the peak are masked from relative errors.
pub const AMPLITUDE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct ErrorDecomposition {
    pub g_gamma: Plane<Complex64>,
    pub alias: Plane<Complex64>,
    /// `|G_gamma - 1|`.
    pub approx_err: Plane<f64>,
    /// `|B| / |Z~|`.
    pub alias_rel: Plane<f64>,
    /// `|X~ - Z~| / |Z~|`.
    pub rel_error: Plane<f64>,
    /// False on excluded or near-zero bins.
    pub valid: Plane<bool>,
}

impl ErrorDecomposition {
    pub fn side(&self) -> usize {
        self.valid.side()
    }

    /// Largest relative error over valid bins.
    pub fn max_rel_error(&self) -> f64 {
        self.rel_error.data().iter().zip(self.valid.data()).filter(|(_, &v)| v).map(|(e, _)| *e).fold(0.0, f64::max)
    }
}

/// Valid-bin mask: not excluded and above the amplitude floor.
pub fn valid_mask(grid: &FrequencyGrid, z: &Plane<Complex64>) -> Plane<bool> {
    let m = z.side();
    let peak = z.data().iter().map(|c| c.norm()).fold(0.0, f64::max);
    Plane::from_fn(m, |i, j| {
        let k = [signed_freq(i, m), signed_freq(j, m)];
        !grid.is_excluded(k) && z[(i, j)].norm() > AMPLITUDE_FLOOR * peak
    })
}

/// Splits the fused spectrum against the blurred scene `z`.
pub fn decompose_spectrum(grid: &FrequencyGrid, x: &Plane<Complex64>, z: &Plane<Complex64>, positions: &[FramePosition]) -> ErrorDecomposition {
    let m = grid.hr_side();
    let g_gamma = g_gamma_plane(m, positions);
    let valid = valid_mask(grid, z);
    let mut alias = Plane::filled(m, Complex64::default());
    let mut approx_err = Plane::filled(m, 0.0);
    let mut alias_rel = Plane::filled(m, 0.0);
    let mut rel_error = Plane::filled(m, 0.0);
    for idx in 0..m * m {
        let (zz, xx, g) = (z.data()[idx], x.data()[idx], g_gamma.data()[idx]);
        let b = xx - zz * g;
        alias.data_mut()[idx] = b;
        approx_err.data_mut()[idx] = (g - 1.0).norm();
        if valid.data()[idx] {
            let a = zz.norm();
            alias_rel.data_mut()[idx] = b.norm() / a;
            rel_error.data_mut()[idx] = (xx - zz).norm() / a;
        }
    }
    ErrorDecomposition { g_gamma, alias, approx_err, alias_rel, rel_error, valid }
}

pub fn decompose(fused: &FusedImage, z: &HrScene, stack: &AcquisitionStack) -> Result<ErrorDecomposition> {
    if z.side() != fused.pixels.side() {
        return input("scene and fused image sizes differ");
    }
    let grid = FrequencyGrid::new(stack.n, stack.model.r)?;
    Ok(decompose_spectrum(&grid, &fused.spectrum, z.spectrum(), &stack.positions()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    Full,
    HfOnly,
}

/// `10 log10(sum |Z~|^2 / sum |X~ - Z~|^2)` over the band.
pub fn hf_snr(grid: &FrequencyGrid, x: &Plane<Complex64>, z: &Plane<Complex64>, band: Band) -> f64 {
    let m = grid.hr_side();
    let (mut sig, mut err) = (0.0, 0.0);
    for i in 0..m {
        for j in 0..m {
            let k = [signed_freq(i, m), signed_freq(j, m)];
            if band == Band::HfOnly && grid.in_lr(k) {
                continue;
            }
            sig += z[(i, j)].norm_sqr();
            err += (x[(i, j)] - z[(i, j)]).norm_sqr();
        }
    }
    if err == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (sig / err).log10()
    }
}

/// CSV with one row per valid bin: `kx,ky,approx_err,alias_rel,rel_error`.
pub fn write_decomposition_csv(d: &ErrorDecomposition, path: &Path) -> Result<()> {
    let m = d.side();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["kx", "ky", "approx_err", "alias_rel", "rel_error"])?;
    for i in 0..m {
        for j in 0..m {
            if !d.valid[(i, j)] {
                continue;
            }
            w.serialize((
                signed_freq(i, m),
                signed_freq(j, m),
                d.approx_err[(i, j)],
                d.alias_rel[(i, j)],
                d.rel_error[(i, j)],
            ))?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::{acquire_stack, sample_positions};
    use crate::scene::{synth_power_law, Psf};

    #[test]
    fn spectral_fusion_matches_pixel_fusion() {
        let scene = synth_power_law(32, 0.0, 2).unwrap();
        let model = PositioningModel::new(2, 0.02, 3);
        let stack = acquire_stack(&scene, &Psf::Dirac, &model, 11, 0).unwrap();
        let a = fuse(&stack).unwrap().spectrum;
        let b = fuse_positions(&scene, &model, &sample_positions(&model, 11, 0), None);
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn moment_fusion_holds_for_large_offsets() {
        for (r, eps) in [(2, 0.15), (3, 0.1)] {
            let scene = synth_power_law(8 * r, 0.0, 4).unwrap();
            let model = PositioningModel::new(r, eps, 2);
            let stack = acquire_stack(&scene, &Psf::Dirac, &model, 5, 1).unwrap();
            let a = fuse(&stack).unwrap().spectrum;
            let b = fuse_positions(&scene, &model, &sample_positions(&model, 5, 1), None);
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!((x - y).norm() < 1e-11, "r={r}");
            }
        }
    }

    #[test]
    fn g_gamma_plane_matches_coefficient() {
        let grid = FrequencyGrid::new(8, 2).unwrap();
        let model = PositioningModel::new(2, 0.05, 2);
        let pos = sample_positions(&model, 3, 0);
        let g = g_gamma_plane(16, &pos);
        for kp in grid.hr_freqs() {
            let idx = grid.decompose(kp).unwrap();
            let c = g_coefficient(&grid, &model, &pos, idx.gamma, kp).unwrap();
            assert!((c - *g.at_freq(kp)).norm() < 1e-13);
        }
    }

    #[test]
    fn zero_error_gives_unit_g() {
        let grid = FrequencyGrid::new(8, 3).unwrap();
        let model = PositioningModel::new(3, 0.0, 1);
        let pos = sample_positions(&model, 0, 0);
        for kp in [[3, -7], [0, 0], [11, 5]] {
            let idx = grid.decompose(kp).unwrap();
            for alpha in grid.alias_set(idx.k).unwrap() {
                let g = g_coefficient(&grid, &model, &pos, alpha, kp).unwrap();
                let want = if alpha == idx.gamma { 1.0 } else { 0.0 };
                assert!((g - want).norm() < 1e-13, "{alpha:?} {g}");
            }
        }
    }
}
