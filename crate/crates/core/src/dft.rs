//! Two-dimensional DFT. Forward is unnormalized, inverse carries `1/M^2`.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::plane::Plane;

/// Planned forward and inverse transforms for one square size.
#[derive(Clone)]
pub struct Fft2 {
    side: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2").field("side", &self.side).finish()
    }
}

impl Fft2 {
    pub fn new(side: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 { side, fwd: planner.plan_fft_forward(side), inv: planner.plan_fft_inverse(side) }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    fn run(&self, fft: &Arc<dyn Fft<f64>>, buf: &mut [Complex64]) {
        let m = self.side;
        assert_eq!(buf.len(), m * m);
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        for row in buf.chunks_exact_mut(m) {
            fft.process_with_scratch(row, &mut scratch);
        }
        let mut t = transpose(m, buf);
        for row in t.chunks_exact_mut(m) {
            fft.process_with_scratch(row, &mut scratch);
        }
        let back = transpose(m, &t);
        buf.copy_from_slice(&back);
    }

    pub fn forward_in_place(&self, buf: &mut [Complex64]) {
        self.run(&self.fwd, buf);
    }

    pub fn inverse_in_place(&self, buf: &mut [Complex64]) {
        self.run(&self.inv, buf);
        let s = 1.0 / (self.side * self.side) as f64;
        buf.iter_mut().for_each(|z| *z *= s);
    }

    pub fn forward(&self, image: &Plane<f64>) -> Plane<Complex64> {
        let mut buf: Vec<Complex64> = image.data().iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.forward_in_place(&mut buf);
        Plane::from_vec(self.side, buf)
    }

    pub fn forward_complex(&self, image: &Plane<Complex64>) -> Plane<Complex64> {
        let mut buf = image.data().to_vec();
        self.forward_in_place(&mut buf);
        Plane::from_vec(self.side, buf)
    }

    pub fn inverse(&self, spectrum: &Plane<Complex64>) -> Plane<Complex64> {
        let mut buf = spectrum.data().to_vec();
        self.inverse_in_place(&mut buf);
        Plane::from_vec(self.side, buf)
    }

    /// Inverse transform keeping the real part.
    pub fn inverse_real(&self, spectrum: &Plane<Complex64>) -> Plane<f64> {
        self.inverse(spectrum).map(|z| z.re)
    }
}

fn transpose(m: usize, src: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); m * m];
    for i in 0..m {
        for j in 0..m {
            out[j * m + i] = src[i * m + j];
        }
    }
    out
}

pub fn dft_forward(image: &Plane<f64>) -> Plane<Complex64> {
    Fft2::new(image.side()).forward(image)
}

pub fn dft_inverse(spectrum: &Plane<Complex64>) -> Plane<Complex64> {
    Fft2::new(spectrum.side()).inverse(spectrum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn naive(image: &Plane<f64>) -> Plane<Complex64> {
        let m = image.side();
        Plane::from_fn(m, |k0, k1| {
            let mut acc = Complex64::default();
            for n0 in 0..m {
                for n1 in 0..m {
                    let ph = -2.0 * PI * ((k0 * n0 + k1 * n1) % m) as f64 / m as f64;
                    acc += image[(n0, n1)] * Complex64::from_polar(1.0, ph);
                }
            }
            acc
        })
    }

    #[test]
    fn matches_naive_sum() {
        let img = Plane::from_fn(8, |i, j| ((i * 7 + j * 3) % 5) as f64 - 1.5 + 0.1 * i as f64);
        let a = dft_forward(&img);
        let b = naive(&img);
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).norm() < 1e-10);
        }
    }

    #[test]
    fn round_trip() {
        let img = Plane::from_fn(16, |i, j| (i as f64).sin() + (j as f64 * 0.3).cos());
        let back = dft_inverse(&dft_forward(&img));
        for (x, y) in img.data().iter().zip(back.data()) {
            assert!((x - y.re).abs() < 1e-12 && y.im.abs() < 1e-12);
        }
    }

    #[test]
    fn impulse_is_flat() {
        let mut img = Plane::filled(4, 0.0);
        img[(0, 0)] = 1.0;
        assert!(dft_forward(&img).data().iter().all(|z| (z - 1.0).norm() < 1e-15));
    }
}
