//! 2-D discrete Fourier transforms over tensor planes.
//!
//! The forward transform is unnormalized; the inverse carries the `1/(H·W)`
//! factor so that `ifft2(fft2(x)) == x`.

use std::fmt;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::par;
use crate::tensor::Tensor;

pub use rustfft::num_complex::Complex32;

/// Per-channel complex spectra on a fixed grid, laid out like [`Tensor`].
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexSpectrum {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<Complex32>,
}

impl ComplexSpectrum {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        ComplexSpectrum {
            height,
            width,
            channels,
            data: vec![Complex32::new(0.0, 0.0); height * width * channels],
        }
    }

    pub fn from_vec(height: usize, width: usize, channels: usize, data: Vec<Complex32>) -> Result<Self> {
        if data.len() != height * width * channels || data.is_empty() {
            return Err(Error::shape(format!(
                "{height}x{width}x{channels} spectrum cannot hold {} values",
                data.len()
            )));
        }
        Ok(ComplexSpectrum {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[Complex32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex32] {
        &mut self.data
    }

    pub fn plane(&self, c: usize) -> &[Complex32] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    /// `Σ|X|²`, accumulated in f64.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr() as f64).sum()
    }

    /// Real parts as a tensor.
    pub fn real(&self) -> Tensor {
        let data = self.data.iter().map(|z| z.re).collect();
        Tensor::from_vec(self.height, self.width, self.channels, data).expect("shape preserved")
    }

    pub fn max_abs_imag(&self) -> f32 {
        self.data.iter().map(|z| z.im.abs()).fold(0.0, f32::max)
    }

    /// `(1−eta)·self + eta·other`, elementwise.
    pub fn interpolate(&self, other: &ComplexSpectrum, eta: f32) -> Result<ComplexSpectrum> {
        self.check_same(other)?;
        let keep = 1.0 - eta;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * keep + b * eta)
            .collect();
        Ok(ComplexSpectrum { data, ..*self })
    }

    pub(crate) fn check_same(&self, other: &ComplexSpectrum) -> Result<()> {
        if (self.height, self.width, self.channels) != (other.height, other.width, other.channels) {
            return Err(Error::shape(format!(
                "spectra {}x{}x{} and {}x{}x{} differ",
                self.height, self.width, self.channels, other.height, other.width, other.channels
            )));
        }
        Ok(())
    }
}

/// Planned 2-D transforms for one grid size. Cheap to clone, shareable across threads.
#[derive(Clone)]
pub struct Fft2 {
    height: usize,
    width: usize,
    row_fwd: Arc<dyn Fft<f32>>,
    row_inv: Arc<dyn Fft<f32>>,
    col_fwd: Arc<dyn Fft<f32>>,
    col_inv: Arc<dyn Fft<f32>>,
}

impl fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fft2")
            .field("height", &self.height)
            .field("width", &self.width)
            .finish()
    }
}

impl Fft2 {
    pub fn new(height: usize, width: usize) -> Self {
        assert!(height > 0 && width > 0, "FFT grid must be non-empty");
        let mut planner = FftPlanner::new();
        Fft2 {
            height,
            width,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    fn check_grid(&self, h: usize, w: usize) -> Result<()> {
        if (h, w) != (self.height, self.width) {
            return Err(Error::shape(format!(
                "{h}x{w} data on a {}x{} transform",
                self.height, self.width
            )));
        }
        Ok(())
    }

    /// In-place unnormalized forward transform of one `height × width` plane.
    pub fn forward_plane(&self, plane: &mut [Complex32]) {
        self.transform(plane, &*self.row_fwd, &*self.col_fwd);
    }

    /// In-place normalized inverse transform of one plane.
    pub fn inverse_plane(&self, plane: &mut [Complex32]) {
        self.transform(plane, &*self.row_inv, &*self.col_inv);
        let scale = 1.0 / (self.height * self.width) as f32;
        for z in plane.iter_mut() {
            *z *= scale;
        }
    }

    fn transform(&self, plane: &mut [Complex32], rows: &dyn Fft<f32>, cols: &dyn Fft<f32>) {
        let (h, w) = (self.height, self.width);
        debug_assert_eq!(plane.len(), h * w);
        rows.process(plane);
        if h == 1 {
            return;
        }
        let mut t = vec![Complex32::new(0.0, 0.0); h * w];
        transpose::transpose(plane, &mut t, w, h);
        cols.process(&mut t);
        transpose::transpose(&t, plane, h, w);
    }

    pub fn forward(&self, input: &Tensor) -> Result<ComplexSpectrum> {
        self.check_grid(input.height(), input.width())?;
        let n = input.plane_len();
        let mut data: Vec<Complex32> = input.data().iter().map(|&v| Complex32::new(v, 0.0)).collect();
        par::for_each_chunk_mut(&mut data, n, |_, plane| self.forward_plane(plane));
        ComplexSpectrum::from_vec(input.height(), input.width(), input.channels(), data)
    }

    /// Full complex inverse (keeps the imaginary residue).
    pub fn inverse_complex(&self, spec: &ComplexSpectrum) -> Result<ComplexSpectrum> {
        self.check_grid(spec.height(), spec.width())?;
        let mut out = spec.clone();
        let n = out.plane_len();
        par::for_each_chunk_mut(&mut out.data, n, |_, plane| self.inverse_plane(plane));
        Ok(out)
    }

    /// Inverse transform, real part.
    pub fn inverse(&self, spec: &ComplexSpectrum) -> Result<Tensor> {
        Ok(self.inverse_complex(spec)?.real())
    }
}

/// One-shot forward transform of every channel.
pub fn fft2(input: &Tensor) -> ComplexSpectrum {
    Fft2::new(input.height(), input.width())
        .forward(input)
        .expect("plan built for this grid")
}

/// One-shot normalized inverse transform; returns the real part.
pub fn ifft2(spec: &ComplexSpectrum) -> Tensor {
    Fft2::new(spec.height(), spec.width())
        .inverse(spec)
        .expect("plan built for this grid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Textbook O(N²) DFT, independent of rustfft.
    fn dft_oracle(x: &Tensor, c: usize) -> Vec<(f64, f64)> {
        let (h, w, _) = x.shape();
        let mut out = Vec::with_capacity(h * w);
        for u in 0..h {
            for v in 0..w {
                let (mut re, mut im) = (0.0, 0.0);
                for y in 0..h {
                    for xx in 0..w {
                        let ang = -2.0
                            * std::f64::consts::PI
                            * ((u * y) as f64 / h as f64 + (v * xx) as f64 / w as f64);
                        let val = x.at(c, y, xx) as f64;
                        re += val * ang.cos();
                        im += val * ang.sin();
                    }
                }
                out.push((re, im));
            }
        }
        out
    }

    #[test]
    fn delta_gives_flat_spectrum() {
        let mut d = Tensor::zeros(6, 5, 1);
        d.set(0, 0, 0, 1.0);
        let s = fft2(&d);
        for z in s.data() {
            assert!((z.re - 1.0).abs() < 1e-6 && z.im.abs() < 1e-6);
        }
    }

    #[test]
    fn matches_direct_dft() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = Tensor::from_fn(6, 10, 2, |_, _, _| rng.random_range(-1.0..1.0));
        let s = fft2(&x);
        for c in 0..2 {
            for (z, (re, im)) in s.plane(c).iter().zip(dft_oracle(&x, c)) {
                assert!((z.re as f64 - re).abs() < 1e-4);
                assert!((z.im as f64 - im).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn round_trip_and_parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x = Tensor::from_fn(16, 16, 1, |_, _, _| rng.random_range(0.0..1.0));
        let s = fft2(&x);
        assert!(ifft2(&s).max_abs_diff(&x) < 1e-5);
        let lhs = x.sum_sq();
        let rhs = s.energy() / 256.0;
        assert!(((lhs - rhs) / lhs).abs() < 1e-4);
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let plan = Fft2::new(4, 4);
        assert!(plan.forward(&Tensor::zeros(4, 5, 1)).is_err());
    }
}
