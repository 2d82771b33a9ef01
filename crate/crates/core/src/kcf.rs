//! Kernelized correlation filter.
//!
//! Ridge regression over all circular shifts of a feature patch, solved in
//! closed form in the Fourier domain:
//!
//! ```text
//! alphaf   = yf / (fft(k(x, x)) + lambda)
//! response = real(ifft(fft(k(z, x)) * alphaf))
//! ```
//!
//! Labels peak at the grid center (`(h/2, w/2)`), so the response argmax minus
//! the center is the displacement of `z` relative to the template, in cells.
//! Callers are expected to apply the cosine window ([`KcfModel::window`])
//! before training or detection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{Complex32, ComplexSpectrum, Fft2};
use crate::par;
use crate::tensor::Tensor;

/// Frequency bins per parallel task when summing cross-spectra over channels.
const BIN_CHUNK: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelType {
    Gaussian,
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KcfParams {
    pub kernel_type: KernelType,
    /// Gaussian kernel bandwidth, in units of per-element feature distance.
    pub kernel_sigma: f32,
    pub lambda: f32,
    /// Model interpolation rate.
    pub eta: f32,
    /// Label bandwidth relative to `sqrt(grid_h * grid_w)`.
    pub output_sigma_factor: f32,
    /// KCF window side over target side.
    pub window_scale: f32,
}

impl Default for KcfParams {
    fn default() -> Self {
        KcfParams {
            kernel_type: KernelType::Gaussian,
            kernel_sigma: 0.5,
            lambda: 1e-4,
            eta: 0.01,
            output_sigma_factor: 0.1,
            window_scale: 2.5,
        }
    }
}

impl KcfParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(Error::Config(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::Config(format!("eta must lie in [0, 1], got {}", self.eta)));
        }
        if !(self.window_scale > 1.0) {
            return Err(Error::Config(format!(
                "window scale must exceed 1, got {}",
                self.window_scale
            )));
        }
        if !(self.kernel_sigma > 0.0) || !(self.output_sigma_factor > 0.0) {
            return Err(Error::Config("kernel and label bandwidths must be positive".into()));
        }
        Ok(())
    }

    pub fn label_sigma(&self, grid_h: usize, grid_w: usize) -> f32 {
        self.output_sigma_factor * ((grid_h * grid_w) as f32).sqrt()
    }
}

/// Gaussian regression target peaking at `(h/2, w/2)` with value 1; distances
/// to the peak are measured circularly.
pub fn gaussian_labels(h: usize, w: usize, sigma: f32) -> Tensor {
    assert!(h >= 1 && w >= 1 && sigma > 0.0);
    let (cy, cx) = (h / 2, w / 2);
    let circ = |a: usize, b: usize, n: usize| {
        let d = a.abs_diff(b);
        d.min(n - d) as f64
    };
    let denom = 2.0 * (sigma as f64).powi(2);
    Tensor::from_fn(h, w, 1, |_, y, x| {
        let dy = circ(y, cy, h);
        let dx = circ(x, cx, w);
        (-(dy * dy + dx * dx) / denom).exp() as f32
    })
}

fn hann_1d(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos()))
        .collect()
}

/// Outer product of two 1-D Hann windows.
pub fn hann_window(h: usize, w: usize) -> Tensor {
    let (wy, wx) = (hann_1d(h), hann_1d(w));
    Tensor::from_fn(h, w, 1, |_, y, x| (wy[y] * wx[x]) as f32)
}

/// `Σ_c a_c ⊙ conj(b_c)` per frequency bin. Channels are summed in order
/// inside each bin chunk, so the result does not depend on the worker count.
fn cross_spectrum(a: &ComplexSpectrum, b: &ComplexSpectrum) -> Vec<Complex32> {
    let n = a.plane_len();
    let channels = a.channels();
    let mut acc = vec![Complex32::new(0.0, 0.0); n];
    par::for_each_chunk_mut(&mut acc, BIN_CHUNK, |chunk, out| {
        let start = chunk * BIN_CHUNK;
        for c in 0..channels {
            let pa = &a.plane(c)[start..start + out.len()];
            let pb = &b.plane(c)[start..start + out.len()];
            for ((o, x), z) in out.iter_mut().zip(pa).zip(pb) {
                *o += x * z.conj();
            }
        }
    });
    acc
}

/// Kernel map `k(τ)` between two patches given their spectra, where the
/// correlation term is `Σ_p a(p+τ)·b(p)` summed over channels.
fn kernel_from_spectra(plan: &Fft2, af: &ComplexSpectrum, bf: &ComplexSpectrum, kernel: KernelType, sigma: f32) -> Tensor {
    let mut corr = cross_spectrum(af, bf);
    plan.inverse_plane(&mut corr);
    let hw = af.plane_len() as f64;
    let numel = hw * af.channels() as f64;
    let data = match kernel {
        KernelType::Linear => corr.iter().map(|z| (z.re as f64 / numel) as f32).collect(),
        KernelType::Gaussian => {
            let aa = af.energy() / hw;
            let bb = bf.energy() / hw;
            let denom = (sigma as f64).powi(2) * numel;
            corr.iter()
                .map(|z| {
                    let d = (aa + bb - 2.0 * z.re as f64).max(0.0);
                    (-d / denom).exp() as f32
                })
                .collect()
        }
    };
    Tensor::from_vec(af.height(), af.width(), 1, data).expect("grid preserved")
}

/// Single-channel kernel correlation map between two equally shaped patches.
pub fn kernel_correlation(x: &Tensor, z: &Tensor, params: &KcfParams) -> Result<Tensor> {
    if !x.same_shape(z) {
        return Err(Error::shape(format!(
            "kernel correlation of {:?} with {:?}",
            x.shape(),
            z.shape()
        )));
    }
    let plan = Fft2::new(x.height(), x.width());
    let xf = plan.forward(x)?;
    let zf = plan.forward(z)?;
    Ok(kernel_from_spectra(&plan, &xf, &zf, params.kernel_type, params.kernel_sigma))
}

/// Fourier-domain filter state for one feature layer.
#[derive(Clone, Debug)]
pub struct KcfModel {
    params: KcfParams,
    plan: Fft2,
    xf: ComplexSpectrum,
    alphaf: ComplexSpectrum,
    yf: ComplexSpectrum,
    hann: Tensor,
}

impl KcfModel {
    /// Trains a filter on an (already windowed) feature patch.
    pub fn train(features: &Tensor, params: &KcfParams) -> Result<Self> {
        params.validate()?;
        let (h, w, _) = features.shape();
        if h < 3 || w < 3 {
            return Err(Error::shape(format!("KCF grid must be at least 3x3, got {h}x{w}")));
        }
        let plan = Fft2::new(h, w);
        let yf = plan.forward(&gaussian_labels(h, w, params.label_sigma(h, w)))?;
        let mut model = KcfModel {
            params: params.clone(),
            hann: hann_window(h, w),
            xf: ComplexSpectrum::zeros(h, w, features.channels()),
            alphaf: ComplexSpectrum::zeros(h, w, 1),
            yf,
            plan,
        };
        let (xf, alphaf) = model.solve(features)?;
        model.xf = xf;
        model.alphaf = alphaf;
        Ok(model)
    }

    fn check_features(&self, features: &Tensor) -> Result<()> {
        let expected = (self.plan.height(), self.plan.width(), self.xf.channels());
        if features.shape() != expected {
            return Err(Error::shape(format!(
                "features {:?} on a model expecting {:?}",
                features.shape(),
                expected
            )));
        }
        Ok(())
    }

    /// Template spectrum and dual coefficients for one patch.
    fn solve(&self, features: &Tensor) -> Result<(ComplexSpectrum, ComplexSpectrum)> {
        self.check_features(features)?;
        let xf = self.plan.forward(features)?;
        let k = kernel_from_spectra(&self.plan, &xf, &xf, self.params.kernel_type, self.params.kernel_sigma);
        let kf = self.plan.forward(&k)?;
        let lambda = self.params.lambda;
        let data = self
            .yf
            .data()
            .iter()
            .zip(kf.data())
            .map(|(y, k)| y / (k + lambda))
            .collect();
        let alphaf = ComplexSpectrum::from_vec(self.plan.height(), self.plan.width(), 1, data)?;
        Ok((xf, alphaf))
    }

    /// Response map and the largest imaginary residue of the inverse transform.
    pub fn detect_with_residue(&self, features: &Tensor) -> Result<(Tensor, f32)> {
        self.check_features(features)?;
        let zf = self.plan.forward(features)?;
        let k = kernel_from_spectra(&self.plan, &zf, &self.xf, self.params.kernel_type, self.params.kernel_sigma);
        let kf = self.plan.forward(&k)?;
        let data = kf.data().iter().zip(self.alphaf.data()).map(|(k, a)| k * a).collect();
        let product = ComplexSpectrum::from_vec(self.plan.height(), self.plan.width(), 1, data)?;
        let full = self.plan.inverse_complex(&product)?;
        Ok((full.real(), full.max_abs_imag()))
    }

    /// Real-valued response map on the model grid.
    pub fn detect(&self, features: &Tensor) -> Result<Tensor> {
        Ok(self.detect_with_residue(features)?.0)
    }

    /// Running interpolation of template and dual coefficients toward `features`.
    pub fn update(&mut self, features: &Tensor, eta: f32) -> Result<()> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::Config(format!("eta must lie in [0, 1], got {eta}")));
        }
        let (xf, alphaf) = self.solve(features)?;
        self.xf = self.xf.interpolate(&xf, eta)?;
        self.alphaf = self.alphaf.interpolate(&alphaf, eta)?;
        Ok(())
    }

    /// Multiplies every channel by the model's cosine window.
    pub fn window(&self, features: &Tensor) -> Result<Tensor> {
        features.mul_plane(&self.hann)
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.plan.height(), self.plan.width())
    }

    pub fn channels(&self) -> usize {
        self.xf.channels()
    }

    pub fn params(&self) -> &KcfParams {
        &self.params
    }

    pub fn xf(&self) -> &ComplexSpectrum {
        &self.xf
    }

    pub fn alphaf(&self) -> &ComplexSpectrum {
        &self.alphaf
    }

    pub fn yf(&self) -> &ComplexSpectrum {
        &self.yf
    }

    pub fn hann(&self) -> &Tensor {
        &self.hann
    }
}

pub fn train_model(features: &Tensor, params: &KcfParams) -> Result<KcfModel> {
    KcfModel::train(features, params)
}

pub fn detect(model: &KcfModel, features: &Tensor) -> Result<Tensor> {
    model.detect(features)
}

pub fn update_model(mut model: KcfModel, features: &Tensor, eta: f32) -> Result<KcfModel> {
    model.update(features, eta)?;
    Ok(model)
}

/// Peak position minus grid center, `(rows, cols)`. A flat map yields `(0, 0)`.
pub fn peak_offset(response: &Tensor) -> (isize, isize) {
    let plane = response.plane(0);
    let first = plane[0];
    if plane.iter().all(|&v| v == first) {
        return (0, 0);
    }
    let (py, px) = response.argmax(0);
    (
        py as isize - (response.height() / 2) as isize,
        px as isize - (response.width() / 2) as isize,
    )
}
