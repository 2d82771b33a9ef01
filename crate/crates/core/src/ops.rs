//! Forward-only network primitives: convolution, rectification, max pooling
//! and bilinear resampling.

use crate::error::{Error, Result};
use crate::par;
use crate::tensor::Tensor;

/// Output channels handled per parallel task in [`conv2d`].
const CONV_CHANNEL_CHUNK: usize = 16;

/// Convolution weights in `[out][in][kh][kw]` order plus one bias per output channel.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvKernel {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
}

impl ConvKernel {
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        kernel_h: usize,
        kernel_w: usize,
        weights: Vec<f32>,
        bias: Vec<f32>,
    ) -> Result<Self> {
        let k = ConvKernel {
            out_channels,
            in_channels,
            kernel_h,
            kernel_w,
            weights,
            bias,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn zeros(out_channels: usize, in_channels: usize, kernel_h: usize, kernel_w: usize) -> Self {
        ConvKernel {
            out_channels,
            in_channels,
            kernel_h,
            kernel_w,
            weights: vec![0.0; out_channels * in_channels * kernel_h * kernel_w],
            bias: vec![0.0; out_channels],
        }
    }

    /// Number of weights (without bias).
    pub fn weight_len(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel_h * self.kernel_w
    }

    pub fn validate(&self) -> Result<()> {
        if self.out_channels == 0 || self.in_channels == 0 || self.kernel_h == 0 || self.kernel_w == 0 {
            return Err(Error::shape("convolution kernel has a zero dimension"));
        }
        if self.weights.len() != self.weight_len() {
            return Err(Error::shape(format!(
                "kernel {}x{}x{}x{} needs {} weights, got {}",
                self.out_channels,
                self.in_channels,
                self.kernel_h,
                self.kernel_w,
                self.weight_len(),
                self.weights.len()
            )));
        }
        if self.bias.len() != self.out_channels {
            return Err(Error::shape(format!(
                "kernel has {} outputs but {} biases",
                self.out_channels,
                self.bias.len()
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn weight(&self, o: usize, i: usize, ky: usize, kx: usize) -> f32 {
        self.weights[((o * self.in_channels + i) * self.kernel_h + ky) * self.kernel_w + kx]
    }
}

/// Output extent of a strided window operation, or `None` if the window does not fit.
fn out_extent(input: usize, pad: usize, kernel: usize, stride: usize) -> Option<usize> {
    let padded = input + 2 * pad;
    if padded < kernel || stride == 0 {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

/// 2-D convolution with symmetric zero padding.
///
/// Lowered to im2col + SGEMM; output channels are split into fixed-size chunks
/// that may run in parallel.
pub fn conv2d(input: &Tensor, kernel: &ConvKernel, stride: usize, pad: usize) -> Result<Tensor> {
    kernel.validate()?;
    if input.channels() != kernel.in_channels {
        return Err(Error::shape(format!(
            "convolution expects {} input channels, got {}",
            kernel.in_channels,
            input.channels()
        )));
    }
    if stride == 0 {
        return Err(Error::shape("convolution stride must be at least 1"));
    }
    let (h, w, cin) = input.shape();
    let (kh, kw) = (kernel.kernel_h, kernel.kernel_w);
    let oh = out_extent(h, pad, kh, stride)
        .ok_or_else(|| Error::shape(format!("{kh}x{kw} kernel larger than padded {h}x{w} input")))?;
    let ow = out_extent(w, pad, kw, stride)
        .ok_or_else(|| Error::shape(format!("{kh}x{kw} kernel larger than padded {h}x{w} input")))?;

    let n = oh * ow;
    let k = cin * kh * kw;
    let pointwise = kh == 1 && kw == 1 && stride == 1 && pad == 0;
    let lowered;
    let cols: &[f32] = if pointwise {
        input.data()
    } else {
        lowered = im2col(input, kh, kw, stride, pad, oh, ow);
        &lowered
    };

    let mut out = Tensor::zeros(oh, ow, kernel.out_channels);
    par::for_each_chunk_mut(out.data_mut(), CONV_CHANNEL_CHUNK * n, |chunk_idx, block| {
        let first = chunk_idx * CONV_CHANNEL_CHUNK;
        let rows = block.len() / n;
        for (r, row) in block.chunks_mut(n).enumerate() {
            row.fill(kernel.bias[first + r]);
        }
        let a = &kernel.weights[first * k..(first + rows) * k];
        // SAFETY: `a` is rows×k, `cols` is k×n and `block` is rows×n, all row-major
        // and fully in bounds.
        unsafe {
            matrixmultiply::sgemm(
                rows,
                k,
                n,
                1.0,
                a.as_ptr(),
                k as isize,
                1,
                cols.as_ptr(),
                n as isize,
                1,
                1.0,
                block.as_mut_ptr(),
                n as isize,
                1,
            );
        }
    });
    Ok(out)
}

/// Lays out every receptive field as a column: result is `(cin·kh·kw) × (oh·ow)`.
fn im2col(input: &Tensor, kh: usize, kw: usize, stride: usize, pad: usize, oh: usize, ow: usize) -> Vec<f32> {
    let (h, w, cin) = input.shape();
    let n = oh * ow;
    let mut cols = vec![0.0f32; cin * kh * kw * n];
    par::for_each_chunk_mut(&mut cols, n, |row, dst| {
        let c = row / (kh * kw);
        let ky = (row / kw) % kh;
        let kx = row % kw;
        let plane = input.plane(c);
        for oy in 0..oh {
            let iy = (oy * stride + ky) as isize - pad as isize;
            if iy < 0 || iy >= h as isize {
                continue;
            }
            let src = &plane[iy as usize * w..(iy as usize + 1) * w];
            let dst_row = &mut dst[oy * ow..(oy + 1) * ow];
            for (ox, d) in dst_row.iter_mut().enumerate() {
                let ix = (ox * stride + kx) as isize - pad as isize;
                if ix >= 0 && ix < w as isize {
                    *d = src[ix as usize];
                }
            }
        }
    });
    cols
}

pub fn relu(input: &Tensor) -> Tensor {
    input.map(|v| v.max(0.0))
}

pub fn relu_in_place(t: &mut Tensor) {
    for v in t.data_mut() {
        *v = v.max(0.0);
    }
}

/// Per-channel window maximum, no padding.
pub fn max_pool2d(input: &Tensor, kernel: usize, stride: usize) -> Result<Tensor> {
    if kernel == 0 || stride == 0 {
        return Err(Error::shape("pooling kernel and stride must be at least 1"));
    }
    let (h, w, c) = input.shape();
    let (oh, ow) = match (out_extent(h, 0, kernel, stride), out_extent(w, 0, kernel, stride)) {
        (Some(oh), Some(ow)) => (oh, ow),
        _ => {
            return Err(Error::shape(format!(
                "{h}x{w} input smaller than {kernel}x{kernel} pooling window"
            )))
        }
    };
    let mut out = Tensor::zeros(oh, ow, c);
    par::for_each_chunk_mut(out.data_mut(), oh * ow, |ch, dst| {
        let plane = input.plane(ch);
        for oy in 0..oh {
            for ox in 0..ow {
                let mut m = f32::NEG_INFINITY;
                for ky in 0..kernel {
                    let row = &plane[(oy * stride + ky) * w..];
                    for kx in 0..kernel {
                        m = m.max(row[ox * stride + kx]);
                    }
                }
                dst[oy * ow + ox] = m;
            }
        }
    });
    Ok(out)
}

/// Corner-aligned sample positions: output index `i` maps to input coordinate
/// `i·(n_in−1)/(n_out−1)`. A single output sample sits at the input center.
pub(crate) fn corner_aligned_taps(n_in: usize, n_out: usize) -> Vec<(usize, usize, f32)> {
    let step = if n_out > 1 { (n_in as f64 - 1.0) / (n_out - 1) as f64 } else { 0.0 };
    let offset = if n_out > 1 { 0.0 } else { (n_in as f64 - 1.0) / 2.0 };
    (0..n_out)
        .map(|i| {
            let pos = offset + i as f64 * step;
            let i0 = (pos.floor() as usize).min(n_in - 1);
            let i1 = (i0 + 1).min(n_in - 1);
            (i0, i1, (pos - i0 as f64) as f32)
        })
        .collect()
}

/// Per-channel bilinear resampling with corner-aligned sampling.
pub fn bilinear_resize(input: &Tensor, out_h: usize, out_w: usize) -> Tensor {
    assert!(out_h > 0 && out_w > 0, "resize target must be non-empty");
    if (out_h, out_w) == (input.height(), input.width()) {
        return input.clone();
    }
    let ys = corner_aligned_taps(input.height(), out_h);
    let xs = corner_aligned_taps(input.width(), out_w);
    let w = input.width();
    let mut out = Tensor::zeros(out_h, out_w, input.channels());
    par::for_each_chunk_mut(out.data_mut(), out_h * out_w, |c, dst| {
        let plane = input.plane(c);
        for (oy, &(y0, y1, fy)) in ys.iter().enumerate() {
            let r0 = &plane[y0 * w..(y0 + 1) * w];
            let r1 = &plane[y1 * w..(y1 + 1) * w];
            for (ox, &(x0, x1, fx)) in xs.iter().enumerate() {
                let top = r0[x0] + (r0[x1] - r0[x0]) * fx;
                let bottom = r1[x0] + (r1[x1] - r1[x0]) * fx;
                dst[oy * out_w + ox] = top + (bottom - top) * fy;
            }
        }
    });
    out
}
