//! Brute-force oracles and synthetic inputs shared by the integration tests.
#![allow(dead_code)]

use adaptrack::ops::ConvKernel;
use adaptrack::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> Tensor {
    let data = (0..h * w * c).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    Tensor::from_vec(h, w, c, data).unwrap()
}

pub fn random_kernel(rng: &mut ChaCha8Rng, out: usize, inp: usize, kh: usize, kw: usize, bias: bool) -> ConvKernel {
    let weights = (0..out * inp * kh * kw).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    let bias = (0..out).map(|_| if bias { rng.random_range(-1.0f32..1.0) } else { 0.0 }).collect();
    ConvKernel::new(out, inp, kh, kw, weights, bias).unwrap()
}

/// Direct zero-padded convolution, one output cell at a time.
pub fn conv_oracle(x: &Tensor, k: &ConvKernel, stride: usize, pad: usize) -> Tensor {
    let (h, w, _) = x.shape();
    let oh = (h + 2 * pad - k.kernel_h) / stride + 1;
    let ow = (w + 2 * pad - k.kernel_w) / stride + 1;
    Tensor::from_fn(oh, ow, k.out_channels, |o, oy, ox| {
        let mut acc = k.bias[o] as f64;
        for i in 0..k.in_channels {
            for ky in 0..k.kernel_h {
                for kx in 0..k.kernel_w {
                    let y = (oy * stride + ky) as isize - pad as isize;
                    let xx = (ox * stride + kx) as isize - pad as isize;
                    if y >= 0 && xx >= 0 && (y as usize) < h && (xx as usize) < w {
                        acc += k.weight(o, i, ky, kx) as f64 * x.at(i, y as usize, xx as usize) as f64;
                    }
                }
            }
        }
        acc as f32
    })
}

pub fn pool_oracle(x: &Tensor, size: usize, stride: usize) -> Tensor {
    let (h, w, c) = x.shape();
    Tensor::from_fn((h - size) / stride + 1, (w - size) / stride + 1, c, |ch, oy, ox| {
        let mut m = f32::NEG_INFINITY;
        for dy in 0..size {
            for dx in 0..size {
                m = m.max(x.at(ch, oy * stride + dy, ox * stride + dx));
            }
        }
        m
    })
}

/// Corner-aligned bilinear interpolation evaluated pointwise.
pub fn resize_oracle(x: &Tensor, oh: usize, ow: usize) -> Tensor {
    let (h, w, c) = x.shape();
    let coord = |i: usize, n_out: usize, n_in: usize| -> f64 {
        if n_out == 1 {
            (n_in - 1) as f64 / 2.0
        } else {
            i as f64 * (n_in - 1) as f64 / (n_out - 1) as f64
        }
    };
    Tensor::from_fn(oh, ow, c, |ch, oy, ox| {
        let sy = coord(oy, oh, h);
        let sx = coord(ox, ow, w);
        let (y0, x0) = (sy.floor() as usize, sx.floor() as usize);
        let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
        let (fy, fx) = (sy - y0 as f64, sx - x0 as f64);
        let v = |y: usize, xx: usize| x.at(ch, y, xx) as f64;
        let top = v(y0, x0) * (1.0 - fx) + v(y0, x1) * fx;
        let bottom = v(y1, x0) * (1.0 - fx) + v(y1, x1) * fx;
        (top * (1.0 - fy) + bottom * fy) as f32
    })
}

/// Σ_c Σ_p x[c][p + τ] · z[c][p], circular, divided by H·W·C.
pub fn linear_kernel_oracle(x: &Tensor, z: &Tensor) -> Tensor {
    let (h, w, c) = x.shape();
    let n = (h * w * c) as f64;
    Tensor::from_fn(h, w, 1, |_, ty, tx| {
        let mut acc = 0.0f64;
        for ch in 0..c {
            for y in 0..h {
                for xx in 0..w {
                    acc += x.at(ch, (y + ty) % h, (xx + tx) % w) as f64 * z.at(ch, y, xx) as f64;
                }
            }
        }
        (acc / n) as f32
    })
}

pub fn max_abs_diff(a: &Tensor, b: &Tensor) -> f32 {
    assert_eq!(a.shape(), b.shape());
    a.max_abs_diff(b)
}

/// Smooth deterministic texture with values in 0..=255.
pub fn texture(u: f32, v: f32, c: usize) -> f32 {
    let c = c as f32;
    128.0 + 60.0 * (u * 0.37 + c).sin() * (v * 0.23 - c).cos() + 50.0 * ((u + 2.0 * v) * 0.11 + 0.7 * c).sin()
}

/// RGB frame: flat grey background with a textured `side × side` patch at (ox, oy).
pub fn patch_frame(h: usize, w: usize, side: usize, ox: usize, oy: usize) -> Tensor {
    Tensor::from_fn(h, w, 3, |c, y, x| {
        if (ox..ox + side).contains(&x) && (oy..oy + side).contains(&y) {
            texture((x - ox) as f32, (y - oy) as f32, c)
        } else {
            90.0
        }
    })
}
