//! Dense 3-D float maps.
//!
//! A [`Tensor`] stores `channels` planes of `height × width` cells, channel-major,
//! row-major within a plane. It carries images, feature maps, labels and
//! response maps alike.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Tensor {
    /// All-zero tensor. Panics if any dimension is zero.
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self::filled(height, width, channels, 0.0)
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f32) -> Self {
        assert!(
            height > 0 && width > 0 && channels > 0,
            "tensor dimensions must be positive, got {height}x{width}x{channels}"
        );
        Tensor {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        }
    }

    pub fn from_vec(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::shape(format!(
                "tensor dimensions must be positive, got {height}x{width}x{channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::shape(format!(
                "{}x{}x{} tensor needs {} values, got {}",
                height,
                width,
                channels,
                height * width * channels,
                data.len()
            )));
        }
        Ok(Tensor {
            height,
            width,
            channels,
            data,
        })
    }

    /// Builds a tensor by evaluating `f(channel, row, col)` for every cell.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Self {
        let mut t = Self::zeros(height, width, channels);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    let i = t.index(c, y, x);
                    t.data[i] = f(c, y, x);
                }
            }
        }
        t
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `(height, width, channels)`
    #[inline]
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    #[inline]
    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn index(&self, c: usize, y: usize, x: usize) -> usize {
        debug_assert!(c < self.channels && y < self.height && x < self.width);
        (c * self.height + y) * self.width + x
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[self.index(c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, value: f32) {
        let i = self.index(c, y, x);
        self.data[i] = value;
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f32] {
        let n = self.plane_len();
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn planes(&self) -> std::slice::Chunks<'_, f32> {
        self.data.chunks(self.plane_len())
    }

    pub fn same_shape(&self, other: &Tensor) -> bool {
        self.shape() == other.shape()
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Tensor {
        Tensor {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..*self
        }
    }

    pub fn scaled(&self, s: f32) -> Tensor {
        self.map(|v| v * s)
    }

    pub fn sum_sq(&self) -> f64 {
        self.data.iter().map(|&v| (v as f64) * (v as f64)).sum()
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f32 {
        assert!(self.same_shape(other), "shape mismatch in max_abs_diff");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max)
    }

    /// Multiplies every channel elementwise by a single-channel `mask` of the same grid.
    pub fn mul_plane(&self, mask: &Tensor) -> Result<Tensor> {
        if mask.channels != 1 || mask.height != self.height || mask.width != self.width {
            return Err(Error::shape(format!(
                "mask {:?} does not match tensor grid {}x{}",
                mask.shape(),
                self.height,
                self.width
            )));
        }
        let mut out = self.clone();
        let n = self.plane_len();
        for plane in out.data.chunks_mut(n) {
            for (v, m) in plane.iter_mut().zip(&mask.data) {
                *v *= m;
            }
        }
        Ok(out)
    }

    /// Sub-window `[top, top+height) × [left, left+width)`, all channels.
    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Tensor> {
        if height == 0 || width == 0 || top + height > self.height || left + width > self.width {
            return Err(Error::shape(format!(
                "crop {height}x{width} at ({top},{left}) outside {}x{} map",
                self.height, self.width
            )));
        }
        let mut data = Vec::with_capacity(height * width * self.channels);
        for c in 0..self.channels {
            for y in top..top + height {
                let start = self.index(c, y, left);
                data.extend_from_slice(&self.data[start..start + width]);
            }
        }
        Tensor::from_vec(height, width, self.channels, data)
    }

    /// Selects the given channels, in order.
    pub fn select_channels(&self, indices: &[usize]) -> Result<Tensor> {
        if indices.is_empty() {
            return Err(Error::shape("channel selection is empty"));
        }
        let n = self.plane_len();
        let mut data = Vec::with_capacity(n * indices.len());
        for &c in indices {
            if c >= self.channels {
                return Err(Error::shape(format!(
                    "channel {c} out of range for {} channels",
                    self.channels
                )));
            }
            data.extend_from_slice(self.plane(c));
        }
        Tensor::from_vec(self.height, self.width, indices.len(), data)
    }

    /// Stacks tensors of identical spatial size along the channel axis.
    pub fn concat_channels(parts: &[Tensor]) -> Result<Tensor> {
        let first = parts
            .first()
            .ok_or_else(|| Error::shape("nothing to concatenate"))?;
        let mut data = Vec::new();
        let mut channels = 0;
        for p in parts {
            if p.height != first.height || p.width != first.width {
                return Err(Error::shape(format!(
                    "cannot concatenate {}x{} with {}x{}",
                    first.height, first.width, p.height, p.width
                )));
            }
            data.extend_from_slice(&p.data);
            channels += p.channels;
        }
        Tensor::from_vec(first.height, first.width, channels, data)
    }

    /// Circular shift: the value at `(y, x)` moves to `(y + dy, x + dx)` modulo the grid.
    pub fn roll(&self, dy: isize, dx: isize) -> Tensor {
        let (h, w) = (self.height as isize, self.width as isize);
        let mut out = Tensor::zeros(self.height, self.width, self.channels);
        for c in 0..self.channels {
            for y in 0..h {
                let ty = (y + dy).rem_euclid(h) as usize;
                for x in 0..w {
                    let tx = (x + dx).rem_euclid(w) as usize;
                    let v = self.at(c, y as usize, x as usize);
                    out.set(c, ty, tx, v);
                }
            }
        }
        out
    }

    /// Row-major argmax of one channel; ties resolve to the smallest index.
    pub fn argmax(&self, c: usize) -> (usize, usize) {
        let plane = self.plane(c);
        let mut best = 0;
        for (i, &v) in plane.iter().enumerate() {
            if v > plane[best] {
                best = i;
            }
        }
        (best / self.width, best % self.width)
    }
}
