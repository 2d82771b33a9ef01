//! Adapted feature maps of the last network pass, reusable while the KCF
//! window stays inside the input window they were computed for.

use crate::error::Result;
use crate::tensor::Tensor;

use super::geometry::WindowGeometry;

/// One tap's adapted map and its placement in image coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct CachedTap {
    pub adapted: Tensor,
    /// Image pixels per map cell, horizontally and vertically.
    pub stride_x: f64,
    pub stride_y: f64,
    /// Image position of the top-left corner of cell (0, 0).
    pub origin_x: f64,
    pub origin_y: f64,
}

impl CachedTap {
    /// Places `adapted` so that it spans `window` exactly.
    pub fn spanning(adapted: Tensor, window: &WindowGeometry) -> Self {
        CachedTap {
            stride_x: window.side_w / adapted.width() as f64,
            stride_y: window.side_h / adapted.height() as f64,
            origin_x: window.left(),
            origin_y: window.top(),
            adapted,
        }
    }

    /// Cell offsets of `needed`'s top-left corner, clamped so that a
    /// `rows × cols` crop fits inside the map.
    pub fn crop_origin(&self, needed: &WindowGeometry, rows: usize, cols: usize) -> (usize, usize) {
        let clamp = |off: isize, size: usize, len: usize| off.clamp(0, len.saturating_sub(size) as isize) as usize;
        let dy = cell_offset(needed.top() - self.origin_y, self.stride_y);
        let dx = cell_offset(needed.left() - self.origin_x, self.stride_x);
        (
            clamp(dy, rows, self.adapted.height()),
            clamp(dx, cols, self.adapted.width()),
        )
    }

    pub fn crop(&self, needed: &WindowGeometry, rows: usize, cols: usize) -> Result<Tensor> {
        let rows = rows.min(self.adapted.height());
        let cols = cols.min(self.adapted.width());
        let (top, left) = self.crop_origin(needed, rows, cols);
        self.adapted.crop(top, left, rows, cols)
    }
}

/// Pixel displacement to whole cells: nearest, ties away from zero.
pub fn cell_offset(delta_px: f64, stride: f64) -> isize {
    (delta_px / stride).round() as isize
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeatureCache {
    pub input_window: Option<WindowGeometry>,
    pub taps: Vec<CachedTap>,
    /// Cleared whenever a new frame arrives.
    pub valid: bool,
}

impl FeatureCache {
    /// Hit predicate: the cache holds maps of the current frame and `needed`
    /// lies entirely inside their input window.
    pub fn covers(&self, needed: &WindowGeometry) -> bool {
        self.valid && self.input_window.is_some_and(|w| w.contains(needed))
    }

    pub fn store(&mut self, input_window: WindowGeometry, taps: Vec<CachedTap>) {
        self.input_window = Some(input_window);
        self.taps = taps;
        self.valid = true;
    }

    pub fn invalidate(&mut self) {
        self.valid = false;
    }
}
