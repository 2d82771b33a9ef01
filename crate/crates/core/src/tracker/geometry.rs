use serde::{Deserialize, Serialize};

use crate::network::InputNorm;
use crate::tensor::Tensor;

/// Axis-aligned box in image pixels, top-left origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Rect { x, y, w, h }
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Rect {
            x: cx - w / 2.0,
            y: cy - h / 2.0,
            w,
            h,
        }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    /// Shrinks the box to lie within a `width × height` image, keeping at least one pixel.
    pub fn clamp_to(&self, width: f64, height: f64) -> Rect {
        let x0 = self.x.clamp(0.0, (width - 1.0).max(0.0));
        let y0 = self.y.clamp(0.0, (height - 1.0).max(0.0));
        let x1 = (self.x + self.w).clamp(x0 + 1.0, width.max(x0 + 1.0));
        let y1 = (self.y + self.h).clamp(y0 + 1.0, height.max(y0 + 1.0));
        Rect::new(x0, y0, x1 - x0, y1 - y0)
    }
}

/// A window given by its center and side lengths, in image pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowGeometry {
    pub center_x: f64,
    pub center_y: f64,
    pub side_w: f64,
    pub side_h: f64,
}

impl WindowGeometry {
    pub fn new(center_x: f64, center_y: f64, side_w: f64, side_h: f64) -> Self {
        WindowGeometry {
            center_x,
            center_y,
            side_w,
            side_h,
        }
    }

    pub fn left(&self) -> f64 {
        self.center_x - self.side_w / 2.0
    }

    pub fn right(&self) -> f64 {
        self.center_x + self.side_w / 2.0
    }

    pub fn top(&self) -> f64 {
        self.center_y - self.side_h / 2.0
    }

    pub fn bottom(&self) -> f64 {
        self.center_y + self.side_h / 2.0
    }

    /// Same size, new center.
    pub fn recentered(&self, center_x: f64, center_y: f64) -> Self {
        WindowGeometry {
            center_x,
            center_y,
            ..*self
        }
    }

    /// True when all four edges of `inner` lie within `self` (closed bounds).
    pub fn contains(&self, inner: &WindowGeometry) -> bool {
        inner.left() >= self.left()
            && inner.right() <= self.right()
            && inner.top() >= self.top()
            && inner.bottom() <= self.bottom()
    }
}

/// KCF window (`rho` × target, same center) and the input window fed to the
/// network (`1 + margin` × KCF window, same center).
pub fn compute_windows(target: &Rect, rho: f64, margin: f64) -> (WindowGeometry, WindowGeometry) {
    let (cx, cy) = target.center();
    let kcf = WindowGeometry::new(cx, cy, rho * target.w, rho * target.h);
    let input = WindowGeometry::new(cx, cy, (1.0 + margin) * kcf.side_w, (1.0 + margin) * kcf.side_h);
    (kcf, input)
}

/// Samples `window` from an RGB image (0–255, 3 channels) onto an
/// `out_side × out_side` grid: corner-aligned bilinear sampling, edge pixels
/// replicated outside the image, then channel reordering and mean subtraction.
pub fn crop_patch(image: &Tensor, window: &WindowGeometry, out_side: usize, norm: &InputNorm) -> Tensor {
    assert_eq!(image.channels(), 3, "crop_patch expects an RGB image");
    assert!(out_side > 0);
    let (ih, iw) = (image.height(), image.width());
    let xs = sample_positions(window.left(), window.side_w, out_side, iw);
    let ys = sample_positions(window.top(), window.side_h, out_side, ih);
    let mut out = Tensor::zeros(out_side, out_side, 3);
    for c in 0..3 {
        let src = image.plane(norm.source_channel(c));
        let mean = norm.mean[c];
        let dst = out.plane_mut(c);
        for (oy, &(y0, y1, fy)) in ys.iter().enumerate() {
            let r0 = &src[y0 * iw..(y0 + 1) * iw];
            let r1 = &src[y1 * iw..(y1 + 1) * iw];
            for (ox, &(x0, x1, fx)) in xs.iter().enumerate() {
                let top = r0[x0] + (r0[x1] - r0[x0]) * fx;
                let bottom = r1[x0] + (r1[x1] - r1[x0]) * fx;
                dst[oy * out_side + ox] = top + (bottom - top) * fy - mean;
            }
        }
    }
    out
}

/// Pixel pairs and weights for `n` corner-aligned samples across
/// `[start, start + side - 1]`, clamped into `[0, limit - 1]`.
fn sample_positions(start: f64, side: f64, n: usize, limit: usize) -> Vec<(usize, usize, f32)> {
    let max = (limit - 1) as f64;
    let step = if n > 1 { (side - 1.0) / (n - 1) as f64 } else { 0.0 };
    let offset = if n > 1 { 0.0 } else { (side - 1.0) / 2.0 };
    (0..n)
        .map(|i| {
            let pos = (start + offset + i as f64 * step).clamp(0.0, max);
            let p0 = pos.floor();
            let i0 = p0 as usize;
            let i1 = (i0 + 1).min(limit - 1);
            (i0, i1, (pos - p0) as f32)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::ChannelOrder;
    use crate::ops::corner_aligned_taps;

    #[test]
    fn windows_from_target() {
        let t = Rect::from_center(100.0, 100.0, 40.0, 40.0);
        let (kcf, input) = compute_windows(&t, 2.5, 0.1);
        assert_eq!((kcf.center_x, kcf.center_y, kcf.side_w, kcf.side_h), (100.0, 100.0, 100.0, 100.0));
        assert!((input.side_w - 110.0).abs() < 1e-9 && (input.side_h - 110.0).abs() < 1e-9);
        assert_eq!((input.center_x, input.center_y), (100.0, 100.0));
        assert!(input.contains(&kcf));

        let (kcf, input) = compute_windows(&t, 2.5, 0.0);
        assert_eq!(kcf, input);
    }

    #[test]
    fn corner_aligned_sampling_agrees_with_resize() {
        for (a, b) in [(5, 3), (3, 7), (10, 10), (6, 1)] {
            assert_eq!(corner_aligned_taps(a, b), sample_positions(0.0, a as f64, b, a), "{a}->{b}");
        }
    }

    fn gradient_image(h: usize, w: usize) -> Tensor {
        Tensor::from_fn(h, w, 3, |c, y, x| (x as f32) * 2.0 + (y as f32) * 0.5 + c as f32 * 10.0)
    }

    #[test]
    fn pixel_exact_crop() {
        let img = gradient_image(30, 40);
        let norm = InputNorm { order: ChannelOrder::Rgb, mean: [1.0, 2.0, 3.0] };
        let win = WindowGeometry::new(15.0, 12.0, 10.0, 10.0);
        let p = crop_patch(&img, &win, 10, &norm);
        for c in 0..3 {
            for y in 0..10 {
                for x in 0..10 {
                    assert_eq!(p.at(c, y, x), img.at(c, 7 + y, 10 + x) - norm.mean[c]);
                }
            }
        }
    }

    #[test]
    fn bgr_reorders_channels() {
        let img = gradient_image(8, 8);
        let rgb = InputNorm { order: ChannelOrder::Rgb, mean: [0.0; 3] };
        let bgr = InputNorm { order: ChannelOrder::Bgr, mean: [0.0; 3] };
        let win = WindowGeometry::new(4.0, 4.0, 8.0, 8.0);
        let a = crop_patch(&img, &win, 8, &rgb);
        let b = crop_patch(&img, &win, 8, &bgr);
        assert_eq!(a.plane(0), b.plane(2));
        assert_eq!(a.plane(1), b.plane(1));
    }

    #[test]
    fn outside_pixels_replicate_edges() {
        let img = gradient_image(20, 20);
        let norm = InputNorm { order: ChannelOrder::Rgb, mean: [0.0; 3] };
        // left half of the window hangs off the image
        let win = WindowGeometry::new(0.0, 10.0, 10.0, 10.0);
        let p = crop_patch(&img, &win, 10, &norm);
        for y in 0..10 {
            for x in 0..=5 {
                assert_eq!(p.at(0, y, x), img.at(0, 5 + y, 0));
            }
            assert_eq!(p.at(0, y, 6), img.at(0, 5 + y, 1));
        }
    }

    #[test]
    fn downscale_matches_bilinear_oracle() {
        let img = gradient_image(40, 40);
        let norm = InputNorm { order: ChannelOrder::Rgb, mean: [0.0; 3] };
        let win = WindowGeometry::new(20.0, 20.0, 32.0, 32.0);
        let p = crop_patch(&img, &win, 16, &norm);
        // the image is affine in (x, y), so bilinear sampling is exact
        for y in 0..16 {
            for x in 0..16 {
                let sx = 4.0 + x as f64 * 31.0 / 15.0;
                let sy = 4.0 + y as f64 * 31.0 / 15.0;
                let expected = sx * 2.0 + sy * 0.5;
                assert!((p.at(0, y, x) as f64 - expected).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn clamp_keeps_box_inside() {
        let r = Rect::new(-5.0, 10.0, 20.0, 100.0).clamp_to(50.0, 60.0);
        assert_eq!(r, Rect::new(0.0, 10.0, 15.0, 50.0));
    }
}
