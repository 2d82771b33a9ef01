//! One-pass evaluation curves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tracker::Rect;

/// Center-error thresholds 0..=50 px.
pub const PRECISION_POINTS: usize = 51;
/// Overlap thresholds 0, 0.05, ..., 1.
pub const SUCCESS_POINTS: usize = 21;
pub const DP_THRESHOLD: f64 = 20.0;

pub fn center_error(a: &Rect, b: &Rect) -> f64 {
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    (ax - bx).hypot(ay - by)
}

pub fn iou(a: &Rect, b: &Rect) -> f64 {
    let iw = ((a.x + a.w).min(b.x + b.w) - a.x.max(b.x)).max(0.0);
    let ih = ((a.y + a.h).min(b.y + b.h) - a.y.max(b.y)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

pub fn success_threshold(k: usize) -> f64 {
    k as f64 / (SUCCESS_POINTS - 1) as f64
}

/// Frames after the first, checked for equal length.
fn scored<'a>(results: &'a [Rect], gt: &'a [Rect]) -> Result<impl Iterator<Item = (&'a Rect, &'a Rect)>> {
    if results.len() != gt.len() {
        return Err(Error::Data(format!("{} results for {} ground-truth frames", results.len(), gt.len())));
    }
    if results.len() < 2 {
        return Err(Error::Data("need at least 2 frames to score".into()));
    }
    Ok(results.iter().zip(gt).skip(1))
}

fn fraction(hits: usize, total: usize) -> f64 {
    hits as f64 / total as f64
}

pub fn precision_curve(results: &[Rect], gt: &[Rect]) -> Result<Vec<f64>> {
    let errors: Vec<f64> = scored(results, gt)?.map(|(r, g)| center_error(r, g)).collect();
    Ok((0..PRECISION_POINTS)
        .map(|t| fraction(errors.iter().filter(|&&e| e <= t as f64).count(), errors.len()))
        .collect())
}

/// The zero threshold counts frames with any overlap at all, so a tracker
/// that never touches the target scores zero everywhere.
pub fn success_curve(results: &[Rect], gt: &[Rect]) -> Result<Vec<f64>> {
    let overlaps: Vec<f64> = scored(results, gt)?.map(|(r, g)| iou(r, g)).collect();
    Ok((0..SUCCESS_POINTS)
        .map(|k| {
            let hits = if k == 0 {
                overlaps.iter().filter(|&&o| o > 0.0).count()
            } else {
                let s = success_threshold(k);
                overlaps.iter().filter(|&&o| o >= s).count()
            };
            fraction(hits, overlaps.len())
        })
        .collect())
}

pub fn auc(success: &[f64]) -> f64 {
    if success.is_empty() {
        return 0.0;
    }
    success.iter().sum::<f64>() / success.len() as f64
}

pub fn dp_at(results: &[Rect], gt: &[Rect], threshold: f64) -> Result<f64> {
    let pairs: Vec<_> = scored(results, gt)?.collect();
    let hits = pairs.iter().filter(|(r, g)| center_error(r, g) <= threshold).count();
    Ok(fraction(hits, pairs.len()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalCurves {
    pub precision: Vec<f64>,
    pub success: Vec<f64>,
    pub dp20: f64,
    pub auc: f64,
    /// Tracked frames per second, initialization excluded.
    pub fps: f64,
}

impl EvalCurves {
    pub fn compute(results: &[Rect], gt: &[Rect], fps: f64) -> Result<Self> {
        let precision = precision_curve(results, gt)?;
        let success = success_curve(results, gt)?;
        Ok(EvalCurves {
            dp20: precision[DP_THRESHOLD as usize],
            auc: auc(&success),
            precision,
            success,
            fps,
        })
    }

    /// Pointwise unweighted mean.
    pub fn mean(curves: &[EvalCurves]) -> Option<EvalCurves> {
        let n = curves.len();
        if n == 0 {
            return None;
        }
        let avg = |f: &dyn Fn(&EvalCurves) -> &[f64], len: usize| -> Vec<f64> {
            (0..len).map(|i| curves.iter().map(|c| f(c)[i]).sum::<f64>() / n as f64).collect()
        };
        let scalar = |f: &dyn Fn(&EvalCurves) -> f64| curves.iter().map(f).sum::<f64>() / n as f64;
        let precision = avg(&|c| &c.precision, PRECISION_POINTS);
        let success = avg(&|c| &c.success, SUCCESS_POINTS);
        Some(EvalCurves {
            dp20: precision[DP_THRESHOLD as usize],
            auc: auc(&success),
            precision,
            success,
            fps: scalar(&|c| c.fps),
        })
    }
}
