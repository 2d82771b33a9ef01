//! One-pass evaluation: initialize on the first ground-truth box, then
//! track every later frame once without resets.

use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::tracker::{FeatureExtractor, Rect, Tracker, TrackerConfig};

use super::dataset::{load_frame, SequenceMeta};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceResult {
    pub name: String,
    pub rects: Vec<Rect>,
    /// Tracked frames per second, decoding excluded.
    pub fps: f64,
    /// Same, decoding included.
    pub fps_with_io: f64,
    pub frames: usize,
    pub forward_passes: usize,
    pub single_forward_frames: usize,
    pub failure: Option<String>,
}

impl SequenceResult {
    fn failed(seq: &SequenceMeta, reason: String) -> Self {
        SequenceResult {
            name: seq.name.clone(),
            rects: Vec::new(),
            fps: 0.0,
            fps_with_io: 0.0,
            frames: seq.len(),
            forward_passes: 0,
            single_forward_frames: 0,
            failure: Some(reason),
        }
    }

    pub fn forward_pass_ratio(&self) -> f64 {
        if self.frames == 0 {
            0.0
        } else {
            self.forward_passes as f64 / self.frames as f64
        }
    }
}

fn rate(frames: usize, elapsed: Duration) -> f64 {
    let secs = elapsed.as_secs_f64();
    if secs > 0.0 {
        frames as f64 / secs
    } else {
        f64::INFINITY
    }
}

/// Runs one sequence. With `preload` all frames are decoded before the
/// clock starts; otherwise decoding is timed separately in the loop.
pub fn run_ope(
    extractor: Arc<FeatureExtractor>,
    config: &TrackerConfig,
    seq: &SequenceMeta,
    preload: bool,
) -> Result<SequenceResult> {
    if seq.len() < 2 || seq.len() != seq.ground_truth.len() {
        return Err(Error::Data(format!("{}: malformed sequence", seq.name)));
    }
    let mut decode = Duration::ZERO;
    let mut load = |i: usize| -> Result<Tensor> {
        let t0 = Instant::now();
        let frame = load_frame(&seq.frames[i]);
        if i > 0 {
            decode += t0.elapsed();
        }
        frame
    };

    let preloaded = if preload {
        Some((0..seq.len()).map(&mut load).collect::<Result<Vec<_>>>()?)
    } else {
        None
    };
    let first = match &preloaded {
        Some(frames) => frames[0].clone(),
        None => load(0)?,
    };
    let mut tracker = match Tracker::init(extractor, &first, seq.init_rect(), config.clone()) {
        Ok(t) => t,
        Err(e) => return Ok(SequenceResult::failed(seq, e.to_string())),
    };
    drop(first);

    let mut rects = Vec::with_capacity(seq.len());
    rects.push(tracker.target());
    let mut tracking = Duration::ZERO;
    for i in 1..seq.len() {
        let owned;
        let frame = match &preloaded {
            Some(frames) => &frames[i],
            None => {
                owned = load(i)?;
                &owned
            }
        };
        let t0 = Instant::now();
        let rect = tracker.track_frame(frame)?;
        tracking += t0.elapsed();
        rects.push(rect);
    }
    drop(load);

    let tracked = seq.len() - 1;
    let state = tracker.state();
    Ok(SequenceResult {
        name: seq.name.clone(),
        rects,
        fps: rate(tracked, tracking),
        fps_with_io: rate(tracked, tracking + decode),
        frames: state.frames,
        forward_passes: state.forward_passes,
        single_forward_frames: state.single_forward_frames,
        failure: None,
    })
}

/// Runs every sequence, `jobs` at a time, results in input order.
pub fn run_benchmark(
    extractor: Arc<FeatureExtractor>,
    config: &TrackerConfig,
    sequences: &[SequenceMeta],
    preload: bool,
    jobs: usize,
) -> Result<Vec<SequenceResult>> {
    let run = |seq: &SequenceMeta| run_ope(extractor.clone(), config, seq, preload);
    #[cfg(feature = "parallel")]
    if jobs > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {jobs} workers: {e}")))?;
        return pool.install(|| sequences.par_iter().map(run).collect());
    }
    let _ = jobs;
    sequences.iter().map(run).collect()
}
