//! Multi-tap correlation-filter tracker over adapted network features.

pub mod cache;
pub mod config;
pub mod geometry;

use std::sync::Arc;

use crate::adaptation::AdapterBank;
use crate::error::{Error, Result};
use crate::kcf::{peak_offset, KcfModel};
use crate::network::Network;
use crate::ops::bilinear_resize;
use crate::tensor::Tensor;

pub use cache::{cell_offset, CachedTap, FeatureCache};
pub use config::{AdapterSource, TrackerConfig};
pub use geometry::{compute_windows, crop_patch, Rect, WindowGeometry};

/// Smallest target side accepted at initialization, in pixels.
pub const MIN_TARGET_SIDE: f64 = 4.0;

/// Network plus one adaptation bank per tap.
#[derive(Debug)]
pub struct FeatureExtractor {
    network: Network,
    adapters: Vec<AdapterBank>,
}

impl FeatureExtractor {
    pub fn new(network: Network, adapters: Vec<AdapterBank>) -> Result<Self> {
        crate::adaptation::validate_banks(&adapters, network.spec())?;
        Ok(FeatureExtractor { network, adapters })
    }

    /// Network with pass-through adapters.
    pub fn with_identity(network: Network) -> Result<Self> {
        let banks = crate::adaptation::identity_banks(network.spec())?;
        Self::new(network, banks)
    }

    pub fn from_source(network: Network, source: &AdapterSource) -> Result<Self> {
        let banks = source.build(network.spec())?;
        Self::new(network, banks)
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn adapters(&self) -> &[AdapterBank] {
        &self.adapters
    }

    pub fn tap_count(&self) -> usize {
        self.adapters.len()
    }

    /// One network pass over `window`, resampled to `side × side`.
    /// Returns the adapted map of every tap.
    pub fn extract(&self, image: &Tensor, window: &WindowGeometry, side: usize) -> Result<Vec<Tensor>> {
        let spec = self.network.spec();
        let patch = crop_patch(image, window, side, &spec.input_norm());
        let taps: Vec<&str> = spec.taps.iter().map(String::as_str).collect();
        let raw = self.network.forward_extract(&patch, &taps)?;
        crate::par::try_map_range(raw.len(), |i| self.adapters[i].apply(&raw[i]))
    }
}

/// Running totals for one sequence.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TrackState {
    pub frames: usize,
    pub forward_passes: usize,
    /// Frames (after the first) that needed only one network pass.
    pub single_forward_frames: usize,
}

/// Features for one KCF window, plus whether the cache served them.
#[derive(Clone, Debug)]
pub struct Fetched {
    pub features: Vec<Tensor>,
    pub cache_hit: bool,
}

pub struct Tracker {
    extractor: Arc<FeatureExtractor>,
    config: TrackerConfig,
    weights: Vec<f32>,
    models: Vec<KcfModel>,
    /// Per-tap crop size in cells, `(rows, cols)`.
    crops: Vec<(usize, usize)>,
    grid: (usize, usize),
    target: Rect,
    image_size: (f64, f64),
    cache: FeatureCache,
    state: TrackState,
}

impl std::fmt::Debug for Tracker {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tracker")
            .field("target", &self.target)
            .field("grid", &self.grid)
            .field("crops", &self.crops)
            .field("state", &self.state)
            .finish_non_exhaustive()
    }
}

impl Tracker {
    /// Trains one filter per tap on the first frame.
    pub fn init(extractor: Arc<FeatureExtractor>, image: &Tensor, rect: Rect, config: TrackerConfig) -> Result<Self> {
        config.validate()?;
        if image.channels() != 3 {
            return Err(Error::shape(format!("expected an RGB frame, got {} channels", image.channels())));
        }
        if !(rect.w >= MIN_TARGET_SIDE && rect.h >= MIN_TARGET_SIDE) {
            return Err(Error::Init(format!(
                "target {}x{} is smaller than {MIN_TARGET_SIDE} px",
                rect.w, rect.h
            )));
        }
        let image_size = (image.width() as f64, image.height() as f64);
        let target = rect.clamp_to(image_size.0, image_size.1);
        if !(target.w >= 1.0 && target.h >= 1.0) || rect.x >= image_size.0 || rect.y >= image_size.1 {
            return Err(Error::Init("target lies outside the first frame".into()));
        }
        let n_taps = extractor.tap_count();
        let weights = config.resolved_fusion_weights(n_taps)?;

        let mut tracker = Tracker {
            extractor,
            weights,
            models: Vec::with_capacity(n_taps),
            crops: Vec::new(),
            grid: (0, 0),
            target,
            image_size,
            cache: FeatureCache::default(),
            state: TrackState::default(),
            config,
        };
        let (kcf_window, input_window) = tracker.windows();
        tracker.refresh_cache(image, input_window)?;
        tracker.crops = tracker
            .cache
            .taps
            .iter()
            .map(|t| {
                let (mh, mw) = (t.adapted.height(), t.adapted.width());
                let rows = ((kcf_window.side_h / t.stride_y).round() as usize).clamp(1, mh);
                let cols = ((kcf_window.side_w / t.stride_x).round() as usize).clamp(1, mw);
                (rows, cols)
            })
            .collect();
        tracker.grid = tracker
            .crops
            .iter()
            .copied()
            .max_by_key(|&(r, c)| r * c)
            .ok_or_else(|| Error::Init("network has no taps".into()))?;
        if tracker.grid.0 < 3 || tracker.grid.1 < 3 {
            return Err(Error::Init(format!(
                "feature grid {}x{} is too small; raise input_side",
                tracker.grid.0, tracker.grid.1
            )));
        }

        let features = tracker.crop_from_cache(&kcf_window)?;
        for f in &features {
            let hann = crate::kcf::hann_window(tracker.grid.0, tracker.grid.1);
            let windowed = f.mul_plane(&hann)?;
            tracker.models.push(KcfModel::train(&windowed, &tracker.config.kcf)?);
        }
        tracker.state.frames = 1;
        Ok(tracker)
    }

    pub fn target(&self) -> Rect {
        self.target
    }

    pub fn state(&self) -> TrackState {
        self.state
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    /// Feature grid shared by every tap's filter, `(rows, cols)`.
    pub fn grid(&self) -> (usize, usize) {
        self.grid
    }

    pub fn fusion_weights(&self) -> &[f32] {
        &self.weights
    }

    fn windows(&self) -> (WindowGeometry, WindowGeometry) {
        compute_windows(&self.target, self.config.kcf.window_scale as f64, self.config.margin)
    }

    fn refresh_cache(&mut self, image: &Tensor, input_window: WindowGeometry) -> Result<()> {
        let maps = self.extractor.extract(image, &input_window, self.config.input_side)?;
        let taps = maps.into_iter().map(|m| CachedTap::spanning(m, &input_window)).collect();
        self.cache.store(input_window, taps);
        self.state.forward_passes += 1;
        Ok(())
    }

    fn crop_from_cache(&self, needed: &WindowGeometry) -> Result<Vec<Tensor>> {
        self.cache
            .taps
            .iter()
            .zip(&self.crops)
            .map(|(tap, &(rows, cols))| {
                let c = tap.crop(needed, rows, cols)?;
                Ok(if (c.height(), c.width()) == self.grid {
                    c
                } else {
                    bilinear_resize(&c, self.grid.0, self.grid.1)
                })
            })
            .collect()
    }

    /// Per-tap features on the filter grid for the KCF window `needed`,
    /// running the network only when the cached input window does not
    /// contain it.
    pub fn fetch_features(&mut self, image: &Tensor, needed: &WindowGeometry) -> Result<Fetched> {
        let cache_hit = self.cache.covers(needed);
        if !cache_hit {
            let input = WindowGeometry::new(
                needed.center_x,
                needed.center_y,
                needed.side_w * (1.0 + self.config.margin),
                needed.side_h * (1.0 + self.config.margin),
            );
            self.refresh_cache(image, input)?;
        }
        Ok(Fetched {
            features: self.crop_from_cache(needed)?,
            cache_hit,
        })
    }

    /// Per-tap responses at the current target window, without moving or
    /// updating anything. `image` must be the frame last passed to
    /// [`Tracker::init`] or [`Tracker::track_frame`].
    pub fn responses(&mut self, image: &Tensor) -> Result<Vec<Tensor>> {
        let (window, _) = self.windows();
        let fetched = self.fetch_features(image, &window)?;
        self.models
            .iter()
            .zip(&fetched.features)
            .map(|(m, f)| m.detect(&m.window(f)?))
            .collect()
    }

    /// Locates the target in a new frame and updates the filters.
    pub fn track_frame(&mut self, image: &Tensor) -> Result<Rect> {
        if (image.width() as f64, image.height() as f64) != self.image_size || image.channels() != 3 {
            return Err(Error::shape(format!(
                "frame {:?} differs from the first frame",
                image.shape()
            )));
        }
        self.cache.invalidate();
        let passes_before = self.state.forward_passes;

        let (search_window, _) = self.windows();
        let search = self.fetch_features(image, &search_window)?;
        let mut responses = Vec::with_capacity(self.models.len());
        for (model, f) in self.models.iter().zip(&search.features) {
            responses.push(model.detect(&model.window(f)?)?);
        }
        let fused = fuse_responses(&responses, &self.weights)?;
        let (dy, dx) = peak_offset(&fused);

        let cell_h = search_window.side_h / self.grid.0 as f64;
        let cell_w = search_window.side_w / self.grid.1 as f64;
        let (cx, cy) = self.target.center();
        let cx = (cx + dx as f64 * cell_w).clamp(0.0, self.image_size.0 - 1.0);
        let cy = (cy + dy as f64 * cell_h).clamp(0.0, self.image_size.1 - 1.0);
        self.target = Rect::from_center(cx, cy, self.target.w, self.target.h);

        if self.state.frames % self.config.update_interval == 0 {
            let (train_window, _) = self.windows();
            let train = self.fetch_features(image, &train_window)?;
            let eta = self.config.kcf.eta;
            for (model, f) in self.models.iter_mut().zip(&train.features) {
                let windowed = model.window(f)?;
                model.update(&windowed, eta)?;
            }
        }

        self.state.frames += 1;
        if self.state.forward_passes - passes_before == 1 {
            self.state.single_forward_frames += 1;
        }
        Ok(self.target)
    }
}

/// Weighted sum of same-sized response maps.
pub fn fuse_responses(maps: &[Tensor], weights: &[f32]) -> Result<Tensor> {
    let first = maps.first().ok_or_else(|| Error::shape("no responses to fuse"))?;
    if maps.len() != weights.len() {
        return Err(Error::shape(format!("{} responses for {} weights", maps.len(), weights.len())));
    }
    let mut out = Tensor::zeros(first.height(), first.width(), 1);
    for (m, &w) in maps.iter().zip(weights) {
        if !out.same_shape(m) {
            return Err(Error::shape(format!("response {:?} differs from {:?}", m.shape(), out.shape())));
        }
        for (o, v) in out.data_mut().iter_mut().zip(m.data()) {
            *o += w * v;
        }
    }
    Ok(out)
}
