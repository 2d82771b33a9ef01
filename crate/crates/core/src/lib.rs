//! Correlation-filter tracking on channel-reduced convolutional features.
//!
//! The crate is organised bottom-up: [`tensor`], [`ops`] and [`fft`] hold the
//! numeric kernels, [`network`] runs a fixed convolutional backbone,
//! [`adaptation`] shrinks its channels, [`kcf`] implements the filter, and
//! [`tracker`] and [`bench`] tie them to image sequences.

pub mod adaptation;
pub mod bench;
pub mod blob;
pub mod error;
pub mod fft;
pub mod kcf;
pub mod network;
pub mod ops;
pub mod par;
pub mod tensor;
pub mod tracker;

pub use adaptation::{AdapterBank, AdapterMode, ScaleFilter};
pub use error::{Error, Result};
pub use kcf::{KcfModel, KcfParams, KernelType};
pub use network::{Network, NetworkSpec, WeightStore};
pub use tensor::Tensor;
pub use tracker::{FeatureExtractor, Rect, Tracker, TrackerConfig};
