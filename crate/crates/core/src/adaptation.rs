//! Channel-reducing adaptation of backbone features.
//!
//! Each tapped layer with `K` channels gets an [`AdapterBank`] that produces
//! `K/8` channels on the same spatial grid. A learned bank runs several
//! "same"-padded convolutions of different kernel sizes in parallel and
//! concatenates their outputs (two scales of `K/16` channels each by default).
//! Two reference modes exist for comparison: identity (features pass through
//! untouched) and random selection of a fixed subset of `K/8` channels.
//!
//! Adapter files use the same manifest + blob convention as networks, with a
//! `banks[]` array of `{source_tap, in_channels, mode, scales[], scale_out[]?, seed?}`.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::blob;
use crate::error::{Error, Result};
use crate::network::{relative_name, NetworkSpec};
use crate::ops::{self, ConvKernel};
use crate::tensor::Tensor;

/// Total channel reduction of learned and random banks.
pub const REDUCTION: usize = 8;

/// Default kernel sizes of a learned bank.
pub const DEFAULT_SCALES: [usize; 2] = [3, 5];

/// One square convolution of a learned bank, applied with "same" padding.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaleFilter {
    kernel: ConvKernel,
}

impl ScaleFilter {
    pub fn new(kernel: ConvKernel) -> Result<Self> {
        kernel.validate()?;
        if kernel.kernel_h != kernel.kernel_w {
            return Err(Error::Config(format!(
                "adaptation kernels must be square, got {}x{}",
                kernel.kernel_h, kernel.kernel_w
            )));
        }
        if kernel.kernel_h % 2 == 0 {
            return Err(Error::Config(format!(
                "adaptation kernel size must be odd, got {}",
                kernel.kernel_h
            )));
        }
        Ok(ScaleFilter { kernel })
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel.kernel_h
    }

    pub fn out_channels(&self) -> usize {
        self.kernel.out_channels
    }

    pub fn kernel(&self) -> &ConvKernel {
        &self.kernel
    }

    fn apply(&self, features: &Tensor) -> Result<Tensor> {
        ops::conv2d(features, &self.kernel, 1, (self.kernel_size() - 1) / 2)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum AdapterMode {
    Learned(Vec<ScaleFilter>),
    Identity,
    Random { seed: u64, channels: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdapterBank {
    source_tap: String,
    in_channels: usize,
    mode: AdapterMode,
}

impl AdapterBank {
    pub fn learned(source_tap: impl Into<String>, in_channels: usize, scales: Vec<ScaleFilter>) -> Result<Self> {
        let source_tap = source_tap.into();
        if scales.is_empty() {
            return Err(Error::Config(format!("bank `{source_tap}` has no scales")));
        }
        if in_channels % REDUCTION != 0 {
            return Err(Error::Config(format!(
                "bank `{source_tap}`: {in_channels} channels are not divisible by {REDUCTION}"
            )));
        }
        for s in &scales {
            if s.kernel.in_channels != in_channels {
                return Err(Error::Config(format!(
                    "bank `{source_tap}`: {}x{} filter reads {} channels, expected {in_channels}",
                    s.kernel_size(),
                    s.kernel_size(),
                    s.kernel.in_channels
                )));
            }
        }
        let total: usize = scales.iter().map(ScaleFilter::out_channels).sum();
        if total != in_channels / REDUCTION {
            return Err(Error::Config(format!(
                "bank `{source_tap}`: scales produce {total} channels, expected {}",
                in_channels / REDUCTION
            )));
        }
        Ok(AdapterBank {
            source_tap,
            in_channels,
            mode: AdapterMode::Learned(scales),
        })
    }

    /// Learned bank with the given kernel sizes, each producing an equal
    /// share of `K/8` channels, weights drawn uniformly from ±1/√fan_in.
    pub fn learned_random(source_tap: impl Into<String>, in_channels: usize, sizes: &[usize], seed: u64) -> Result<Self> {
        let per_scale = equal_split(in_channels, sizes.len())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scales = sizes
            .iter()
            .map(|&s| {
                let mut k = ConvKernel::zeros(per_scale, in_channels, s, s);
                let bound = 1.0 / ((in_channels * s * s) as f32).sqrt();
                for w in &mut k.weights {
                    *w = rng.random_range(-bound..bound);
                }
                ScaleFilter::new(k)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::learned(source_tap, in_channels, scales)
    }

    pub fn identity(source_tap: impl Into<String>, in_channels: usize) -> Self {
        AdapterBank {
            source_tap: source_tap.into(),
            in_channels,
            mode: AdapterMode::Identity,
        }
    }

    pub fn random(source_tap: impl Into<String>, in_channels: usize, seed: u64) -> Result<Self> {
        let channels = random_select_channels(in_channels, 1.0 / REDUCTION as f64, seed)?;
        Ok(AdapterBank {
            source_tap: source_tap.into(),
            in_channels,
            mode: AdapterMode::Random { seed, channels },
        })
    }

    pub fn source_tap(&self) -> &str {
        &self.source_tap
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn mode(&self) -> &AdapterMode {
        &self.mode
    }

    pub fn out_channels(&self) -> usize {
        match &self.mode {
            AdapterMode::Identity => self.in_channels,
            AdapterMode::Learned(_) | AdapterMode::Random { .. } => self.in_channels / REDUCTION,
        }
    }

    /// Adapts one feature map; spatial dims are always preserved.
    pub fn apply(&self, features: &Tensor) -> Result<Tensor> {
        if features.channels() != self.in_channels {
            return Err(Error::shape(format!(
                "bank `{}` expects {} channels, got {}",
                self.source_tap,
                self.in_channels,
                features.channels()
            )));
        }
        match &self.mode {
            AdapterMode::Identity => Ok(features.clone()),
            AdapterMode::Random { channels, .. } => features.select_channels(channels),
            AdapterMode::Learned(scales) => {
                let parts = scales
                    .iter()
                    .map(|s| s.apply(features))
                    .collect::<Result<Vec<_>>>()?;
                Tensor::concat_channels(&parts)
            }
        }
    }
}

pub fn apply_adapter(features: &Tensor, bank: &AdapterBank) -> Result<Tensor> {
    bank.apply(features)
}

fn equal_split(in_channels: usize, n_scales: usize) -> Result<usize> {
    let target = in_channels / REDUCTION;
    if n_scales == 0 || in_channels % REDUCTION != 0 || target % n_scales != 0 {
        return Err(Error::Config(format!(
            "{in_channels} channels cannot be split evenly over {n_scales} scales at {REDUCTION}:1"
        )));
    }
    Ok(target / n_scales)
}

/// Uniform sample of `fraction·k` distinct channel indices, sorted ascending.
///
/// Partial Fisher–Yates over a ChaCha8 stream seeded with `seed`, so the
/// selection is reproducible across runs and platforms.
pub fn random_select_channels(k: usize, fraction: f64, seed: u64) -> Result<Vec<usize>> {
    let exact = k as f64 * fraction;
    let m = exact.round();
    if !(fraction > 0.0 && fraction <= 1.0) || (exact - m).abs() > 1e-9 || m < 1.0 {
        return Err(Error::Config(format!(
            "selecting a fraction {fraction} of {k} channels is not a positive whole number"
        )));
    }
    let m = m as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..k).collect();
    for i in 0..m {
        let j = rng.random_range(i..k);
        idx.swap(i, j);
    }
    idx.truncate(m);
    idx.sort_unstable();
    Ok(idx)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ModeTag {
    Learned,
    Identity,
    Random,
}

#[derive(Debug, Serialize, Deserialize)]
struct BankDescriptor {
    source_tap: String,
    in_channels: usize,
    mode: ModeTag,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    scales: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scale_out: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct AdapterManifest {
    banks: Vec<BankDescriptor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    blob: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    blob_sha_or_crc: Option<String>,
}

/// Reads an adapter manifest (and its blob, when any bank is learned).
pub fn load_adapter(path: &Path) -> Result<Vec<AdapterBank>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: AdapterManifest = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
    if manifest.banks.is_empty() {
        return Err(Error::Manifest("adapter file declares no banks".into()));
    }

    let needs_blob = manifest.banks.iter().any(|b| b.mode == ModeTag::Learned);
    let values = if needs_blob {
        let expected = manifest
            .blob_sha_or_crc
            .as_deref()
            .map(blob::parse_crc)
            .transpose()?;
        blob::read(&blob::resolve_path(path, manifest.blob.as_deref()), expected)?
    } else {
        Vec::new()
    };
    let mut cursor = blob::Cursor::new(&values);

    let mut banks = Vec::with_capacity(manifest.banks.len());
    for d in &manifest.banks {
        let bank = match d.mode {
            ModeTag::Identity => AdapterBank::identity(&d.source_tap, d.in_channels),
            ModeTag::Random => {
                let seed = d.seed.ok_or_else(|| {
                    Error::Manifest(format!("random bank `{}` has no seed", d.source_tap))
                })?;
                AdapterBank::random(&d.source_tap, d.in_channels, seed)?
            }
            ModeTag::Learned => {
                let outs = match &d.scale_out {
                    Some(o) if o.len() == d.scales.len() => o.clone(),
                    Some(_) => {
                        return Err(Error::Manifest(format!(
                            "bank `{}`: scale_out and scales differ in length",
                            d.source_tap
                        )))
                    }
                    None => vec![equal_split(d.in_channels, d.scales.len())?; d.scales.len()],
                };
                let mut scales = Vec::with_capacity(d.scales.len());
                for (&size, &out) in d.scales.iter().zip(&outs) {
                    let n = out * d.in_channels * size * size;
                    let short = || {
                        Error::layer(
                            &d.source_tap,
                            format!("adapter blob ends inside the {size}x{size} filter"),
                        )
                    };
                    let weights = cursor.take(n).ok_or_else(short)?.to_vec();
                    let bias = cursor.take(out).ok_or_else(short)?.to_vec();
                    scales.push(ScaleFilter::new(ConvKernel::new(
                        out,
                        d.in_channels,
                        size,
                        size,
                        weights,
                        bias,
                    )?)?);
                }
                AdapterBank::learned(&d.source_tap, d.in_channels, scales)?
            }
        };
        banks.push(bank);
    }
    if cursor.remaining() != 0 {
        return Err(Error::Manifest(format!(
            "adapter blob has {} unused trailing floats",
            cursor.remaining()
        )));
    }
    Ok(banks)
}

/// Writes an adapter manifest; learned weights go to `blob_path`, which is
/// not created when no bank is learned.
pub fn save_adapter(banks: &[AdapterBank], manifest_path: &Path, blob_path: &Path) -> Result<()> {
    let mut payload = Vec::new();
    let mut descriptors = Vec::with_capacity(banks.len());
    for b in banks {
        let mut d = BankDescriptor {
            source_tap: b.source_tap.clone(),
            in_channels: b.in_channels,
            mode: ModeTag::Identity,
            scales: Vec::new(),
            scale_out: None,
            seed: None,
        };
        match &b.mode {
            AdapterMode::Identity => {}
            AdapterMode::Random { seed, .. } => {
                d.mode = ModeTag::Random;
                d.seed = Some(*seed);
            }
            AdapterMode::Learned(scales) => {
                d.mode = ModeTag::Learned;
                d.scales = scales.iter().map(ScaleFilter::kernel_size).collect();
                d.scale_out = Some(scales.iter().map(ScaleFilter::out_channels).collect());
                for s in scales {
                    payload.extend_from_slice(&s.kernel.weights);
                    payload.extend_from_slice(&s.kernel.bias);
                }
            }
        }
        descriptors.push(d);
    }
    let mut manifest = AdapterManifest {
        banks: descriptors,
        blob: None,
        blob_sha_or_crc: None,
    };
    if banks.iter().any(|b| matches!(b.mode, AdapterMode::Learned(_))) {
        let crc = blob::write(blob_path, &payload)?;
        manifest.blob = Some(relative_name(manifest_path, blob_path));
        manifest.blob_sha_or_crc = Some(blob::format_crc(crc));
    }
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::json(manifest_path, e))?;
    fs::write(manifest_path, text).map_err(|e| Error::io(manifest_path, e))
}

/// Checks that banks line up one-to-one with the network's taps and that each
/// bank reads the channel count its tap produces.
pub fn validate_banks(banks: &[AdapterBank], spec: &NetworkSpec) -> Result<()> {
    if banks.len() != spec.taps.len() {
        return Err(Error::Config(format!(
            "{} adapter banks for {} network taps",
            banks.len(),
            spec.taps.len()
        )));
    }
    for (bank, tap) in banks.iter().zip(&spec.taps) {
        if bank.source_tap != *tap {
            return Err(Error::Config(format!(
                "adapter bank `{}` does not match tap `{tap}`",
                bank.source_tap
            )));
        }
        let k = spec.channels_at(tap)?;
        if k != bank.in_channels {
            return Err(Error::Config(format!(
                "tap `{tap}` has {k} channels but its bank expects {}",
                bank.in_channels
            )));
        }
    }
    Ok(())
}

/// One bank per tap, all in the same mode.
pub fn identity_banks(spec: &NetworkSpec) -> Result<Vec<AdapterBank>> {
    spec.taps
        .iter()
        .map(|t| Ok(AdapterBank::identity(t, spec.channels_at(t)?)))
        .collect()
}

/// Random-selection banks; tap `i` uses `seed + i`.
pub fn random_banks(spec: &NetworkSpec, seed: u64) -> Result<Vec<AdapterBank>> {
    spec.taps
        .iter()
        .enumerate()
        .map(|(i, t)| AdapterBank::random(t, spec.channels_at(t)?, seed.wrapping_add(i as u64)))
        .collect()
}

/// Untrained learned-size banks (default scales), for throughput measurements.
pub fn random_learned_banks(spec: &NetworkSpec, seed: u64) -> Result<Vec<AdapterBank>> {
    spec.taps
        .iter()
        .enumerate()
        .map(|(i, t)| {
            AdapterBank::learned_random(t, spec.channels_at(t)?, &DEFAULT_SCALES, seed.wrapping_add(i as u64))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize, c: usize) -> Tensor {
        Tensor::from_fn(h, w, c, |c, y, x| ((c * 31 + y * 7 + x * 3) % 17) as f32 * 0.1 - 0.8)
    }

    #[test]
    fn identity_passes_through() {
        let x = ramp(5, 4, 16);
        let bank = AdapterBank::identity("t", 16);
        assert_eq!(bank.apply(&x).unwrap(), x);
        assert!(bank.apply(&ramp(5, 4, 8)).is_err());
    }

    #[test]
    fn learned_channel_arithmetic() {
        let bank = AdapterBank::learned_random("t", 256, &[3, 5], 1).unwrap();
        let y = bank.apply(&ramp(6, 7, 256)).unwrap();
        assert_eq!(y.shape(), (6, 7, 32));
        assert_eq!(bank.out_channels(), 32);
        assert!(AdapterBank::learned_random("t", 24, &[3, 5], 1).is_err());
    }

    #[test]
    fn learned_rejects_wrong_total() {
        let scales = vec![
            ScaleFilter::new(ConvKernel::zeros(2, 16, 3, 3)).unwrap(),
            ScaleFilter::new(ConvKernel::zeros(2, 16, 5, 5)).unwrap(),
        ];
        assert!(AdapterBank::learned("t", 16, scales).is_err());
    }

    #[test]
    fn even_kernels_are_rejected() {
        assert!(ScaleFilter::new(ConvKernel::zeros(1, 16, 4, 4)).is_err());
    }

    #[test]
    fn random_selection_basics() {
        let one = random_select_channels(8, 0.125, 3).unwrap();
        assert_eq!(one.len(), 1);
        assert!(one[0] < 8);
        assert_eq!(random_select_channels(512, 0.125, 42).unwrap(), random_select_channels(512, 0.125, 42).unwrap());
        assert!(random_select_channels(12, 0.125, 0).is_err());

        let sel = random_select_channels(512, 0.125, 9).unwrap();
        assert_eq!(sel.len(), 64);
        assert!(sel.windows(2).all(|w| w[0] < w[1]));

        let bank = AdapterBank::random("t", 16, 4).unwrap();
        let x = ramp(3, 3, 16);
        let y = bank.apply(&x).unwrap();
        assert_eq!(y.channels(), 2);
        if let AdapterMode::Random { channels, .. } = bank.mode() {
            assert_eq!(y.plane(1), x.plane(channels[1]));
        }
    }
}
