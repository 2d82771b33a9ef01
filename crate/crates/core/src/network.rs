//! Sequential conv/relu/maxpool networks loaded from a JSON manifest plus a raw
//! weight blob, evaluated forward-only with named feature taps.
//!
//! Manifest fields: `layers[]` (`name`, `kind`, `kh`, `kw`, `in`, `out`,
//! `stride`, `pad`), `taps[]`, `input_mean[3]`, optional `channel_order`
//! (`bgr` by default), optional `blob` (path relative to the manifest) and
//! `blob_sha_or_crc` (`crc32:xxxxxxxx`). The blob stores, for every conv layer
//! in manifest order, its weights `[out][in][kh][kw]` followed by its bias.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::blob;
use crate::error::{Error, Result};
use crate::ops::{self, ConvKernel};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Conv,
    Relu,
    Maxpool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    #[serde(default)]
    pub kh: usize,
    #[serde(default)]
    pub kw: usize,
    /// Input channels; 0 means "inherit" for relu/maxpool.
    #[serde(rename = "in", default)]
    pub in_channels: usize,
    #[serde(rename = "out", default)]
    pub out_channels: usize,
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default)]
    pub pad: usize,
}

fn one() -> usize {
    1
}

impl LayerSpec {
    /// Conv layer with "same" padding and stride 1.
    pub fn conv_same(name: &str, kernel: usize, in_channels: usize, out_channels: usize) -> Self {
        LayerSpec {
            name: name.to_string(),
            kind: LayerKind::Conv,
            kh: kernel,
            kw: kernel,
            in_channels,
            out_channels,
            stride: 1,
            pad: (kernel - 1) / 2,
        }
    }

    pub fn relu(name: &str) -> Self {
        LayerSpec {
            name: name.to_string(),
            kind: LayerKind::Relu,
            kh: 0,
            kw: 0,
            in_channels: 0,
            out_channels: 0,
            stride: 1,
            pad: 0,
        }
    }

    pub fn maxpool(name: &str, size: usize) -> Self {
        LayerSpec {
            name: name.to_string(),
            kind: LayerKind::Maxpool,
            kh: size,
            kw: size,
            in_channels: 0,
            out_channels: 0,
            stride: size,
            pad: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelOrder {
    Rgb,
    #[default]
    Bgr,
}

/// How RGB pixels are turned into network input: channel reordering, then
/// per-channel mean subtraction (means given in network channel order).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InputNorm {
    pub order: ChannelOrder,
    pub mean: [f32; 3],
}

impl InputNorm {
    /// Index into an RGB pixel for network input channel `c`.
    pub fn source_channel(&self, c: usize) -> usize {
        match self.order {
            ChannelOrder::Rgb => c,
            ChannelOrder::Bgr => 2 - c,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub layers: Vec<LayerSpec>,
    pub taps: Vec<String>,
    pub input_mean: [f32; 3],
    #[serde(default)]
    pub channel_order: ChannelOrder,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blob: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blob_sha_or_crc: Option<String>,
}

const INPUT_CHANNELS: usize = 3;

impl NetworkSpec {
    /// Checks names, kinds and the channel chain. Returns the channel count
    /// after every layer.
    pub fn validate(&self) -> Result<Vec<usize>> {
        if self.layers.is_empty() {
            return Err(Error::Manifest("network has no layers".into()));
        }
        let mut seen = HashSet::new();
        let mut channels = INPUT_CHANNELS;
        let mut chain = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            if !seen.insert(l.name.as_str()) {
                return Err(Error::layer(&l.name, "duplicate layer name"));
            }
            if l.stride == 0 {
                return Err(Error::layer(&l.name, "stride must be at least 1"));
            }
            match l.kind {
                LayerKind::Conv => {
                    if l.kh == 0 || l.kw == 0 || l.out_channels == 0 {
                        return Err(Error::layer(&l.name, "conv layer needs kh, kw and out ≥ 1"));
                    }
                    if l.in_channels != channels {
                        return Err(Error::layer(
                            &l.name,
                            format!("declares {} input channels but receives {channels}", l.in_channels),
                        ));
                    }
                    channels = l.out_channels;
                }
                LayerKind::Relu | LayerKind::Maxpool => {
                    if l.kind == LayerKind::Maxpool && (l.kh == 0 || l.kh != l.kw) {
                        return Err(Error::layer(&l.name, "maxpool needs a square kernel ≥ 1"));
                    }
                    for declared in [l.in_channels, l.out_channels] {
                        if declared != 0 && declared != channels {
                            return Err(Error::layer(
                                &l.name,
                                format!("declares {declared} channels but receives {channels}"),
                            ));
                        }
                    }
                }
            }
            chain.push(channels);
        }
        for tap in &self.taps {
            if !seen.contains(tap.as_str()) {
                return Err(Error::Manifest(format!("tap `{tap}` is not a layer")));
            }
        }
        Ok(chain)
    }

    pub fn layer_index(&self, name: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.name == name)
    }

    /// Channel count produced by the named layer.
    pub fn channels_at(&self, name: &str) -> Result<usize> {
        let chain = self.validate()?;
        let i = self
            .layer_index(name)
            .ok_or_else(|| Error::Manifest(format!("tap `{name}` not found")))?;
        Ok(chain[i])
    }

    /// Cumulative spatial stride of the named layer's output.
    pub fn stride_at(&self, name: &str) -> Result<usize> {
        let i = self
            .layer_index(name)
            .ok_or_else(|| Error::Manifest(format!("tap `{name}` not found")))?;
        Ok(self.layers[..=i].iter().map(|l| l.stride).product())
    }

    pub fn input_norm(&self) -> InputNorm {
        InputNorm {
            order: self.channel_order,
            mean: self.input_mean,
        }
    }

    pub fn conv_layers(&self) -> impl Iterator<Item = &LayerSpec> {
        self.layers.iter().filter(|l| l.kind == LayerKind::Conv)
    }

    /// The convolutional prefix of the 19-layer VGG network, through the
    /// fourth conv of the fifth block, tapped after the last rectifier of
    /// blocks 3, 4 and 5 (strides 4, 8, 16).
    pub fn vgg19_prefix() -> Self {
        let blocks: [(usize, usize); 5] = [(2, 64), (2, 128), (4, 256), (4, 512), (4, 512)];
        let mut layers = Vec::new();
        let mut cin = INPUT_CHANNELS;
        for (b, &(convs, width)) in blocks.iter().enumerate() {
            let b = b + 1;
            for i in 1..=convs {
                layers.push(LayerSpec::conv_same(&format!("conv{b}_{i}"), 3, cin, width));
                layers.push(LayerSpec::relu(&format!("relu{b}_{i}")));
                cin = width;
            }
            if b < blocks.len() {
                layers.push(LayerSpec::maxpool(&format!("pool{b}"), 2));
            }
        }
        NetworkSpec {
            layers,
            taps: vec!["relu3_4".into(), "relu4_4".into(), "relu5_4".into()],
            input_mean: [103.939, 116.779, 123.68],
            channel_order: ChannelOrder::Bgr,
            blob: None,
            blob_sha_or_crc: None,
        }
    }
}

/// Conv weights, one block per conv layer in manifest order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightStore {
    blocks: Vec<(String, ConvKernel)>,
}

impl WeightStore {
    pub fn new(blocks: Vec<(String, ConvKernel)>) -> Self {
        WeightStore { blocks }
    }

    pub fn get(&self, layer: &str) -> Option<&ConvKernel> {
        self.blocks.iter().find(|(n, _)| n == layer).map(|(_, k)| k)
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn blocks(&self) -> &[(String, ConvKernel)] {
        &self.blocks
    }

    /// He-normal weights and zero biases for every conv layer of `spec`.
    pub fn random(spec: &NetworkSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let blocks = spec
            .conv_layers()
            .map(|l| {
                let mut k = ConvKernel::zeros(l.out_channels, l.in_channels, l.kh, l.kw);
                let fan_in = (l.in_channels * l.kh * l.kw) as f32;
                let scale = (6.0 / fan_in).sqrt();
                for w in &mut k.weights {
                    *w = rng.random_range(-scale..scale);
                }
                (l.name.clone(), k)
            })
            .collect();
        WeightStore { blocks }
    }

    /// Splits a flat payload into per-layer blocks, rejecting any size mismatch.
    fn from_payload(spec: &NetworkSpec, values: &[f32]) -> Result<Self> {
        let mut cursor = blob::Cursor::new(values);
        let mut blocks = Vec::new();
        for l in spec.conv_layers() {
            let n = l.out_channels * l.in_channels * l.kh * l.kw;
            let short = |what: &str, left: usize| {
                Error::layer(
                    &l.name,
                    format!("weight blob ends inside the {what} block ({left} floats left)"),
                )
            };
            let left = cursor.remaining();
            let weights = cursor.take(n).ok_or_else(|| short("weight", left))?.to_vec();
            let left = cursor.remaining();
            let bias = cursor.take(l.out_channels).ok_or_else(|| short("bias", left))?.to_vec();
            let k = ConvKernel::new(l.out_channels, l.in_channels, l.kh, l.kw, weights, bias)
                .map_err(|e| Error::layer(&l.name, e.to_string()))?;
            blocks.push((l.name.clone(), k));
        }
        if cursor.remaining() != 0 {
            return Err(Error::Manifest(format!(
                "weight blob has {} unused trailing floats",
                cursor.remaining()
            )));
        }
        Ok(WeightStore { blocks })
    }

    fn to_payload(&self) -> Vec<f32> {
        let mut out = Vec::new();
        for (_, k) in &self.blocks {
            out.extend_from_slice(&k.weights);
            out.extend_from_slice(&k.bias);
        }
        out
    }
}

/// A validated network: spec plus matching weights. Immutable once built.
#[derive(Clone, Debug)]
pub struct Network {
    spec: NetworkSpec,
    weights: WeightStore,
}

impl Network {
    pub fn new(spec: NetworkSpec, weights: WeightStore) -> Result<Self> {
        spec.validate()?;
        let convs: Vec<&LayerSpec> = spec.conv_layers().collect();
        if convs.len() != weights.len() {
            return Err(Error::Manifest(format!(
                "{} conv layers but {} weight blocks",
                convs.len(),
                weights.len()
            )));
        }
        for (l, (name, k)) in convs.iter().zip(weights.blocks()) {
            if &l.name != name {
                return Err(Error::layer(&l.name, format!("weight block is named `{name}`")));
            }
            if (k.out_channels, k.in_channels, k.kernel_h, k.kernel_w)
                != (l.out_channels, l.in_channels, l.kh, l.kw)
            {
                return Err(Error::layer(&l.name, "weight block shape does not match the layer"));
            }
            k.validate().map_err(|e| Error::layer(&l.name, e.to_string()))?;
        }
        Ok(Network { spec, weights })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn weights(&self) -> &WeightStore {
        &self.weights
    }

    /// A single 1×1 conv mapping each input channel to itself times `scale`,
    /// tapped as `raw`, with no channel reordering.
    pub fn identity(scale: f32, input_mean: [f32; 3]) -> Self {
        let layer = LayerSpec::conv_same("raw", 1, 3, 3);
        let mut k = ConvKernel::zeros(3, 3, 1, 1);
        for c in 0..3 {
            k.weights[c * 3 + c] = scale;
        }
        let spec = NetworkSpec {
            layers: vec![layer],
            taps: vec!["raw".into()],
            input_mean,
            channel_order: ChannelOrder::Rgb,
            blob: None,
            blob_sha_or_crc: None,
        };
        Network::new(spec, WeightStore::new(vec![("raw".into(), k)])).expect("identity network is valid")
    }

    /// Raw pixel intensities centred on mid-grey and scaled to roughly [-0.5, 0.5].
    pub fn raw_intensity() -> Self {
        Self::identity(1.0 / 255.0, [127.5; 3])
    }

    pub fn load(manifest: &Path) -> Result<Self> {
        let spec = read_manifest(manifest)?;
        let blob_path = blob::resolve_path(manifest, spec.blob.as_deref());
        Self::load_with_spec(spec, &blob_path)
    }

    fn load_with_spec(spec: NetworkSpec, blob_path: &Path) -> Result<Self> {
        spec.validate()?;
        let expected = spec.blob_sha_or_crc.as_deref().map(blob::parse_crc).transpose()?;
        let values = blob::read(blob_path, expected)?;
        let weights = WeightStore::from_payload(&spec, &values)?;
        Network::new(spec, weights)
    }

    /// Writes the blob and a manifest that references it by file name.
    pub fn save(&self, manifest: &Path, blob_path: &Path) -> Result<()> {
        let crc = blob::write(blob_path, &self.weights.to_payload())?;
        let mut spec = self.spec.clone();
        spec.blob = Some(relative_name(manifest, blob_path));
        spec.blob_sha_or_crc = Some(blob::format_crc(crc));
        let text = serde_json::to_string_pretty(&spec).map_err(|e| Error::json(manifest, e))?;
        fs::write(manifest, text).map_err(|e| Error::io(manifest, e))
    }

    /// Runs the network once and returns the requested taps in order.
    pub fn forward_extract(&self, input: &Tensor, taps: &[&str]) -> Result<Vec<Tensor>> {
        forward_extract(&self.spec, &self.weights, input, taps)
    }
}

pub(crate) fn relative_name(manifest: &Path, target: &Path) -> String {
    let same_dir = manifest.parent().map(|p| p.canonicalize().ok()) == target.parent().map(|p| p.canonicalize().ok());
    if same_dir {
        if let Some(name) = target.file_name() {
            return name.to_string_lossy().into_owned();
        }
    }
    target.to_string_lossy().into_owned()
}

fn read_manifest(path: &Path) -> Result<NetworkSpec> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

/// Loads a manifest and an explicitly named blob.
pub fn load_network(manifest: &Path, blob_path: &Path) -> Result<(NetworkSpec, WeightStore)> {
    let net = Network::load_with_spec(read_manifest(manifest)?, blob_path)?;
    Ok((net.spec, net.weights))
}

/// Single forward pass; returns each tapped activation in the order requested.
pub fn forward_extract(
    spec: &NetworkSpec,
    weights: &WeightStore,
    input: &Tensor,
    taps: &[&str],
) -> Result<Vec<Tensor>> {
    if input.channels() != INPUT_CHANNELS {
        return Err(Error::shape(format!(
            "network input must have {INPUT_CHANNELS} channels, got {}",
            input.channels()
        )));
    }
    let positions = taps
        .iter()
        .map(|t| {
            spec.layer_index(t)
                .ok_or_else(|| Error::Manifest(format!("tap `{t}` not found")))
        })
        .collect::<Result<Vec<_>>>()?;
    let Some(&last) = positions.iter().max() else {
        return Ok(Vec::new());
    };

    let mut outputs: Vec<Option<Tensor>> = vec![None; taps.len()];
    let mut x = input.clone();
    for (i, l) in spec.layers[..=last].iter().enumerate() {
        x = match l.kind {
            LayerKind::Conv => {
                let k = weights
                    .get(&l.name)
                    .ok_or_else(|| Error::layer(&l.name, "no weights"))?;
                ops::conv2d(&x, k, l.stride, l.pad).map_err(|e| Error::layer(&l.name, e.to_string()))?
            }
            LayerKind::Relu => {
                ops::relu_in_place(&mut x);
                x
            }
            LayerKind::Maxpool => {
                ops::max_pool2d(&x, l.kh, l.stride).map_err(|e| Error::layer(&l.name, e.to_string()))?
            }
        };
        for (slot, &p) in outputs.iter_mut().zip(&positions) {
            if p == i {
                *slot = Some(x.clone());
            }
        }
    }
    Ok(outputs.into_iter().map(|o| o.expect("every tap visited")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vgg_prefix_shape() {
        let spec = NetworkSpec::vgg19_prefix();
        let chain = spec.validate().unwrap();
        let convs: Vec<_> = spec.conv_layers().collect();
        assert_eq!(convs.len(), 16);
        assert_eq!(convs[0].in_channels, 3);
        assert_eq!(*chain.last().unwrap(), 512);
        assert_eq!(spec.channels_at("relu3_4").unwrap(), 256);
        assert_eq!(spec.channels_at("relu4_4").unwrap(), 512);
        assert_eq!(spec.stride_at("relu3_4").unwrap(), 4);
        assert_eq!(spec.stride_at("relu4_4").unwrap(), 8);
        assert_eq!(spec.stride_at("relu5_4").unwrap(), 16);
    }

    #[test]
    fn chain_errors_name_the_layer() {
        let mut spec = NetworkSpec::vgg19_prefix();
        spec.layers[2].in_channels = 32;
        match spec.validate() {
            Err(Error::Layer { layer, .. }) => assert_eq!(layer, "conv1_2"),
            other => panic!("unexpected {other:?}"),
        }
        let mut spec = NetworkSpec::vgg19_prefix();
        spec.taps.push("fc6".into());
        assert!(spec.validate().is_err());
    }

    #[test]
    fn unknown_kind_is_rejected() {
        let text = r#"{"layers":[{"name":"x","kind":"softmax"}],"taps":[],"input_mean":[0,0,0]}"#;
        assert!(serde_json::from_str::<NetworkSpec>(text).is_err());
    }

    #[test]
    fn toy_net_matches_composed_ops() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = NetworkSpec {
            layers: vec![LayerSpec::conv_same("c", 3, 3, 4), LayerSpec::relu("r")],
            taps: vec!["c".into(), "r".into()],
            input_mean: [0.0; 3],
            channel_order: ChannelOrder::Rgb,
            blob: None,
            blob_sha_or_crc: None,
        };
        let weights = WeightStore::random(&spec, 1);
        let net = Network::new(spec, weights).unwrap();
        let x = Tensor::from_fn(5, 5, 3, |_, _, _| rng.random_range(-1.0..1.0));
        let out = net.forward_extract(&x, &["r", "c"]).unwrap();
        let conv = ops::conv2d(&x, net.weights().get("c").unwrap(), 1, 1).unwrap();
        assert_eq!(out[1], conv);
        assert_eq!(out[0], ops::relu(&conv));
        assert!(net.forward_extract(&x, &["nope"]).is_err());
        assert!(net.forward_extract(&Tensor::zeros(5, 5, 1), &["c"]).is_err());
    }

    #[test]
    fn forward_is_deterministic() {
        let net = Network::new(NetworkSpec::vgg19_prefix(), WeightStore::random(&NetworkSpec::vgg19_prefix(), 3))
            .unwrap();
        let x = Tensor::from_fn(32, 32, 3, |c, y, x| ((c * 7 + y * 3 + x) % 11) as f32 - 5.0);
        let a = net.forward_extract(&x, &["relu3_4"]).unwrap();
        let b = net.forward_extract(&x, &["relu3_4"]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].shape(), (8, 8, 256));
    }
}
