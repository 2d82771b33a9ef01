use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::adaptation::{self, AdapterBank};
use crate::error::{Error, Result};
use crate::kcf::KcfParams;
use crate::network::NetworkSpec;

/// Tracker settings, loadable from a JSON file. Missing keys take defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    pub kcf: KcfParams,
    /// Input window side over KCF window side, minus one.
    pub margin: f64,
    /// Side of the square network input, pixels.
    pub input_side: usize,
    /// One weight per network tap, in tap order. `None` picks
    /// (0.02, 0.5, 1.0) for three taps and uniform weights otherwise.
    pub fusion_weights: Option<Vec<f32>>,
    /// Update the filters every `update_interval` frames.
    pub update_interval: usize,
    /// `identity`, `random:SEED`, or a path to an adapter manifest.
    pub adapter: Option<String>,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            kcf: KcfParams::default(),
            margin: 0.10,
            input_side: 224,
            fusion_weights: None,
            update_interval: 1,
            adapter: None,
        }
    }
}

impl TrackerConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: TrackerConfig = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        self.kcf.validate()?;
        if !(self.margin >= 0.0) {
            return Err(Error::Config(format!("margin must be non-negative, got {}", self.margin)));
        }
        if self.input_side < 8 {
            return Err(Error::Config(format!("input side {} is too small", self.input_side)));
        }
        if self.update_interval == 0 {
            return Err(Error::Config("update interval must be at least 1".into()));
        }
        if let Some(w) = &self.fusion_weights {
            if w.iter().any(|v| !v.is_finite() || *v < 0.0) || w.iter().all(|&v| v == 0.0) {
                return Err(Error::Config("fusion weights must be non-negative and not all zero".into()));
            }
        }
        Ok(())
    }

    /// Fusion weights for `n_taps` taps.
    pub fn resolved_fusion_weights(&self, n_taps: usize) -> Result<Vec<f32>> {
        match &self.fusion_weights {
            Some(w) if w.len() == n_taps => Ok(w.clone()),
            Some(w) => Err(Error::Config(format!(
                "{} fusion weights for {n_taps} taps",
                w.len()
            ))),
            None if n_taps == 3 => Ok(vec![0.02, 0.5, 1.0]),
            None => Ok(vec![1.0; n_taps]),
        }
    }
}

/// Where adaptation banks come from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AdapterSource {
    Identity,
    Random(u64),
    File(PathBuf),
}

impl FromStr for AdapterSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "identity" {
            return Ok(AdapterSource::Identity);
        }
        if let Some(seed) = s.strip_prefix("random:") {
            return seed
                .parse()
                .map(AdapterSource::Random)
                .map_err(|_| Error::Config(format!("bad random adapter seed `{seed}`")));
        }
        if s.is_empty() {
            return Err(Error::Config("empty adapter source".into()));
        }
        Ok(AdapterSource::File(PathBuf::from(s)))
    }
}

impl AdapterSource {
    pub fn build(&self, spec: &NetworkSpec) -> Result<Vec<AdapterBank>> {
        let banks = match self {
            AdapterSource::Identity => adaptation::identity_banks(spec)?,
            AdapterSource::Random(seed) => adaptation::random_banks(spec, *seed)?,
            AdapterSource::File(path) => adaptation::load_adapter(path)?,
        };
        adaptation::validate_banks(&banks, spec)?;
        Ok(banks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_config_takes_defaults() {
        let cfg: TrackerConfig = serde_json::from_str(r#"{"margin": 0.2, "kcf": {"eta": 0.05}}"#).unwrap();
        assert_eq!(cfg.margin, 0.2);
        assert_eq!(cfg.kcf.eta, 0.05);
        assert_eq!(cfg.kcf.lambda, 1e-4);
        assert_eq!(cfg.input_side, 224);
        cfg.validate().unwrap();
    }

    #[test]
    fn fusion_defaults() {
        let cfg = TrackerConfig::default();
        assert_eq!(cfg.resolved_fusion_weights(3).unwrap(), vec![0.02, 0.5, 1.0]);
        assert_eq!(cfg.resolved_fusion_weights(1).unwrap(), vec![1.0]);
        let cfg = TrackerConfig { fusion_weights: Some(vec![1.0, 2.0]), ..Default::default() };
        assert!(cfg.resolved_fusion_weights(3).is_err());
    }

    #[test]
    fn adapter_sources() {
        assert_eq!("identity".parse::<AdapterSource>().unwrap(), AdapterSource::Identity);
        assert_eq!("random:17".parse::<AdapterSource>().unwrap(), AdapterSource::Random(17));
        assert!("random:x".parse::<AdapterSource>().is_err());
        assert_eq!(
            "a/b.json".parse::<AdapterSource>().unwrap(),
            AdapterSource::File(PathBuf::from("a/b.json"))
        );
    }

    #[test]
    fn invalid_values() {
        let bad = [
            TrackerConfig { margin: -0.1, ..Default::default() },
            TrackerConfig { update_interval: 0, ..Default::default() },
            TrackerConfig { fusion_weights: Some(vec![0.0, 0.0]), ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err());
        }
    }
}
