use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nqac::{chimera, DecodeMode, HardwareGraph, NestingConfig};
use crate::samplers::SamplerChoice;

/// Chimera lattice used for minor embedding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardwareSpec {
    #[serde(default = "HardwareSpec::default_side")]
    pub rows: usize,
    #[serde(default = "HardwareSpec::default_side")]
    pub cols: usize,
    #[serde(default = "HardwareSpec::default_shore")]
    pub shore: usize,
    #[serde(default)]
    pub inactive: Vec<usize>,
}

impl HardwareSpec {
    fn default_side() -> usize {
        16
    }

    fn default_shore() -> usize {
        4
    }

    pub fn build(&self) -> Result<HardwareGraph> {
        chimera(self.rows, self.cols, self.shore, self.inactive.iter().copied())
    }
}

impl Default for HardwareSpec {
    fn default() -> Self {
        HardwareSpec {
            rows: 16,
            cols: 16,
            shore: 4,
            inactive: Vec::new(),
        }
    }
}

/// Which logical model the effective temperature is fitted against.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaReference {
    /// The trained parameters as they are.
    #[default]
    Unscaled,
    /// The parameters multiplied by `alpha`, as programmed.
    Scaled,
}

/// Everything that defines one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "defaults::eta")]
    pub eta: f64,
    #[serde(default = "defaults::epochs")]
    pub epochs: usize,
    #[serde(default = "defaults::batch_size")]
    pub batch_size: usize,
    /// Use the whole dataset as a single batch.
    #[serde(default)]
    pub full_batch: bool,
    #[serde(default = "defaults::one")]
    pub alpha: f64,
    /// Nesting level `C`.
    #[serde(default = "defaults::level")]
    pub level: usize,
    #[serde(default = "defaults::one")]
    pub gamma1: f64,
    #[serde(default = "defaults::one")]
    pub gamma2: f64,
    pub sampler: SamplerChoice,
    #[serde(default = "defaults::samples_per_update")]
    pub samples_per_update: usize,
    #[serde(default)]
    pub decode: DecodeModeSetting,
    #[serde(default)]
    pub hardware: HardwareSpec,
    /// Chains file in `code_id: p1 p2 ...` form; the clique embedding otherwise.
    #[serde(default)]
    pub embedding_file: Option<PathBuf>,
    /// Compute the sample-based metrics every this many updates (0 = never).
    /// The last update of each epoch is always measured.
    #[serde(default = "defaults::metrics_every")]
    pub metrics_every: usize,
    #[serde(default)]
    pub beta_reference: BetaReference,
    /// Half-width of the uniform initialization interval.
    #[serde(default = "defaults::init_range")]
    pub init_range: f64,
    /// Reads per image for label prediction.
    #[serde(default = "defaults::predict_reads")]
    pub predict_reads: usize,
    #[serde(default)]
    pub seed: u64,
}

/// Serde-friendly wrapper so configs can say `decode = "discard_broken"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DecodeModeSetting(pub DecodeMode);

impl Default for DecodeModeSetting {
    fn default() -> Self {
        DecodeModeSetting(DecodeMode::MajorityVote)
    }
}

mod defaults {
    pub fn eta() -> f64 {
        0.01
    }
    pub fn epochs() -> usize {
        10
    }
    pub fn batch_size() -> usize {
        50
    }
    pub fn one() -> f64 {
        1.0
    }
    pub fn level() -> usize {
        1
    }
    pub fn samples_per_update() -> usize {
        10_000
    }
    pub fn metrics_every() -> usize {
        1
    }
    pub fn init_range() -> f64 {
        0.1
    }
    pub fn predict_reads() -> usize {
        100
    }
}

impl TrainConfig {
    /// Defaults around a given sampler.
    pub fn with_sampler(sampler: SamplerChoice) -> Self {
        TrainConfig {
            eta: defaults::eta(),
            epochs: defaults::epochs(),
            batch_size: defaults::batch_size(),
            full_batch: false,
            alpha: 1.0,
            level: 1,
            gamma1: 1.0,
            gamma2: 1.0,
            sampler,
            samples_per_update: defaults::samples_per_update(),
            decode: DecodeModeSetting::default(),
            hardware: HardwareSpec::default(),
            embedding_file: None,
            metrics_every: defaults::metrics_every(),
            beta_reference: BetaReference::default(),
            init_range: defaults::init_range(),
            predict_reads: defaults::predict_reads(),
            seed: 0,
        }
    }

    pub fn nesting(&self) -> Result<NestingConfig> {
        NestingConfig::new(self.level, self.gamma1)
    }

    pub fn validate(&self) -> Result<()> {
        // A zero learning rate is allowed so that a run can serve as a
        // frozen-model baseline.
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!("eta must be finite and >= 0, got {}", self.eta)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if !(self.gamma2 > 0.0 && self.gamma2 <= 1.0) {
            return Err(Error::Config(format!("gamma2 must lie in (0, 1], got {}", self.gamma2)));
        }
        self.nesting().map_err(|e| Error::Config(e.to_string()))?;
        if self.batch_size == 0 || self.samples_per_update == 0 || self.predict_reads == 0 {
            return Err(Error::Config(
                "batch_size, samples_per_update and predict_reads must be at least 1".into(),
            ));
        }
        if !(self.init_range >= 0.0 && self.init_range.is_finite()) {
            return Err(Error::Config("init_range must be finite and >= 0".into()));
        }
        self.sampler.validate().map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        config_hash(self)
    }
}

/// SHA-256 over the JSON serialization of any config value.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("configs serialize");
    Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_defaults() {
        let cfg: TrainConfig = toml::from_str("sampler = { kind = \"exact\", beta = 1.0 }").unwrap();
        assert_eq!(cfg.eta, 0.01);
        assert_eq!(cfg.epochs, 10);
        assert_eq!(cfg.batch_size, 50);
        assert_eq!(cfg.samples_per_update, 10_000);
        assert_eq!(cfg.decode.0, DecodeMode::MajorityVote);
        cfg.validate().unwrap();
        assert_eq!(cfg.hash(), cfg.clone().hash());
        assert_eq!(cfg.hash().len(), 64);

        let discard: TrainConfig =
            toml::from_str("decode = \"discard_broken\"\nsampler = { kind = \"exact\", beta = 1.0 }").unwrap();
        assert_eq!(discard.decode.0, DecodeMode::DiscardBroken);
        assert_ne!(discard.hash(), cfg.hash());
        assert!(toml::from_str::<TrainConfig>("bogus = 1\nsampler = { kind = \"exact\", beta = 1.0 }").is_err());
    }

    #[test]
    fn validation() {
        let base: TrainConfig = toml::from_str("sampler = { kind = \"exact\", beta = 1.0 }").unwrap();
        for bad in [
            TrainConfig { alpha: 0.0, ..base.clone() },
            TrainConfig { gamma1: 1.5, ..base.clone() },
            TrainConfig { gamma2: 0.0, ..base.clone() },
            TrainConfig { eta: -1.0, ..base.clone() },
            TrainConfig { level: 0, ..base.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_))));
        }
    }
}
