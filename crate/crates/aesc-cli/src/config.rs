//! Experiment configuration: one TOML document fully determines a run.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Deserialize;

use aesc_core::data::DatasetName;
use aesc_core::phy::{ChannelConfig, ChannelFamily, Tap};

use crate::HarnessError;

/// Tap entry as written in the config file.
#[derive(Debug, Clone, Deserialize)]
pub struct TapConfig {
    pub re: f64,
    #[serde(default)]
    pub im: f64,
    pub delay: usize,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ChannelSection {
    pub family: String,
    pub snr_db: Vec<f64>,
    #[serde(default)]
    pub taps: Vec<TapConfig>,
}

#[derive(Debug, Clone, Deserialize, Default)]
pub struct BaselineSection {
    #[serde(default)]
    pub direct: bool,
    #[serde(default)]
    pub codec_cmd: Vec<String>,
    #[serde(default = "default_quality")]
    pub codec_quality: u8,
}

fn default_quality() -> u8 {
    60
}

#[derive(Debug, Clone, Deserialize, Default)]
pub struct TrainSection {
    pub lr: Option<f32>,
    pub batch_size: Option<usize>,
    pub max_epochs: Option<usize>,
    pub patience: Option<usize>,
    /// Cap on training images (0 = full set), for reduced-scale runs.
    #[serde(default)]
    pub max_train_images: usize,
    /// Cap on validation images (0 = full split).
    #[serde(default)]
    pub max_val_images: usize,
    pub gamma: Option<f64>,
    /// Epoch budget for the classifier (defaults to 8).
    pub classifier_epochs: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
struct RawConfig {
    dataset: String,
    z_dims: Vec<usize>,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_frames")]
    frames_per_point: usize,
    #[serde(default)]
    output_dir: Option<PathBuf>,
    #[serde(default)]
    model_dir: Option<PathBuf>,
    #[serde(default)]
    amortize_decoder: bool,
    /// Reconstructed-image dumps per grid point (for report mosaics).
    #[serde(default = "default_samples")]
    sample_images: usize,
    channel: ChannelSection,
    #[serde(default)]
    baselines: BaselineSection,
    #[serde(default)]
    train: TrainSection,
}

fn default_frames() -> usize {
    200
}

fn default_samples() -> usize {
    1
}

/// Validated experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub dataset: DatasetName,
    pub z_dims: Vec<usize>,
    pub seed: u64,
    pub frames_per_point: usize,
    pub output_dir: PathBuf,
    pub model_dir: PathBuf,
    pub amortize_decoder: bool,
    pub sample_images: usize,
    pub channel_family: ChannelFamily,
    pub snr_db: Vec<f64>,
    pub taps: Vec<Tap>,
    pub baselines: BaselineSection,
    pub train: TrainSection,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        let dataset = DatasetName::parse(&raw.dataset)
            .ok_or_else(|| HarnessError::Config(format!("unknown dataset '{}'", raw.dataset)))?;
        let channel_family = ChannelFamily::parse(&raw.channel.family).ok_or_else(|| {
            HarnessError::Config(format!("unknown channel family '{}'", raw.channel.family))
        })?;
        if raw.z_dims.is_empty() {
            return Err(HarnessError::Config("z_dims must not be empty".into()));
        }
        if raw.channel.snr_db.is_empty() {
            return Err(HarnessError::Config("channel.snr_db must not be empty".into()));
        }
        if raw.frames_per_point == 0 {
            return Err(HarnessError::Config("frames_per_point must be positive".into()));
        }
        let taps: Vec<Tap> = raw
            .channel
            .taps
            .iter()
            .map(|t| Tap {
                gain: Complex64::new(t.re, t.im),
                delay: t.delay,
            })
            .collect();
        if channel_family == ChannelFamily::MultipathTdl {
            if taps.is_empty() {
                return Err(HarnessError::Config(
                    "multipath_tdl channel requires channel.taps".into(),
                ));
            }
            let power: f64 = taps.iter().map(|t| t.gain.norm_sqr()).sum();
            if (power - 1.0).abs() > 1e-6 {
                return Err(HarnessError::Config(format!(
                    "tap powers must sum to 1, got {power}"
                )));
            }
        }
        Ok(Self {
            dataset,
            z_dims: raw.z_dims,
            seed: raw.seed,
            frames_per_point: raw.frames_per_point,
            output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from("out")),
            model_dir: raw.model_dir.unwrap_or_else(|| PathBuf::from("models")),
            amortize_decoder: raw.amortize_decoder,
            sample_images: raw.sample_images,
            channel_family,
            snr_db: raw.channel.snr_db,
            taps,
            baselines: raw.baselines,
            train: raw.train,
        })
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_toml_str(&text)
    }

    /// Channel configuration at one SNR point.
    pub fn channel_at(&self, snr_db: f64) -> ChannelConfig {
        ChannelConfig {
            family: self.channel_family,
            snr_db,
            taps: self.taps.clone(),
            seed: self.seed,
        }
    }

    /// Decoder-parameter quantizer width: 16-bit for CIFAR-10, 8 for MNIST.
    pub fn param_bits(&self) -> u8 {
        match self.dataset {
            DatasetName::Mnist => 8,
            DatasetName::Cifar10 => 16,
        }
    }
}
