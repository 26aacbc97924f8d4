//! Resolved run configuration.
//!
//! Values come from, in increasing precedence: built-in defaults, a TOML
//! config file, `SEANET_*` environment variables, command-line flags.
//! Every command writes the resolved result next to its outputs.

use std::fs;
use std::path::{Path, PathBuf};

use seanet_core::{DiscriminatorSpec, GeneratorSpec, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetOptions, DEFAULT_CROP, DEFAULT_SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::manifest::{DatasetManifest, Scenario};

pub const SNAPSHOT_FILE: &str = "run_config.toml";

/// Source of the conditioning channel.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum AccelMode {
    /// Recorded accelerometer files from the manifest.
    #[default]
    Recorded,
    /// Synthesized from clean audio by a trained synthesis checkpoint.
    Synthetic,
    /// Audio-only model without conditioning.
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    pub noise_list: Option<PathBuf>,
    pub scenario: Scenario,
    pub gain_db: f32,
    /// Restrict the manifest to these speakers (train/test split).
    pub speakers: Option<Vec<String>>,
    pub out_dir: PathBuf,
    /// Checkpoint directory to evaluate or denoise with.
    pub checkpoint: Option<PathBuf>,
    /// Synthesis checkpoint used when `accel = "synthetic"`.
    pub synth_checkpoint: Option<PathBuf>,
    pub accel: AccelMode,
    pub accel_channels: usize,
    pub decimation: i64,
    pub sample_rate: u32,
    pub crop_len: usize,
    pub batch_size: usize,
    pub learning_rate: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub steps: u64,
    pub lambda: f32,
    pub seed: u64,
    pub checkpoint_every: u64,
    pub base_channels: usize,
    pub disc_base_channels: usize,
    pub disc_max_channels: usize,
    pub prefetch: usize,
    pub resume: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        let g = GeneratorSpec::default();
        let d = DiscriminatorSpec::default();
        Self {
            manifest: None,
            noise_list: None,
            scenario: Scenario::default(),
            gain_db: 0.0,
            speakers: None,
            out_dir: PathBuf::from("runs/default"),
            checkpoint: None,
            synth_checkpoint: None,
            accel: AccelMode::default(),
            accel_channels: 1,
            decimation: 1,
            sample_rate: DEFAULT_SAMPLE_RATE,
            crop_len: DEFAULT_CROP,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            beta1: t.beta1,
            beta2: t.beta2,
            steps: t.total_steps,
            lambda: t.lambda,
            seed: t.seed,
            checkpoint_every: t.checkpoint_every,
            base_channels: g.base_channels,
            disc_base_channels: d.base_channels,
            disc_max_channels: d.max_channels,
            prefetch: 2,
            resume: false,
        }
    }
}

/// Flag and environment overrides; unset fields leave the file value.
#[derive(Clone, Debug, Default, clap::Args)]
pub struct Overrides {
    /// TOML config file (lowest precedence after defaults)
    #[arg(long, env = "SEANET_CONFIG")]
    pub config: Option<PathBuf>,
    /// JSON-lines manifest with clean_path, accel_path, speaker_id
    #[arg(long, env = "SEANET_MANIFEST")]
    pub manifest: Option<PathBuf>,
    /// Noise clip list, one path per line
    #[arg(long, env = "SEANET_NOISE_LIST")]
    pub noise_list: Option<PathBuf>,
    #[arg(long, env = "SEANET_SCENARIO", value_enum)]
    pub scenario: Option<Scenario>,
    /// Interferer gain in dB (0 = unit mixing gain)
    #[arg(long, env = "SEANET_GAIN_DB", allow_hyphen_values = true)]
    pub gain_db: Option<f32>,
    /// Comma-separated speaker ids to keep
    #[arg(long, env = "SEANET_SPEAKERS", value_delimiter = ',')]
    pub speakers: Option<Vec<String>>,
    #[arg(long, env = "SEANET_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
    #[arg(long, env = "SEANET_CHECKPOINT")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, env = "SEANET_SYNTH_CHECKPOINT")]
    pub synth_checkpoint: Option<PathBuf>,
    #[arg(long, env = "SEANET_ACCEL", value_enum)]
    pub accel: Option<AccelMode>,
    /// Train or evaluate the audio-only variant (same as --accel none)
    #[arg(long)]
    pub audio_only: bool,
    #[arg(long, env = "SEANET_ACCEL_CHANNELS")]
    pub accel_channels: Option<usize>,
    /// Accelerometer bandwidth reduction factor (1 = full bandwidth)
    #[arg(long, env = "SEANET_DECIMATION")]
    pub decimation: Option<i64>,
    #[arg(long, env = "SEANET_SAMPLE_RATE")]
    pub sample_rate: Option<u32>,
    #[arg(long, env = "SEANET_CROP_LEN")]
    pub crop_len: Option<usize>,
    #[arg(long, env = "SEANET_BATCH_SIZE")]
    pub batch_size: Option<usize>,
    #[arg(long, env = "SEANET_LEARNING_RATE")]
    pub learning_rate: Option<f32>,
    #[arg(long, env = "SEANET_BETA1")]
    pub beta1: Option<f32>,
    #[arg(long, env = "SEANET_BETA2")]
    pub beta2: Option<f32>,
    /// Total training steps
    #[arg(long, env = "SEANET_STEPS")]
    pub steps: Option<u64>,
    #[arg(long, env = "SEANET_LAMBDA")]
    pub lambda: Option<f32>,
    #[arg(long, env = "SEANET_SEED")]
    pub seed: Option<u64>,
    #[arg(long, env = "SEANET_CHECKPOINT_EVERY")]
    pub checkpoint_every: Option<u64>,
    #[arg(long, env = "SEANET_BASE_CHANNELS")]
    pub base_channels: Option<usize>,
    #[arg(long, env = "SEANET_DISC_BASE_CHANNELS")]
    pub disc_base_channels: Option<usize>,
    #[arg(long, env = "SEANET_DISC_MAX_CHANNELS")]
    pub disc_max_channels: Option<usize>,
    /// Batches prepared ahead on a background thread
    #[arg(long, env = "SEANET_PREFETCH")]
    pub prefetch: Option<usize>,
    /// Continue from the newest checkpoint in the output directory
    #[arg(long)]
    pub resume: bool,
}

macro_rules! overlay {
    ($dst:ident, $src:ident; $($field:ident),* $(,)?) => {
        $( if let Some(v) = $src.$field.clone() { $dst.$field = v; } )*
    };
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::format(path, e))
    }

    /// Defaults, then the config file, then environment and flags.
    pub fn resolve(o: &Overrides) -> Result<Self> {
        let mut c = match &o.config {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        if o.manifest.is_some() {
            c.manifest = o.manifest.clone();
        }
        if o.noise_list.is_some() {
            c.noise_list = o.noise_list.clone();
        }
        if o.speakers.is_some() {
            c.speakers = o.speakers.clone();
        }
        if o.checkpoint.is_some() {
            c.checkpoint = o.checkpoint.clone();
        }
        if o.synth_checkpoint.is_some() {
            c.synth_checkpoint = o.synth_checkpoint.clone();
        }
        overlay!(c, o; scenario, gain_db, out_dir, accel, accel_channels, decimation, sample_rate,
            crop_len, batch_size, learning_rate, beta1, beta2, steps, lambda, seed,
            checkpoint_every, base_channels, disc_base_channels, disc_max_channels, prefetch);
        if o.audio_only {
            c.accel = AccelMode::None;
        }
        c.resume |= o.resume;
        Ok(c)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            total_steps: self.steps,
            lambda: self.lambda,
            seed: self.seed,
            checkpoint_every: self.checkpoint_every,
        }
    }

    pub fn dataset_options(&self) -> DatasetOptions {
        DatasetOptions {
            sample_rate: self.sample_rate,
            crop_len: self.crop_len,
            accel_channels: self.accel_channels,
            accel_decimation: self.decimation,
        }
    }

    pub fn generator_spec(&self) -> GeneratorSpec {
        let spec = match self.accel {
            AccelMode::None => GeneratorSpec::single_input(),
            AccelMode::Synthetic => GeneratorSpec::conditional(1),
            AccelMode::Recorded => GeneratorSpec::conditional(self.accel_channels),
        };
        spec.with_base_channels(self.base_channels)
    }

    pub fn discriminator_spec(&self) -> DiscriminatorSpec {
        DiscriminatorSpec::small(self.disc_base_channels, self.disc_max_channels)
    }

    pub fn load_manifest(&self) -> Result<DatasetManifest> {
        let path = self
            .manifest
            .as_ref()
            .ok_or_else(|| Error::Config("no manifest given (--manifest)".into()))?;
        let m = DatasetManifest::load(path, self.noise_list.as_deref(), self.scenario, self.gain_db)?;
        Ok(match &self.speakers {
            Some(s) => m.filter_speakers(s),
            None => m,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Writes the resolved configuration to `path`.
    pub fn write_snapshot(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }
}
