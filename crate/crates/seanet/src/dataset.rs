//! Turning manifests into training examples and batches.
//!
//! Recordings are decoded and conditioned once when the [`Dataset`] is
//! built. Everything after that is a pure function of a seed: which
//! example sits at a given position of the stream, which interferer it
//! is mixed with and where it is cropped. Batch `step` can therefore be
//! rebuilt from `(seed, step)` alone, which is what makes resumed runs
//! identical to uninterrupted ones.

use std::path::Path;
use std::sync::mpsc::{sync_channel, Receiver};
use std::sync::Arc;
use std::thread::JoinHandle;

use seanet_core::example::{waveforms_to_tensor, TrainingExample};
use seanet_core::mixing::mix_parts;
use seanet_core::rng::{below, derive_seed, seeded, shuffle, Rng};
use seanet_core::signal::{band_limit, high_pass, normalize, resample, HIGH_PASS_CUTOFF_HZ};
use seanet_core::{Generator, Tensor, Waveform};
use serde::{Deserialize, Serialize};

use crate::audio::read_wav;
use crate::error::{Error, Result};
use crate::infer::synthesize_accelerometer;
use crate::manifest::{DatasetManifest, Scenario};

/// Length granularity of every example (the generator's total stride).
pub const GRANULARITY: usize = 256;
/// Default training crop: 16384 samples, 1.024 s at 16 kHz.
pub const DEFAULT_CROP: usize = 16384;
pub const DEFAULT_SAMPLE_RATE: u32 = 16000;

const TAG_ORDER: u64 = 0x0D;
const TAG_EXAMPLE: u64 = 0xE7;

/// Where the conditioning channel comes from.
#[derive(Clone, Debug)]
pub enum AccelSource {
    /// Recorded accelerometer files named by `accel_path`.
    Recorded,
    /// Synthesized from the clean audio by a 1-in/1-out generator.
    Synthetic(Arc<Generator>),
    /// No conditioning: audio-only models.
    Absent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetOptions {
    pub sample_rate: u32,
    pub crop_len: usize,
    /// Accelerometer channels kept, starting from the first axis.
    pub accel_channels: usize,
    /// Simulated accelerometer bandwidth reduction (1 = full bandwidth).
    pub accel_decimation: i64,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        Self {
            sample_rate: DEFAULT_SAMPLE_RATE,
            crop_len: DEFAULT_CROP,
            accel_channels: 1,
            accel_decimation: 1,
        }
    }
}

/// A conditioned recording: clean speech and its aligned conditioning,
/// both at the working sample rate.
#[derive(Clone, Debug)]
pub struct Recording {
    pub speaker_id: String,
    pub clean: Waveform,
    pub accel: Option<Waveform>,
}

/// High-pass then peak-quantile normalization, per channel.
pub fn condition(w: &Waveform) -> Result<Waveform> {
    Ok(normalize(&high_pass(w, HIGH_PASS_CUTOFF_HZ)?))
}

fn to_rate(w: Waveform, rate: u32) -> Result<Waveform> {
    if w.sample_rate() == rate {
        Ok(w)
    } else {
        Ok(resample(&w, rate as i64)?)
    }
}

/// Loads and conditions speech: first channel, working rate, filtered and
/// normalized.
pub fn load_speech(path: &Path, rate: u32) -> Result<Waveform> {
    let w = read_wav(path)?.select_channel(0)?;
    condition(&to_rate(w, rate)?)
}

/// Conditions an accelerometer recording at its native rate, then
/// interpolates it to the audio rate and length. Durations must agree
/// within one accelerometer sample.
pub fn align_accel(accel: &Waveform, channels: usize, audio_len: usize, audio_rate: u32) -> Result<Waveform> {
    if accel.num_channels() < channels {
        return Err(Error::MissingModality(format!(
            "accelerometer has {} channels, {channels} requested",
            accel.num_channels()
        )));
    }
    let kept = Waveform::new(accel.channels()[..channels].to_vec(), accel.sample_rate())?;
    let up = to_rate(condition(&kept)?, audio_rate)?;
    let period = (audio_rate as f64 / accel.sample_rate() as f64).ceil() as usize;
    if up.len().abs_diff(audio_len) > period.max(1) {
        return Err(Error::Config(format!(
            "accelerometer covers {} samples at {audio_rate} Hz, audio {audio_len}",
            up.len()
        )));
    }
    Ok(up.with_len(audio_len))
}

/// Builds one example: mix the whole utterance with `interferer`, then cut
/// the same window out of every signal. Offsets come from `seed`.
pub fn make_example(
    recording: &Recording,
    interferer: &Waveform,
    gain_db: f32,
    crop_len: usize,
    seed: u64,
) -> Result<TrainingExample> {
    if crop_len == 0 || crop_len % GRANULARITY != 0 {
        return Err(Error::Config(format!("crop length {crop_len} is not a multiple of {GRANULARITY}")));
    }
    let accel = recording
        .accel
        .as_ref()
        .ok_or_else(|| Error::MissingModality(format!("no accelerometer for speaker {}", recording.speaker_id)))?;
    let mut rng = seeded(seed);
    let m = mix_parts(&recording.clean, interferer, gain_db, &mut rng)?;
    let len = recording.clean.len();
    let start = if len > crop_len { below(&mut rng, len - crop_len + 1) } else { 0 };
    Ok(TrainingExample::new(
        m.noisy.window(start, crop_len),
        accel.window(start, crop_len),
        recording.clean.window(start, crop_len),
        m.interferer.window(start, crop_len),
        m.gain,
        GRANULARITY,
    )?)
}

/// What a batch teaches the generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    /// Noisy speech (+ conditioning) to clean speech.
    Enhance,
    /// Clean speech to the recorded accelerometer signal.
    AccelSynth,
}

/// Conditioned recordings and interferers of one manifest.
#[derive(Debug)]
pub struct Dataset {
    purpose: Purpose,
    manifest: DatasetManifest,
    options: DatasetOptions,
    audio_only: bool,
    recordings: Vec<Recording>,
    noise: Vec<Waveform>,
}

impl Dataset {
    /// Dataset for speech enhancement.
    pub fn load(manifest: &DatasetManifest, options: DatasetOptions, accel: &AccelSource) -> Result<Self> {
        manifest.validate()?;
        Self::load_with(Purpose::Enhance, manifest, options, accel)
    }

    /// Paired (audio, accelerometer) dataset for training the synthesis
    /// model. Every entry needs a recorded accelerometer; no interferers.
    pub fn load_paired(manifest: &DatasetManifest, options: DatasetOptions) -> Result<Self> {
        if manifest.entries.is_empty() {
            return Err(Error::EmptyDataset("manifest has no entries".into()));
        }
        if let Some(e) = manifest.entries.iter().find(|e| e.accel_path.is_none()) {
            return Err(Error::MissingModality(format!(
                "{} has no accel_path; accelerometer synthesis needs recorded pairs",
                e.clean_path.display()
            )));
        }
        let manifest = DatasetManifest {
            scenario: Scenario::MixedNoise,
            noise_sources: Vec::new(),
            ..manifest.clone()
        };
        Self::load_with(Purpose::AccelSynth, &manifest, options, &AccelSource::Recorded)
    }

    fn load_with(purpose: Purpose, manifest: &DatasetManifest, options: DatasetOptions, accel: &AccelSource) -> Result<Self> {
        if options.crop_len == 0 || options.crop_len % GRANULARITY != 0 {
            return Err(Error::Config(format!(
                "crop length {} is not a multiple of {GRANULARITY}",
                options.crop_len
            )));
        }
        if options.accel_channels == 0 && !matches!(accel, AccelSource::Absent) {
            return Err(Error::Config("accel_channels must be at least 1".into()));
        }
        let rate = options.sample_rate;
        let mut recordings = Vec::with_capacity(manifest.entries.len());
        for entry in &manifest.entries {
            let clean = load_speech(&entry.clean_path, rate)?;
            let accel = match accel {
                AccelSource::Recorded => {
                    let path = entry.accel_path.as_ref().ok_or_else(|| {
                        Error::MissingModality(format!("{} has no accel_path", entry.clean_path.display()))
                    })?;
                    align_accel(&read_wav(path)?, options.accel_channels, clean.len(), rate)?
                }
                AccelSource::Synthetic(g) => synthesize_accelerometer(&clean, Some(g))?,
                AccelSource::Absent => Waveform::mono(vec![0.0; clean.len()], rate)?,
            };
            let accel = band_limit(&accel, options.accel_decimation)?;
            recordings.push(Recording {
                speaker_id: entry.speaker_id.clone(),
                clean,
                accel: Some(accel),
            });
        }
        let noise = match (purpose, manifest.scenario) {
            (Purpose::AccelSynth, _) => Vec::new(),
            (_, Scenario::MixedNoise) => manifest
                .noise_sources
                .iter()
                .map(|p| load_speech(p, rate))
                .collect::<Result<_>>()?,
            (_, Scenario::MixedSpeech) => Vec::new(),
        };
        Ok(Self {
            purpose,
            manifest: manifest.clone(),
            options,
            audio_only: matches!(accel, AccelSource::Absent),
            recordings,
            noise,
        })
    }

    pub fn len(&self) -> usize {
        self.recordings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.recordings.is_empty()
    }

    pub fn purpose(&self) -> Purpose {
        self.purpose
    }

    pub fn options(&self) -> &DatasetOptions {
        &self.options
    }

    pub fn manifest(&self) -> &DatasetManifest {
        &self.manifest
    }

    pub fn recordings(&self) -> &[Recording] {
        &self.recordings
    }

    pub fn is_audio_only(&self) -> bool {
        self.audio_only
    }

    /// Generator input channels implied by the options.
    pub fn input_channels(&self) -> usize {
        if self.audio_only || self.purpose == Purpose::AccelSynth {
            1
        } else {
            1 + self.options.accel_channels
        }
    }

    /// Picks the interferer for recording `index`: another speaker's
    /// utterance or a noise clip, depending on the scenario. The index
    /// returned points into the recordings or the noise list respectively.
    pub fn choose_interferer(&self, index: usize, rng: &mut Rng) -> Result<(usize, &Waveform)> {
        match self.manifest.scenario {
            Scenario::MixedSpeech => {
                let speaker = &self.recordings[index].speaker_id;
                let others: Vec<usize> = (0..self.recordings.len())
                    .filter(|&i| &self.recordings[i].speaker_id != speaker)
                    .collect();
                if others.is_empty() {
                    return Err(Error::Config(format!("no interferer with a speaker other than {speaker}")));
                }
                let pick = others[below(rng, others.len())];
                Ok((pick, &self.recordings[pick].clean))
            }
            Scenario::MixedNoise => {
                let pick = below(rng, self.noise.len());
                Ok((pick, &self.noise[pick]))
            }
        }
    }

    /// Example for recording `index`, fully determined by `seed`.
    ///
    /// For accelerometer synthesis the interferer is silent, so the
    /// "noisy" channel is the clean audio itself.
    pub fn example(&self, index: usize, seed: u64) -> Result<TrainingExample> {
        if self.purpose == Purpose::AccelSynth {
            let rec = &self.recordings[index];
            let silence = Waveform::mono(vec![0.0; 1], rec.clean.sample_rate())?;
            return make_example(rec, &silence, 0.0, self.options.crop_len, seed);
        }
        let mut rng = seeded(derive_seed(seed, TAG_EXAMPLE));
        let (_, interferer) = self.choose_interferer(index, &mut rng)?;
        make_example(
            &self.recordings[index],
            interferer,
            self.manifest.mix_gain_db,
            self.options.crop_len,
            seed,
        )
    }

    /// Recording index at stream position `position`: epochs are seeded
    /// permutations of the whole dataset.
    pub fn index_at(&self, seed: u64, position: u64) -> usize {
        let n = self.len() as u64;
        let epoch = position / n;
        let mut order: Vec<usize> = (0..self.len()).collect();
        shuffle(&mut seeded(derive_seed(derive_seed(seed, TAG_ORDER), epoch)), &mut order);
        order[(position % n) as usize]
    }

    /// Batch number `step` (0-based) of the stream defined by `seed`.
    pub fn batch(&self, seed: u64, step: u64, batch_size: usize) -> Result<Batch> {
        if batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        let mut examples = Vec::with_capacity(batch_size);
        let mut indices = Vec::with_capacity(batch_size);
        for i in 0..batch_size as u64 {
            let position = step * batch_size as u64 + i;
            let index = self.index_at(seed, position);
            indices.push(index);
            examples.push(self.example(index, derive_seed(seed, position))?);
        }
        Batch::new(examples, indices, self.purpose, self.audio_only)
    }
}

/// Stacked examples ready for a training step.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub examples: Vec<TrainingExample>,
    /// Recording index of each example.
    pub indices: Vec<usize>,
    pub input: Tensor,
    pub target: Tensor,
}

impl Batch {
    pub fn new(examples: Vec<TrainingExample>, indices: Vec<usize>, purpose: Purpose, audio_only: bool) -> Result<Self> {
        let (inputs, targets): (Vec<Tensor>, Vec<Tensor>) = examples
            .iter()
            .map(|e| match purpose {
                Purpose::AccelSynth => {
                    let accel = e.accel().select_channel(0)?;
                    Ok((waveforms_to_tensor(&[e.clean()]), waveforms_to_tensor(&[&accel])))
                }
                Purpose::Enhance if audio_only => Ok((e.audio_only_input(), e.target())),
                Purpose::Enhance => Ok((e.model_input(), e.target())),
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .unzip();
        Ok(Self {
            input: Tensor::stack(&inputs)?,
            target: Tensor::stack(&targets)?,
            examples,
            indices,
        })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

/// Batches for steps `start..end` in order, optionally built ahead of time
/// on a background thread. Order never depends on timing.
#[derive(Debug)]
pub struct BatchStream {
    inner: StreamInner,
}

#[derive(Debug)]
enum StreamInner {
    Inline {
        dataset: Arc<Dataset>,
        seed: u64,
        batch_size: usize,
        next: u64,
        end: u64,
    },
    Prefetch {
        rx: Receiver<Result<Batch>>,
        worker: Option<JoinHandle<()>>,
    },
}

impl BatchStream {
    pub fn new(dataset: Arc<Dataset>, seed: u64, batch_size: usize, start: u64, end: u64, prefetch: usize) -> Self {
        if prefetch == 0 {
            return Self {
                inner: StreamInner::Inline {
                    dataset,
                    seed,
                    batch_size,
                    next: start,
                    end,
                },
            };
        }
        let (tx, rx) = sync_channel(prefetch);
        let worker = std::thread::spawn(move || {
            for step in start..end {
                if tx.send(dataset.batch(seed, step, batch_size)).is_err() {
                    break;
                }
            }
        });
        Self {
            inner: StreamInner::Prefetch {
                rx,
                worker: Some(worker),
            },
        }
    }
}

impl Iterator for BatchStream {
    type Item = Result<Batch>;

    fn next(&mut self) -> Option<Self::Item> {
        match &mut self.inner {
            StreamInner::Inline {
                dataset,
                seed,
                batch_size,
                next,
                end,
            } => {
                if *next >= *end {
                    return None;
                }
                let b = dataset.batch(*seed, *next, *batch_size);
                *next += 1;
                Some(b)
            }
            StreamInner::Prefetch { rx, .. } => rx.recv().ok(),
        }
    }
}

impl Drop for BatchStream {
    fn drop(&mut self) {
        if let StreamInner::Prefetch { rx, worker } = &mut self.inner {
            // unblock the worker before joining it
            drop(std::mem::replace(rx, sync_channel(1).1));
            if let Some(w) = worker.take() {
                let _ = w.join();
            }
        }
    }
}
