//! Command-line entry points.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use log::info;
use seanet_core::mixing::mix_parts;
use seanet_core::rng::{derive_seed, seeded};
use seanet_core::Generator;

use crate::audio::{read_wav, write_wav, Encoding};
use crate::checkpoint;
use crate::config::{AccelMode, Overrides, RunConfig, SNAPSHOT_FILE};
use crate::dataset::{align_accel, condition, AccelSource, Dataset};
use crate::error::{Error, Result};
use crate::eval::{evaluate_corpus, sweep_plot_svg, write_result, Conditioning, EvalResult, DECIMATION_SWEEP};
use crate::infer::run_padded;
use crate::manifest::{write_entries, ManifestEntry, Scenario};
use crate::trainer::{fit, train_accel_synth, FitOptions};

#[derive(Debug, Parser)]
#[command(name = "seanet", version, about = "Multimodal (microphone + accelerometer) speech enhancement")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write noisy/clean/accel WAV triples and a derived manifest
    MakeMixtures {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Train the enhancement GAN
    Train {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Train the audio-to-accelerometer synthesis model
    TrainAccelSynth {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Enhance one recording with a trained checkpoint
    Denoise {
        #[command(flatten)]
        overrides: Overrides,
        /// Noisy microphone recording
        #[arg(long)]
        input_audio: PathBuf,
        /// Aligned accelerometer recording (any rate)
        #[arg(long)]
        input_accel: Option<PathBuf>,
        /// Output WAV path
        #[arg(long)]
        output: PathBuf,
    },
    /// Compute SI-SDRi over a manifest
    Evaluate {
        #[command(flatten)]
        overrides: Overrides,
        /// Evaluate at full bandwidth and every ablation factor
        #[arg(long)]
        decimation_sweep: bool,
        /// Feed zeros instead of the accelerometer (diagnostic)
        #[arg(long)]
        zero_accel: bool,
        /// Also write an SVG plot of the sweep
        #[arg(long)]
        plot: bool,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::MakeMixtures { overrides } => make_mixtures(&RunConfig::resolve(&overrides)?).map(|_| ()),
        Command::Train { overrides } => cmd_train(&RunConfig::resolve(&overrides)?).map(|_| ()),
        Command::TrainAccelSynth { overrides } => cmd_train_accel_synth(&RunConfig::resolve(&overrides)?).map(|_| ()),
        Command::Denoise {
            overrides,
            input_audio,
            input_accel,
            output,
        } => denoise(&RunConfig::resolve(&overrides)?, &input_audio, input_accel.as_deref(), &output),
        Command::Evaluate {
            overrides,
            decimation_sweep,
            zero_accel,
            plot,
        } => {
            let conditioning = if zero_accel { Conditioning::Zeroed } else { Conditioning::Accelerometer };
            cmd_evaluate(&RunConfig::resolve(&overrides)?, decimation_sweep, conditioning, plot).map(|_| ())
        }
    }
}

fn accel_source(cfg: &RunConfig) -> Result<AccelSource> {
    Ok(match cfg.accel {
        AccelMode::Recorded => AccelSource::Recorded,
        AccelMode::None => AccelSource::Absent,
        AccelMode::Synthetic => {
            let path = cfg
                .synth_checkpoint
                .as_ref()
                .ok_or_else(|| Error::Config("accel = synthetic needs --synth-checkpoint".into()))?;
            AccelSource::Synthetic(Arc::new(checkpoint::load_generator(path)?))
        }
    })
}

fn run_json(cfg: &RunConfig) -> serde_json::Value {
    serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null)
}

/// Materializes one full-length mixture per manifest entry under
/// `out_dir`, plus `manifest.jsonl` describing them.
pub fn make_mixtures(cfg: &RunConfig) -> Result<PathBuf> {
    let manifest = cfg.load_manifest()?;
    let dataset = Dataset::load(&manifest, cfg.dataset_options(), &accel_source(cfg)?)?;
    let out = &cfg.out_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    cfg.write_snapshot(&out.join(SNAPSHOT_FILE))?;

    let mut derived = Vec::new();
    let mut lines = Vec::new();
    for (i, rec) in dataset.recordings().iter().enumerate() {
        let mut rng = seeded(derive_seed(cfg.seed, i as u64));
        let (pick, interferer) = dataset.choose_interferer(i, &mut rng)?;
        let mixture = mix_parts(&rec.clean, interferer, manifest.mix_gain_db, &mut rng)?;
        let stem = format!("{i:05}");
        let noisy = format!("{stem}_noisy.wav");
        let clean = format!("{stem}_clean.wav");
        let accel = format!("{stem}_accel.wav");
        write_wav(out.join(&noisy), &mixture.noisy, Encoding::Float32)?;
        write_wav(out.join(&clean), &rec.clean, Encoding::Float32)?;
        let accel_path = match (&rec.accel, dataset.is_audio_only()) {
            (Some(a), false) => {
                write_wav(out.join(&accel), a, Encoding::Float32)?;
                Some(PathBuf::from(&accel))
            }
            _ => None,
        };
        let interferer_id = match manifest.scenario {
            Scenario::MixedSpeech => manifest.entries[pick].speaker_id.clone(),
            Scenario::MixedNoise => manifest.noise_sources[pick].display().to_string(),
        };
        derived.push(ManifestEntry {
            clean_path: PathBuf::from(&clean),
            accel_path,
            speaker_id: rec.speaker_id.clone(),
        });
        lines.push(serde_json::json!({
            "noisy_path": noisy,
            "clean_path": clean,
            "speaker_id": rec.speaker_id,
            "interferer": interferer_id,
            "gain": mixture.gain,
        }));
    }
    write_entries(out.join("manifest.jsonl"), &derived)?;
    let mix_path = out.join("mixtures.jsonl");
    let body: String = lines.iter().map(|l| format!("{l}\n")).collect();
    fs::write(&mix_path, body).map_err(|e| Error::io(&mix_path, e))?;
    info!("wrote {} mixtures to {}", derived.len(), out.display());
    Ok(out.clone())
}

pub fn cmd_train(cfg: &RunConfig) -> Result<PathBuf> {
    let manifest = cfg.load_manifest()?;
    let dataset = Arc::new(Dataset::load(&manifest, cfg.dataset_options(), &accel_source(cfg)?)?);
    cfg.write_snapshot(&cfg.out_dir.join(SNAPSHOT_FILE))?;
    let opts = FitOptions {
        resume: cfg.resume,
        prefetch: cfg.prefetch,
        run: run_json(cfg),
        ..FitOptions::new(&cfg.out_dir)
    };
    let outcome = fit(
        &cfg.train_config(),
        dataset,
        cfg.generator_spec(),
        cfg.discriminator_spec(),
        &opts,
    )?;
    println!("{}", outcome.checkpoint.display());
    Ok(outcome.checkpoint)
}

pub fn cmd_train_accel_synth(cfg: &RunConfig) -> Result<PathBuf> {
    let manifest = cfg.load_manifest()?;
    let dataset = Arc::new(Dataset::load_paired(&manifest, cfg.dataset_options())?);
    cfg.write_snapshot(&cfg.out_dir.join(SNAPSHOT_FILE))?;
    let opts = FitOptions {
        resume: cfg.resume,
        prefetch: cfg.prefetch,
        run: run_json(cfg),
        ..FitOptions::new(&cfg.out_dir)
    };
    let outcome = train_accel_synth(
        &cfg.train_config(),
        dataset,
        cfg.base_channels,
        cfg.discriminator_spec(),
        &opts,
    )?;
    println!("{}", outcome.checkpoint.display());
    Ok(outcome.checkpoint)
}

fn load_checkpoint(cfg: &RunConfig) -> Result<Generator> {
    let path = cfg
        .checkpoint
        .as_ref()
        .ok_or_else(|| Error::Config("no checkpoint given (--checkpoint)".into()))?;
    checkpoint::load_generator(path)
}

/// Same conditioning as training, padded inference, 16 kHz output.
pub fn denoise(cfg: &RunConfig, audio: &Path, accel: Option<&Path>, output: &Path) -> Result<()> {
    let generator = load_checkpoint(cfg)?;
    let raw = read_wav(audio)?.select_channel(0)?;
    let noisy = if raw.sample_rate() == cfg.sample_rate {
        raw
    } else {
        seanet_core::signal::resample(&raw, cfg.sample_rate as i64)?
    };
    let noisy = condition(&noisy)?;
    let enhanced = if generator.spec().in_channels == 1 {
        run_padded(&generator, &[&noisy])?
    } else {
        let accel = accel.ok_or_else(|| Error::MissingModality("checkpoint needs --input-accel".into()))?;
        let channels = generator.spec().in_channels - 1;
        let aligned = align_accel(&read_wav(accel)?, channels, noisy.len(), cfg.sample_rate)?;
        let aligned = seanet_core::signal::band_limit(&aligned, cfg.decimation)?;
        run_padded(&generator, &[&noisy, &aligned])?
    };
    write_wav(output, &enhanced, Encoding::Float32)?;
    let mut snapshot = output.as_os_str().to_owned();
    snapshot.push(".config.toml");
    cfg.write_snapshot(Path::new(&snapshot))?;
    Ok(())
}

/// Evaluates one factor (the configured one) or the whole sweep; writes
/// `eval_f<factor>.{json,csv}` per factor under `out_dir`.
pub fn cmd_evaluate(cfg: &RunConfig, sweep: bool, conditioning: Conditioning, plot: bool) -> Result<Vec<EvalResult>> {
    let generator = load_checkpoint(cfg)?;
    let manifest = cfg.load_manifest()?;
    let source = if generator.spec().in_channels == 1 { AccelSource::Absent } else { accel_source(cfg)? };
    let options = crate::dataset::DatasetOptions {
        accel_decimation: 1,
        accel_channels: generator.spec().in_channels.saturating_sub(1).max(1),
        ..cfg.dataset_options()
    };
    let dataset = Dataset::load(&manifest, options, &source)?;
    cfg.write_snapshot(&cfg.out_dir.join(SNAPSHOT_FILE))?;
    let factors: Vec<i64> = if sweep { DECIMATION_SWEEP.to_vec() } else { vec![cfg.decimation] };
    let mut results = Vec::new();
    for f in factors {
        let r = evaluate_corpus(&generator, &dataset, f, cfg.seed, conditioning)?;
        info!(
            "factor {f}: mean SI-SDRi {:.2} dB (std {:.2}) over {} examples",
            r.mean_si_sdri,
            r.std_si_sdri,
            r.per_example.len()
        );
        write_result(&cfg.out_dir, &format!("eval_f{f}"), &r)?;
        results.push(r);
    }
    if plot {
        let path = cfg.out_dir.join("sweep.svg");
        fs::write(&path, sweep_plot_svg(&results)).map_err(|e| Error::io(&path, e))?;
    }
    Ok(results)
}
