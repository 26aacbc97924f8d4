//! The training loop around [`TrainState::train_step`]: batching,
//! periodic checkpoints, the CSV loss log and resumption.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::info;
use seanet_core::{DiscriminatorSpec, GeneratorSpec, LossReport, TrainConfig, TrainState};
use serde::{Deserialize, Serialize};

use crate::checkpoint;
use crate::dataset::{BatchStream, Dataset, Purpose};
use crate::error::{Error, Result};

pub const LOG_FILE: &str = "train_log.csv";
pub const CHECKPOINT_DIR: &str = "ckpt";
const LOG_HEADER: [&str; 5] = ["step", "d_loss", "g_adv", "g_rec", "g_total"];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub step: u64,
    pub d_loss: f32,
    pub g_adv: f32,
    pub g_rec: f32,
    pub g_total: f32,
}

impl LogRow {
    pub fn new(step: u64, r: &LossReport) -> Self {
        Self {
            step,
            d_loss: r.d_loss,
            g_adv: r.g_adv_loss,
            g_rec: r.g_rec_loss,
            g_total: r.g_total,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitOptions {
    /// Run directory; receives `ckpt/` and the loss log.
    pub out_dir: PathBuf,
    /// Continue from the newest checkpoint in `out_dir` when there is one.
    pub resume: bool,
    /// Batches built ahead on a background thread (0 = inline).
    pub prefetch: usize,
    /// Stop after this step even if `total_steps` is larger, as an
    /// interrupted run would.
    pub stop_after: Option<u64>,
    /// Stored verbatim in every checkpoint's config.
    pub run: serde_json::Value,
}

impl FitOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self {
            out_dir: out_dir.into(),
            resume: false,
            prefetch: 2,
            stop_after: None,
            run: serde_json::Value::Null,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitOutcome {
    /// Last checkpoint written; evaluation uses this one and no other.
    pub checkpoint: PathBuf,
    pub state: TrainState,
    /// Rows logged by this invocation.
    pub rows: Vec<LogRow>,
}

pub fn read_log(path: &Path) -> Result<Vec<LogRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::format(path, e))?;
    reader
        .deserialize()
        .collect::<std::result::Result<Vec<LogRow>, _>>()
        .map_err(|e| Error::format(path, e))
}

/// Rewrites the log keeping rows up to `step`, so a resumed run appends
/// after its checkpoint instead of after whatever was logged later.
fn truncate_log(path: &Path, step: u64) -> Result<()> {
    let rows: Vec<LogRow> = if path.exists() {
        read_log(path)?.into_iter().filter(|r| r.step <= step).collect()
    } else {
        Vec::new()
    };
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::format(path, e))?;
    w.write_record(LOG_HEADER).map_err(|e| Error::format(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::format(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn append_row(file: &mut fs::File, path: &Path, row: &LogRow) -> Result<()> {
    writeln!(
        file,
        "{},{},{},{},{}",
        row.step, row.d_loss, row.g_adv, row.g_rec, row.g_total
    )
    .map_err(|e| Error::io(path, e))
}

/// Trains for `config.total_steps` steps and returns the final checkpoint.
pub fn fit(
    config: &TrainConfig,
    dataset: Arc<Dataset>,
    generator: GeneratorSpec,
    discriminator: DiscriminatorSpec,
    opts: &FitOptions,
) -> Result<FitOutcome> {
    config.validate()?;
    if generator.in_channels != dataset.input_channels() {
        return Err(Error::Config(format!(
            "generator takes {} input channels, the dataset provides {}",
            generator.in_channels,
            dataset.input_channels()
        )));
    }
    let ckpt_root = opts.out_dir.join(CHECKPOINT_DIR);
    fs::create_dir_all(&ckpt_root).map_err(|e| Error::io(&ckpt_root, e))?;

    let resumed = if opts.resume { checkpoint::latest(&ckpt_root)? } else { None };
    let mut state = match &resumed {
        Some(dir) => {
            let (mut state, meta) = checkpoint::load_state(dir)?;
            // the schedule length and checkpoint spacing may change, so a
            // finished run can be extended
            let comparable = TrainConfig {
                total_steps: config.total_steps,
                checkpoint_every: config.checkpoint_every,
                ..meta.train.clone()
            };
            if comparable != *config || meta.generator != generator || meta.discriminator != discriminator {
                return Err(Error::Checkpoint(format!(
                    "{} was written with a different configuration",
                    dir.display()
                )));
            }
            if state.step > config.total_steps {
                return Err(Error::Checkpoint(format!(
                    "{} is already past step {}",
                    dir.display(),
                    config.total_steps
                )));
            }
            state.config = config.clone();
            info!("resuming from {} at step {}", dir.display(), state.step);
            state
        }
        None => TrainState::new(config.clone(), generator, discriminator)?,
    };

    let log_path = opts.out_dir.join(LOG_FILE);
    truncate_log(&log_path, state.step)?;
    let mut log = fs::OpenOptions::new()
        .append(true)
        .open(&log_path)
        .map_err(|e| Error::io(&log_path, e))?;

    let end = opts.stop_after.map_or(config.total_steps, |s| s.min(config.total_steps));
    let stream = BatchStream::new(
        dataset.clone(),
        config.seed,
        config.batch_size,
        state.step,
        end.max(state.step),
        opts.prefetch,
    );
    let mut rows = Vec::new();
    let mut last_ckpt = resumed;
    for batch in stream {
        let batch = batch?;
        let report = state.train_step(&batch.input, &batch.target)?;
        let row = LogRow::new(state.step, &report);
        append_row(&mut log, &log_path, &row)?;
        rows.push(row);
        let at_end = state.step == config.total_steps;
        if state.step % config.checkpoint_every == 0 || at_end {
            last_ckpt = Some(checkpoint::save(&ckpt_root, &state, opts.run.clone())?);
        }
        if state.step % 50 == 0 || at_end {
            info!(
                "step {} d={:.4} adv={:.4} rec={:.5}",
                state.step, report.d_loss, report.g_adv_loss, report.g_rec_loss
            );
        }
    }
    let checkpoint = match last_ckpt {
        Some(p) if checkpoint::read_meta(&p)?.step == state.step => p,
        _ => checkpoint::save(&ckpt_root, &state, opts.run.clone())?,
    };
    Ok(FitOutcome { checkpoint, state, rows })
}

/// Trains the 1-in/1-out variant that maps clean audio to the
/// accelerometer signal; same losses and discriminators, accelerometer
/// domain target.
pub fn train_accel_synth(
    config: &TrainConfig,
    dataset: Arc<Dataset>,
    base_channels: usize,
    discriminator: DiscriminatorSpec,
    opts: &FitOptions,
) -> Result<FitOutcome> {
    if dataset.purpose() != Purpose::AccelSynth {
        return Err(Error::Config("accelerometer synthesis needs a paired dataset".into()));
    }
    let spec = GeneratorSpec::single_input().with_base_channels(base_channels);
    fit(config, dataset, spec, discriminator, opts)
}
