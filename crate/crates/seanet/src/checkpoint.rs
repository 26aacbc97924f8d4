//! Self-describing checkpoints.
//!
//! ```text
//! <root>/step-<N>/
//!     config.json               train config, model specs, step
//!     generator.safetensors
//!     discriminator.safetensors
//!     optimizer.safetensors     Adam moments of both networks
//! ```
//!
//! A checkpoint is written to a temporary sibling directory and renamed
//! into place, so a crash never leaves a half-written `step-<N>`.

use std::fs;
use std::path::{Path, PathBuf};

use safetensors::tensor::{Dtype, SafeTensors, TensorView};
use seanet_core::nn::{AdamState, ParamStore};
use seanet_core::{DiscriminatorSpec, Generator, GeneratorSpec, MultiScaleDiscriminator, TrainConfig, TrainState};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CONFIG_FILE: &str = "config.json";
const GENERATOR_FILE: &str = "generator.safetensors";
const DISCRIMINATOR_FILE: &str = "discriminator.safetensors";
const OPTIMIZER_FILE: &str = "optimizer.safetensors";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub step: u64,
    pub train: TrainConfig,
    pub generator: GeneratorSpec,
    pub discriminator: DiscriminatorSpec,
    pub generator_opt_step: u64,
    pub discriminator_opt_step: u64,
    /// Free-form run description (dataset options, scenario, ...).
    #[serde(default)]
    pub run: serde_json::Value,
}

pub fn step_dir(root: &Path, step: u64) -> PathBuf {
    root.join(format!("step-{step}"))
}

fn ckpt_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Checkpoint(format!("{}: {e}", path.display()))
}

fn to_bytes(v: &[f32]) -> Vec<u8> {
    v.iter().flat_map(|x| x.to_le_bytes()).collect()
}

fn from_bytes(b: &[u8]) -> Vec<f32> {
    b.chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect()
}

struct Owned {
    name: String,
    shape: Vec<usize>,
    bytes: Vec<u8>,
}

fn write_tensors(path: &Path, tensors: Vec<Owned>) -> Result<()> {
    let views = tensors
        .iter()
        .map(|t| {
            TensorView::new(Dtype::F32, t.shape.clone(), &t.bytes)
                .map(|v| (t.name.clone(), v))
                .map_err(|e| ckpt_err(path, e))
        })
        .collect::<Result<Vec<_>>>()?;
    let bytes = safetensors::serialize(views, &None).map_err(|e| ckpt_err(path, e))?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn store_tensors(store: &ParamStore) -> Vec<Owned> {
    store
        .iter()
        .map(|p| Owned {
            name: p.name.clone(),
            shape: p.shape.clone(),
            bytes: to_bytes(&p.value),
        })
        .collect()
}

fn moment_tensors(prefix: &str, store: &ParamStore, state: &AdamState) -> Vec<Owned> {
    let mut out = Vec::new();
    for ((p, m), v) in store.iter().zip(&state.first).zip(&state.second) {
        for (kind, data) in [("m", m), ("v", v)] {
            out.push(Owned {
                name: format!("{prefix}/{}/{kind}", p.name),
                shape: p.shape.clone(),
                bytes: to_bytes(data),
            });
        }
    }
    out
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn load_tensor(st: &SafeTensors<'_>, path: &Path, name: &str, shape: &[usize]) -> Result<Vec<f32>> {
    let t = st.tensor(name).map_err(|e| ckpt_err(path, format!("{name}: {e}")))?;
    if t.dtype() != Dtype::F32 || t.shape() != shape {
        return Err(ckpt_err(
            path,
            format!("{name}: expected f32 {shape:?}, found {:?} {:?}", t.dtype(), t.shape()),
        ));
    }
    Ok(from_bytes(t.data()))
}

fn load_store(store: &mut ParamStore, path: &Path) -> Result<()> {
    let bytes = read_file(path)?;
    let st = SafeTensors::deserialize(&bytes).map_err(|e| ckpt_err(path, e))?;
    if st.len() != store.len() {
        return Err(ckpt_err(
            path,
            format!("{} tensors on disk, model has {}", st.len(), store.len()),
        ));
    }
    for p in store.iter_mut() {
        p.value = load_tensor(&st, path, &p.name, &p.shape)?;
    }
    Ok(())
}

fn load_moments(st: &SafeTensors<'_>, path: &Path, prefix: &str, store: &ParamStore, step: u64) -> Result<AdamState> {
    let mut state = AdamState {
        step,
        first: Vec::new(),
        second: Vec::new(),
    };
    for p in store.iter() {
        state.first.push(load_tensor(st, path, &format!("{prefix}/{}/m", p.name), &p.shape)?);
        state.second.push(load_tensor(st, path, &format!("{prefix}/{}/v", p.name), &p.shape)?);
    }
    Ok(state)
}

/// Writes `state` to `<root>/step-<step>` and returns that path.
pub fn save(root: &Path, state: &TrainState, run: serde_json::Value) -> Result<PathBuf> {
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let dir = step_dir(root, state.step);
    let tmp = root.join(format!(".step-{}.tmp-{}", state.step, std::process::id()));
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
    }
    fs::create_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;

    let meta = CheckpointMeta {
        step: state.step,
        train: state.config.clone(),
        generator: state.generator.spec().clone(),
        discriminator: state.discriminator.spec().clone(),
        generator_opt_step: state.generator_opt.state.step,
        discriminator_opt_step: state.discriminator_opt.state.step,
        run,
    };
    let json = serde_json::to_string_pretty(&meta).map_err(|e| ckpt_err(&tmp, e))?;
    let cfg = tmp.join(CONFIG_FILE);
    fs::write(&cfg, json).map_err(|e| Error::io(&cfg, e))?;
    write_tensors(&tmp.join(GENERATOR_FILE), store_tensors(state.generator.params()))?;
    write_tensors(&tmp.join(DISCRIMINATOR_FILE), store_tensors(state.discriminator.params()))?;
    let mut moments = moment_tensors("generator", state.generator.params(), &state.generator_opt.state);
    moments.extend(moment_tensors(
        "discriminator",
        state.discriminator.params(),
        &state.discriminator_opt.state,
    ));
    write_tensors(&tmp.join(OPTIMIZER_FILE), moments)?;

    if dir.exists() {
        fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    fs::rename(&tmp, &dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

pub fn read_meta(dir: &Path) -> Result<CheckpointMeta> {
    let path = dir.join(CONFIG_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| ckpt_err(&path, e))
}

/// Loads only the generator, as inference needs.
pub fn load_generator(dir: &Path) -> Result<Generator> {
    let meta = read_meta(dir)?;
    let mut g = Generator::new(meta.generator, 0)?;
    load_store(g.params_mut(), &dir.join(GENERATOR_FILE))?;
    Ok(g)
}

/// Restores the full training state, optimizer moments included.
pub fn load_state(dir: &Path) -> Result<(TrainState, CheckpointMeta)> {
    let meta = read_meta(dir)?;
    let mut g = Generator::new(meta.generator.clone(), 0)?;
    load_store(g.params_mut(), &dir.join(GENERATOR_FILE))?;
    let mut d = MultiScaleDiscriminator::new(meta.discriminator.clone(), 0)?;
    load_store(d.params_mut(), &dir.join(DISCRIMINATOR_FILE))?;

    let opt_path = dir.join(OPTIMIZER_FILE);
    let bytes = read_file(&opt_path)?;
    let st = SafeTensors::deserialize(&bytes).map_err(|e| ckpt_err(&opt_path, e))?;
    let g_state = load_moments(&st, &opt_path, "generator", g.params(), meta.generator_opt_step)?;
    let d_state = load_moments(&st, &opt_path, "discriminator", d.params(), meta.discriminator_opt_step)?;

    let mut state = TrainState::from_parts(meta.train.clone(), g, d, meta.step);
    state.generator_opt.state = g_state;
    state.discriminator_opt.state = d_state;
    Ok((state, meta))
}

/// Highest-numbered `step-<N>` directory under `root`, if any.
pub fn latest(root: &Path) -> Result<Option<PathBuf>> {
    if !root.exists() {
        return Ok(None);
    }
    let mut best: Option<(u64, PathBuf)> = None;
    for entry in fs::read_dir(root).map_err(|e| Error::io(root, e))? {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        let name = entry.file_name();
        let Some(step) = name.to_str().and_then(|n| n.strip_prefix("step-")).and_then(|n| n.parse().ok()) else {
            continue;
        };
        if best.as_ref().is_none_or(|(s, _)| step > *s) {
            best = Some((step, entry.path()));
        }
    }
    Ok(best.map(|(_, p)| p))
}

