//! Dataset manifests: a JSON-lines file of recordings and a plain-text
//! list of noise clips.
//!
//! Relative paths are resolved against the directory of the file that
//! names them.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub clean_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accel_path: Option<PathBuf>,
    pub speaker_id: String,
}

/// Where interferers come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Scenario {
    /// An utterance of a different speaker from the same manifest.
    MixedSpeech,
    /// A clip from the noise list.
    #[default]
    MixedNoise,
}

impl Scenario {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::MixedSpeech => "mixed_speech",
            Scenario::MixedNoise => "mixed_noise",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub noise_sources: Vec<PathBuf>,
    pub scenario: Scenario,
    /// Gain applied to the interferer, in dB.
    pub mix_gain_db: f32,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn parent(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

pub fn read_entries(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = parent(path);
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut e: ManifestEntry =
            serde_json::from_str(line).map_err(|err| Error::format(path, format!("line {}: {err}", i + 1)))?;
        e.clean_path = resolve(&base, &e.clean_path);
        e.accel_path = e.accel_path.map(|a| resolve(&base, &a));
        out.push(e);
    }
    Ok(out)
}

pub fn write_entries(path: impl AsRef<Path>, entries: &[ManifestEntry]) -> Result<()> {
    let path = path.as_ref();
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for e in entries {
        let line = serde_json::to_string(e).map_err(|err| Error::format(path, err))?;
        writeln!(f, "{line}").map_err(|err| Error::io(path, err))?;
    }
    Ok(())
}

/// One path per line; blank lines and `#` comments are ignored.
pub fn read_noise_list(path: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = parent(path);
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| resolve(&base, Path::new(l)))
        .collect())
}

impl DatasetManifest {
    pub fn load(entries: impl AsRef<Path>, noise_list: Option<&Path>, scenario: Scenario, mix_gain_db: f32) -> Result<Self> {
        let noise_sources = match noise_list {
            Some(p) => read_noise_list(p)?,
            None => Vec::new(),
        };
        Ok(Self {
            entries: read_entries(entries)?,
            noise_sources,
            scenario,
            mix_gain_db,
        })
    }

    pub fn speakers(&self) -> BTreeSet<&str> {
        self.entries.iter().map(|e| e.speaker_id.as_str()).collect()
    }

    /// Keeps entries whose speaker is in `speakers`, e.g. one fold of a
    /// speaker-disjoint train/test split.
    pub fn filter_speakers<S: AsRef<str>>(&self, speakers: &[S]) -> Self {
        let keep: BTreeSet<&str> = speakers.iter().map(AsRef::as_ref).collect();
        Self {
            entries: self
                .entries
                .iter()
                .filter(|e| keep.contains(e.speaker_id.as_str()))
                .cloned()
                .collect(),
            ..self.clone()
        }
    }

    /// Checks the scenario can be served by this manifest.
    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::EmptyDataset("manifest has no entries".into()));
        }
        if !self.mix_gain_db.is_finite() {
            return Err(Error::Config("mix_gain_db must be finite".into()));
        }
        match self.scenario {
            Scenario::MixedSpeech if self.speakers().len() < 2 => Err(Error::Config(
                "mixed_speech needs at least two speakers to draw interferers from".into(),
            )),
            Scenario::MixedNoise if self.noise_sources.is_empty() => {
                Err(Error::Config("mixed_noise needs a non-empty noise list".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Speaker-disjoint split: speakers sorted by id, fold `fold` of `folds`
/// takes every `folds`-th speaker (offset by the fold index) for testing.
pub fn split_speakers(manifest: &DatasetManifest, folds: usize, fold: usize) -> Result<(Vec<String>, Vec<String>)> {
    if folds == 0 || fold >= folds {
        return Err(Error::Config(format!("fold {fold} out of range for {folds} folds")));
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (i, s) in manifest.speakers().into_iter().enumerate() {
        if i % folds == fold {
            test.push(s.to_string());
        } else {
            train.push(s.to_string());
        }
    }
    Ok((train, test))
}
