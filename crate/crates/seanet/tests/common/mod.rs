#![allow(dead_code)]

use std::f32::consts::PI;
use std::path::{Path, PathBuf};

use seanet::audio::{write_wav, Encoding};
use seanet::manifest::{write_entries, ManifestEntry};
use seanet_core::rng::{seeded, symmetric_f32, unit_f32};
use seanet_core::signal::{band_limit, resample};
use seanet_core::Waveform;

pub const RATE: u32 = 16000;
pub const ACCEL_RATE: u32 = 4000;

/// A few harmonically unrelated tones with a slow amplitude envelope.
pub fn speech_like(seed: u64, len: usize) -> Vec<f32> {
    let mut rng = seeded(seed);
    let tones: Vec<(f32, f32, f32)> = (0..3)
        .map(|_| (120.0 + 1500.0 * unit_f32(&mut rng), 0.2 + 0.3 * unit_f32(&mut rng), 6.0 * unit_f32(&mut rng)))
        .collect();
    let rate = 2.0 + 3.0 * unit_f32(&mut rng);
    (0..len)
        .map(|i| {
            let t = i as f32 / RATE as f32;
            let env = 0.6 + 0.4 * (2.0 * PI * rate * t).sin();
            env * tones.iter().map(|(f, a, p)| a * (2.0 * PI * f * t + p).sin()).sum::<f32>()
        })
        .collect()
}

pub fn white_noise(seed: u64, len: usize) -> Vec<f32> {
    let mut rng = seeded(seed);
    (0..len).map(|_| symmetric_f32(&mut rng, 0.5)).collect()
}

/// Accelerometer stand-in: the clean signal band-limited and sampled at
/// the sensor rate.
pub fn accel_for(clean: &[f32]) -> Waveform {
    let w = Waveform::mono(clean.to_vec(), RATE).unwrap();
    resample(&band_limit(&w, 8).unwrap(), ACCEL_RATE as i64).unwrap()
}

pub struct Corpus {
    pub dir: tempfile::TempDir,
    pub manifest: PathBuf,
    pub noise_list: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl Corpus {
    pub fn path(&self) -> &Path {
        self.dir.path()
    }
}

/// `speakers` x `per_speaker` utterances of `len` samples with 4 kHz
/// accelerometer files, plus two speech-shaped noise clips with the same level statistics as the speech.
pub fn corpus(speakers: usize, per_speaker: usize, len: usize) -> Corpus {
    let dir = tempfile::tempdir().unwrap();
    let mut entries = Vec::new();
    for s in 0..speakers {
        for u in 0..per_speaker {
            let seed = (s * 100 + u) as u64;
            let clean = speech_like(seed, len);
            let name = format!("spk{s}_utt{u}");
            let clean_rel = PathBuf::from(format!("{name}.wav"));
            let accel_rel = PathBuf::from(format!("{name}_accel.wav"));
            write_wav(dir.path().join(&clean_rel), &Waveform::mono(clean.clone(), RATE).unwrap(), Encoding::Pcm16).unwrap();
            write_wav(dir.path().join(&accel_rel), &accel_for(&clean), Encoding::Float32).unwrap();
            entries.push(ManifestEntry {
                clean_path: clean_rel,
                accel_path: Some(accel_rel),
                speaker_id: format!("spk{s}"),
            });
        }
    }
    let manifest = dir.path().join("manifest.jsonl");
    write_entries(&manifest, &entries).unwrap();
    let mut list = String::new();
    for n in 0..2 {
        let name = format!("noise{n}.wav");
        write_wav(dir.path().join(&name), &Waveform::mono(speech_like(900 + n, len / 2), RATE).unwrap(), Encoding::Float32).unwrap();
        list.push_str(&name);
        list.push('\n');
    }
    let noise_list = dir.path().join("noise.txt");
    std::fs::write(&noise_list, list).unwrap();
    Corpus {
        dir,
        manifest,
        noise_list,
        entries,
    }
}
