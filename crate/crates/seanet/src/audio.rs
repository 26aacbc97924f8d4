//! WAV reading and writing.
//!
//! Samples are exchanged as `f32` in [-1, 1] regardless of the on-disk
//! encoding. Integer PCM of any bit depth is read; writing supports 16-bit
//! PCM and 32-bit float.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use seanet_core::Waveform;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// On-disk sample encoding for [`write_wav`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Encoding {
    #[default]
    Pcm16,
    Float32,
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let wav_err = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = WavReader::open(path).map_err(wav_err)?;
    let spec = reader.spec();
    let interleaved: Vec<f32> = match spec.sample_format {
        SampleFormat::Float => reader.samples::<f32>().collect::<Result<_, _>>().map_err(wav_err)?,
        SampleFormat::Int => {
            let scale = 1.0 / (1u64 << (spec.bits_per_sample - 1)) as f32;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f32 * scale))
                .collect::<Result<_, _>>()
                .map_err(wav_err)?
        }
    };
    if interleaved.is_empty() {
        return Err(Error::format(path, "no samples"));
    }
    Ok(Waveform::from_interleaved(&interleaved, spec.channels as usize, spec.sample_rate)?)
}

/// Writes `w`, clipping to [-1, 1] for 16-bit output.
pub fn write_wav(path: impl AsRef<Path>, w: &Waveform, encoding: Encoding) -> Result<()> {
    let path = path.as_ref();
    let wav_err = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    let spec = WavSpec {
        channels: w.num_channels() as u16,
        sample_rate: w.sample_rate(),
        bits_per_sample: match encoding {
            Encoding::Pcm16 => 16,
            Encoding::Float32 => 32,
        },
        sample_format: match encoding {
            Encoding::Pcm16 => SampleFormat::Int,
            Encoding::Float32 => SampleFormat::Float,
        },
    };
    let mut writer = WavWriter::create(path, spec).map_err(wav_err)?;
    for s in w.to_interleaved() {
        match encoding {
            Encoding::Pcm16 => {
                let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
                writer.write_sample(v).map_err(wav_err)?;
            }
            Encoding::Float32 => writer.write_sample(s).map_err(wav_err)?,
        }
    }
    writer.finalize().map_err(wav_err)
}
