//! Whole-utterance inference: pad to the generator's stride, run, trim.

use seanet_core::example::waveforms_to_tensor;
use seanet_core::{Generator, Waveform};

use crate::error::{Error, Result};

/// Runs `generator` on the channel concatenation of `parts` (speech first),
/// zero-padding to a multiple of the total stride and trimming the result
/// back to the input length.
pub fn run_padded(generator: &Generator, parts: &[&Waveform]) -> Result<Waveform> {
    let len = parts[0].len();
    let rate = parts[0].sample_rate();
    if parts.iter().any(|w| w.len() != len || w.sample_rate() != rate) {
        return Err(Error::Config("generator inputs must share length and sample rate".into()));
    }
    let stride = generator.spec().total_stride();
    let padded_len = len.div_ceil(stride).max(1) * stride;
    let padded: Vec<Waveform> = parts.iter().map(|w| w.with_len(padded_len)).collect();
    let refs: Vec<&Waveform> = padded.iter().collect();
    let y = generator.infer(&waveforms_to_tensor(&refs))?;
    let channels = (0..y.channels()).map(|c| y.row(0, c)[..len].to_vec()).collect();
    Ok(Waveform::new(channels, rate)?)
}

/// Maps clean audio to a synthetic accelerometer waveform with a 1-in/1-out
/// generator trained by `train_accel_synth`.
pub fn synthesize_accelerometer(clean: &Waveform, synth: Option<&Generator>) -> Result<Waveform> {
    let synth = synth.ok_or_else(|| {
        seanet_core::Error::Uninitialized("no accelerometer synthesis model was loaded".into())
    })?;
    let spec = synth.spec();
    if spec.in_channels != 1 || spec.out_channels != 1 {
        return Err(Error::Config(format!(
            "synthesis model must be 1-in/1-out, got {}-in/{}-out",
            spec.in_channels, spec.out_channels
        )));
    }
    if clean.num_channels() != 1 {
        return Err(Error::Config("synthesis input must be single-channel audio".into()));
    }
    run_padded(synth, &[clean])
}
