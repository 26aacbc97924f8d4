//! Corpus evaluation and the accelerometer-bandwidth sweep.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use seanet_core::metrics::{mean_std, score_example};
use seanet_core::mixing::mix_parts;
use seanet_core::rng::{derive_seed, seeded};
use seanet_core::signal::band_limit;
use seanet_core::{Generator, Waveform};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Purpose};
use crate::error::{Error, Result};
use crate::infer::run_padded;
use crate::manifest::Scenario;

/// Full bandwidth followed by the simulated lower-rate sensors.
pub const DECIMATION_SWEEP: [i64; 9] = [1, 16, 20, 32, 40, 50, 64, 80, 100];

const TAG_EVAL: u64 = 0xE1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleResult {
    pub example_id: String,
    pub si_sdr_in: f64,
    pub si_sdr_out: f64,
    pub si_sdri: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub scenario: Scenario,
    pub decimation_factor: i64,
    /// Sampling rate of the simulated accelerometer, in Hz.
    pub simulated_rate_hz: f64,
    pub per_example: Vec<ExampleResult>,
    /// Examples left out because their reference is silent.
    pub excluded: Vec<String>,
    pub mean_si_sdri: f64,
    pub std_si_sdri: f64,
}

/// How the conditioning channel is fed at evaluation time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Conditioning {
    #[default]
    Accelerometer,
    /// Replace the accelerometer with zeros (diagnostic only).
    Zeroed,
}

/// Evaluates `generator` on every recording of `dataset` at full utterance
/// length. Mixtures depend only on `seed`, so every factor of a sweep sees
/// the same noisy inputs.
pub fn evaluate_corpus(
    generator: &Generator,
    dataset: &Dataset,
    decimation_factor: i64,
    seed: u64,
    conditioning: Conditioning,
) -> Result<EvalResult> {
    if dataset.purpose() != Purpose::Enhance {
        return Err(Error::Config("evaluation needs an enhancement dataset".into()));
    }
    if dataset.is_empty() {
        return Err(Error::EmptyDataset("nothing to evaluate".into()));
    }
    let in_channels = generator.spec().in_channels;
    if in_channels != 1 && in_channels != dataset.input_channels() {
        return Err(Error::Config(format!(
            "checkpoint expects {in_channels} input channels, the dataset provides {}",
            dataset.input_channels()
        )));
    }
    let rate = dataset.options().sample_rate;
    let mut per_example = Vec::new();
    let mut excluded = Vec::new();
    for (index, (rec, entry)) in dataset
        .recordings()
        .iter()
        .zip(&dataset.manifest().entries)
        .enumerate()
    {
        let id = entry.clean_path.display().to_string();
        let mut rng = seeded(derive_seed(derive_seed(seed, TAG_EVAL), index as u64));
        let (_, interferer) = dataset.choose_interferer(index, &mut rng)?;
        let mixture = mix_parts(&rec.clean, interferer, dataset.manifest().mix_gain_db, &mut rng)?;
        let estimate = if in_channels == 1 {
            run_padded(generator, &[&mixture.noisy])?
        } else {
            let accel = rec
                .accel
                .as_ref()
                .ok_or_else(|| Error::MissingModality(format!("{id} has no accelerometer")))?;
            let accel = match conditioning {
                Conditioning::Accelerometer => band_limit(accel, decimation_factor)?,
                Conditioning::Zeroed => accel.map_channels(|c| vec![0.0; c.len()]),
            };
            run_padded(generator, &[&mixture.noisy, &accel])?
        };
        match score_example(estimate.channel(0), mixture.noisy.channel(0), rec.clean.channel(0))? {
            Some(s) => per_example.push(ExampleResult {
                example_id: id,
                si_sdr_in: s.si_sdr_in,
                si_sdr_out: s.si_sdr_out,
                si_sdri: s.si_sdri,
            }),
            None => {
                log::warn!("{id}: silent reference, excluded from the mean");
                excluded.push(id);
            }
        }
    }
    let values: Vec<f64> = per_example.iter().map(|e| e.si_sdri).collect();
    let (mean_si_sdri, std_si_sdri) = mean_std(&values);
    Ok(EvalResult {
        scenario: dataset.manifest().scenario,
        decimation_factor,
        simulated_rate_hz: rate as f64 / decimation_factor as f64,
        per_example,
        excluded,
        mean_si_sdri,
        std_si_sdri,
    })
}

pub const CSV_HEADER: [&str; 6] = ["example_id", "scenario", "decimation_factor", "si_sdr_in", "si_sdr_out", "si_sdri"];

/// Writes `<stem>.json` and `<stem>.csv` under `dir`.
pub fn write_result(dir: &Path, stem: &str, result: &EvalResult) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json_path = dir.join(format!("{stem}.json"));
    let json = serde_json::to_string_pretty(result).map_err(|e| Error::format(&json_path, e))?;
    fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))?;

    let csv_path = dir.join(format!("{stem}.csv"));
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| Error::format(&csv_path, e))?;
    let err = |e: csv::Error| Error::format(&csv_path, e);
    w.write_record(CSV_HEADER).map_err(err)?;
    for e in &result.per_example {
        w.write_record([
            e.example_id.clone(),
            result.scenario.as_str().to_string(),
            result.decimation_factor.to_string(),
            e.si_sdr_in.to_string(),
            e.si_sdr_out.to_string(),
            e.si_sdri.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))
}

/// Line plot of mean SI-SDRi against the simulated accelerometer rate,
/// as SVG. The full-bandwidth point is drawn at the working rate.
pub fn sweep_plot_svg(results: &[EvalResult]) -> String {
    let (w, h, m) = (640.0, 400.0, 60.0);
    let mut pts: Vec<(f64, f64)> = results
        .iter()
        .filter(|r| r.mean_si_sdri.is_finite())
        .map(|r| (r.simulated_rate_hz.log10(), r.mean_si_sdri))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (x0, x1) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.0), hi.max(p.0)));
    let (y0, y1) = pts
        .iter()
        .fold((0.0f64, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.1), hi.max(p.1)));
    let y1 = if y1 > y0 { y1 } else { y0 + 1.0 };
    let x1 = if x1 > x0 { x1 } else { x0 + 1.0 };
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<line x1="{m}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{m}" y1="{m}" x2="{m}" y2="{b}" stroke="black"/>"#,
        b = h - m,
        r = w - m
    );
    let line: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y))).collect();
    let _ = writeln!(svg, r#"<polyline fill="none" stroke="steelblue" stroke-width="2" points="{}"/>"#, line.join(" "));
    for &(x, y) in &pts {
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="steelblue"/><text x="{:.1}" y="{}" text-anchor="middle">{:.0}</text>"#,
            sx(x),
            sy(y),
            sx(x),
            h - m + 16.0,
            10f64.powf(x)
        );
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">simulated accelerometer rate (Hz)</text>"#, w / 2.0, h - 15.0);
    let _ = writeln!(
        svg,
        r#"<text x="15" y="{}" transform="rotate(-90 15 {})" text-anchor="middle">mean SI-SDRi (dB)</text>"#,
        h / 2.0,
        h / 2.0
    );
    for (v, label) in [(y0, y0), (y1, y1)] {
        let _ = writeln!(svg, r#"<text x="{}" y="{:.1}" text-anchor="end">{:.1}</text>"#, m - 5.0, sy(v) + 4.0, label);
    }
    svg.push_str("</svg>\n");
    svg
}

/// Helper for callers holding raw waveforms rather than a dataset.
pub fn enhance(generator: &Generator, noisy: &Waveform, accel: Option<&Waveform>) -> Result<Waveform> {
    match accel {
        Some(a) if generator.spec().in_channels > 1 => run_padded(generator, &[noisy, a]),
        _ => run_padded(generator, &[noisy]),
    }
}
