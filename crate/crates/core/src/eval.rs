//! Evaluation metrics and synthetic ground-truth signals.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::periodicity::PeriodGrid;
use crate::pitch::FrameDecision;

/// Relative F0 error above which a voiced frame counts as a deviation.
pub const DEVIATION_TOLERANCE: f64 = 0.2;
/// Value reported for a perfect reconstruction.
pub const OVERALL_SNR_CAP_DB: f64 = 120.0;

/// Per-frame F0 in Hz, zero for unvoiced frames.
#[derive(Debug, Clone, PartialEq)]
pub struct PitchTrack {
    pub hop_sec: f64,
    pub f0: Vec<f64>,
}

impl PitchTrack {
    pub fn from_decisions(decisions: &[FrameDecision], hop: usize, sample_rate: f64) -> Self {
        Self {
            hop_sec: hop as f64 / sample_rate,
            f0: decisions.iter().map(|d| d.f0_hz(sample_rate)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.f0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f0.is_empty()
    }

    /// `frame_index<TAB>time_sec<TAB>f0_hz`, one line per frame.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (j, f) in self.f0.iter().enumerate() {
            let _ = writeln!(out, "{j}\t{:.6}\t{:.4}", j as f64 * self.hop_sec, f);
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let bad = || Error::Eval(format!("line {}: expected index, time, f0", lineno + 1));
            if fields.len() != 3 {
                return Err(bad());
            }
            let index: usize = fields[0].trim().parse().map_err(|_| bad())?;
            let time: f64 = fields[1].trim().parse().map_err(|_| bad())?;
            let f0: f64 = fields[2].trim().parse().map_err(|_| bad())?;
            if index != rows.len() {
                return Err(Error::Eval(format!(
                    "line {}: frame index {index} out of order",
                    lineno + 1
                )));
            }
            if f0.is_nan() || f0 < 0.0 {
                return Err(Error::Eval(format!("line {}: negative F0", lineno + 1)));
            }
            rows.push((time, f0));
        }
        let hop_sec = if rows.len() > 1 {
            rows[1].0 - rows[0].0
        } else {
            0.016
        };
        Ok(Self {
            hop_sec,
            f0: rows.into_iter().map(|(_, f)| f).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRateReport {
    pub misses: usize,
    pub false_alarms: usize,
    pub deviations: usize,
    pub correct: usize,
    pub total_frames: usize,
    /// Percentage of frames in error.
    pub rate: f64,
    /// Whether the longer track was cut to the shorter one.
    pub trimmed: bool,
}

/// Compares a detected track with a reference, frame by frame.
///
/// Misses: reference voiced, detected unvoiced. False alarms: the reverse.
/// Deviations: both voiced with `|f_det - f_ref| > 0.2·f_ref`. Every frame
/// counts toward the total.
pub fn p0_error_rate(detected: &PitchTrack, reference: &PitchTrack) -> Result<ErrorRateReport> {
    let n = detected.len().min(reference.len());
    if n == 0 {
        return Err(Error::Eval("empty pitch track".into()));
    }
    let mut r = ErrorRateReport {
        misses: 0,
        false_alarms: 0,
        deviations: 0,
        correct: 0,
        total_frames: n,
        rate: 0.0,
        trimmed: detected.len() != reference.len(),
    };
    for (&det, &truth) in detected.f0[..n].iter().zip(&reference.f0[..n]) {
        match (truth > 0.0, det > 0.0) {
            (true, false) => r.misses += 1,
            (false, true) => r.false_alarms += 1,
            (true, true) if (det - truth).abs() > DEVIATION_TOLERANCE * truth => r.deviations += 1,
            _ => r.correct += 1,
        }
    }
    r.rate = 100.0 * (r.misses + r.false_alarms + r.deviations) as f64 / n as f64;
    Ok(r)
}

/// `10·lg(Σ s² / Σ (s - y)²)` in dB, capped at [`OVERALL_SNR_CAP_DB`].
/// Argument order matters: `clean` is the reference.
pub fn overall_snr(clean: &[f64], processed: &[f64]) -> Result<f64> {
    if clean.len() != processed.len() {
        return Err(Error::Eval(format!(
            "length mismatch: clean {} vs processed {}",
            clean.len(),
            processed.len()
        )));
    }
    let signal: f64 = clean.iter().map(|s| s * s).sum();
    if signal == 0.0 {
        return Err(Error::Eval("clean signal has zero energy".into()));
    }
    let residual: f64 = clean
        .iter()
        .zip(processed)
        .map(|(s, y)| (s - y) * (s - y))
        .sum();
    if residual == 0.0 {
        return Ok(OVERALL_SNR_CAP_DB);
    }
    Ok((10.0 * (signal / residual).log10()).min(OVERALL_SNR_CAP_DB))
}

/// Drops the first `delay` samples of `processed` and fits it to `len`.
pub fn align(processed: &[f64], delay: usize, len: usize) -> Vec<f64> {
    let mut v: Vec<f64> = processed.iter().skip(delay).take(len).copied().collect();
    v.resize(len, 0.0);
    v
}

fn check_f0(f0: &[f64]) -> Result<()> {
    if let Some(bad) = f0
        .iter()
        .find(|&&f| f != 0.0 && !(PeriodGrid::F0_MIN..=PeriodGrid::F0_MAX).contains(&f))
    {
        return Err(Error::Eval(format!(
            "F0 {bad} Hz outside [{}, {}]",
            PeriodGrid::F0_MIN,
            PeriodGrid::F0_MAX
        )));
    }
    Ok(())
}

/// Harmonic complex following a per-frame F0 trajectory (0 = silence).
///
/// Between two voiced frame anchors the F0 is interpolated linearly and
/// the phase is accumulated sample by sample, so glides are
/// phase-continuous. Every harmonic below Nyquist (up to `harmonics`)
/// gets amplitude `weight(h·f0)`. The result is scaled to unit peak.
pub fn synth_harmonic_weighted<W: Fn(f64) -> f64>(
    f0_per_frame: &[f64],
    hop: usize,
    harmonics: usize,
    sample_rate: f64,
    weight: W,
) -> Result<Vec<f64>> {
    check_f0(f0_per_frame)?;
    let nyquist = sample_rate / 2.0;
    let mut out = Vec::with_capacity(f0_per_frame.len() * hop);
    let mut phase = 0.0f64;
    for (j, &f_a) in f0_per_frame.iter().enumerate() {
        let f_b = f0_per_frame.get(j + 1).copied().unwrap_or(f_a);
        for i in 0..hop {
            if f_a == 0.0 {
                phase = 0.0;
                out.push(0.0);
                continue;
            }
            let f = if f_b > 0.0 {
                f_a + (f_b - f_a) * i as f64 / hop as f64
            } else {
                f_a
            };
            let mut v = 0.0;
            for h in 1..=harmonics {
                let fh = h as f64 * f;
                // Short taper so harmonics crossing Nyquist in a glide fade.
                let edge = ((nyquist - fh) / 50.0).clamp(0.0, 1.0);
                if edge == 0.0 {
                    break;
                }
                v += edge * weight(fh) * (h as f64 * phase).sin();
            }
            out.push(v);
            phase = (phase + 2.0 * PI * f / sample_rate).rem_euclid(2.0 * PI);
        }
    }
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        out.iter_mut().for_each(|v| *v /= peak);
    }
    Ok(out)
}

/// Equal-amplitude harmonic complex; see [`synth_harmonic_weighted`].
pub fn synth_harmonic(
    f0_per_frame: &[f64],
    hop: usize,
    harmonics: usize,
    sample_rate: f64,
) -> Result<Vec<f64>> {
    synth_harmonic_weighted(f0_per_frame, hop, harmonics, sample_rate, |_| 1.0)
}

/// Adds `noise` (looped or trimmed to length) scaled so the mixture has
/// overall SNR `snr_db`. An infinite target returns the clean signal.
pub fn mix_at_snr(clean: &[f64], noise: &[f64], snr_db: f64) -> Result<Vec<f64>> {
    if snr_db == f64::INFINITY {
        return Ok(clean.to_vec());
    }
    let signal: f64 = clean.iter().map(|s| s * s).sum();
    if signal == 0.0 {
        return Err(Error::Eval("clean signal has zero energy".into()));
    }
    if noise.is_empty() {
        return Err(Error::Eval("noise is empty".into()));
    }
    let fitted: Vec<f64> = noise.iter().cycle().take(clean.len()).copied().collect();
    let noise_energy: f64 = fitted.iter().map(|d| d * d).sum();
    if noise_energy == 0.0 {
        return Err(Error::Eval("noise has zero energy".into()));
    }
    let scale = (signal / (noise_energy * 10f64.powf(snr_db / 10.0))).sqrt();
    Ok(clean
        .iter()
        .zip(&fitted)
        .map(|(s, d)| s + scale * d)
        .collect())
}

/// One line of the metrics report.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub file: String,
    pub ovl_snr_in_db: Option<f64>,
    pub ovl_snr_out_db: Option<f64>,
    pub p0_error_rate_pct: Option<f64>,
    pub misses: Option<usize>,
    pub false_alarms: Option<usize>,
    pub deviations: Option<usize>,
    /// Always empty: PESQ is not computed by this tool.
    pub pesq: Option<f64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub config_overrides: BTreeMap<String, String>,
}

impl MetricsRecord {
    pub fn with_error_rate(mut self, r: &ErrorRateReport) -> Self {
        self.p0_error_rate_pct = Some(r.rate);
        self.misses = Some(r.misses);
        self.false_alarms = Some(r.false_alarms);
        self.deviations = Some(r.deviations);
        self
    }
}
