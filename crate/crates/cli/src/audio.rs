//! WAV reading and writing, with streaming resampling to the engine rate.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use rubato::{
    Resampler as _, SincFixedIn, SincInterpolationParameters, SincInterpolationType, WindowFunction,
};

use crate::CliError;

/// Samples handed to the callback per call.
const CHUNK: usize = 1024;

/// Sinc taps; long enough to keep the band up to 3.4 kHz flat at 8 kHz out.
const SINC_LEN: usize = 512;

#[derive(Debug, Clone, Copy)]
pub struct InputInfo {
    pub source_rate: u32,
    /// Samples delivered at the target rate.
    pub samples: usize,
}

impl InputInfo {
    pub fn duration_sec(&self, rate: f64) -> f64 {
        self.samples as f64 / rate
    }
}

fn open(path: &Path) -> Result<WavReader<BufReader<File>>, CliError> {
    let reader =
        WavReader::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(CliError::Io(format!(
            "{}: {} channels, only mono input is supported",
            path.display(),
            spec.channels
        )));
    }
    match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 8..=32) | (SampleFormat::Float, 32) => Ok(reader),
        (fmt, bits) => Err(CliError::Io(format!(
            "{}: unsupported sample format {fmt:?} with {bits} bits",
            path.display()
        ))),
    }
}

/// Streams a mono WAV file as `f64` samples at `target_rate`, full scale
/// ±1, in chunks.
pub fn for_each_chunk<F>(path: &Path, target_rate: f64, mut f: F) -> Result<InputInfo, CliError>
where
    F: FnMut(&[f64]) -> Result<(), CliError>,
{
    let mut reader = open(path)?;
    let spec = reader.spec();
    let read_err = |e: hound::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut resampler = if (spec.sample_rate as f64 - target_rate).abs() > 1e-9 {
        Some(StreamResampler::new(spec.sample_rate as f64, target_rate)?)
    } else {
        None
    };

    let mut chunk = Vec::with_capacity(CHUNK);
    let mut converted = Vec::new();
    let mut samples = 0usize;
    let mut deliver = |data: &[f64], samples: &mut usize| -> Result<(), CliError> {
        *samples += data.len();
        if data.is_empty() {
            Ok(())
        } else {
            f(data)
        }
    };
    let mut flush = |chunk: &mut Vec<f64>, samples: &mut usize| -> Result<(), CliError> {
        match resampler.as_mut() {
            Some(r) => {
                converted.clear();
                r.push(chunk, &mut converted)?;
                deliver(&converted, samples)?;
            }
            None => deliver(chunk, samples)?,
        }
        chunk.clear();
        Ok(())
    };

    if spec.sample_format == SampleFormat::Float {
        for s in reader.samples::<f32>() {
            chunk.push(s.map_err(read_err)? as f64);
            if chunk.len() == CHUNK {
                flush(&mut chunk, &mut samples)?;
            }
        }
    } else {
        let scale = 1.0 / (1u64 << (spec.bits_per_sample - 1)) as f64;
        for s in reader.samples::<i32>() {
            chunk.push(s.map_err(read_err)? as f64 * scale);
            if chunk.len() == CHUNK {
                flush(&mut chunk, &mut samples)?;
            }
        }
    }
    flush(&mut chunk, &mut samples)?;
    if let Some(r) = resampler.as_mut() {
        converted.clear();
        r.finish(&mut converted)?;
        deliver(&converted, &mut samples)?;
    }
    Ok(InputInfo {
        source_rate: spec.sample_rate,
        samples,
    })
}

/// Reads a whole mono WAV file at `target_rate`.
pub fn read_all(path: &Path, target_rate: f64) -> Result<Vec<f64>, CliError> {
    let mut out = Vec::new();
    for_each_chunk(path, target_rate, |c| {
        out.extend_from_slice(c);
        Ok(())
    })?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Pcm16,
    Float32,
}

/// Writes mono samples; returns the peak-normalization factor applied
/// (1.0 when the signal fit in full scale).
pub fn write(
    path: &Path,
    samples: &[f64],
    rate: f64,
    format: OutputFormat,
) -> Result<f64, CliError> {
    let peak = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let limit = match format {
        OutputFormat::Pcm16 => i16::MAX as f64 / 32768.0,
        OutputFormat::Float32 => 1.0,
    };
    let scale = if peak > limit { limit / peak } else { 1.0 };
    let spec = WavSpec {
        channels: 1,
        sample_rate: rate.round() as u32,
        bits_per_sample: match format {
            OutputFormat::Pcm16 => 16,
            OutputFormat::Float32 => 32,
        },
        sample_format: match format {
            OutputFormat::Pcm16 => SampleFormat::Int,
            OutputFormat::Float32 => SampleFormat::Float,
        },
    };
    let io = |e: hound::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut writer = WavWriter::create(path, spec).map_err(io)?;
    for &v in samples {
        let v = v * scale;
        match format {
            OutputFormat::Pcm16 => writer
                .write_sample((v * 32768.0).round() as i16)
                .map_err(io)?,
            OutputFormat::Float32 => writer.write_sample(v as f32).map_err(io)?,
        }
    }
    writer.finalize().map_err(io)?;
    Ok(scale)
}

/// Windowed-sinc rate converter fed in arbitrary pieces. The filter delay
/// is removed, so output sample `m` sits at time `m / rate_out`.
struct StreamResampler {
    inner: SincFixedIn<f64>,
    pending: Vec<f64>,
    ratio: f64,
    skip: usize,
    consumed: usize,
    emitted: usize,
}

impl StreamResampler {
    fn new(rate_in: f64, rate_out: f64) -> Result<Self, CliError> {
        let window = WindowFunction::BlackmanHarris2;
        let params = || SincInterpolationParameters {
            sinc_len: SINC_LEN,
            f_cutoff: rubato::calculate_cutoff(SINC_LEN, window),
            oversampling_factor: 256,
            interpolation: SincInterpolationType::Cubic,
            window,
        };
        let ratio = rate_out / rate_in;
        let build = || {
            SincFixedIn::new(ratio, 1.0, params(), CHUNK, 1).map_err(|e| {
                CliError::Io(format!(
                    "cannot resample {rate_in} Hz to {rate_out} Hz: {e}"
                ))
            })
        };
        let inner = build()?;
        let skip = impulse_delay(build()?)?;
        Ok(Self {
            inner,
            pending: Vec::with_capacity(CHUNK),
            ratio,
            skip,
            consumed: 0,
            emitted: 0,
        })
    }

    fn emit(&mut self, block: &[f64], out: &mut Vec<f64>, cap: Option<usize>) {
        let drop = self.skip.min(block.len());
        self.skip -= drop;
        let mut rest = &block[drop..];
        if let Some(cap) = cap {
            rest = &rest[..rest.len().min(cap.saturating_sub(self.emitted))];
        }
        self.emitted += rest.len();
        out.extend_from_slice(rest);
    }

    fn push(&mut self, input: &[f64], out: &mut Vec<f64>) -> Result<(), CliError> {
        self.consumed += input.len();
        let mut input = input;
        while !input.is_empty() {
            let take = (CHUNK - self.pending.len()).min(input.len());
            self.pending.extend_from_slice(&input[..take]);
            input = &input[take..];
            if self.pending.len() == CHUNK {
                let block = self
                    .inner
                    .process(&[&self.pending], None)
                    .map_err(resample_err)?;
                self.pending.clear();
                self.emit(&block[0], out, None);
            }
        }
        Ok(())
    }

    fn finish(&mut self, out: &mut Vec<f64>) -> Result<(), CliError> {
        let total = (self.consumed as f64 * self.ratio).round() as usize;
        let pending = std::mem::take(&mut self.pending);
        let block = self
            .inner
            .process_partial(Some(&[&pending]), None)
            .map_err(resample_err)?;
        self.emit(&block[0], out, Some(total));
        while self.emitted < total {
            let block = self
                .inner
                .process_partial::<&[f64]>(None, None)
                .map_err(resample_err)?;
            self.emit(&block[0], out, Some(total));
        }
        Ok(())
    }
}

/// Output index nearest to where an input impulse at time zero lands.
fn impulse_delay(mut probe: SincFixedIn<f64>) -> Result<usize, CliError> {
    let mut impulse = vec![0.0; CHUNK];
    impulse[0] = 1.0;
    let mut response = probe
        .process(&[&impulse], None)
        .map_err(resample_err)?
        .remove(0);
    let zeros = vec![0.0; CHUNK];
    while response.len() < probe.output_delay() * 2 + 8 {
        response.extend(
            probe
                .process(&[&zeros], None)
                .map_err(resample_err)?
                .remove(0),
        );
    }
    let peak = response
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map_or(0, |(i, _)| i);
    // Parabolic refinement of the main lobe.
    let (l, c, r) = (
        response[peak.saturating_sub(1)],
        response[peak],
        response[peak + 1],
    );
    let denom = l - 2.0 * c + r;
    let frac = if peak > 0 && denom != 0.0 {
        0.5 * (l - r) / denom
    } else {
        0.0
    };
    Ok((peak as f64 + frac).round().max(0.0) as usize)
}

fn resample_err(e: rubato::ResampleError) -> CliError {
    CliError::Io(format!("resampling failed: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone_file(dir: &Path, rate: u32, freq: f64, secs: f64) -> std::path::PathBuf {
        let path = dir.join(format!("tone_{rate}_{freq}.wav"));
        let spec = WavSpec {
            channels: 1,
            sample_rate: rate,
            bits_per_sample: 32,
            sample_format: SampleFormat::Float,
        };
        let mut w = WavWriter::create(&path, spec).unwrap();
        for n in 0..(secs * rate as f64) as usize {
            w.write_sample((0.5 * (2.0 * PI * freq * n as f64 / rate as f64).sin()) as f32)
                .unwrap();
        }
        w.finalize().unwrap();
        path
    }

    #[test]
    fn resampler_passband_is_flat() {
        let dir = tempfile::tempdir().unwrap();
        for rate in [16_000, 44_100, 48_000] {
            for freq in [100.0, 1000.0, 2500.0, 3400.0] {
                let x = read_all(&tone_file(dir.path(), rate, freq, 1.0), 8000.0).unwrap();
                assert_eq!(x.len(), 8000);
                let mid = &x[1000..7000];
                let rms = (mid.iter().map(|v| v * v).sum::<f64>() / mid.len() as f64).sqrt();
                let db = 20.0 * (rms / (0.5 / 2f64.sqrt())).log10();
                assert!(
                    db.abs() < 0.1,
                    "{rate} Hz input, {freq} Hz tone: {db:.3} dB"
                );
            }
        }
    }

    #[test]
    fn resampler_removes_its_delay() {
        let dir = tempfile::tempdir().unwrap();
        for rate in [16_000, 22_050, 44_100, 48_000, 11_025] {
            let x = read_all(&tone_file(dir.path(), rate, 500.0, 0.5), 8000.0).unwrap();
            let w = 2.0 * PI * 500.0 / 8000.0;
            let (mut s, mut c) = (0.0, 0.0);
            for (n, v) in x.iter().enumerate().skip(500).take(3000) {
                s += v * (w * n as f64).sin();
                c += v * (w * n as f64).cos();
            }
            let lag = -c.atan2(s) / w;
            assert!(lag.abs() <= 1.0, "{rate} Hz: {lag:.3} samples");
        }
    }

    #[test]
    fn native_rate_passes_through() {
        let dir = tempfile::tempdir().unwrap();
        let path = tone_file(dir.path(), 8000, 440.0, 0.3);
        let x = read_all(&path, 8000.0).unwrap();
        let mut r = WavReader::open(&path).unwrap();
        let raw: Vec<f64> = r.samples::<f32>().map(|s| s.unwrap() as f64).collect();
        assert_eq!(x, raw);
    }

    #[test]
    fn clipping_output_is_scaled() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.wav");
        assert_eq!(
            write(&path, &[0.5, -0.25], 8000.0, OutputFormat::Pcm16).unwrap(),
            1.0
        );
        let scale = write(&path, &[2.0, -1.0], 8000.0, OutputFormat::Float32).unwrap();
        assert_eq!(scale, 0.5);
    }
}
