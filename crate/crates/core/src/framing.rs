//! Frame assembly over the subband stream and overlap-add resynthesis.
//!
//! Analysis uses rectangular frames of `N` samples every `N/2` samples.
//! Synthesis multiplies each unit by a Hamming window scaled so that two
//! half-overlapped copies sum to exactly one.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameGeometry {
    pub frame_len: usize,
    pub hop: usize,
}

impl Default for FrameGeometry {
    /// 32 ms frames, 16 ms hop at 8 kHz.
    fn default() -> Self {
        Self {
            frame_len: 256,
            hop: 128,
        }
    }
}

impl FrameGeometry {
    pub fn new(frame_len: usize) -> Result<Self> {
        if frame_len < 2 || !frame_len.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "frame length must be even and at least 2, got {frame_len}"
            )));
        }
        Ok(Self {
            frame_len,
            hop: frame_len / 2,
        })
    }

    /// 32 ms frames at `sample_rate`, rounded to an even sample count.
    pub fn for_sample_rate(sample_rate: f64) -> Result<Self> {
        let n = (0.032 * sample_rate / 2.0).round() as usize * 2;
        Self::new(n)
    }

    pub fn frame_ms(&self, sample_rate: f64) -> f64 {
        1000.0 * self.frame_len as f64 / sample_rate
    }

    pub fn hop_ms(&self, sample_rate: f64) -> f64 {
        1000.0 * self.hop as f64 / sample_rate
    }
}

/// Hamming window normalized so that `w[n] + w[n + N/2] == 1`.
pub fn synthesis_window(frame_len: usize) -> Vec<f64> {
    let half = frame_len / 2;
    let mut w = vec![0.0; frame_len];
    for n in 0..half {
        let v = (0.54 - 0.46 * (2.0 * PI * n as f64 / frame_len as f64).cos()) / 1.08;
        w[n] = v;
        w[n + half] = 1.0 - v;
    }
    w
}

/// One frame of subband output: `K` units of `N` samples each.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisFrame {
    pub index: usize,
    pub complex_units: Vec<Vec<Complex64>>,
    /// Real parts: the subband signals.
    pub real_units: Vec<Vec<f64>>,
    /// Hilbert envelopes with the per-unit mean removed.
    pub env_units: Vec<Vec<f64>>,
    /// Sum of squared real samples per unit.
    pub unit_energy: Vec<f64>,
    /// Set on the zero-padded frame emitted at end of stream.
    pub partial: bool,
}

impl AnalysisFrame {
    pub fn from_complex(index: usize, complex_units: Vec<Vec<Complex64>>, partial: bool) -> Self {
        let real_units: Vec<Vec<f64>> = complex_units
            .iter()
            .map(|u| u.iter().map(|z| z.re).collect())
            .collect();
        let env_units = complex_units
            .iter()
            .map(|u| {
                let mag: Vec<f64> = u.iter().map(|z| z.norm()).collect();
                let mean = mag.iter().sum::<f64>() / mag.len().max(1) as f64;
                mag.into_iter().map(|m| m - mean).collect()
            })
            .collect();
        let unit_energy = real_units
            .iter()
            .map(|u| u.iter().map(|x| x * x).sum())
            .collect();
        Self {
            index,
            complex_units,
            real_units,
            env_units,
            unit_energy,
            partial,
        }
    }

    pub fn num_subbands(&self) -> usize {
        self.real_units.len()
    }

    pub fn frame_len(&self) -> usize {
        self.real_units.first().map_or(0, Vec::len)
    }
}

/// Slices the per-sample subband vectors into half-overlapping frames.
///
/// History before the first sample is zero, so frame `j` spans stream
/// samples `[(j-1)·hop, (j+1)·hop)` and is emitted as soon as its last
/// sample arrives.
#[derive(Debug, Clone)]
pub struct Framer {
    geometry: FrameGeometry,
    buf: Vec<Vec<Complex64>>,
    fill: usize,
    next_index: usize,
}

impl Framer {
    pub fn new(num_subbands: usize, geometry: FrameGeometry) -> Self {
        Self {
            geometry,
            buf: vec![vec![Complex64::new(0.0, 0.0); geometry.frame_len]; num_subbands],
            fill: geometry.frame_len - geometry.hop,
            next_index: 0,
        }
    }

    pub fn geometry(&self) -> FrameGeometry {
        self.geometry
    }

    /// Number of frames emitted so far.
    pub fn frames_emitted(&self) -> usize {
        self.next_index
    }

    /// Appends one sample per subband; returns a frame when one completes.
    pub fn push(&mut self, sample: &[Complex64]) -> Option<AnalysisFrame> {
        debug_assert_eq!(sample.len(), self.buf.len());
        for (row, &z) in self.buf.iter_mut().zip(sample) {
            row[self.fill] = z;
        }
        self.fill += 1;
        if self.fill == self.geometry.frame_len {
            Some(self.emit(false))
        } else {
            None
        }
    }

    /// Zero-pads and emits the pending partial frame, if any new samples
    /// arrived since the last frame.
    pub fn flush(&mut self) -> Option<AnalysisFrame> {
        let keep = self.geometry.frame_len - self.geometry.hop;
        if self.fill == keep {
            return None;
        }
        for row in self.buf.iter_mut() {
            row[self.fill..].fill(Complex64::new(0.0, 0.0));
        }
        Some(self.emit(true))
    }

    fn emit(&mut self, partial: bool) -> AnalysisFrame {
        let frame = AnalysisFrame::from_complex(self.next_index, self.buf.clone(), partial);
        let hop = self.geometry.hop;
        for row in self.buf.iter_mut() {
            row.copy_within(hop.., 0);
        }
        self.fill = self.geometry.frame_len - hop;
        self.next_index += 1;
        frame
    }

    /// Samples currently buffered; constant for the life of the framer.
    pub fn buffered_len(&self) -> usize {
        self.buf.iter().map(Vec::len).sum()
    }
}

/// Streaming overlap-add of already windowed frames.
#[derive(Debug, Clone)]
pub struct OverlapAdd {
    tail: Vec<f64>,
}

impl OverlapAdd {
    pub fn new(geometry: FrameGeometry) -> Self {
        Self {
            tail: vec![0.0; geometry.frame_len - geometry.hop],
        }
    }

    /// Adds one frame; returns the `hop` samples that are now complete.
    pub fn push(&mut self, frame: &[f64]) -> Vec<f64> {
        let hop = frame.len() - self.tail.len();
        let done: Vec<f64> = frame[..hop]
            .iter()
            .zip(&self.tail)
            .map(|(f, t)| f + t)
            .collect();
        self.tail.copy_from_slice(&frame[hop..]);
        done
    }

    pub fn tail(&self) -> &[f64] {
        &self.tail
    }
}

/// Offline overlap-add: frame `j` is placed at `j·hop`. Output length is
/// `(J + 1)·hop`.
pub fn overlap_add_frames(frames: &[Vec<f64>], geometry: &FrameGeometry) -> Result<Vec<f64>> {
    let n = geometry.frame_len;
    let mut out = vec![0.0; frames.len() * geometry.hop + (n - geometry.hop)];
    for (j, f) in frames.iter().enumerate() {
        if f.len() != n {
            return Err(Error::Shape(format!(
                "frame {j} has {} samples, expected {n}",
                f.len()
            )));
        }
        let start = j * geometry.hop;
        out[start..start + n]
            .iter_mut()
            .zip(f)
            .for_each(|(o, v)| *o += v);
    }
    Ok(out)
}

/// Weights raw real units (`frames × K × N`) by their gains (`frames × K`)
/// and the synthesis window, sums across subbands and overlap-adds.
pub fn overlap_add(
    units: &[Vec<Vec<f64>>],
    gains: &[Vec<f64>],
    geometry: &FrameGeometry,
) -> Result<Vec<f64>> {
    if units.len() != gains.len() {
        return Err(Error::Shape(format!(
            "{} frames of units but {} frames of gains",
            units.len(),
            gains.len()
        )));
    }
    let window = synthesis_window(geometry.frame_len);
    let mut summed = Vec::with_capacity(units.len());
    for (j, (frame, g)) in units.iter().zip(gains).enumerate() {
        if frame.len() != g.len() {
            return Err(Error::Shape(format!(
                "frame {j}: {} units but {} gains",
                frame.len(),
                g.len()
            )));
        }
        if let Some(bad) = g.iter().find(|g| !(0.0..=1.0).contains(*g)) {
            return Err(Error::Contract(format!(
                "gain {bad} outside [0, 1] in frame {j}"
            )));
        }
        let mut acc = vec![0.0; geometry.frame_len];
        for (unit, &gain) in frame.iter().zip(g) {
            if unit.len() != geometry.frame_len {
                return Err(Error::Shape(format!(
                    "unit in frame {j} has {} samples, expected {}",
                    unit.len(),
                    geometry.frame_len
                )));
            }
            for ((a, x), w) in acc.iter_mut().zip(unit).zip(&window) {
                *a += gain * w * x;
            }
        }
        summed.push(acc);
    }
    overlap_add_frames(&summed, geometry)
}
