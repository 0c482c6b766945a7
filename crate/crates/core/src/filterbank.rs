//! Phase-corrected complex 4th-order gammatone analysis filterbank.
//!
//! Each subband is the recursion
//!
//! ```text
//!            A z^-1 + 4 A^2 z^-2 + A^3 z^-3
//! G(z) = B · ------------------------------ · C · z^-D
//!                  (1 - A z^-1)^4
//! ```
//!
//! with a complex pole `A` set by the center frequency and its ERB. The
//! phase factor `C` moves the fine-structure peak of the impulse response
//! onto its envelope peak and the integer delay `D` lines every envelope
//! peak up at the common group delay, so the real parts of all subband
//! outputs can be summed directly to resynthesize the input.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::framing::{overlap_add_frames, FrameGeometry};

/// Ratio of the gammatone bandwidth to the auditory ERB.
pub const BANDWIDTH_FACTOR: f64 = 1.019;

/// Auditory equivalent rectangular bandwidth in Hz.
pub fn erb_hz(fc: f64) -> f64 {
    0.108 * fc + 24.7
}

/// Position on the ERB-number scale (Glasberg & Moore).
pub fn erb_number(fc: f64) -> f64 {
    21.4 * (1.0 + 0.00437 * fc).log10()
}

/// Inverse of [`erb_number`].
pub fn erb_number_to_hz(e: f64) -> f64 {
    (10f64.powf(e / 21.4) - 1.0) / 0.00437
}

/// Envelope peak position of the 4th-order gammatone impulse response,
/// `t^3 exp(-2π·1.019·ERB·t)`, rounded to the nearest sample.
pub fn envelope_peak_samples(erb: f64, sample_rate: f64) -> usize {
    (3.0 * sample_rate / (2.0 * PI * BANDWIDTH_FACTOR * erb)).round() as usize
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterbankSpec {
    /// First (lowest) center frequency in Hz.
    pub fc1: f64,
    /// CF spacing in units of the local ERB.
    pub erb_step: f64,
    pub num_filters: usize,
    /// Desired group delay of the whole bank in samples.
    pub group_delay_samples: usize,
    pub sample_rate: f64,
}

impl Default for FilterbankSpec {
    fn default() -> Self {
        Self {
            fc1: 80.0,
            erb_step: 0.5,
            num_filters: 47,
            group_delay_samples: 128,
            sample_rate: 8000.0,
        }
    }
}

impl FilterbankSpec {
    /// Center frequencies of all subbands.
    ///
    /// Adjacent CFs are `erb_step` apart on the ERB-number scale, which is
    /// the continuous form of `fc(k+1) - fc(k) = erb_step · ERB(fc(k))`.
    pub fn center_frequencies(&self) -> Vec<f64> {
        let base = erb_number(self.fc1);
        (0..self.num_filters)
            .map(|k| erb_number_to_hz(base + k as f64 * self.erb_step))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate.is_nan() || self.sample_rate <= 0.0 {
            return Err(Error::Design(format!(
                "sample rate must be positive, got {}",
                self.sample_rate
            )));
        }
        if self.fc1.is_nan() || self.fc1 <= 0.0 {
            return Err(Error::Design(format!(
                "fc1 must be positive, got {}",
                self.fc1
            )));
        }
        if !(self.erb_step > 0.0 && self.erb_step <= 1.0) {
            return Err(Error::Design(format!(
                "erb_step must lie in (0, 1], got {}",
                self.erb_step
            )));
        }
        if self.num_filters == 0 {
            return Err(Error::Design("at least one filter is required".into()));
        }
        let top = *self.center_frequencies().last().unwrap();
        if top >= self.sample_rate / 2.0 {
            return Err(Error::Design(format!(
                "highest center frequency {top:.1} Hz is not below Nyquist ({} Hz)",
                self.sample_rate / 2.0
            )));
        }
        Ok(())
    }
}

/// Coefficients of one subband.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterCoeffs {
    /// Complex pole.
    pub a: Complex64,
    /// Real normalization gain.
    pub b: f64,
    /// Unit-modulus phase correction.
    pub c: Complex64,
    /// Whole-sample delay aligning the envelope peak to the group delay.
    pub d: usize,
    pub cf: f64,
    pub erb: f64,
    /// Envelope peak position in samples.
    pub n_pe: usize,
}

impl FilterCoeffs {
    fn design(cf: f64, spec: &FilterbankSpec) -> Self {
        let fs = spec.sample_rate;
        let erb = erb_hz(cf);
        let radius = (-2.0 * PI * BANDWIDTH_FACTOR * erb / fs).exp();
        let omega = 2.0 * PI * cf / fs;
        let a = Complex64::from_polar(radius, omega);

        // Unity gain at the CF for the complex output, then the ERB-step
        // overlap compensation.
        let r = radius;
        let b = 2f64.sqrt() * spec.erb_step * (1.0 - r).powi(4) / (r + 4.0 * r * r + r.powi(3));

        let n_pe = envelope_peak_samples(erb, fs);
        let n_gd = spec.group_delay_samples;
        let c = Complex64::from_polar(1.0, -omega * n_gd.min(n_pe) as f64);
        let d = n_gd.saturating_sub(n_pe);
        Self {
            a,
            b,
            c,
            d,
            cf,
            erb,
            n_pe,
        }
    }

    /// Transfer function magnitude at frequency `f` Hz, delay excluded.
    pub fn magnitude_at(&self, f: f64, sample_rate: f64) -> f64 {
        let zi = Complex64::from_polar(1.0, -2.0 * PI * f / sample_rate);
        let a = self.a;
        let num = a * zi + 4.0 * a * a * zi * zi + a * a * a * zi * zi * zi;
        let den = (Complex64::new(1.0, 0.0) - a * zi).powi(4);
        self.b * (num / den).norm()
    }
}

/// Designs every subband of the bank described by `spec`.
pub fn design_filterbank(spec: &FilterbankSpec) -> Result<Vec<FilterCoeffs>> {
    spec.validate()?;
    let coeffs: Vec<FilterCoeffs> = spec
        .center_frequencies()
        .into_iter()
        .map(|cf| FilterCoeffs::design(cf, spec))
        .collect();
    if let Some((k, bad)) = coeffs.iter().enumerate().find(|(_, c)| c.a.norm() >= 1.0) {
        return Err(Error::Design(format!(
            "subband {} (cf {:.1} Hz) has an unstable pole |A| = {}",
            k + 1,
            bad.cf,
            bad.a.norm()
        )));
    }
    Ok(coeffs)
}

/// Text dump of the coefficients, one tab-separated row per subband
/// preceded by a `#` header line.
pub fn coefficient_table(coeffs: &[FilterCoeffs]) -> String {
    let mut out = String::from("# k\tcf_hz\terb_hz\tre_a\tim_a\tb\tre_c\tim_c\td\tn_pe\n");
    for (k, c) in coeffs.iter().enumerate() {
        let _ = writeln!(
            out,
            "{}\t{:.6}\t{:.6}\t{:.15e}\t{:.15e}\t{:.15e}\t{:.15e}\t{:.15e}\t{}\t{}",
            k + 1,
            c.cf,
            c.erb,
            c.a.re,
            c.a.im,
            c.b,
            c.c.re,
            c.c.im,
            c.d,
            c.n_pe
        );
    }
    out
}

#[derive(Debug, Clone)]
struct SubbandFilter {
    coeffs: FilterCoeffs,
    /// Outputs of the four one-pole sections at the previous sample.
    poles: [Complex64; 4],
    /// Last three outputs of the pole cascade, newest first.
    taps: [Complex64; 3],
    gain: Complex64,
    delay: VecDeque<Complex64>,
}

impl SubbandFilter {
    fn new(coeffs: FilterCoeffs) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        Self {
            coeffs,
            poles: [zero; 4],
            taps: [zero; 3],
            gain: coeffs.c * coeffs.b,
            delay: std::iter::repeat_n(zero, coeffs.d).collect(),
        }
    }

    #[inline]
    fn tick(&mut self, x: f64) -> Complex64 {
        let a = self.coeffs.a;
        let mut v = Complex64::new(x, 0.0);
        for p in self.poles.iter_mut() {
            v += a * *p;
            *p = v;
        }
        // Numerator A z^-1 + 4A^2 z^-2 + A^3 z^-3 on the all-pole output.
        let [t1, t2, t3] = self.taps;
        let y = a * (t1 + a * (4.0 * t2 + a * t3));
        self.taps = [v, t1, t2];

        let y = y * self.gain;
        if self.delay.is_empty() {
            y
        } else {
            self.delay.push_back(y);
            self.delay.pop_front().unwrap()
        }
    }

    fn reset(&mut self) {
        *self = Self::new(self.coeffs);
    }
}

/// Streaming state of the analysis bank. Feeding samples in any chunking
/// yields the same output as one call on the concatenation.
#[derive(Debug, Clone)]
pub struct SubbandStream {
    filters: Vec<SubbandFilter>,
}

impl SubbandStream {
    pub fn new(coeffs: &[FilterCoeffs]) -> Self {
        Self {
            filters: coeffs.iter().copied().map(SubbandFilter::new).collect(),
        }
    }

    pub fn num_subbands(&self) -> usize {
        self.filters.len()
    }

    pub fn coeffs(&self) -> impl Iterator<Item = &FilterCoeffs> {
        self.filters.iter().map(|f| &f.coeffs)
    }

    /// Filters one input sample, writing one complex sample per subband.
    #[inline]
    pub fn process_sample(&mut self, x: f64, out: &mut [Complex64]) {
        debug_assert_eq!(out.len(), self.filters.len());
        for (f, o) in self.filters.iter_mut().zip(out.iter_mut()) {
            *o = f.tick(x);
        }
    }

    /// Filters a block; returns a `K × samples.len()` matrix.
    pub fn analyze(&mut self, samples: &[f64]) -> Vec<Vec<Complex64>> {
        let mut out = vec![Vec::with_capacity(samples.len()); self.filters.len()];
        for &x in samples {
            for (f, row) in self.filters.iter_mut().zip(out.iter_mut()) {
                row.push(f.tick(x));
            }
        }
        out
    }

    pub fn reset(&mut self) {
        self.filters.iter_mut().for_each(SubbandFilter::reset);
    }
}

/// Sums gain-weighted, windowed real units (`frames × K × N`) across
/// subbands and overlap-adds them across frames at 50% overlap.
pub fn resynthesize(units: &[Vec<Vec<f64>>], geometry: &FrameGeometry) -> Result<Vec<f64>> {
    let k = units.first().map_or(0, Vec::len);
    let mut summed = Vec::with_capacity(units.len());
    for (j, frame) in units.iter().enumerate() {
        if frame.len() != k {
            return Err(Error::Shape(format!(
                "frame {j} has {} subbands, expected {k}",
                frame.len()
            )));
        }
        let mut acc = vec![0.0; geometry.frame_len];
        for (i, unit) in frame.iter().enumerate() {
            if unit.len() != geometry.frame_len {
                return Err(Error::Shape(format!(
                    "unit ({j}, {i}) has {} samples, expected {}",
                    unit.len(),
                    geometry.frame_len
                )));
            }
            acc.iter_mut().zip(unit).for_each(|(a, u)| *a += u);
        }
        summed.push(acc);
    }
    overlap_add_frames(&summed, geometry)
}

/// Summed real impulse response of the analysis bank (direct summation,
/// no framing), `len` samples long.
pub fn impulse_response(coeffs: &[FilterCoeffs], len: usize) -> Vec<f64> {
    let mut stream = SubbandStream::new(coeffs);
    let mut buf = vec![Complex64::new(0.0, 0.0); coeffs.len()];
    (0..len)
        .map(|n| {
            stream.process_sample(if n == 0 { 1.0 } else { 0.0 }, &mut buf);
            buf.iter().map(|z| z.re).sum()
        })
        .collect()
}
