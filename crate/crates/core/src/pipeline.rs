//! Streaming composition of the stages:
//! decompose → periodicity → pitch → voiced SNR → noise / a-priori SNR →
//! gain → comb → resynthesis.
//!
//! Output sample `m` is the enhanced version of input sample
//! `m - n_gd`; a frame is released once its last sample has arrived, so
//! the buffering latency is one frame on top of the filterbank delay.

use num_complex::Complex64;

use crate::config::RunConfig;
use crate::error::Result;
use crate::filterbank::{design_filterbank, SubbandStream};
use crate::framing::{synthesis_window, AnalysisFrame, FrameGeometry, Framer, OverlapAdd};
use crate::gain::{apply_comb, apply_gains, compute_gain, smooth_frame};
use crate::noise::EnhancerState;
use crate::periodicity::{BandSplit, PeriodGrid, PeriodicityMap};
use crate::pitch::{FrameDecision, PitchTracker};
use crate::snr::estimate_voiced_snr;

/// Leading frames whose window still reaches before the delay-aligned
/// start of the input. Recursive estimates are seeded after them.
pub fn warmup_frames(group_delay: usize, geometry: FrameGeometry) -> usize {
    (group_delay + geometry.frame_len - geometry.hop).div_ceil(geometry.hop)
}

/// Filterbank, framing, periodicity and pitch tracking.
#[derive(Debug, Clone)]
pub struct Analyzer {
    stream: SubbandStream,
    framer: Framer,
    grid: PeriodGrid,
    split: BandSplit,
    tracker: PitchTracker,
    scratch: Vec<Complex64>,
    group_delay: usize,
    samples_in: usize,
    finished: bool,
}

impl Analyzer {
    pub fn new(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let coeffs = design_filterbank(&config.filterbank)?;
        let cfs: Vec<f64> = coeffs.iter().map(|c| c.cf).collect();
        let geometry = config.geometry()?;
        let grid = config.grid()?;
        Ok(Self {
            stream: SubbandStream::new(&coeffs),
            framer: Framer::new(coeffs.len(), geometry),
            grid,
            split: BandSplit::with_threshold(&cfs, config.split_hz),
            tracker: PitchTracker::new(config.tracker, grid).with_warmup(warmup_frames(
                config.filterbank.group_delay_samples,
                geometry,
            )),
            scratch: vec![Complex64::new(0.0, 0.0); coeffs.len()],
            group_delay: config.filterbank.group_delay_samples,
            samples_in: 0,
            finished: false,
        })
    }

    pub fn geometry(&self) -> FrameGeometry {
        self.framer.geometry()
    }

    pub fn grid(&self) -> &PeriodGrid {
        &self.grid
    }

    pub fn num_subbands(&self) -> usize {
        self.stream.num_subbands()
    }

    pub fn group_delay(&self) -> usize {
        self.group_delay
    }

    pub fn samples_in(&self) -> usize {
        self.samples_in
    }

    pub fn warmup_frames(&self) -> usize {
        warmup_frames(self.group_delay, self.geometry())
    }

    fn analyze_frame<F>(&mut self, frame: AnalysisFrame, on_frame: &mut F) -> Result<()>
    where
        F: FnMut(AnalysisFrame, PeriodicityMap, FrameDecision) -> Result<()>,
    {
        let map = PeriodicityMap::compute(&frame, &self.grid, &self.split)?;
        let decision = self.tracker.process(frame.index, &frame.unit_energy, &map);
        on_frame(frame, map, decision)
    }

    /// Feeds input samples; `on_frame` runs for every completed frame.
    pub fn push<F>(&mut self, input: &[f64], mut on_frame: F) -> Result<()>
    where
        F: FnMut(AnalysisFrame, PeriodicityMap, FrameDecision) -> Result<()>,
    {
        for &x in input {
            self.samples_in += 1;
            self.stream.process_sample(x, &mut self.scratch);
            if let Some(frame) = self.framer.push(&self.scratch) {
                self.analyze_frame(frame, &mut on_frame)?;
            }
        }
        Ok(())
    }

    /// Drains the filterbank delay and emits the zero-padded closing
    /// frames so every input sample is covered by two frames.
    pub fn finish<F>(&mut self, mut on_frame: F) -> Result<()>
    where
        F: FnMut(AnalysisFrame, PeriodicityMap, FrameDecision) -> Result<()>,
    {
        if self.finished {
            return Ok(());
        }
        self.finished = true;
        for _ in 0..self.group_delay {
            self.stream.process_sample(0.0, &mut self.scratch);
            if let Some(frame) = self.framer.push(&self.scratch) {
                self.analyze_frame(frame, &mut on_frame)?;
            }
        }
        if let Some(frame) = self.framer.flush() {
            self.analyze_frame(frame, &mut on_frame)?;
        }
        // One more frame so the last half-frame gets its overlap partner.
        let zero = vec![Complex64::new(0.0, 0.0); self.scratch.len()];
        for _ in 0..self.geometry().hop {
            if let Some(mut frame) = self.framer.push(&zero) {
                frame.partial = true;
                self.analyze_frame(frame, &mut on_frame)?;
            }
        }
        Ok(())
    }

    /// Number of values held in fixed-size buffers.
    pub fn footprint(&self) -> usize {
        self.framer.buffered_len()
            + self.tracker.state().memory.len()
            + self.tracker.state().e0d.len()
    }
}

/// Summary of one processed frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameReport {
    pub decision: FrameDecision,
    pub gains: Vec<f64>,
    pub noise_energy: Vec<f64>,
    pub apriori_snr: Vec<f64>,
    pub mean_pd: Vec<f64>,
    pub partial: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnhanceStats {
    pub frames: usize,
    pub periodic_frames: usize,
}

impl EnhanceStats {
    pub fn periodic_pct(&self) -> f64 {
        if self.frames == 0 {
            0.0
        } else {
            100.0 * self.periodic_frames as f64 / self.frames as f64
        }
    }
}

#[derive(Debug, Clone)]
struct Synthesis {
    noise: EnhancerState,
    prev_gain: Option<Vec<f64>>,
    window: Vec<f64>,
    ola: OverlapAdd,
    config: RunConfig,
    skip: usize,
    warmup: usize,
    stats: EnhanceStats,
}

impl Synthesis {
    fn frame(
        &mut self,
        frame: AnalysisFrame,
        map: PeriodicityMap,
        decision: FrameDecision,
    ) -> Result<(Vec<f64>, FrameReport)> {
        let k = frame.num_subbands();
        let (apriori, gains) = if frame.index < self.warmup {
            (vec![0.0; k], vec![self.config.gain.g_min; k])
        } else {
            let voiced = decision
                .p0
                .map(|p| estimate_voiced_snr(&map, p))
                .transpose()?;
            let apriori = self.noise.update(
                &frame.unit_energy,
                voiced.as_ref().map(|v| v.snr.as_slice()),
            )?;
            let raw = compute_gain(&apriori.snr, self.config.gain.g_min);
            let gains = smooth_frame(
                &raw,
                self.prev_gain.as_deref(),
                decision.periodic,
                &self.config.gain,
            );
            self.noise.commit(&gains, &frame.unit_energy);
            (apriori.snr, gains)
        };

        let mut units = apply_gains(&frame, &gains, &self.window)?;
        if let (true, Some(p0)) = (self.config.comb_enabled, decision.p0) {
            for u in units.iter_mut() {
                *u = apply_comb(u, p0)?;
            }
        }
        let mut summed = vec![0.0; self.window.len()];
        for u in &units {
            summed.iter_mut().zip(u).for_each(|(s, v)| *s += v);
        }
        let mut out = self.ola.push(&summed);
        if self.skip > 0 {
            let n = self.skip.min(out.len());
            out.drain(..n);
            self.skip -= n;
        }

        self.stats.frames += 1;
        self.stats.periodic_frames += usize::from(decision.periodic);
        let report = FrameReport {
            mean_pd: map.mean_pd(),
            decision,
            noise_energy: self.noise.e_d.clone(),
            apriori_snr: apriori,
            partial: frame.partial,
            gains: gains.clone(),
        };
        self.prev_gain = Some(gains);
        Ok((out, report))
    }
}

/// Streaming enhancer.
#[derive(Debug, Clone)]
pub struct Enhancer {
    analyzer: Analyzer,
    synth: Synthesis,
    emitted: usize,
}

impl Enhancer {
    pub fn new(config: &RunConfig) -> Result<Self> {
        let analyzer = Analyzer::new(config)?;
        let geometry = analyzer.geometry();
        let synth = Synthesis {
            noise: EnhancerState::new(config.noise, analyzer.num_subbands(), config.gain.g_min),
            prev_gain: None,
            window: synthesis_window(geometry.frame_len),
            ola: OverlapAdd::new(geometry),
            config: config.clone(),
            // The first released half-frame lies before the stream start.
            skip: geometry.frame_len - geometry.hop,
            warmup: analyzer.warmup_frames(),
            stats: EnhanceStats::default(),
        };
        Ok(Self {
            analyzer,
            synth,
            emitted: 0,
        })
    }

    pub fn group_delay(&self) -> usize {
        self.analyzer.group_delay()
    }

    pub fn stats(&self) -> &EnhanceStats {
        &self.synth.stats
    }

    /// Feeds input; returns the output samples completed so far and calls
    /// `on_frame` once per frame.
    pub fn process_with<F: FnMut(&FrameReport)>(
        &mut self,
        input: &[f64],
        mut on_frame: F,
    ) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(input.len() + self.analyzer.geometry().hop);
        let synth = &mut self.synth;
        self.analyzer.push(input, |frame, map, decision| {
            let (samples, report) = synth.frame(frame, map, decision)?;
            on_frame(&report);
            out.extend(samples);
            Ok(())
        })?;
        self.emitted += out.len();
        Ok(out)
    }

    pub fn process(&mut self, input: &[f64]) -> Result<Vec<f64>> {
        self.process_with(input, |_| {})
    }

    /// Flushes the stream. Total output is `input length + group delay`.
    pub fn finish_with<F: FnMut(&FrameReport)>(&mut self, mut on_frame: F) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        let synth = &mut self.synth;
        self.analyzer.finish(|frame, map, decision| {
            let (samples, report) = synth.frame(frame, map, decision)?;
            on_frame(&report);
            out.extend(samples);
            Ok(())
        })?;
        let total = self.analyzer.samples_in() + self.analyzer.group_delay();
        out.truncate(total.saturating_sub(self.emitted));
        self.emitted += out.len();
        Ok(out)
    }

    pub fn finish(&mut self) -> Result<Vec<f64>> {
        self.finish_with(|_| {})
    }

    /// Number of values held in the enhancer's buffers; does not grow with
    /// stream length.
    pub fn footprint(&self) -> usize {
        let s = &self.synth;
        self.analyzer.footprint()
            + s.noise.e_d.len() * 4
            + s.prev_gain.as_ref().map_or(0, Vec::len)
            + s.ola.tail().len()
    }
}

/// Offline enhancement result.
#[derive(Debug, Clone)]
pub struct Enhanced {
    /// `input.len() + group_delay` samples, delayed by the group delay.
    pub output: Vec<f64>,
    pub frames: Vec<FrameReport>,
    pub group_delay: usize,
    pub stats: EnhanceStats,
}

impl Enhanced {
    /// Output advanced by the group delay, same length as the input.
    pub fn aligned(&self) -> &[f64] {
        &self.output[self.group_delay..]
    }
}

pub fn enhance(input: &[f64], config: &RunConfig) -> Result<Enhanced> {
    let mut enh = Enhancer::new(config)?;
    let mut frames = Vec::new();
    let mut output = enh.process_with(input, |r| frames.push(r.clone()))?;
    output.extend(enh.finish_with(|r| frames.push(r.clone()))?);
    Ok(Enhanced {
        output,
        frames,
        group_delay: enh.group_delay(),
        stats: enh.stats().clone(),
    })
}

/// Runs analysis and pitch tracking only.
pub fn track_pitch(input: &[f64], config: &RunConfig) -> Result<Vec<FrameDecision>> {
    let mut analyzer = Analyzer::new(config)?;
    let mut out = Vec::new();
    analyzer.push(input, |_, _, d| {
        out.push(d);
        Ok(())
    })?;
    analyzer.finish(|_, _, d| {
        out.push(d);
        Ok(())
    })?;
    Ok(out)
}
