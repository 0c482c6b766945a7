//! Online periodic-frame detection and fundamental-period tracking.
//!
//! Per frame: track the stationary noise level per subband, weight PD by
//! an initial Wiener gain to form the enhanced frame periodicity degree
//! (EFPD), derive adaptive dual thresholds, pick EFPD peaks, consult a
//! median memory of recent confident periods, and decide using the
//! continuity of preceding frames. Only the current and past frames are
//! used.

use std::collections::VecDeque;

use crate::periodicity::{PeriodGrid, PeriodicityMap};
use crate::snr::pd_of_snr;

/// Floor on the stationary-noise energy estimate.
pub const ENERGY_FLOOR: f64 = 1e-12;

/// `clamp(base + slope·(x - pivot), min, max)` with `x` the frame SNR in
/// dB clamped to `[0, 30]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdRule {
    pub base: f64,
    pub slope: f64,
    pub min: f64,
    pub max: f64,
}

impl ThresholdRule {
    const PIVOT_DB: f64 = 10.0;
    const MAX_DB: f64 = 30.0;

    /// SNR threshold for a frame whose mean initial SNR is `fsnr` (linear).
    pub fn snr_threshold(&self, fsnr: f64) -> f64 {
        let db = if fsnr > 0.0 {
            (10.0 * fsnr.log10()).clamp(0.0, Self::MAX_DB)
        } else {
            0.0
        };
        (self.base + self.slope * (db - Self::PIVOT_DB)).clamp(self.min, self.max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerParams {
    /// Smoothing of the stationary-noise estimate.
    pub alpha: f64,
    /// Onset ratio above which the stationary-noise estimate is held.
    pub delta: f64,
    pub upper: ThresholdRule,
    pub lower: ThresholdRule,
    /// Number of confident peak periods kept for the memory median.
    pub memory_depth: usize,
    /// Relative deviation under which the current peak replaces memory.
    pub memory_deviation: f64,
    /// Consecutive peak-less frames after which continuity is dropped.
    pub continuity_gap: usize,
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self {
            alpha: 0.96,
            delta: 1.4,
            upper: ThresholdRule {
                base: 0.6,
                slope: 0.03,
                min: 0.3,
                max: 0.9,
            },
            lower: ThresholdRule {
                base: 0.2,
                slope: 0.01,
                min: 0.1,
                max: 0.2,
            },
            memory_depth: 50,
            memory_deviation: 0.4,
            continuity_gap: 3,
        }
    }
}

/// One onset-gated update of the stationary-noise energies.
///
/// On the first call (`e0d` empty) the estimate is the frame energy itself.
/// A subband whose estimate sits at the floor (the stream opened in digital
/// silence) is re-seeded the same way, since the onset gate would otherwise
/// hold it there forever.
pub fn update_stationary_noise(e0d: &mut Vec<f64>, energy: &[f64], alpha: f64, delta: f64) {
    if e0d.len() != energy.len() {
        *e0d = energy.iter().map(|e| e.max(ENERGY_FLOOR)).collect();
        return;
    }
    for (n, &e) in e0d.iter_mut().zip(energy) {
        if *n <= ENERGY_FLOOR {
            *n = e.max(ENERGY_FLOOR);
        } else if e / *n <= delta {
            *n = (alpha * *n + (1.0 - alpha) * e).max(ENERGY_FLOOR);
        }
    }
}

/// Maximum-likelihood SNR (floored at zero) and the matching Wiener gain.
pub fn initial_snr_and_gain(energy: &[f64], e0d: &[f64]) -> (Vec<f64>, Vec<f64>) {
    energy
        .iter()
        .zip(e0d)
        .map(|(&e, &n)| {
            let snr = (e / n.max(ENERGY_FLOOR) - 1.0).max(0.0);
            (snr, snr / (snr + 1.0))
        })
        .unzip()
}

/// Gain-weighted subband average of PD: `(1/K) Σ_k g0(k)·PD(k, p)`.
pub fn compute_efpd(pd: &[Vec<f64>], g0: &[f64]) -> Vec<f64> {
    assert_eq!(pd.len(), g0.len(), "PD rows and gains differ in count");
    let k = pd.len().max(1) as f64;
    let width = pd.first().map_or(0, Vec::len);
    let mut efpd = vec![0.0; width];
    for (row, &g) in pd.iter().zip(g0) {
        if g == 0.0 {
            continue;
        }
        efpd.iter_mut().zip(row).for_each(|(e, v)| *e += g * v);
    }
    efpd.iter_mut().for_each(|e| *e /= k);
    efpd
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub snrthd1: f64,
    pub snrthd2: f64,
    /// Upper PD threshold: confident periodicity.
    pub pdthd1: f64,
    /// Lower PD threshold: potential periodicity.
    pub pdthd2: f64,
}

pub fn compute_thresholds(snr0: &[f64], params: &TrackerParams) -> Thresholds {
    let fsnr = if snr0.is_empty() {
        0.0
    } else {
        snr0.iter().sum::<f64>() / snr0.len() as f64
    };
    let snrthd1 = params.upper.snr_threshold(fsnr);
    let snrthd2 = params.lower.snr_threshold(fsnr);
    Thresholds {
        snrthd1,
        snrthd2,
        pdthd1: pd_of_snr(snrthd1),
        pdthd2: pd_of_snr(snrthd2),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub period: usize,
    pub value: f64,
}

/// Strict interior local maxima of `efpd` above `pdthd2`.
pub fn detect_peaks(efpd: &[f64], grid: &PeriodGrid, pdthd2: f64) -> Vec<Peak> {
    efpd.windows(3)
        .enumerate()
        .filter(|(_, w)| w[1] > w[0] && w[1] > w[2] && w[1] > pdthd2)
        .map(|(i, w)| Peak {
            period: grid.period_at(i + 1),
            value: w[1],
        })
        .collect()
}

/// Highest peak; ties go to the shorter period.
pub fn max_peak(peaks: &[Peak]) -> Option<Peak> {
    peaks.iter().copied().fold(None, |best, p| match best {
        Some(b) if b.value >= p.value => Some(b),
        _ => Some(p),
    })
}

/// Peak nearest to `target`; ties go to the shorter period.
pub fn nearest_peak(peaks: &[Peak], target: f64) -> Option<Peak> {
    peaks.iter().copied().fold(None, |best, p| match best {
        Some(b) if (b.period as f64 - target).abs() <= (p.period as f64 - target).abs() => Some(b),
        _ => Some(p),
    })
}

/// Median memory of recent confident peak periods.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryP0 {
    periods: VecDeque<usize>,
    depth: usize,
}

impl MemoryP0 {
    pub fn new(depth: usize) -> Self {
        Self {
            periods: VecDeque::with_capacity(depth),
            depth,
        }
    }

    pub fn len(&self) -> usize {
        self.periods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.periods.is_empty()
    }

    pub fn push(&mut self, period: usize) {
        if self.periods.len() == self.depth {
            self.periods.pop_front();
        }
        self.periods.push_back(period);
    }

    pub fn median(&self) -> Option<f64> {
        if self.periods.is_empty() {
            return None;
        }
        let mut v: Vec<usize> = self.periods.iter().copied().collect();
        v.sort_unstable();
        let m = v.len() / 2;
        Some(if v.len() % 2 == 1 {
            v[m] as f64
        } else {
            (v[m - 1] + v[m]) as f64 / 2.0
        })
    }

    /// Records the frame's maximum peak when it clears `pdthd1` and returns
    /// the memory period for this frame. The replacement by a nearby
    /// current peak applies to this frame only.
    pub fn update(&mut self, peaks: &[Peak], pdthd1: f64, deviation: f64) -> Option<f64> {
        let top = max_peak(peaks)?;
        if top.value > pdthd1 {
            self.push(top.period);
        }
        let median = self.median()?;
        if (top.period as f64 - median).abs() < deviation * median {
            Some(top.period as f64)
        } else {
            Some(median)
        }
    }
}

/// Continuity across potential periodic frames.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Continuity {
    /// Whether the last potential periodic frame had a detected period.
    pub prev_detected: bool,
    /// Consecutive frames without any peak.
    pub gap: usize,
}

/// Decides one frame from its peaks: returns the detected period, if any.
pub fn decide_frame(
    continuity: &mut Continuity,
    peaks: &[Peak],
    pdthd1: f64,
    mem_p0: Option<f64>,
    continuity_gap: usize,
) -> Option<usize> {
    let Some(top) = max_peak(peaks) else {
        continuity.gap += 1;
        if continuity.gap >= continuity_gap {
            continuity.prev_detected = false;
        }
        return None;
    };
    continuity.gap = 0;
    let p0 = if continuity.prev_detected {
        Some(match mem_p0 {
            Some(m) => nearest_peak(peaks, m).unwrap().period,
            None => top.period,
        })
    } else if top.value > pdthd1 {
        Some(top.period)
    } else {
        None
    };
    continuity.prev_detected = p0.is_some();
    p0
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerState {
    pub e0d: Vec<f64>,
    pub memory: MemoryP0,
    pub continuity: Continuity,
    pub prev_p0: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameDecision {
    pub index: usize,
    pub periodic: bool,
    /// Estimated fundamental period in samples; set iff `periodic`.
    pub p0: Option<usize>,
    pub efpd: Vec<f64>,
    pub thresholds: Thresholds,
    pub snr0: Vec<f64>,
    pub peaks: Vec<Peak>,
    pub mem_p0: Option<f64>,
}

impl FrameDecision {
    /// Fundamental frequency in Hz, zero for aperiodic frames.
    pub fn f0_hz(&self, sample_rate: f64) -> f64 {
        self.p0.map_or(0.0, |p| sample_rate / p as f64)
    }
}

#[derive(Debug, Clone)]
pub struct PitchTracker {
    params: TrackerParams,
    grid: PeriodGrid,
    state: TrackerState,
    warmup: usize,
}

impl PitchTracker {
    pub fn new(params: TrackerParams, grid: PeriodGrid) -> Self {
        Self {
            params,
            grid,
            state: TrackerState {
                e0d: Vec::new(),
                memory: MemoryP0::new(params.memory_depth),
                continuity: Continuity::default(),
                prev_p0: None,
            },
            warmup: 0,
        }
    }

    /// Frames with index below `frames` are reported aperiodic and leave
    /// the state untouched. Used for the leading frames that do not yet
    /// hold a full window of input.
    pub fn with_warmup(mut self, frames: usize) -> Self {
        self.warmup = frames;
        self
    }

    pub fn state(&self) -> &TrackerState {
        &self.state
    }

    pub fn grid(&self) -> &PeriodGrid {
        &self.grid
    }

    /// Runs all tracking steps for frame `index` given its unit energies
    /// and periodicity map.
    pub fn process(&mut self, index: usize, energy: &[f64], map: &PeriodicityMap) -> FrameDecision {
        let p = &self.params;
        let st = &mut self.state;
        if index < self.warmup {
            return FrameDecision {
                index,
                periodic: false,
                p0: None,
                efpd: vec![0.0; self.grid.len()],
                thresholds: compute_thresholds(&[], p),
                snr0: vec![0.0; energy.len()],
                peaks: Vec::new(),
                mem_p0: None,
            };
        }
        update_stationary_noise(&mut st.e0d, energy, p.alpha, p.delta);
        let (snr0, g0) = initial_snr_and_gain(energy, &st.e0d);
        let efpd = compute_efpd(&map.pd, &g0);
        let thresholds = compute_thresholds(&snr0, p);
        let peaks = detect_peaks(&efpd, &self.grid, thresholds.pdthd2);
        let mem_p0 = st
            .memory
            .update(&peaks, thresholds.pdthd1, p.memory_deviation);
        let p0 = decide_frame(
            &mut st.continuity,
            &peaks,
            thresholds.pdthd1,
            mem_p0,
            p.continuity_gap,
        );
        st.prev_p0 = p0;
        FrameDecision {
            index,
            periodic: p0.is_some(),
            p0,
            efpd,
            thresholds,
            snr0,
            peaks,
            mem_p0,
        }
    }
}
