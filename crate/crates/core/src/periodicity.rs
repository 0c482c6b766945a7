//! Per-unit periodicity features over the period-candidate grid.
//!
//! For a unit `x` and lag `p`, with sums over `n ∈ [0, N-1-p]`:
//!
//! * NAC: normalized autocorrelation `Σ x(n)x(n+p) / sqrt(Σ x(n)² · Σ x(n+p)²)`
//! * CFR: comb-filter ratio `Σ (x(n)+x(n+p))² / Σ (x(n)-x(n+p))²`
//! * PD:  periodicity degree `max(0.01, NAC · CFR)`
//!
//! Low-CF subbands are analyzed on the real subband signal, high-CF
//! subbands on their zero-mean Hilbert envelope.

use crate::error::{Error, Result};
use crate::framing::AnalysisFrame;

/// Upper bound on CFR; reached when the difference energy vanishes.
pub const CFR_MAX: f64 = 1e4;
/// Floor applied to PD.
pub const PD_FLOOR: f64 = 0.01;
/// Subbands with CF at or below this are analyzed on the waveform.
pub const ENVELOPE_SPLIT_HZ: f64 = 1500.0;

const CFR_EPS: f64 = 1e-12;

/// Integer period candidates `p_min..=p_max` in samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeriodGrid {
    pub p_min: usize,
    pub p_max: usize,
}

impl PeriodGrid {
    pub const F0_MIN: f64 = 70.0;
    pub const F0_MAX: f64 = 420.0;

    /// Grid for the 70–420 Hz F0 search range, capped below half a frame.
    pub fn for_sample_rate(sample_rate: f64, frame_len: usize) -> Result<Self> {
        Self::from_f0_range(Self::F0_MIN, Self::F0_MAX, sample_rate, frame_len)
    }

    pub fn from_f0_range(
        f0_min: f64,
        f0_max: f64,
        sample_rate: f64,
        frame_len: usize,
    ) -> Result<Self> {
        if !(f0_min > 0.0 && f0_max > f0_min) {
            return Err(Error::Config(format!(
                "invalid F0 range [{f0_min}, {f0_max}]"
            )));
        }
        let p_min = (sample_rate / f0_max).round() as usize;
        let p_max = ((sample_rate / f0_min).round() as usize).min(frame_len / 2 - 1);
        Self::new(p_min, p_max)
    }

    pub fn new(p_min: usize, p_max: usize) -> Result<Self> {
        if p_min < 2 || p_max <= p_min {
            return Err(Error::Config(format!(
                "invalid period grid [{p_min}, {p_max}]"
            )));
        }
        Ok(Self { p_min, p_max })
    }

    pub fn len(&self) -> usize {
        self.p_max - self.p_min + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, p: usize) -> bool {
        (self.p_min..=self.p_max).contains(&p)
    }

    pub fn periods(&self) -> impl Iterator<Item = usize> {
        self.p_min..=self.p_max
    }

    /// Column of `p` in a feature matrix.
    pub fn index_of(&self, p: usize) -> Option<usize> {
        self.contains(p).then(|| p - self.p_min)
    }

    pub fn period_at(&self, index: usize) -> usize {
        self.p_min + index
    }
}

/// Which subbands are analyzed on their envelope.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BandSplit {
    envelope: Vec<bool>,
}

impl BandSplit {
    pub fn from_center_frequencies(cfs: &[f64]) -> Self {
        Self::with_threshold(cfs, ENVELOPE_SPLIT_HZ)
    }

    pub fn with_threshold(cfs: &[f64], split_hz: f64) -> Self {
        Self {
            envelope: cfs.iter().map(|&cf| cf > split_hz).collect(),
        }
    }

    pub fn uses_envelope(&self, k: usize) -> bool {
        self.envelope[k]
    }

    pub fn low(&self) -> impl Iterator<Item = usize> + '_ {
        self.envelope
            .iter()
            .enumerate()
            .filter(|(_, &e)| !e)
            .map(|(k, _)| k)
    }

    pub fn high(&self) -> impl Iterator<Item = usize> + '_ {
        self.envelope
            .iter()
            .enumerate()
            .filter(|(_, &e)| e)
            .map(|(k, _)| k)
    }

    pub fn len(&self) -> usize {
        self.envelope.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envelope.is_empty()
    }
}

/// NAC, CFR and PD for one frame, each `K × grid.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicityMap {
    pub grid: PeriodGrid,
    pub nac: Vec<Vec<f64>>,
    pub cfr: Vec<Vec<f64>>,
    pub pd: Vec<Vec<f64>>,
}

impl PeriodicityMap {
    pub fn compute(frame: &AnalysisFrame, grid: &PeriodGrid, split: &BandSplit) -> Result<Self> {
        check_split(frame, split)?;
        let k = frame.num_subbands();
        let mut nac = Vec::with_capacity(k);
        let mut cfr = Vec::with_capacity(k);
        let mut pd = Vec::with_capacity(k);
        for i in 0..k {
            let (n, c) = unit_features(analysis_signal(frame, split, i), grid);
            pd.push(
                n.iter()
                    .zip(&c)
                    .map(|(a, b)| periodicity_degree(*a, *b))
                    .collect(),
            );
            nac.push(n);
            cfr.push(c);
        }
        Ok(Self {
            grid: *grid,
            nac,
            cfr,
            pd,
        })
    }

    pub fn num_subbands(&self) -> usize {
        self.pd.len()
    }

    /// PD of every subband at period `p`.
    pub fn pd_at(&self, p: usize) -> Option<Vec<f64>> {
        let i = self.grid.index_of(p)?;
        Some(self.pd.iter().map(|row| row[i]).collect())
    }

    /// Subband-averaged PD over the grid.
    pub fn mean_pd(&self) -> Vec<f64> {
        let k = self.pd.len().max(1) as f64;
        (0..self.grid.len())
            .map(|i| self.pd.iter().map(|row| row[i]).sum::<f64>() / k)
            .collect()
    }
}

fn check_split(frame: &AnalysisFrame, split: &BandSplit) -> Result<()> {
    if frame.num_subbands() != split.len() {
        return Err(Error::Shape(format!(
            "frame has {} subbands, band split has {}",
            frame.num_subbands(),
            split.len()
        )));
    }
    Ok(())
}

fn analysis_signal<'a>(frame: &'a AnalysisFrame, split: &BandSplit, k: usize) -> &'a [f64] {
    if split.uses_envelope(k) {
        &frame.env_units[k]
    } else {
        &frame.real_units[k]
    }
}

/// Sums needed at one lag: leading-window energy, lagged-window energy,
/// and the energy of the difference.
#[derive(Debug, Clone, Copy)]
struct LagSums {
    head: f64,
    tail: f64,
    diff: f64,
}

impl LagSums {
    fn cross(&self) -> f64 {
        0.5 * (self.head + self.tail - self.diff)
    }

    fn nac(&self) -> f64 {
        if self.head <= 0.0 || self.tail <= 0.0 {
            return 0.0;
        }
        (self.cross() / (self.head * self.tail).sqrt()).clamp(-1.0, 1.0)
    }

    fn cfr(&self) -> f64 {
        let sum = (2.0 * (self.head + self.tail) - self.diff).max(0.0);
        if self.diff <= CFR_EPS * (sum + 1e-20) {
            CFR_MAX
        } else {
            (sum / self.diff).min(CFR_MAX)
        }
    }
}

fn lag_sums(x: &[f64], prefix: &[f64], p: usize) -> LagSums {
    let m = x.len() - p;
    let head = prefix[m];
    let tail = prefix[x.len()] - prefix[p];
    let diff = x[..m]
        .iter()
        .zip(&x[p..])
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    LagSums { head, tail, diff }
}

fn energy_prefix(x: &[f64]) -> Vec<f64> {
    let mut prefix = Vec::with_capacity(x.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for v in x {
        acc += v * v;
        prefix.push(acc);
    }
    prefix
}

fn unit_features(x: &[f64], grid: &PeriodGrid) -> (Vec<f64>, Vec<f64>) {
    let prefix = energy_prefix(x);
    grid.periods()
        .map(|p| {
            if p >= x.len() {
                return (0.0, 0.0);
            }
            let s = lag_sums(x, &prefix, p);
            (s.nac(), s.cfr())
        })
        .unzip()
}

/// NAC of a single signal at lag `p`; zero when either window is silent.
pub fn unit_nac(x: &[f64], p: usize) -> f64 {
    if p >= x.len() {
        return 0.0;
    }
    lag_sums(x, &energy_prefix(x), p).nac()
}

/// CFR of a single signal at lag `p`, clamped to [`CFR_MAX`].
pub fn unit_cfr(x: &[f64], p: usize) -> f64 {
    if p >= x.len() {
        return 0.0;
    }
    lag_sums(x, &energy_prefix(x), p).cfr()
}

pub fn periodicity_degree(nac: f64, cfr: f64) -> f64 {
    (nac * cfr).max(PD_FLOOR)
}

pub fn compute_nac(
    frame: &AnalysisFrame,
    grid: &PeriodGrid,
    split: &BandSplit,
) -> Result<Vec<Vec<f64>>> {
    check_split(frame, split)?;
    Ok((0..frame.num_subbands())
        .map(|k| unit_features(analysis_signal(frame, split, k), grid).0)
        .collect())
}

pub fn compute_cfr(
    frame: &AnalysisFrame,
    grid: &PeriodGrid,
    split: &BandSplit,
) -> Result<Vec<Vec<f64>>> {
    check_split(frame, split)?;
    Ok((0..frame.num_subbands())
        .map(|k| unit_features(analysis_signal(frame, split, k), grid).1)
        .collect())
}

pub fn compute_pd(nac: &[Vec<f64>], cfr: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if nac.len() != cfr.len() || nac.iter().zip(cfr).any(|(a, b)| a.len() != b.len()) {
        return Err(Error::Shape("NAC and CFR matrices differ in shape".into()));
    }
    Ok(nac
        .iter()
        .zip(cfr)
        .map(|(a, b)| {
            a.iter()
                .zip(b)
                .map(|(n, c)| periodicity_degree(*n, *c))
                .collect()
        })
        .collect())
}
