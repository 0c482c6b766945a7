//! Per-unit noise energy tracking and decision-directed a-priori SNR.

use crate::error::{Error, Result};

/// Floor on the noise energy in the a-priori SNR ratio.
pub const NOISE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    /// Noise smoothing in aperiodic frames and weakly periodic units.
    pub beta1: f64,
    /// Faster noise smoothing after an energy jump in weakly periodic units.
    pub beta1_fast: f64,
    /// Decision-directed speech smoothing.
    pub beta2: f64,
    /// Speech smoothing for weakly periodic units.
    pub beta2_fast: f64,
    /// Noise smoothing for strongly periodic units.
    pub beta3: f64,
    /// Energy jump, relative to the initial noise estimate, that selects
    /// `beta1_fast`.
    pub jump_ratio: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta1_fast: 0.8,
            beta2: 0.96,
            beta2_fast: 0.8,
            beta3: 0.9,
            jump_ratio: 2.0,
        }
    }
}

/// Recursive noise estimate for an aperiodic unit, capped at the noisy
/// energy.
pub fn update_noise_aperiodic(e_d_prev: f64, e_x: f64, beta1: f64) -> f64 {
    e_x.min(beta1 * e_d_prev + (1.0 - beta1) * e_x)
}

/// Noise estimate for a unit of a periodic frame with voiced SNR `snr_v`.
/// Returns the estimate and whether the unit takes the weak-periodicity
/// branch, which also selects the fast speech smoothing.
pub fn update_noise_periodic(e_d_prev: f64, e_x: f64, snr_v: f64, p: &NoiseParams) -> (f64, bool) {
    if snr_v >= 1.0 {
        let e_d = e_x.min(p.beta3 * e_d_prev + (1.0 - p.beta3) * e_x / (snr_v + 1.0));
        return (e_d, false);
    }
    let initial = update_noise_aperiodic(e_d_prev, e_x, p.beta1);
    let e_d = if e_x < p.jump_ratio * initial {
        initial
    } else {
        update_noise_aperiodic(e_d_prev, e_x, p.beta1_fast)
    };
    (e_d, true)
}

/// Decision-directed speech energy: blends last frame's gained energy with
/// the current maximum-likelihood estimate, capped at the noisy energy.
pub fn update_speech(e_x: f64, e_d: f64, g_prev: f64, e_x_prev: f64, beta2: f64) -> f64 {
    e_x.min(beta2 * g_prev * e_x_prev + (1.0 - beta2) * (e_x - e_d))
}

/// Per-subband a-priori SNR of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct AprioriSnrMap {
    pub snr: Vec<f64>,
}

pub fn apriori_snr(e_s: &[f64], e_d: &[f64]) -> AprioriSnrMap {
    AprioriSnrMap {
        snr: e_s
            .iter()
            .zip(e_d)
            .map(|(s, d)| (s / d.max(NOISE_FLOOR)).max(0.0))
            .collect(),
    }
}

/// Recursive state shared across frames.
#[derive(Debug, Clone, PartialEq)]
pub struct EnhancerState {
    pub params: NoiseParams,
    pub e_d: Vec<f64>,
    pub e_s: Vec<f64>,
    pub g_prev: Vec<f64>,
    pub e_x_prev: Vec<f64>,
    initialized: bool,
}

impl EnhancerState {
    pub fn new(params: NoiseParams, num_subbands: usize, g_min: f64) -> Self {
        Self {
            params,
            e_d: vec![0.0; num_subbands],
            e_s: vec![0.0; num_subbands],
            g_prev: vec![g_min; num_subbands],
            e_x_prev: vec![0.0; num_subbands],
            initialized: false,
        }
    }

    /// Updates noise and speech energies for one frame. `voiced_snr` is the
    /// per-subband voiced SNR when the frame is periodic.
    pub fn update(&mut self, e_x: &[f64], voiced_snr: Option<&[f64]>) -> Result<AprioriSnrMap> {
        let k = self.e_d.len();
        if e_x.len() != k || voiced_snr.is_some_and(|v| v.len() != k) {
            return Err(Error::Shape(format!("expected {k} subbands")));
        }
        if !self.initialized {
            // The stream is assumed to open in noise.
            self.e_d.copy_from_slice(e_x);
            self.e_s.fill(0.0);
            self.initialized = true;
            return Ok(apriori_snr(&self.e_s, &self.e_d));
        }
        let p = self.params;
        for i in 0..k {
            let (e_d, fast) = match voiced_snr {
                Some(v) => update_noise_periodic(self.e_d[i], e_x[i], v[i], &p),
                None => (update_noise_aperiodic(self.e_d[i], e_x[i], p.beta1), false),
            };
            let beta2 = if fast { p.beta2_fast } else { p.beta2 };
            self.e_d[i] = e_d;
            self.e_s[i] = update_speech(e_x[i], e_d, self.g_prev[i], self.e_x_prev[i], beta2);
        }
        Ok(apriori_snr(&self.e_s, &self.e_d))
    }

    /// Stores the frame's final gains and energies for the next frame.
    pub fn commit(&mut self, gains: &[f64], e_x: &[f64]) {
        self.g_prev.copy_from_slice(gains);
        self.e_x_prev.copy_from_slice(e_x);
    }
}
