//! Gain computation, isolated-block suppression and the comb post-filter.

use crate::error::{Error, Result};
use crate::framing::AnalysisFrame;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainParams {
    /// Gain floor, 0.178 is -15 dB.
    pub g_min: f64,
    /// Previous-frame gain below which a unit may be suppressed.
    pub smooth_prev_max: f64,
    /// Neighbor gains below which a unit may be suppressed.
    pub smooth_neighbor_max: f64,
    /// Current gain below which a unit may be suppressed.
    pub smooth_current_max: f64,
}

impl Default for GainParams {
    fn default() -> Self {
        Self {
            g_min: 0.178,
            smooth_prev_max: 0.1,
            smooth_neighbor_max: 0.3,
            smooth_current_max: 0.6,
        }
    }
}

/// `max(g_min, snr² / (snr² + 1))` per subband.
pub fn compute_gain(snr: &[f64], g_min: f64) -> Vec<f64> {
    snr.iter()
        .map(|&s| {
            if s.is_infinite() {
                return 1.0;
            }
            let s2 = s * s;
            (s2 / (s2 + 1.0)).max(g_min)
        })
        .collect()
}

/// Sets isolated weak gains of an aperiodic frame to the floor.
///
/// Conditions are evaluated against the unsmoothed gains of the current
/// frame; `prev` is the final gain vector of the previous frame.
pub fn smooth_frame(
    current: &[f64],
    prev: Option<&[f64]>,
    periodic: bool,
    p: &GainParams,
) -> Vec<f64> {
    let Some(prev) = prev else {
        return current.to_vec();
    };
    if periodic {
        return current.to_vec();
    }
    let k = current.len();
    (0..k)
        .map(|i| {
            let left = i == 0 || current[i - 1] < p.smooth_neighbor_max;
            let right = i + 1 == k || current[i + 1] < p.smooth_neighbor_max;
            if prev[i] < p.smooth_prev_max && left && right && current[i] < p.smooth_current_max {
                p.g_min
            } else {
                current[i]
            }
        })
        .collect()
}

/// Applies [`smooth_frame`] causally over a `frames × K` gain matrix.
pub fn smooth_gains(
    gains: &[Vec<f64>],
    periodic: &[bool],
    p: &GainParams,
) -> Result<Vec<Vec<f64>>> {
    if gains.len() != periodic.len() {
        return Err(Error::Shape(format!(
            "{} gain frames but {} periodicity flags",
            gains.len(),
            periodic.len()
        )));
    }
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(gains.len());
    for (g, &per) in gains.iter().zip(periodic) {
        let smoothed = smooth_frame(g, out.last().map(Vec::as_slice), per, p);
        out.push(smoothed);
    }
    Ok(out)
}

/// Feed-forward comb over one unit at period `p0`: the first half looks
/// ahead by `p0`, the second half looks back, so no delay is added.
pub fn apply_comb(unit: &[f64], p0: usize) -> Result<Vec<f64>> {
    let n = unit.len();
    if p0 == 0 || 2 * p0 >= n {
        return Err(Error::Contract(format!(
            "comb period {p0} must be in (0, {})",
            n / 2
        )));
    }
    Ok((0..n)
        .map(|i| {
            let other = if i <= n / 2 {
                unit[i + p0]
            } else {
                unit[i - p0]
            };
            0.5 * (unit[i] + other)
        })
        .collect())
}

/// Multiplies every unit by its gain and the synthesis window.
pub fn apply_gains(frame: &AnalysisFrame, gains: &[f64], window: &[f64]) -> Result<Vec<Vec<f64>>> {
    if gains.len() != frame.num_subbands() {
        return Err(Error::Shape(format!(
            "{} gains for {} subbands",
            gains.len(),
            frame.num_subbands()
        )));
    }
    if window.len() != frame.frame_len() {
        return Err(Error::Shape(format!(
            "window of {} samples for {}-sample units",
            window.len(),
            frame.frame_len()
        )));
    }
    Ok(frame
        .real_units
        .iter()
        .zip(gains)
        .map(|(u, &g)| u.iter().zip(window).map(|(x, w)| x * g * w).collect())
        .collect())
}
