//! Per-unit SNR of periodic frames from the periodicity degree.
//!
//! At the true period, with speech uncorrelated to noise and noise
//! uncorrelated to its delayed copy, `NAC ≈ s/(s+1)` and `CFR ≈ 2s+1`, so
//! `PD ≈ s(2s+1)/(s+1)`. Inverting that quadratic gives the unit SNR.

use crate::error::{Error, Result};
use crate::periodicity::{PeriodicityMap, PD_FLOOR};

/// Expected PD of a unit with linear SNR `snr` at its true period.
pub fn pd_of_snr(snr: f64) -> f64 {
    snr / (snr + 1.0) * (2.0 * snr + 1.0)
}

/// Inverse of [`pd_of_snr`]: the nonnegative root of `2s² + (1-pd)s - pd = 0`.
pub fn snr_of_pd(pd: f64) -> Result<f64> {
    if !pd.is_finite() || pd < PD_FLOOR {
        return Err(Error::Contract(format!(
            "PD {pd} below the {PD_FLOOR} floor"
        )));
    }
    let root = (pd * pd + 6.0 * pd + 1.0).sqrt();
    // Two algebraically equal forms; pick the one without cancellation.
    Ok(if pd < 1.0 {
        2.0 * pd / ((1.0 - pd) + root)
    } else {
        (pd - 1.0 + root) / 4.0
    })
}

/// Linear SNR per subband for one periodic frame.
#[derive(Debug, Clone, PartialEq)]
pub struct VoicedSnrMap {
    pub snr: Vec<f64>,
}

/// Reads PD at the estimated period in every subband and inverts it.
pub fn estimate_voiced_snr(map: &PeriodicityMap, p0: usize) -> Result<VoicedSnrMap> {
    let pd = map
        .pd_at(p0)
        .ok_or_else(|| Error::Contract(format!("period {p0} outside the candidate grid")))?;
    let snr = pd.into_iter().map(snr_of_pd).collect::<Result<Vec<_>>>()?;
    Ok(VoicedSnrMap { snr })
}
