//! Signal generators and alignment helpers shared by the integration tests.
#![allow(dead_code)]

use periodic_enhance::eval::{synth_harmonic_weighted, PitchTrack};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub const FS: f64 = 8000.0;
pub const HOP: usize = 128;
pub const NGD: usize = 128;

pub fn white_noise(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

pub fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Crude vowel envelope: three resonances over a flat floor.
pub fn vowel_weight(formants: [f64; 3]) -> impl Fn(f64) -> f64 {
    move |f: f64| {
        let bw = [90.0, 110.0, 170.0];
        0.05 + formants
            .iter()
            .zip(bw)
            .enumerate()
            .map(|(i, (&fi, b))| (0.6f64).powi(i as i32) / (1.0 + ((f - fi) / b).powi(2)))
            .sum::<f64>()
    }
}

/// Per-frame F0 (hop spacing) for a test sentence built from segments of
/// `(frames, f0_start, f0_end)`; zero F0 marks a gap.
pub fn trajectory(segments: &[(usize, f64, f64)]) -> Vec<f64> {
    let mut out = Vec::new();
    for &(n, a, b) in segments {
        for i in 0..n {
            let t = if n > 1 {
                i as f64 / (n - 1) as f64
            } else {
                0.0
            };
            out.push(if a == 0.0 { 0.0 } else { a + (b - a) * t });
        }
    }
    out
}

/// Reference track for the decisions of a stream built from `f0`.
///
/// Decision `j` analyses input samples `[(j-1)·hop - ngd, (j+1)·hop - ngd)`.
/// It counts as voiced when at least half of that window is voiced, with
/// the mean F0 of the voiced part.
pub fn reference_track(f0: &[f64], decisions: usize) -> PitchTrack {
    let track = (0..decisions)
        .map(|j| {
            let start = (j * HOP) as isize - HOP as isize - NGD as isize;
            let mut voiced = 0usize;
            let mut sum = 0.0;
            for n in start..start + 2 * HOP as isize {
                if n < 0 {
                    continue;
                }
                let i = n as usize / HOP;
                if let Some(&f) = f0.get(i) {
                    if f > 0.0 {
                        voiced += 1;
                        sum += f;
                    }
                }
            }
            if voiced >= HOP {
                sum / voiced as f64
            } else {
                0.0
            }
        })
        .collect();
    PitchTrack {
        hop_sec: HOP as f64 / FS,
        f0: track,
    }
}

/// Vowel-like harmonic signal following `f0`.
pub fn vowel(f0: &[f64], formants: [f64; 3]) -> Vec<f64> {
    synth_harmonic_weighted(f0, HOP, 200, FS, vowel_weight(formants)).unwrap()
}
