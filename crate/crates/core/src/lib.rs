//! Online monaural speech enhancement driven by periodicity analysis of a
//! phase-corrected complex gammatone filterbank.
//!
//! Input is decomposed into complex subband signals, framed, and scored for
//! periodicity at every candidate pitch period. A pitch tracker picks the
//! dominant period per frame; the periodicity at that period gives a voiced
//! SNR per subband, which drives noise tracking, a decision-directed
//! a-priori SNR and a Wiener-style gain. Gained subbands are comb filtered
//! at the pitch period and summed back into a waveform.
//!
//! ```
//! use periodic_enhance::{enhance, RunConfig};
//!
//! let input = vec![0.0; 8000];
//! let out = enhance(&input, &RunConfig::default()).unwrap();
//! assert_eq!(out.aligned().len(), input.len());
//! ```

pub mod config;
pub mod error;
pub mod eval;
pub mod filterbank;
pub mod framing;
pub mod gain;
pub mod noise;
pub mod periodicity;
pub mod pipeline;
pub mod pitch;
pub mod snr;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use filterbank::{design_filterbank, FilterCoeffs, FilterbankSpec, SubbandStream};
pub use framing::{AnalysisFrame, FrameGeometry};
pub use periodicity::{PeriodGrid, PeriodicityMap};
pub use pipeline::{enhance, track_pitch, Analyzer, EnhanceStats, Enhanced, Enhancer, FrameReport};
pub use pitch::{FrameDecision, PitchTracker, TrackerParams};
