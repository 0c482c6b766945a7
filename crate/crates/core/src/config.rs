//! Run configuration: every tunable constant of the pipeline, loadable from
//! flat `key = value` text.

use crate::error::{Error, Result};
use crate::filterbank::FilterbankSpec;
use crate::framing::FrameGeometry;
use crate::gain::GainParams;
use crate::noise::NoiseParams;
use crate::periodicity::{PeriodGrid, ENVELOPE_SPLIT_HZ};
use crate::pitch::TrackerParams;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub filterbank: FilterbankSpec,
    pub frame_len: usize,
    pub f0_min: f64,
    pub f0_max: f64,
    pub split_hz: f64,
    pub tracker: TrackerParams,
    pub noise: NoiseParams,
    pub gain: GainParams,
    pub comb_enabled: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            filterbank: FilterbankSpec::default(),
            frame_len: 256,
            f0_min: PeriodGrid::F0_MIN,
            f0_max: PeriodGrid::F0_MAX,
            split_hz: ENVELOPE_SPLIT_HZ,
            tracker: TrackerParams::default(),
            noise: NoiseParams::default(),
            gain: GainParams::default(),
            comb_enabled: true,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse value {value:?} for key {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!(
            "cannot parse value {value:?} for key {key}"
        ))),
    }
}

impl RunConfig {
    pub fn sample_rate(&self) -> f64 {
        self.filterbank.sample_rate
    }

    pub fn geometry(&self) -> Result<FrameGeometry> {
        FrameGeometry::new(self.frame_len)
    }

    pub fn grid(&self) -> Result<PeriodGrid> {
        PeriodGrid::from_f0_range(self.f0_min, self.f0_max, self.sample_rate(), self.frame_len)
    }

    /// All keys with their current values, in a stable order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let fb = &self.filterbank;
        let t = &self.tracker;
        let n = &self.noise;
        let g = &self.gain;
        vec![
            ("fc1", fb.fc1.to_string()),
            ("erb_step", fb.erb_step.to_string()),
            ("num_filters", fb.num_filters.to_string()),
            ("n_gd", fb.group_delay_samples.to_string()),
            ("sample_rate", fb.sample_rate.to_string()),
            ("frame_len", self.frame_len.to_string()),
            ("f0_min", self.f0_min.to_string()),
            ("f0_max", self.f0_max.to_string()),
            ("split_hz", self.split_hz.to_string()),
            ("noise_alpha", t.alpha.to_string()),
            ("noise_delta", t.delta.to_string()),
            ("snrthd1_base", t.upper.base.to_string()),
            ("snrthd1_slope", t.upper.slope.to_string()),
            ("snrthd1_min", t.upper.min.to_string()),
            ("snrthd1_max", t.upper.max.to_string()),
            ("snrthd2_base", t.lower.base.to_string()),
            ("snrthd2_slope", t.lower.slope.to_string()),
            ("snrthd2_min", t.lower.min.to_string()),
            ("snrthd2_max", t.lower.max.to_string()),
            ("memory_depth", t.memory_depth.to_string()),
            ("memory_deviation", t.memory_deviation.to_string()),
            ("continuity_gap", t.continuity_gap.to_string()),
            ("beta1", n.beta1.to_string()),
            ("beta1_fast", n.beta1_fast.to_string()),
            ("beta2", n.beta2.to_string()),
            ("beta2_fast", n.beta2_fast.to_string()),
            ("beta3", n.beta3.to_string()),
            ("jump_ratio", n.jump_ratio.to_string()),
            ("g_min", g.g_min.to_string()),
            ("smooth_prev_max", g.smooth_prev_max.to_string()),
            ("smooth_neighbor_max", g.smooth_neighbor_max.to_string()),
            ("smooth_current_max", g.smooth_current_max.to_string()),
            ("comb", self.comb_enabled.to_string()),
        ]
    }

    /// Entries whose value differs from the defaults.
    pub fn overrides(&self) -> Vec<(&'static str, String)> {
        let defaults = RunConfig::default().entries();
        self.entries()
            .into_iter()
            .zip(defaults)
            .filter(|(a, b)| a.1 != b.1)
            .map(|(a, _)| a)
            .collect()
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let fb = &mut self.filterbank;
        let t = &mut self.tracker;
        let n = &mut self.noise;
        let g = &mut self.gain;
        match key {
            "fc1" => fb.fc1 = parse(key, value)?,
            "erb_step" => fb.erb_step = parse(key, value)?,
            "num_filters" => fb.num_filters = parse(key, value)?,
            "n_gd" => fb.group_delay_samples = parse(key, value)?,
            "sample_rate" => fb.sample_rate = parse(key, value)?,
            "frame_len" => self.frame_len = parse(key, value)?,
            "f0_min" => self.f0_min = parse(key, value)?,
            "f0_max" => self.f0_max = parse(key, value)?,
            "split_hz" => self.split_hz = parse(key, value)?,
            "noise_alpha" => t.alpha = parse(key, value)?,
            "noise_delta" => t.delta = parse(key, value)?,
            "snrthd1_base" => t.upper.base = parse(key, value)?,
            "snrthd1_slope" => t.upper.slope = parse(key, value)?,
            "snrthd1_min" => t.upper.min = parse(key, value)?,
            "snrthd1_max" => t.upper.max = parse(key, value)?,
            "snrthd2_base" => t.lower.base = parse(key, value)?,
            "snrthd2_slope" => t.lower.slope = parse(key, value)?,
            "snrthd2_min" => t.lower.min = parse(key, value)?,
            "snrthd2_max" => t.lower.max = parse(key, value)?,
            "memory_depth" => t.memory_depth = parse(key, value)?,
            "memory_deviation" => t.memory_deviation = parse(key, value)?,
            "continuity_gap" => t.continuity_gap = parse(key, value)?,
            "beta1" => n.beta1 = parse(key, value)?,
            "beta1_fast" => n.beta1_fast = parse(key, value)?,
            "beta2" => n.beta2 = parse(key, value)?,
            "beta2_fast" => n.beta2_fast = parse(key, value)?,
            "beta3" => n.beta3 = parse(key, value)?,
            "jump_ratio" => n.jump_ratio = parse(key, value)?,
            "g_min" => g.g_min = parse(key, value)?,
            "smooth_prev_max" => g.smooth_prev_max = parse(key, value)?,
            "smooth_neighbor_max" => g.smooth_neighbor_max = parse(key, value)?,
            "smooth_current_max" => g.smooth_current_max = parse(key, value)?,
            "comb" => self.comb_enabled = parse_bool(key, value)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.filterbank.validate()?;
        self.geometry()?;
        let grid = self.grid()?;
        if grid.p_max * 2 >= self.frame_len {
            return Err(Error::Config(
                "longest period must be below half a frame".into(),
            ));
        }
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        unit("noise_alpha", self.tracker.alpha)?;
        unit("beta1", self.noise.beta1)?;
        unit("beta1_fast", self.noise.beta1_fast)?;
        unit("beta2", self.noise.beta2)?;
        unit("beta2_fast", self.noise.beta2_fast)?;
        unit("beta3", self.noise.beta3)?;
        unit("memory_deviation", self.tracker.memory_deviation)?;
        if !(self.gain.g_min > 0.0 && self.gain.g_min <= 1.0) {
            return Err(Error::Config(format!(
                "g_min must lie in (0, 1], got {}",
                self.gain.g_min
            )));
        }
        if self.tracker.memory_depth == 0 {
            return Err(Error::Config("memory_depth must be at least 1".into()));
        }
        if self.tracker.upper.min > self.tracker.upper.max
            || self.tracker.lower.min > self.tracker.lower.max
        {
            return Err(Error::Config("threshold clamp min exceeds max".into()));
        }
        Ok(())
    }
}
