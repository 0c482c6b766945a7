use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use periodic_enhance::eval::{align, overall_snr, p0_error_rate, MetricsRecord, PitchTrack};
use periodic_enhance::filterbank::coefficient_table;
use periodic_enhance::{design_filterbank, Analyzer, Enhancer, FrameReport, RunConfig};

use crate::audio::{self, OutputFormat};
use crate::CliError;

#[derive(Debug, Args)]
pub struct EnhanceArgs {
    /// Noisy input, mono WAV at any rate.
    pub input: PathBuf,
    /// Enhanced output, written at the engine rate.
    pub output: PathBuf,
    /// Write 32-bit float samples instead of 16-bit PCM.
    #[arg(long)]
    pub float: bool,
    /// Per-frame subband noise energies as CSV.
    #[arg(long, value_name = "FILE")]
    pub noise_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PitchArgs {
    /// Input recording, mono WAV at any rate.
    pub input: PathBuf,
    /// Pitch track as `frame<TAB>time_sec<TAB>f0_hz` lines.
    pub output: PathBuf,
    /// Subband-averaged periodicity degree per frame and period as CSV.
    #[arg(long, value_name = "FILE")]
    pub pd_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Clean reference recording.
    #[arg(long, requires = "processed")]
    pub clean: Option<PathBuf>,
    /// Enhanced recording as written by `enhance` (still carrying the
    /// filterbank delay).
    #[arg(long, requires = "clean")]
    pub processed: Option<PathBuf>,
    /// Unprocessed noisy recording, time-aligned with the clean one.
    #[arg(long, requires = "clean")]
    pub noisy: Option<PathBuf>,
    /// Detected pitch track.
    #[arg(long, requires = "reference")]
    pub detected: Option<PathBuf>,
    /// Reference pitch track.
    #[arg(long, requires = "detected")]
    pub reference: Option<PathBuf>,
    /// Samples to drop from the processed file; defaults to the group delay.
    #[arg(long)]
    pub delay: Option<usize>,
    /// Label stored in the record; defaults to the processed or detected path.
    #[arg(long)]
    pub label: Option<String>,
    /// Append the JSON record to this file instead of printing it.
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

pub fn enhance(cfg: &RunConfig, args: &EnhanceArgs) -> Result<(), CliError> {
    let rate = cfg.sample_rate();
    let mut enhancer = Enhancer::new(cfg)?;
    let mut noise_csv = match &args.noise_csv {
        Some(path) => {
            let mut w = create(path)?;
            let header: Vec<String> = (1..=cfg.filterbank.num_filters)
                .map(|k| format!("e_d_{k}"))
                .collect();
            writeln!(w, "frame,periodic,{}", header.join(",")).map_err(io_err(path))?;
            Some((w, path.as_path()))
        }
        None => None,
    };
    let mut csv_result = Ok(());
    let mut log_frame = |r: &FrameReport| {
        if let (Some((w, path)), Ok(())) = (noise_csv.as_mut(), &csv_result) {
            let values: Vec<String> = r.noise_energy.iter().map(|v| format!("{v:.6e}")).collect();
            csv_result = writeln!(
                w,
                "{},{},{}",
                r.decision.index,
                u8::from(r.decision.periodic),
                values.join(",")
            )
            .map_err(io_err(path));
        }
    };

    let start = Instant::now();
    let mut output = Vec::new();
    let info = audio::for_each_chunk(&args.input, rate, |chunk| {
        output.extend(enhancer.process_with(chunk, &mut log_frame)?);
        Ok(())
    })?;
    output.extend(enhancer.finish_with(&mut log_frame)?);
    let elapsed = start.elapsed().as_secs_f64();
    csv_result?;
    if let Some((mut w, path)) = noise_csv {
        w.flush().map_err(io_err(path))?;
    }

    let format = if args.float {
        OutputFormat::Float32
    } else {
        OutputFormat::Pcm16
    };
    let scale = audio::write(&args.output, &output, rate, format)?;
    if scale < 1.0 {
        eprintln!(
            "warning: output exceeded full scale; peak-normalized by {:.2} dB",
            20.0 * scale.log10()
        );
    }

    let stats = enhancer.stats();
    let duration = info.duration_sec(rate);
    println!("frames: {}", stats.frames);
    println!("periodic frames: {:.1}%", stats.periodic_pct());
    if duration > 0.0 {
        println!("realtime factor: {:.3}", elapsed / duration);
    }
    if info.source_rate as f64 != rate {
        println!("resampled: {} Hz -> {} Hz", info.source_rate, rate);
    }
    Ok(())
}

pub fn pitch(cfg: &RunConfig, args: &PitchArgs) -> Result<(), CliError> {
    let rate = cfg.sample_rate();
    let mut analyzer = Analyzer::new(cfg)?;
    let periods: Vec<usize> = analyzer.grid().periods().collect();
    let mut pd_csv = match &args.pd_csv {
        Some(path) => {
            let mut w = create(path)?;
            let header: Vec<String> = periods.iter().map(|p| format!("p{p}")).collect();
            writeln!(w, "frame,{}", header.join(",")).map_err(io_err(path))?;
            Some((w, path.as_path()))
        }
        None => None,
    };

    let mut f0 = Vec::new();
    let mut on_frame = |_: _,
                        map: periodic_enhance::PeriodicityMap,
                        d: periodic_enhance::FrameDecision| {
        f0.push(d.f0_hz(rate));
        if let Some((w, path)) = pd_csv.as_mut() {
            let values: Vec<String> = map.mean_pd().iter().map(|v| format!("{v:.5}")).collect();
            writeln!(w, "{},{}", d.index, values.join(","))
                .map_err(|e| periodic_enhance::Error::Eval(format!("{}: {e}", path.display())))?;
        }
        Ok(())
    };
    let info = audio::for_each_chunk(&args.input, rate, |chunk| {
        Ok(analyzer.push(chunk, &mut on_frame)?)
    })?;
    if info.samples == 0 {
        return Err(CliError::Io(format!(
            "{}: no samples",
            args.input.display()
        )));
    }
    analyzer.finish(&mut on_frame)?;
    if let Some((mut w, path)) = pd_csv {
        w.flush().map_err(io_err(path))?;
    }

    let track = PitchTrack {
        hop_sec: analyzer.geometry().hop as f64 / rate,
        f0,
    };
    let mut w = create(&args.output)?;
    w.write_all(track.to_tsv().as_bytes())
        .and_then(|_| w.flush())
        .map_err(io_err(&args.output))?;
    let voiced = track.f0.iter().filter(|&&f| f > 0.0).count();
    println!("frames: {}", track.len());
    println!(
        "periodic frames: {:.1}%",
        100.0 * voiced as f64 / track.len() as f64
    );
    Ok(())
}

fn read_track(path: &Path) -> Result<PitchTrack, CliError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    PitchTrack::from_tsv(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn eval(cfg: &RunConfig, args: &EvalArgs) -> Result<(), CliError> {
    if args.clean.is_none() && args.detected.is_none() {
        return Err(CliError::Usage(
            "eval needs --clean with --processed, or --detected with --reference".into(),
        ));
    }
    let rate = cfg.sample_rate();
    let hop = cfg.geometry()?.hop;
    let label = args
        .label
        .clone()
        .or_else(|| {
            args.processed
                .as_ref()
                .or(args.detected.as_ref())
                .map(|p| p.display().to_string())
        })
        .unwrap_or_default();
    let mut record = MetricsRecord {
        file: label,
        config_overrides: cfg
            .overrides()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
        ..Default::default()
    };

    if let (Some(clean_path), Some(processed_path)) = (&args.clean, &args.processed) {
        let clean = audio::read_all(clean_path, rate)?;
        let processed = audio::read_all(processed_path, rate)?;
        let delay = args.delay.unwrap_or(cfg.filterbank.group_delay_samples);
        let usable = processed.len().saturating_sub(delay);
        if usable.abs_diff(clean.len()) > hop {
            return Err(CliError::Io(format!(
                "{} has {} samples after removing a delay of {delay}, {} has {}",
                processed_path.display(),
                usable,
                clean_path.display(),
                clean.len()
            )));
        }
        record.ovl_snr_out_db = Some(overall_snr(&clean, &align(&processed, delay, clean.len()))?);
        if let Some(noisy_path) = &args.noisy {
            let noisy = audio::read_all(noisy_path, rate)?;
            if noisy.len().abs_diff(clean.len()) > hop {
                return Err(CliError::Io(format!(
                    "{} has {} samples, {} has {}",
                    noisy_path.display(),
                    noisy.len(),
                    clean_path.display(),
                    clean.len()
                )));
            }
            record.ovl_snr_in_db = Some(overall_snr(&clean, &align(&noisy, 0, clean.len()))?);
        }
    }
    if let (Some(det), Some(reference)) = (&args.detected, &args.reference) {
        let report = p0_error_rate(&read_track(det)?, &read_track(reference)?)?;
        if report.trimmed {
            eprintln!(
                "warning: pitch tracks differ in length; compared the common {} frames",
                report.total_frames
            );
        }
        record = record.with_error_rate(&report);
    }

    let line = serde_json::to_string(&record).map_err(|e| CliError::Io(e.to_string()))?;
    match &args.output {
        Some(path) => {
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(io_err(path))?;
            writeln!(f, "{line}").map_err(io_err(path))?;
        }
        None => println!("{line}"),
    }
    Ok(())
}

pub fn design(cfg: &RunConfig) -> Result<(), CliError> {
    let coeffs = design_filterbank(&cfg.filterbank)?;
    print!("{}", coefficient_table(&coeffs));
    Ok(())
}
