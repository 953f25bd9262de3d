//! `multivital` command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use multivital::io::{
    load_config, load_cube, read_scg_csv, read_traces, save_cube, write_angle_map, write_atomic,
    write_scg_csv, write_traces, RunConfig, SCG_REGIONS,
};
use multivital::metrics::compare_traces;
use multivital::pipeline::{process_cube, synthesize_scg_record, ProcessOptions, RunReport};
use multivital::scg::{scg_to_displacement, ScgOptions};
use multivital::sim::simulate;
use multivital::vitals::{DisplacementTrace, DEFAULT_BAND_HZ};
use multivital::{Error, Result};

const THREADS_ENV: &str = "MULTIVITAL_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "multivital",
    version,
    about = "FMCW MIMO radar chest-displacement toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a raw data cube from a run configuration.
    Simulate(SimulateArgs),
    /// Recover per-region displacement traces from a cube.
    Process(ProcessArgs),
    /// Integrate an accelerometer recording to displacement.
    Scg(ScgArgs),
    /// Compare radar traces with reference traces.
    Compare(CompareArgs),
    /// Simulate, process, synthesise SCG, compare and write a report.
    E2e(E2eArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the scene seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Debug, Args)]
struct ProcessArgs {
    #[arg(long)]
    cube: PathBuf,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides `pipeline.near_field`.
    #[arg(long, value_enum)]
    near_field: Option<Switch>,
    /// Writes the first frame's azimuth/elevation power map.
    #[arg(long)]
    angle_map: Option<PathBuf>,
    /// Writes a JSON summary of the run.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScgArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// High-pass cutoff in Hz.
    #[arg(long)]
    cutoff: Option<f64>,
    /// Decimate to at most this rate (Hz) before integrating.
    #[arg(long)]
    decimate: Option<f64>,
    /// Seconds trimmed from each end of the output.
    #[arg(long)]
    trim: Option<f64>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(long)]
    radar: PathBuf,
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Spectral search band, Hz.
    #[arg(long, num_args = 2, value_names = ["LOW", "HIGH"])]
    band: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct E2eArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    message: String,
}

fn report_error(kind: &str, message: String) {
    let body = serde_json::to_string(&ErrorReport {
        error: kind,
        message,
    })
    .unwrap_or_else(|_| format!("{{\"error\":\"{kind}\"}}"));
    eprintln!("{body}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            report_error("usage", e.kind().to_string());
            return ExitCode::from(2);
        }
    };
    if let Err(message) = configure_threads() {
        report_error("usage", message);
        return ExitCode::from(2);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report_error(e.kind(), e.to_string());
            ExitCode::from(1)
        }
    }
}

fn configure_threads() -> std::result::Result<(), String> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .map_err(|_| format!("{THREADS_ENV} must be a non-negative integer, got {value:?}"))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Process(a) => cmd_process(&a),
        Command::Scg(a) => cmd_scg(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::E2e(a) => cmd_e2e(&a),
    }
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let mut cfg = load_config(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.scene.seed = seed;
    }
    let cube = simulate(&cfg.scene, &cfg.chirp, &cfg.geometry())?;
    save_cube(&cube, &a.out)
}

fn cmd_process(a: &ProcessArgs) -> Result<()> {
    let mut cfg = load_config(&a.config)?;
    if let Some(s) = a.near_field {
        cfg.pipeline.near_field = matches!(s, Switch::On);
    }
    let cube = load_cube(&a.cube)?;
    let opts = ProcessOptions::from_config(&cfg.pipeline, cube.chirp.n_adc);
    let out = process_cube(&cube, &cfg.geometry(), &opts, cfg.layout.as_ref())?;
    write_traces(&out.traces, &a.out)?;
    if let Some(path) = &a.angle_map {
        write_angle_map(&out.angle_map, path)?;
    }
    if let Some(path) = &a.report {
        write_json(path, &RunReport::new(&out, cfg.pipeline.band_hz))?;
    }
    Ok(())
}

fn scg_options(a: &ScgArgs) -> ScgOptions {
    let mut opts = ScgOptions::default();
    if let Some(c) = a.cutoff {
        opts.filter.cutoff_hz = c;
    }
    if let Some(t) = a.trim {
        opts.trim_s = t;
    }
    opts.decimate_to_hz = a.decimate;
    opts
}

fn scg_traces(
    rec: &multivital::io::ScgRecord,
    opts: &ScgOptions,
) -> Result<Vec<DisplacementTrace>> {
    let mut traces = Vec::new();
    for ch in &rec.channels {
        traces.extend(scg_to_displacement(ch, opts)?);
    }
    traces.push(rec.ecg_trace());
    Ok(traces)
}

fn cmd_scg(a: &ScgArgs) -> Result<()> {
    let rec = read_scg_csv(&a.input)?;
    write_traces(&scg_traces(&rec, &scg_options(a))?, &a.out)
}

fn cmd_compare(a: &CompareArgs) -> Result<()> {
    let band = match a.band.as_deref() {
        Some([lo, hi]) if lo < hi && *lo >= 0.0 => (*lo, *hi),
        Some(_) => {
            return Err(Error::InvalidConfig(
                "band must be LOW < HIGH, both >= 0".into(),
            ))
        }
        None => DEFAULT_BAND_HZ,
    };
    let radar = read_traces(&a.radar)?;
    let reference = read_traces(&a.reference)?;
    write_json(&a.out, &compare_traces(&radar, &reference, band))
}

/// Regions the synthetic SCG record covers: the layout's sensors when there
/// are five, otherwise the default sensor names.
fn scg_regions(cfg: &RunConfig) -> Vec<String> {
    match &cfg.layout {
        Some(l) if l.positions.len() == SCG_REGIONS.len() => SCG_REGIONS
            .iter()
            .filter(|r| l.positions.contains_key(**r))
            .map(|r| r.to_string())
            .chain(
                l.positions
                    .keys()
                    .filter(|k| !SCG_REGIONS.contains(&k.as_str()))
                    .cloned(),
            )
            .collect(),
        _ => SCG_REGIONS.iter().map(|r| r.to_string()).collect(),
    }
}

fn cmd_e2e(a: &E2eArgs) -> Result<()> {
    let cfg = load_config(&a.config)?;
    std::fs::create_dir_all(&a.out)?;
    let at = |p: &Path| a.out.join(p);
    let geom = cfg.geometry();

    let cube = simulate(&cfg.scene, &cfg.chirp, &geom)?;
    save_cube(&cube, &at(&cfg.outputs.cube))?;

    let opts = ProcessOptions::from_config(&cfg.pipeline, cube.chirp.n_adc);
    let out = process_cube(&cube, &geom, &opts, cfg.layout.as_ref())?;
    write_traces(&out.traces, &at(&cfg.outputs.traces))?;
    write_angle_map(&out.angle_map, &at(&cfg.outputs.angle_map))?;
    let mut report = RunReport::new(&out, cfg.pipeline.band_hz);

    if let Some(scg) = &cfg.scg {
        let regions = scg_regions(&cfg);
        let names: Vec<&str> = regions.iter().map(String::as_str).collect();
        let duration = cfg.chirp.n_frames as f64 * cfg.chirp.t_frame;
        let rec = synthesize_scg_record(&cfg.scene, scg, &names, duration)?;
        write_scg_csv(&rec, &at(&cfg.outputs.scg_channels))?;
        let reference = scg_traces(&rec, &scg.options)?;
        write_traces(&reference, &at(&cfg.outputs.scg_traces))?;
        report.comparison = Some(compare_traces(
            &out.traces,
            &reference,
            cfg.pipeline.band_hz,
        ));
    }
    write_json(&at(&cfg.outputs.report), &report)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")?;
        Ok(())
    })
}
