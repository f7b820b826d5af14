//! Command-line front end.
//!
//! Exit codes: 0 success, 1 internal error, 2 I/O error, 3 data or format
//! error (including empty inputs), 4 configuration error.

pub mod plot;

use crate::capture::{parse_capture_stream, write_csv, write_jsonl, CaptureFormat, Channel, PoseTrack};
use crate::clustering::MapSnapshot;
use crate::eval::{match_frames, match_snapshot, EvalMode, EvalReport, FrameDetections, GroundTruth, DEFAULT_MARGIN_CM};
use crate::exec::Execution;
use crate::filtering::Material;
use crate::pipeline::{run_pipeline, FrameResult, ParamsFile, PipelineConfig};
use crate::sim::{ground_truth, out_of_range, synth_scene_stream, Scene};
use clap::{ArgAction, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Config(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Internal(_) => 1,
            CliError::Io { .. } => 2,
            CliError::Data(_) => 3,
            CliError::Config(_) => 4,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(name = "uwb-mapper", version, about = "IR-UWB radar obstacle mapping")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ChannelArg {
    #[value(name = "5")]
    Five,
    #[value(name = "9")]
    Nine,
}

impl From<ChannelArg> for Channel {
    fn from(c: ChannelArg) -> Self {
        match c {
            ChannelArg::Five => Channel::Ch5,
            ChannelArg::Nine => Channel::Ch9,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MaterialArg {
    Metal,
    Concrete,
    Plywood,
    Overall,
}

impl From<MaterialArg> for Material {
    fn from(m: MaterialArg) -> Self {
        match m {
            MaterialArg::Metal => Material::Metal,
            MaterialArg::Concrete => Material::Concrete,
            MaterialArg::Plywood => Material::Plywood,
            MaterialArg::Overall => Material::Overall,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ExecArg {
    Parallel,
    Sequential,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Step2,
    Step3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StepArg {
    /// All local maxima.
    A,
    /// After width, prominence and SNR filtering.
    B,
    /// After the PDoA gate.
    C,
    /// Selected target peaks.
    D,
    /// Clustered map.
    E,
    /// Panels a to e side by side.
    All,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Process captures into map snapshots and a per-frame peaks log.
    Run {
        /// Capture file (.jsonl or .csv).
        input: PathBuf,
        #[arg(short, long, default_value = "out")]
        out_dir: PathBuf,
        /// Process only this channel, with its filter preset.
        #[arg(long, value_enum)]
        channel: Option<ChannelArg>,
        #[arg(long, value_enum)]
        material: Option<MaterialArg>,
        /// TOML parameter overrides.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Localise every filtered peak, not only the strongest.
        #[arg(long)]
        all_survivors: bool,
        #[arg(long)]
        no_subsample_refine: bool,
        #[arg(long, value_name = "BOOL", action = ArgAction::Set)]
        baseline_in_delay: Option<bool>,
        /// Pose CSV (t_ms,x,y,yaw) joined to captures by nearest timestamp.
        #[arg(long)]
        poses: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "parallel")]
        execution: ExecArg,
    },
    /// Render a scene description into captures.
    Simulate {
        /// Scene JSON file.
        scene: PathBuf,
        /// Output capture file (.jsonl or .csv).
        #[arg(short, long)]
        out: PathBuf,
        /// Also write ground truth JSON here.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Overrides the scene seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the scene noise level.
        #[arg(long)]
        noise_sigma: Option<f64>,
    },
    /// Score run output against ground truth.
    Evaluate {
        /// snapshots.jsonl (step3) or peaks.jsonl (step2).
        input: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(short, long, default_value = "eval")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MARGIN_CM)]
        margin: f64,
        /// Row label for the table.
        #[arg(long, default_value = "overall")]
        label: String,
        /// Channel column for the table.
        #[arg(long, default_value = "-")]
        channel_label: String,
    },
    /// Draw snapshots (and optionally the peaks log) as SVG.
    Plot {
        snapshots: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// peaks.jsonl from the same run; needed for panels a to d and the path.
        #[arg(long)]
        peaks: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "e")]
        step: StepArg,
    },
}

pub fn main() -> ExitCode {
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("UWB_MAPPER_LOG", "warn"))
        .format_timestamp(None)
        .try_init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Run {
            input,
            out_dir,
            channel,
            material,
            params,
            all_survivors,
            no_subsample_refine,
            baseline_in_delay,
            poses,
            execution,
        } => {
            let mut cfg = PipelineConfig::default();
            if let Some(p) = params {
                let text = std::fs::read_to_string(&p).map_err(io_err(&p))?;
                let pf = ParamsFile::from_toml_str(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                cfg.apply_params(&pf)
                    .map_err(|e| CliError::Config(e.to_string()))?;
            }
            if let Some(c) = channel {
                cfg.channel = Some(c.into());
            }
            if let Some(m) = material {
                cfg.material = m.into();
            }
            cfg.all_survivors |= all_survivors;
            if no_subsample_refine {
                cfg.refine = false;
            }
            if let Some(b) = baseline_in_delay {
                cfg.geometry.baseline_in_delay = Some(b);
            }
            cfg.exec = match execution {
                ExecArg::Parallel => Execution::Parallel,
                ExecArg::Sequential => Execution::Sequential,
            };
            cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
            cmd_run(&input, &out_dir, &cfg, poses.as_deref())
        }
        Command::Simulate {
            scene,
            out,
            truth,
            seed,
            noise_sigma,
        } => cmd_simulate(&scene, &out, truth.as_deref(), seed, noise_sigma),
        Command::Evaluate {
            input,
            truth,
            mode,
            out_dir,
            margin,
            label,
            channel_label,
        } => {
            let mode = match mode {
                ModeArg::Step2 => EvalMode::Step2,
                ModeArg::Step3 => EvalMode::Step3,
            };
            cmd_evaluate(&input, &truth, mode, &out_dir, margin, &label, &channel_label)
        }
        Command::Plot {
            snapshots,
            out,
            peaks,
            step,
        } => cmd_plot(&snapshots, &out, peaks.as_deref(), step),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Internal(e.to_string()))?;
    writeln!(w).and_then(|_| w.flush()).map_err(io_err(path))
}

fn write_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<(), CliError> {
    let mut w = create(path)?;
    for item in items {
        let line = serde_json::to_string(item).map_err(|e| CliError::Internal(e.to_string()))?;
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    Ok(BufReader::new(File::open(path).map_err(io_err(path))?))
}

fn read_lines<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let v = serde_json::from_str(&line)
            .map_err(|e| CliError::Data(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(v);
    }
    Ok(out)
}

/// Run summary written next to the snapshots; contains no timings.
#[derive(Serialize)]
struct SummaryFile<'a> {
    input: String,
    config: &'a PipelineConfig,
    #[serde(flatten)]
    summary: &'a crate::pipeline::RunSummary,
}

pub fn cmd_run(
    input: &Path,
    out_dir: &Path,
    cfg: &PipelineConfig,
    poses: Option<&Path>,
) -> Result<(), CliError> {
    let mut captures = parse_capture_stream(open(input)?, CaptureFormat::from_path(input))
        .map_err(|e| match e {
            crate::capture::CaptureError::Io(source) => CliError::Io {
                path: input.to_path_buf(),
                source,
            },
            other => CliError::Data(format!("{}: {other}", input.display())),
        })?;
    if let Some(p) = poses {
        let track = PoseTrack::from_csv(open(p)?)
            .map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
        track.attach(&mut captures);
    }
    log::info!("{} captures from {}", captures.len(), input.display());
    let out = run_pipeline(&captures, cfg);

    write_lines(&out_dir.join("snapshots.jsonl"), &out.snapshots)?;
    write_lines(&out_dir.join("peaks.jsonl"), &out.frames)?;
    write_json(
        &out_dir.join("summary.json"),
        &SummaryFile {
            input: input.display().to_string(),
            config: cfg,
            summary: &out.summary,
        },
    )?;
    write_json(&out_dir.join("latency.json"), &out.latency)?;

    let s = &out.summary;
    println!(
        "frames {} (skipped {}), detections {}, snapshots {}, final clusters {}, noise {}",
        s.frames_processed, s.frames_skipped_channel, s.detections, s.snapshots, s.final_clusters, s.final_noise
    );
    let l = &out.latency;
    println!(
        "mean frame latency {:.3} ms (budget {:.2} ms{}), mean clustering {:.3} ms over {} runs",
        l.mean_frame_ms,
        l.frame_budget_ms,
        if l.within_budget { "" } else { ", EXCEEDED" },
        l.mean_clustering_ms,
        l.clustering_runs
    );
    if !l.within_budget {
        log::warn!("mean frame latency above the frame interval");
    }
    Ok(())
}

pub fn cmd_simulate(
    scene_path: &Path,
    out: &Path,
    truth: Option<&Path>,
    seed: Option<u64>,
    noise_sigma: Option<f64>,
) -> Result<(), CliError> {
    let text = std::fs::read_to_string(scene_path).map_err(io_err(scene_path))?;
    let mut scene = Scene::from_json_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", scene_path.display())))?;
    if let Some(s) = seed {
        scene.seed = s;
    }
    if let Some(s) = noise_sigma {
        scene.noise_sigma = s;
        scene
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    for o in out_of_range(&scene) {
        let name = if o.label.is_empty() {
            format!("#{}", o.obstacle_index)
        } else {
            o.label.clone()
        };
        log::warn!("obstacle {name} lies beyond the CIR window in {} frames", o.frames);
        eprintln!("warning: obstacle {name} out of range in {} frames", o.frames);
    }
    let captures = synth_scene_stream(&scene, Execution::default());
    let w = create(out)?;
    match CaptureFormat::from_path(out) {
        CaptureFormat::Jsonl => {
            let mut w = w;
            write_jsonl(&captures, &mut w)
                .and_then(|_| w.flush())
                .map_err(io_err(out))?
        }
        CaptureFormat::Csv => write_csv(&captures, w).map_err(|e| CliError::Internal(e.to_string()))?,
    }
    if let Some(t) = truth {
        write_json(t, &ground_truth(&scene))?;
    }
    println!("{} captures written to {}", captures.len(), out.display());
    Ok(())
}

pub fn cmd_evaluate(
    input: &Path,
    truth_path: &Path,
    mode: EvalMode,
    out_dir: &Path,
    margin: f64,
    label: &str,
    channel_label: &str,
) -> Result<(), CliError> {
    let text = std::fs::read_to_string(truth_path).map_err(io_err(truth_path))?;
    let truth: GroundTruth = serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("{}: {e}", truth_path.display())))?;
    let result = match mode {
        EvalMode::Step2 => {
            let frames: Vec<FrameDetections> = read_lines(input)?;
            if frames.is_empty() {
                return Err(CliError::Data(format!("{}: no frames", input.display())));
            }
            match_frames(&frames, &truth, margin)
        }
        EvalMode::Step3 => {
            let snaps: Vec<MapSnapshot> = read_lines(input)?;
            let last = snaps
                .last()
                .ok_or_else(|| CliError::Data(format!("{}: no snapshots", input.display())))?;
            match_snapshot(last, &truth, margin)
        }
    }
    .map_err(|e| match e {
        crate::eval::EvalError::Margin(_) => CliError::Config(e.to_string()),
        other => CliError::Data(other.to_string()),
    })?;
    let report = EvalReport::new(mode, margin, &result);
    write_json(&out_dir.join("report.json"), &report)?;
    let table = report.table(label, channel_label);
    let mut w = create(&out_dir.join("report.md"))?;
    w.write_all(table.as_bytes())
        .and_then(|_| w.flush())
        .map_err(io_err(&out_dir.join("report.md")))?;
    let mut w = create(&out_dir.join("cdf.csv"))?;
    w.write_all(report.cdf_csv().as_bytes())
        .and_then(|_| w.flush())
        .map_err(io_err(&out_dir.join("cdf.csv")))?;
    print!("{table}");
    println!("tp {} fp {} fn {}", report.tp, report.fp, report.fn_);
    Ok(())
}

pub fn cmd_plot(
    snapshots: &Path,
    out: &Path,
    peaks: Option<&Path>,
    step: StepArg,
) -> Result<(), CliError> {
    let snaps: Vec<MapSnapshot> = read_lines(snapshots)?;
    let frames: Vec<FrameResult> = match peaks {
        Some(p) => read_lines(p)?,
        None => Vec::new(),
    };
    let svg = plot::render(&build_panels(snaps.last(), &frames, step));
    let mut w = create(out)?;
    w.write_all(svg.as_bytes())
        .and_then(|_| w.flush())
        .map_err(io_err(out))
}

/// Assembles the requested panels from the last snapshot and peaks log.
pub fn build_panels(snapshot: Option<&MapSnapshot>, frames: &[FrameResult], step: StepArg) -> Vec<plot::Panel> {
    let mut path: Vec<(f64, f64)> = frames.iter().map(|f| (f.pose.x, f.pose.y)).collect();
    path.dedup();
    let stage = |title: &str, keep: &dyn Fn(&crate::pipeline::PeakRecord) -> bool| plot::Panel {
        title: title.to_string(),
        points: frames
            .iter()
            .flat_map(|f| f.peaks.iter())
            .filter(|p| keep(p))
            .filter_map(|p| p.world.map(|w| (w[0], w[1], p.peak.snr_score)))
            .collect(),
        path: path.clone(),
        ..Default::default()
    };
    let map = || {
        let mut panel = plot::Panel {
            title: "(e) clustered map".into(),
            path: path.clone(),
            ..Default::default()
        };
        if let Some(s) = snapshot {
            for c in &s.clusters {
                panel.points.extend(c.points.iter().map(|p| (p.0, p.1, p.2)));
                let xy: Vec<(f64, f64)> = c.points.iter().map(|p| (p.0, p.1)).collect();
                panel.hulls.push(plot::convex_hull(&xy));
                panel.centroids.push((c.centroid[0], c.centroid[1]));
            }
        }
        panel
    };
    let a = || stage("(a) all peaks", &|_| true);
    let b = || stage("(b) width, prominence, SNR", &|p| p.passes_properties);
    let c = || stage("(c) PDoA gate", &|p| p.passes_properties && p.passes_pdoa);
    let d = || stage("(d) target peaks", &|p| p.selected);
    match step {
        StepArg::A => vec![a()],
        StepArg::B => vec![b()],
        StepArg::C => vec![c()],
        StepArg::D => vec![d()],
        StepArg::E => vec![map()],
        StepArg::All => vec![a(), b(), c(), d(), map()],
    }
}
