//! `coforecast` command-line front end.
//!
//! Every subcommand writes into an output directory and finishes with a
//! `manifest.json` recording the arguments, resolved configuration, input
//! and output checksums, and the exit status. Exit codes: 0 success,
//! 2 bad input, 3 a checked property failed, 4 numeric failure.

// `!(x < y)` is deliberate throughout: it treats NaN as failing the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use coforecast::forecaster::DecoderFeed;
use coforecast::scene::{OcclusionKind, WalkKind};

mod commands;
mod failure;
mod manifest;
mod output;

use failure::{Failure, EXIT_OK};
use manifest::{FileDigest, RunContext, RunManifest};
use output::Outputs;

#[derive(Debug, Parser)]
#[command(name = "coforecast", version, about = "Cooperative occlusion-aware pedestrian forecasting")]
pub struct Cli {
    /// Worker threads for Monte-Carlo inference (results do not depend on
    /// it). Defaults to RAYON_NUM_THREADS or the number of cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Window raw ETH/UCY-style track files into a binary dataset cache.
    Prepare(PrepareArgs),
    /// Train the forecaster on a dataset cache or on synthetic walks.
    Train(TrainArgs),
    /// Recover a rig's relative pose from synthetic or supplied matches.
    Pose(PoseArgs),
    /// Sweep pose noise and record the transformed-track ADE.
    Sweep(SweepArgs),
    /// Cooperative forecast of a pedestrian camera 2 cannot see.
    Forecast(ForecastArgs),
    /// Forecasts under intermittent or partial occlusion of camera 2.
    Occlusion(OcclusionArgs),
    /// Write a synthetic walk as CSV.
    SynthWalk(SynthWalkArgs),
    /// Write synthetic pedestrian tracks in the raw `frame ped x y` format.
    SynthData(SynthDataArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Prepare(_) => "prepare",
            Command::Train(_) => "train",
            Command::Pose(_) => "pose",
            Command::Sweep(_) => "sweep",
            Command::Forecast(_) => "forecast",
            Command::Occlusion(_) => "occlusion",
            Command::SynthWalk(_) => "synth-walk",
            Command::SynthData(_) => "synth-data",
            Command::Replay(_) => "replay",
        }
    }

    pub fn out_dir(&self) -> Option<&PathBuf> {
        match self {
            Command::Prepare(a) => Some(&a.out),
            Command::Train(a) => Some(&a.out),
            Command::Pose(a) => Some(&a.out),
            Command::Sweep(a) => Some(&a.out),
            Command::Forecast(a) => Some(&a.out),
            Command::Occlusion(a) => Some(&a.out),
            Command::SynthWalk(a) => Some(&a.out),
            Command::SynthData(a) => Some(&a.out),
            Command::Replay(_) => None,
        }
    }
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    /// Raw track files; several are merged with disjoint pedestrian ids.
    #[arg(long, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.4)]
    pub dt: f64,
    #[arg(long, default_value_t = 8)]
    pub past: usize,
    #[arg(long, default_value_t = 12)]
    pub future: usize,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Frame rate the frame numbers count at.
    #[arg(long, default_value_t = 25.0)]
    pub fps: f64,
    /// Zero-based columns of frame, pedestrian, x and y.
    #[arg(long, value_delimiter = ',', num_args = 4, default_values_t = [0, 1, 2, 3])]
    pub columns: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FeedArg {
    TeacherForcing,
    FreeRunning,
}

impl From<FeedArg> for DecoderFeed {
    fn from(f: FeedArg) -> Self {
        match f {
            FeedArg::TeacherForcing => DecoderFeed::TeacherForcing,
            FeedArg::FreeRunning => DecoderFeed::FreeRunning,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset cache written by `prepare`.
    #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
    pub cache: Option<PathBuf>,
    /// Train on this many synthetic walks instead.
    #[arg(long)]
    pub synthetic: Option<usize>,
    /// Hold out this fraction of pedestrians and report their NLL.
    #[arg(long)]
    pub test_fraction: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 150)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 32)]
    pub hidden: usize,
    #[arg(long, default_value_t = 0.1)]
    pub dropout: f64,
    /// 4 for position and velocity, 2 for position only.
    #[arg(long, default_value_t = 4)]
    pub features: usize,
    #[arg(long, value_enum, default_value_t = FeedArg::TeacherForcing)]
    pub feed: FeedArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct RigArgs {
    /// Rig JSON (pose, intrinsics, sensor size). Defaults to the reference
    /// two-camera rig.
    #[arg(long)]
    pub rig: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    #[arg(long, default_value_t = 200)]
    pub points: usize,
    #[arg(long, default_value_t = 0.5)]
    pub pixel_noise: f64,
    #[arg(long, default_value_t = 0.2)]
    pub outliers: f64,
    /// Sampson inlier threshold in pixels.
    #[arg(long, default_value_t = 2.0)]
    pub threshold: f64,
    #[arg(long, default_value_t = 1000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 0.99)]
    pub confidence: f64,
}

#[derive(Debug, Args)]
pub struct PoseArgs {
    #[command(flatten)]
    pub rig: RigArgs,
    #[command(flatten)]
    pub matching: MatchArgs,
    /// Correspondence CSV (`ax,ay,bx,by`) to use instead of synthetic matches.
    #[arg(long)]
    pub matches: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub rig: RigArgs,
    /// Pose being perturbed, JSON. Defaults to the reported estimate for the
    /// reference rig, or the true pose of a custom rig.
    #[arg(long)]
    pub nominal: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = coforecast::scenarios::DEFAULT_SIGMA_GRID)]
    pub sigmas: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
    #[arg(long, default_value_t = 1.0)]
    pub translation_scale: f64,
    /// ADE of the unperturbed nominal pose the walk is placed to produce.
    #[arg(long, default_value_t = 0.2)]
    pub target_ade: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct WalkArgs {
    /// Walk CSV written by `synth-walk`; otherwise one is generated.
    #[arg(long)]
    pub walk: Option<PathBuf>,
    #[arg(long, default_value = "straight")]
    pub kind: WalkKind,
    #[arg(long, default_value_t = 1.2)]
    pub speed: f64,
    #[arg(long, default_value_t = 8.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 0.4)]
    pub dt: f64,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub rig: RigArgs,
    #[command(flatten)]
    pub walk: WalkArgs,
    #[command(flatten)]
    pub matching: MatchArgs,
    /// Monte-Carlo dropout passes.
    #[arg(long, default_value_t = 50)]
    pub passes: usize,
    /// Transform with the rig's true pose instead of estimating it.
    #[arg(long)]
    pub true_pose: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OcclusionArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Which part of the horizon camera 2 loses the pedestrian in.
    #[arg(long)]
    pub occlusion: OcclusionKind,
    #[command(flatten)]
    pub rig: RigArgs,
    /// Walk shapes, one run each.
    #[arg(long, value_delimiter = ',', default_value = "straight,turn,s-curve,straight,turn")]
    pub kinds: Vec<WalkKind>,
    #[arg(long, default_value_t = 1.2)]
    pub speed: f64,
    #[arg(long, default_value_t = 8.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 0.4)]
    pub dt: f64,
    #[command(flatten)]
    pub matching: MatchArgs,
    #[arg(long, default_value_t = 50)]
    pub passes: usize,
    /// Minimum pooled fraction of hidden positions inside the ellipse.
    #[arg(long, default_value_t = 0.75)]
    pub min_containment: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthWalkArgs {
    #[arg(long, default_value = "straight")]
    pub kind: WalkKind,
    #[arg(long, default_value_t = 1.2)]
    pub speed: f64,
    #[arg(long, default_value_t = 8.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 0.4)]
    pub dt: f64,
    /// Camera-2 occlusion to mark in the CSV.
    #[arg(long, default_value = "none")]
    pub occlusion: OcclusionKind,
    #[arg(long, default_value_t = 8)]
    pub past: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthDataArgs {
    #[arg(long, default_value_t = 40)]
    pub pedestrians: usize,
    /// Seconds each pedestrian is tracked.
    #[arg(long, default_value_t = 12.0)]
    pub duration: f64,
    /// Frames between annotations at 25 fps.
    #[arg(long, default_value_t = 10)]
    pub frame_step: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}

fn configure_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already configured: {e}");
        }
    }
}

/// Runs one parsed command line and returns its exit code. The manifest is
/// written whether or not the command succeeds.
pub fn execute(cli: Cli, argv: Vec<String>) -> i32 {
    configure_threads(cli.threads);
    if let Command::Replay(args) = &cli.command {
        return match commands::replay_argv(&args.manifest) {
            Ok(argv) => match Cli::try_parse_from(&argv) {
                Ok(inner) => execute(inner, argv),
                Err(e) => {
                    eprintln!("input error: manifest argv does not parse: {e}");
                    failure::EXIT_INPUT
                }
            },
            Err(e) => {
                eprintln!("{e}");
                e.exit_code()
            }
        };
    }

    let start = Instant::now();
    let mut ctx = RunContext::default();
    let mut outputs = Outputs::default();
    let result = commands::dispatch(&cli.command, &mut ctx, &mut outputs);
    let (code, stage, error) = match &result {
        Ok(()) => (EXIT_OK, None, None),
        Err(f) => {
            eprintln!("{f}");
            let stage = match f {
                Failure::Invariant { stage, .. } => Some(stage.clone()),
                _ => None,
            };
            (f.exit_code(), stage, Some(f.to_string()))
        }
    };

    let Some(dir) = cli.command.out_dir() else { return code };
    let manifest = RunManifest {
        tool: "coforecast".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cli.command.name().into(),
        argv,
        seed: ctx.seed,
        config: ctx.config,
        inputs: ctx.inputs,
        outputs: outputs.files.iter().map(|(p, d)| FileDigest { path: p.clone(), sha256: d.clone() }).collect(),
        wall_clock_ms: start.elapsed().as_millis() as u64,
        status: if code == EXIT_OK { "ok" } else { "failed" }.into(),
        exit_code: code,
        stage,
        error,
    };
    if let Err(e) = outputs.write_json(&dir.join("manifest.json"), &manifest) {
        eprintln!("could not write manifest: {e}");
        if code == EXIT_OK {
            return failure::EXIT_INPUT;
        }
    }
    code
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { failure::EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    ExitCode::from(execute(cli, argv) as u8)
}
