//! Command-line front end. `run_cli` never panics to the caller: it returns
//! the process exit code (0 success, 2 usage or config error, 3 runtime
//! failure).

mod commands;
mod manifest;

pub use manifest::{manifest_file, module_versions, timings_file, Outputs, RunManifest};

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::deformable::MpcConfig;
use crate::pipeline::{DistillConfig, RigidPlanConfig};
use crate::sim::{SceneConfig, Thresholds};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

/// Tunables read from `--config`; every field has a default.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub distill: DistillConfig,
    pub rigid: RigidPlanConfig,
    pub mpc: MpcConfig,
    pub thresholds: Thresholds,
    /// Particle snapshot period in the deformable rollout log (0 = none).
    pub snapshot_every: usize,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Parser)]
#[command(name = "nvflow", version, about = "Object-flow pipeline: simulate, distill, plan, evaluate")]
pub struct Cli {
    /// Seed for every random choice; scene commands default to the scene's own seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// Run config JSON (distill, rigid, mpc, thresholds).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Debug logging.
    #[arg(long, short, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    PickLiftPlace,
    RopeStraightening,
    MirroredRope,
}

impl Preset {
    pub fn scene(self, seed: u64) -> SceneConfig {
        match self {
            Preset::PickLiftPlace => SceneConfig::pick_lift_place(seed),
            Preset::RopeStraightening => SceneConfig::rope_straightening(seed),
            Preset::MirroredRope => SceneConfig::mirrored_rope(seed),
        }
    }
}

#[derive(Debug, Args)]
pub struct SceneArgs {
    /// Scene config JSON.
    #[arg(required_unless_present = "preset", conflicts_with = "preset")]
    pub scene: Option<PathBuf>,
    /// Built-in scene instead of a file.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scene bundle.
    Simulate(SceneArgs),
    /// Distill a flow from a bundle and select among candidates.
    Distill {
        bundle: PathBuf,
        /// Total candidates, the clean distillation included.
        #[arg(long)]
        candidates: Option<usize>,
    },
    /// Plan a joint trajectory that carries a rigid object along a flow.
    PlanRigid {
        flow: PathBuf,
        /// Robot JSON or builtin:panda.
        #[arg(long, default_value = "builtin:panda")]
        robot: String,
        /// JSON list of obstacles.
        #[arg(long)]
        obstacles: Option<PathBuf>,
        /// camera.json giving the flow frame's world pose; defaults to
        /// camera.json beside the flow file, else the world frame.
        #[arg(long)]
        camera: Option<PathBuf>,
    },
    /// Track a flow with a particle model by receding-horizon control.
    PlanDeformable {
        flow: PathBuf,
        #[arg(long)]
        dynamics: PathBuf,
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Optimize a joint trajectory from a problem file.
    OptimizeTraj { problem: PathBuf },
    /// Score planner outputs in --out-dir against a scene bundle.
    Eval { gt_dir: PathBuf },
    /// Simulate, distill, plan and evaluate in one go.
    Run {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long, default_value = "builtin:panda")]
        robot: String,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Distill { .. } => "distill",
            Command::PlanRigid { .. } => "plan-rigid",
            Command::PlanDeformable { .. } => "plan-deformable",
            Command::OptimizeTraj { .. } => "optimize-traj",
            Command::Eval { .. } => "eval",
            Command::Run { .. } => "run",
        }
    }
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("NVFLOW_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("NVFLOW_THREADS must be a non-negative integer, got {v:?}")))?;
    if n > 0 {
        // a pool that already exists (repeated calls in one process) is fine
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// exit code. Errors are printed to stderr.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = if cli.verbose {
        log::LevelFilter::Debug
    } else {
        log::LevelFilter::Warn
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
    let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| init_threads().and_then(|_| commands::dispatch(&cli))));
    match result {
        Ok(Ok(_)) => 0,
        Ok(Err(e)) => {
            eprintln!("nvflow {}: {e}", cli.command.name());
            e.exit_code()
        }
        Err(_) => {
            eprintln!("nvflow {}: internal error", cli.command.name());
            3
        }
    }
}
