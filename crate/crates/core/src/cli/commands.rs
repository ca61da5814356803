use std::path::{Path, PathBuf};

use serde_json::json;

use super::{Cli, CliError, Command, Outputs, RunConfig, RunManifest, SceneArgs};
use crate::deformable::{DynamicsSpec, ParticleState};
use crate::flow::io::{encode_flow_binary, encode_flow_json};
use crate::flow::{read_flow, render_flow_image, ActionableFlow, FlowCandidate};
use crate::geometry::{CameraIntrinsics, SE3Pose, Vec3};
use crate::kinematics::RobotModel;
use crate::pipeline::{plan_deformable, plan_rigid, select_flow, DeformablePlan, RigidPlan};
use crate::pnm::RgbImage;
use crate::rigid::{pose_list_csv, ObjectPoseTrajectory, PoseFrame};
use crate::sim::{
    distill_bundle, evaluate_deformable, evaluate_rigid, generate_scene, read_bundle, read_camera, sha256_hex,
    write_bundle, CameraFile, Metrics, SceneBundle, SceneConfig,
};
use crate::trajopt::{load_robot, optimize_trajectory, Obstacle, TrajOptProblem, TrajOptResult};

const BACKGROUND: [u8; 3] = [32, 32, 32];

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn config_hash(value: &serde_json::Value) -> String {
    sha256_hex(value.to_string().as_bytes())
}

fn read_input(path: &Path, out: &mut Outputs) -> Result<String, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    out.input(path);
    Ok(text)
}

pub(super) fn dispatch(cli: &Cli) -> Result<RunManifest, CliError> {
    let config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let mut out = Outputs::new(&cli.out_dir)?;
    if let Some(p) = &cli.config {
        out.input(p);
    }
    let name = cli.command.name();
    let (hash, seed) = match &cli.command {
        Command::Simulate(args) => {
            let scene = load_scene(args, cli.seed, &mut out)?;
            simulate(&scene, &mut out, "")?;
            (config_hash(&json!({ "run": config, "scene": scene })), scene.seed)
        }
        Command::Distill { bundle, candidates } => {
            let mut config = config;
            if let Some(n) = candidates {
                config.distill.candidates = *n;
            }
            let b = read_bundle(bundle).map_err(usage)?;
            out.input(&bundle.join("manifest.json"));
            let seed = cli.seed.unwrap_or(b.config.seed);
            distill(&b, &config, seed, &mut out)?;
            (config_hash(&json!({ "run": config })), seed)
        }
        Command::PlanRigid {
            flow,
            robot,
            obstacles,
            camera,
        } => {
            let f = load_flow(flow, &mut out)?;
            let robot = load_robot_arg(robot, &mut out)?;
            let obstacles = match obstacles {
                Some(p) => serde_json::from_str::<Vec<Obstacle>>(&read_input(p, &mut out)?)
                    .map_err(|e| usage(format!("{}: {e}", p.display())))?,
                None => Vec::new(),
            };
            let camera_path = camera.clone().or_else(|| {
                let beside = flow.parent().unwrap_or(Path::new(".")).join("camera.json");
                beside.is_file().then_some(beside)
            });
            let cam = match &camera_path {
                Some(p) => {
                    out.input(p);
                    Some(read_camera(p).map_err(usage)?.world_from_camera)
                }
                None => None,
            };
            rigid(&f, cam.as_ref(), &robot, &obstacles, &config, &mut out)?;
            (config_hash(&json!({ "run": config, "obstacles": obstacles })), cli.seed.unwrap_or(0))
        }
        Command::PlanDeformable { flow, dynamics, horizon } => {
            let mut config = config;
            if let Some(h) = horizon {
                config.mpc.horizon = *h;
            }
            let seed = cli.seed.unwrap_or(0);
            config.mpc.seed = seed;
            let f = load_flow(flow, &mut out)?;
            let spec: DynamicsSpec = serde_json::from_str(&read_input(dynamics, &mut out)?)
                .map_err(|e| usage(format!("{}: {e}", dynamics.display())))?;
            deformable(&f, &spec, &config, &mut out)?;
            (config_hash(&json!({ "run": config })), seed)
        }
        Command::OptimizeTraj { problem } => {
            let text = read_input(problem, &mut out)?;
            let base = problem.parent().unwrap_or(Path::new("."));
            let p = TrajOptProblem::from_json_str(&text, base).map_err(|e| usage(format!("{}: {e}", problem.display())))?;
            let result = out.stage("optimize", |_| optimize_trajectory(&p).map_err(runtime))?;
            write_trajopt(&result, &mut out)?;
            (config_hash(&json!({ "run": config })), cli.seed.unwrap_or(0))
        }
        Command::Eval { gt_dir } => {
            let b = read_bundle(gt_dir).map_err(usage)?;
            out.input(&gt_dir.join("manifest.json"));
            evaluate(&b, &config, &mut out)?;
            (config_hash(&json!({ "run": config })), cli.seed.unwrap_or(b.config.seed))
        }
        Command::Run { scene, robot } => {
            let scene = load_scene(scene, cli.seed, &mut out)?;
            let robot = load_robot_arg(robot, &mut out)?;
            run(&scene, &robot, &config, &mut out)?;
            (config_hash(&json!({ "run": config, "scene": scene })), scene.seed)
        }
    };
    out.finish(name, hash, seed)
}

fn load_scene(args: &SceneArgs, seed: Option<u64>, out: &mut Outputs) -> Result<SceneConfig, CliError> {
    let mut scene = match (&args.scene, args.preset) {
        (Some(p), _) => {
            let s = SceneConfig::load(p).map_err(usage)?;
            out.input(p);
            s
        }
        (None, Some(preset)) => preset.scene(0),
        (None, None) => return Err(usage("a scene file or --preset is required")),
    };
    if let Some(s) = seed {
        scene.seed = s;
    }
    Ok(scene)
}

fn load_flow(path: &Path, out: &mut Outputs) -> Result<ActionableFlow, CliError> {
    let flow = read_flow(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    out.input(path);
    Ok(flow)
}

fn load_robot_arg(spec: &str, out: &mut Outputs) -> Result<RobotModel, CliError> {
    let cwd = PathBuf::from(".");
    let robot = load_robot(spec, &cwd).map_err(|e| usage(format!("robot {spec}: {e}")))?;
    if spec != "builtin:panda" {
        out.input(Path::new(spec));
    }
    Ok(robot)
}

/// Generates the scene and writes the bundle under `prefix`.
fn simulate(scene: &SceneConfig, out: &mut Outputs, prefix: &str) -> Result<SceneBundle, CliError> {
    let bundle = out.stage("simulate", |_| generate_scene(scene).map_err(runtime))?;
    out.stage("write_bundle", |out| {
        let dir = out.root().join(prefix);
        let manifest = write_bundle(&bundle, &dir).map_err(runtime)?;
        let files = manifest.files.into_iter().map(|f| f.path).chain(["manifest.json".to_string()]);
        out.adopt(prefix, files)
    })?;
    Ok(bundle)
}

fn flow_image(flow: &ActionableFlow, intr: &CameraIntrinsics, id: u32) -> Result<Vec<u8>, CliError> {
    let background = RgbImage::filled(intr.width, intr.height, BACKGROUND);
    let img = render_flow_image(flow, intr, &background, Some(id)).map_err(runtime)?;
    let mut bytes = Vec::new();
    img.write_ppm(&mut bytes).map_err(runtime)?;
    Ok(bytes)
}

/// Distills, scores candidates and writes the selected flow with its camera.
fn distill(bundle: &SceneBundle, config: &RunConfig, seed: u64, out: &mut Outputs) -> Result<ActionableFlow, CliError> {
    let (clean, scale) = out.stage("distill", |_| distill_bundle(bundle).map_err(runtime))?;
    let (candidates, id) = out.stage("select", |_| {
        select_flow(&clean, &bundle.intrinsics, &config.distill, seed).map_err(runtime)
    })?;
    out.stage("write_flow", |out| {
        let ladder = &config.distill.noise_ladder;
        let entries: Vec<_> = candidates
            .iter()
            .map(|c: &FlowCandidate| {
                let sigma = (c.id > 0).then(|| ladder[(c.id as usize - 1) % ladder.len()]);
                json!({ "id": c.id, "score": c.score, "sigma": sigma })
            })
            .collect();
        out.json(
            "scores.json",
            &json!({ "selected": id, "depth_scale": scale, "candidates": entries }),
        )?;
        for c in &candidates {
            let bytes = flow_image(&c.flow, &bundle.intrinsics, c.id)?;
            out.put(&format!("flow_{:02}.ppm", c.id), &bytes)?;
        }
        let selected = &candidates[id as usize].flow;
        out.put("flow.nvfl", &encode_flow_binary(selected))?;
        out.put("flow.json", encode_flow_json(selected).as_bytes())?;
        out.json(
            "camera.json",
            &CameraFile {
                intrinsics: bundle.intrinsics,
                world_from_camera: bundle.camera_pose,
            },
        )
    })?;
    Ok(candidates[id as usize].flow.clone())
}

fn write_trajopt(result: &TrajOptResult, out: &mut Outputs) -> Result<(), CliError> {
    out.put("joint_traj.csv", result.trajectory.to_csv().as_bytes())?;
    out.json("result.json", &result.to_json())
}

fn rigid(
    flow: &ActionableFlow,
    cam: Option<&SE3Pose>,
    robot: &RobotModel,
    obstacles: &[Obstacle],
    config: &RunConfig,
    out: &mut Outputs,
) -> Result<RigidPlan, CliError> {
    let plan = out.stage("plan_rigid", |_| {
        plan_rigid(flow, cam, robot, obstacles, &config.rigid).map_err(runtime)
    })?;
    out.json(
        "ee_traj.json",
        &json!({
            "grasp": plan.grasp,
            "poses": plan.ee_targets,
        }),
    )?;
    out.put("ee_traj.csv", pose_list_csv(&plan.ee_targets).as_bytes())?;
    let mut result = plan.trajopt.to_json();
    result["grasp"] = json!(plan.grasp);
    result["steps_per_flow_frame"] = json!(config.rigid.steps_per_flow_frame);
    out.put("joint_traj.csv", plan.trajopt.trajectory.to_csv().as_bytes())?;
    out.json("result.json", &result)?;
    out.json("object_poses.json", &plan.object_motion.to_json())?;
    out.json("executed_poses.json", &plan.executed.to_json())?;
    Ok(plan)
}

fn deformable(
    flow: &ActionableFlow,
    spec: &DynamicsSpec,
    config: &RunConfig,
    out: &mut Outputs,
) -> Result<DeformablePlan, CliError> {
    let plan = out.stage("plan_deformable", |_| plan_deformable(flow, spec, &config.mpc).map_err(runtime))?;
    let mut log = plan.log.to_json(config.snapshot_every);
    let last = plan.log.states.last().map(|s| s.positions.clone()).unwrap_or_default();
    log["correspondence"] = json!(plan.correspondence);
    log["final_positions"] = json!(last.iter().map(|p| [p.x, p.y, p.z]).collect::<Vec<_>>());
    out.json("actions.json", &log)?;
    out.put("costs.csv", plan.log.costs_csv().as_bytes())?;
    Ok(plan)
}

fn write_metrics(metrics: &Metrics, out: &mut Outputs) -> Result<(), CliError> {
    out.json("metrics.json", metrics)
}

/// Scores `executed_poses.json` (rigid) or `actions.json` (deformable) in
/// the output directory against the bundle.
fn evaluate(bundle: &SceneBundle, config: &RunConfig, out: &mut Outputs) -> Result<Metrics, CliError> {
    let root = out.root().to_path_buf();
    let rigid_path = root.join("executed_poses.json");
    let deformable_path = root.join("actions.json");
    let metrics = if rigid_path.is_file() {
        let text = read_input(&rigid_path, out)?;
        let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", rigid_path.display())))?;
        let executed =
            ObjectPoseTrajectory::from_json(&v, PoseFrame::World).map_err(|e| usage(format!("{}: {e}", rigid_path.display())))?;
        let gt = bundle
            .gt_poses
            .as_ref()
            .ok_or_else(|| usage("bundle has no gt_poses.json (not a rigid scene)"))?;
        evaluate_rigid(&executed, gt, &config.thresholds).map_err(runtime)?
    } else if deformable_path.is_file() {
        let text = read_input(&deformable_path, out)?;
        #[derive(serde::Deserialize)]
        struct Actions {
            correspondence: Vec<usize>,
            final_positions: Vec<[f64; 3]>,
        }
        let a: Actions = serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", deformable_path.display())))?;
        let state = ParticleState::at_rest(a.final_positions.iter().map(|p| Vec3::from(*p)).collect());
        evaluate_deformable(&state, &bundle.gt_flow, &a.correspondence, &config.thresholds).map_err(runtime)?
    } else {
        return Err(usage(format!(
            "no executed_poses.json or actions.json in {}",
            root.display()
        )));
    };
    write_metrics(&metrics, out)?;
    Ok(metrics)
}

/// Simulate → distill → plan → evaluate, everything under one directory.
fn run(scene: &SceneConfig, robot: &RobotModel, config: &RunConfig, out: &mut Outputs) -> Result<Metrics, CliError> {
    let bundle = simulate(scene, out, "bundle")?;
    let flow = distill(&bundle, config, scene.seed, out)?;
    let metrics = if scene.object.is_rigid() {
        let plan = rigid(&flow, Some(&bundle.camera_pose), robot, &scene.obstacles, config, out)?;
        let gt = bundle.gt_poses.as_ref().ok_or_else(|| runtime("rigid scene without ground-truth poses"))?;
        evaluate_rigid(&plan.executed, gt, &config.thresholds).map_err(runtime)?
    } else {
        let spec = bundle.dynamics.as_ref().ok_or_else(|| runtime("rope scene without dynamics"))?;
        let mut config = config.clone();
        config.mpc.seed = scene.seed;
        let plan = deformable(&flow, spec, &config, out)?;
        let last = plan.log.states.last().ok_or_else(|| runtime("empty rollout"))?;
        evaluate_deformable(last, &bundle.gt_flow, &plan.correspondence, &config.thresholds).map_err(runtime)?
    };
    write_metrics(&metrics, out)?;
    if !metrics.success {
        log::warn!("run finished without meeting the success thresholds");
    }
    Ok(metrics)
}
