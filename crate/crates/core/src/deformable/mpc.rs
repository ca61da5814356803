use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cost::{chamfer_cost, flow_cost};
use super::model::{GripperAction, MassSpringModel, ParticleState};
use super::DeformableError;
use crate::flow::ActionableFlow;
use crate::geometry::Vec3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Planner {
    #[default]
    Cem,
    RandomShooting,
}

/// What the planner scores a rollout against.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Per-step correspondence cost against the matching flow frame.
    #[default]
    Flow,
    /// Chamfer distance of every predicted state to the final flow frame.
    ChamferToGoal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CemConfig {
    pub population: usize,
    pub elites: usize,
    pub iters: usize,
    pub init_std: f64,
    pub min_std: f64,
}

impl Default for CemConfig {
    fn default() -> Self {
        Self {
            population: 64,
            elites: 8,
            iters: 5,
            init_std: 0.02,
            min_std: 1e-4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MpcConfig {
    pub horizon: usize,
    pub planner: Planner,
    pub objective: Objective,
    pub cem: CemConfig,
    pub seed: u64,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            horizon: 5,
            planner: Planner::Cem,
            objective: Objective::Flow,
            cem: CemConfig::default(),
            seed: 0,
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<(), DeformableError> {
        if self.horizon == 0
            || self.cem.population == 0
            || self.cem.elites == 0
            || self.cem.elites > self.cem.population
        {
            return Err(DeformableError::InvalidModel(
                "horizon ≥ 1 and 1 ≤ elites ≤ population required".into(),
            ));
        }
        Ok(())
    }
}

/// SplitMix64 finalizer, used to derive independent per-sample streams.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn sample_rng(seed: u64, t: usize, iter: usize, sample: usize) -> ChaCha8Rng {
    let s = mix(mix(mix(mix(seed) ^ t as u64) ^ iter as u64) ^ sample as u64);
    ChaCha8Rng::seed_from_u64(s)
}

struct Scorer<'a> {
    model: &'a MassSpringModel,
    state: &'a ParticleState,
    flow: &'a ActionableFlow,
    t: usize,
    objective: Objective,
    correspondence: &'a [usize],
}

impl Scorer<'_> {
    /// Cumulative cost of the states reached by the sequence; non-finite
    /// rollouts score +∞.
    fn score(&self, actions: &[GripperAction]) -> f64 {
        let mut s = self.state.clone();
        let goal = self.flow.frame(self.flow.frames - 1);
        let mut total = 0.0;
        for (j, a) in actions.iter().enumerate() {
            if self.model.step_in_place(&mut s, a).is_err() || !s.is_finite() {
                return f64::INFINITY;
            }
            let c = match self.objective {
                Objective::Flow => flow_cost(
                    &s.positions,
                    self.flow.frame(self.t + j + 1),
                    self.correspondence,
                ),
                Objective::ChamferToGoal => chamfer_cost(&s.positions, goal),
            };
            match c {
                Ok(v) if v.is_finite() => total += v,
                _ => return f64::INFINITY,
            }
        }
        total
    }
}

fn draw(rng: &mut ChaCha8Rng, mean: &[Vec3], std: &[Vec3], cap: f64) -> Vec<GripperAction> {
    mean.iter()
        .zip(std)
        .map(|(m, s)| {
            let mut d = Vec3::zeros();
            for k in 0..3 {
                let z: f64 = StandardNormal.sample(rng);
                d[k] = m[k] + s[k] * z;
            }
            GripperAction { delta: d }.clamped(cap)
        })
        .collect()
}

/// Plans `min(H, T − 1 − t)` actions from frame `t`.
///
/// CEM (or random shooting) over gripper displacement sequences. The
/// all-zero sequence is evaluated in every population, and the result is
/// the better of the final elite mean and the best sequence evaluated, so
/// the plan never scores worse than staying still.
pub fn plan_actions(
    model: &MassSpringModel,
    state: &ParticleState,
    flow: &ActionableFlow,
    t: usize,
    config: &MpcConfig,
    correspondence: &[usize],
) -> Result<Vec<GripperAction>, DeformableError> {
    plan_actions_from(model, state, flow, t, config, correspondence, &[])
}

/// As [`plan_actions`], with the sampling mean initialised from `warm`
/// (missing entries are zero).
pub fn plan_actions_from(
    model: &MassSpringModel,
    state: &ParticleState,
    flow: &ActionableFlow,
    t: usize,
    config: &MpcConfig,
    correspondence: &[usize],
    warm: &[GripperAction],
) -> Result<Vec<GripperAction>, DeformableError> {
    config.validate()?;
    if t >= flow.frames {
        return Err(DeformableError::FrameOutOfRange {
            t,
            frames: flow.frames,
        });
    }
    let h = config.horizon.min(flow.frames - 1 - t);
    if h == 0 {
        return Ok(Vec::new());
    }
    let scorer = Scorer {
        model,
        state,
        flow,
        t,
        objective: config.objective,
        correspondence,
    };
    let cem = config.cem;
    let cap = model.action_cap;
    let zero = vec![GripperAction::default(); h];
    let mut best = (scorer.score(&zero), zero.clone());
    let mut mean: Vec<Vec3> = (0..h)
        .map(|j| warm.get(j).map_or(Vec3::zeros(), |a| a.delta))
        .collect();
    let mut std = vec![Vec3::repeat(cem.init_std); h];
    let iters = if config.planner == Planner::RandomShooting {
        1
    } else {
        cem.iters
    };
    let population = if config.planner == Planner::RandomShooting {
        cem.population * cem.iters
    } else {
        cem.population
    };
    // previous elites and mean, re-scored alongside the next population
    let mut carried: Vec<Vec<GripperAction>> = Vec::new();

    for iter in 0..iters {
        let as_plan = |m: &[Vec3]| -> Vec<GripperAction> {
            m.iter()
                .map(|d| GripperAction { delta: *d }.clamped(cap))
                .collect()
        };
        let mut fixed = vec![zero.clone(), as_plan(&mean)];
        fixed.append(&mut carried);
        let n_fixed = fixed.len();
        let mut samples: Vec<(f64, Vec<GripperAction>)> = (0..population.max(n_fixed))
            .into_par_iter()
            .map(|k| {
                let seq = if k < n_fixed {
                    fixed[k].clone()
                } else {
                    draw(&mut sample_rng(config.seed, t, iter, k), &mean, &std, cap)
                };
                (scorer.score(&seq), seq)
            })
            .collect();
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        if samples[0].0 < best.0 {
            best = samples[0].clone();
        }
        let elites = &samples[..cem.elites];
        for j in 0..h {
            let m: Vec3 = elites.iter().map(|e| e.1[j].delta).sum::<Vec3>() / elites.len() as f64;
            let var: Vec3 = elites
                .iter()
                .map(|e| (e.1[j].delta - m).component_mul(&(e.1[j].delta - m)))
                .sum::<Vec3>()
                / elites.len() as f64;
            mean[j] = m;
            std[j] = var.map(|v| v.sqrt().max(cem.min_std));
        }
        carried = elites
            .iter()
            .take(cem.elites / 2)
            .map(|e| e.1.clone())
            .collect();
    }
    let mean_plan: Vec<GripperAction> = mean
        .iter()
        .map(|m| GripperAction { delta: *m }.clamped(cap))
        .collect();
    let mean_cost = scorer.score(&mean_plan);
    Ok(if mean_cost <= best.0 {
        mean_plan
    } else {
        best.1
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutLog {
    pub actions: Vec<GripperAction>,
    pub states: Vec<ParticleState>,
    /// `flow_cost(S_{t+1}, F^{t+1})` after each executed action.
    pub step_costs: Vec<f64>,
    /// Flow cost of the initial state against the final flow frame.
    pub initial_cost: f64,
    /// Flow cost of the final state against the final flow frame.
    pub final_cost: f64,
}

/// Receding-horizon execution: plan from every frame, apply the first action.
pub fn mpc_rollout(
    model: &MassSpringModel,
    initial: &ParticleState,
    flow: &ActionableFlow,
    config: &MpcConfig,
    correspondence: &[usize],
) -> Result<RolloutLog, DeformableError> {
    model.validate()?;
    if flow.frames < 2 {
        return Err(DeformableError::FlowTooShort(flow.frames));
    }
    let goal = flow.frame(flow.frames - 1);
    let initial_cost = flow_cost(&initial.positions, goal, correspondence)?;
    let mut state = initial.clone();
    let mut states = vec![state.clone()];
    let mut actions = Vec::with_capacity(flow.frames - 1);
    let mut step_costs = Vec::with_capacity(flow.frames - 1);
    let mut warm: Vec<GripperAction> = Vec::new();
    for t in 0..flow.frames - 1 {
        let plan = plan_actions_from(model, &state, flow, t, config, correspondence, &warm)?;
        warm = plan.iter().skip(1).copied().collect();
        let a = plan
            .first()
            .copied()
            .unwrap_or_default()
            .clamped(model.action_cap);
        model.step_in_place(&mut state, &a)?;
        step_costs.push(flow_cost(
            &state.positions,
            flow.frame(t + 1),
            correspondence,
        )?);
        actions.push(a);
        states.push(state.clone());
        log::debug!("mpc t={t} cost={:.3e}", step_costs[t]);
    }
    let final_cost = flow_cost(&state.positions, goal, correspondence)?;
    Ok(RolloutLog {
        actions,
        states,
        step_costs,
        initial_cost,
        final_cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_particle_world() -> (MassSpringModel, ParticleState) {
        // two particles, the first attached; the spring keeps the second
        // trailing but the cost only watches the first
        let pts = vec![Vec3::zeros(), Vec3::new(-0.05, 0.0, 0.0)];
        let mut m = MassSpringModel::chain(&pts);
        m.attachment = vec![0];
        (m, ParticleState::at_rest(pts))
    }

    #[test]
    fn static_flow_gives_zero_actions() {
        let (m, s) = single_particle_world();
        let flow = ActionableFlow::from_frames(vec![s.positions.clone(); 6], "rope").unwrap();
        let corr = vec![0, 1];
        let plan = plan_actions(&m, &s, &flow, 0, &MpcConfig::default(), &corr).unwrap();
        assert_eq!(plan.len(), 5);
        assert!(plan.iter().all(|a| a.delta.norm() < 0.002));
    }

    #[test]
    fn straight_line_flow_first_action() {
        let (m, s) = single_particle_world();
        // attached particle only: a one-keypoint flow moving 1 cm per frame
        let frames: Vec<Vec<Vec3>> = (0..8)
            .map(|t| vec![Vec3::new(0.01 * t as f64, 0.0, 0.0)])
            .collect();
        let flow = ActionableFlow::from_frames(frames, "dot").unwrap();
        let state = ParticleState::at_rest(vec![Vec3::zeros()]);
        let mut solo = m.clone();
        solo.n_particles = 1;
        solo.edges.clear();
        let cfg = MpcConfig {
            // the first action trades off against the second one at low
            // curvature, so resolving it to 1e-3 takes a larger population
            cem: CemConfig {
                population: 512,
                elites: 32,
                iters: 30,
                ..Default::default()
            },
            ..Default::default()
        };
        let plan = plan_actions(&solo, &state, &flow, 0, &cfg, &[0]).unwrap();
        assert!(
            (plan[0].delta - Vec3::new(0.01, 0.0, 0.0)).norm() < 1e-3,
            "{:?}",
            plan[0]
        );
        drop(s);
    }

    #[test]
    fn plan_never_worse_than_idle() {
        let (m, s) = single_particle_world();
        let frames: Vec<Vec<Vec3>> = (0..6)
            .map(|t| {
                s.positions
                    .iter()
                    .map(|p| p + Vec3::new(0.0, 0.02 * t as f64, 0.0))
                    .collect()
            })
            .collect();
        let flow = ActionableFlow::from_frames(frames, "rope").unwrap();
        let corr = vec![0, 1];
        for seed in 0..5 {
            let cfg = MpcConfig {
                seed,
                ..Default::default()
            };
            let plan = plan_actions(&m, &s, &flow, 0, &cfg, &corr).unwrap();
            let scorer = Scorer {
                model: &m,
                state: &s,
                flow: &flow,
                t: 0,
                objective: Objective::Flow,
                correspondence: &corr,
            };
            assert!(
                scorer.score(&plan) <= scorer.score(&vec![GripperAction::default(); plan.len()])
            );
        }
    }

    #[test]
    fn horizon_truncates_at_flow_end() {
        let (m, s) = single_particle_world();
        let flow = ActionableFlow::from_frames(vec![s.positions.clone(); 4], "rope").unwrap();
        let corr = vec![0, 1];
        assert_eq!(
            plan_actions(&m, &s, &flow, 1, &MpcConfig::default(), &corr)
                .unwrap()
                .len(),
            2
        );
        assert!(plan_actions(&m, &s, &flow, 3, &MpcConfig::default(), &corr)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn rollout_is_deterministic_and_tracks() {
        let (m, s) = single_particle_world();
        // translation along the chain axis, which the springs can carry
        let frames: Vec<Vec<Vec3>> = (0..10)
            .map(|t| {
                s.positions
                    .iter()
                    .map(|p| p + Vec3::new(0.01 * t as f64, 0.0, 0.0))
                    .collect()
            })
            .collect();
        let flow = ActionableFlow::from_frames(frames, "rope").unwrap();
        let corr = vec![0, 1];
        let cfg = MpcConfig::default();
        let a = mpc_rollout(&m, &s, &flow, &cfg, &corr).unwrap();
        let b = mpc_rollout(&m, &s, &flow, &cfg, &corr).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.actions.len(), 9);
        assert_eq!(a.states.len(), 10);
        assert!(
            a.final_cost < 0.1 * a.initial_cost,
            "{} vs {}",
            a.final_cost,
            a.initial_cost
        );
    }

    #[test]
    fn constant_flow_at_targets_costs_nothing() {
        let (m, s) = single_particle_world();
        let flow = ActionableFlow::from_frames(vec![s.positions.clone(); 5], "rope").unwrap();
        let log = mpc_rollout(&m, &s, &flow, &MpcConfig::default(), &[0, 1]).unwrap();
        assert!(log.final_cost < 1e-12);
        assert!(log.actions.iter().all(|a| a.delta.norm() < 0.002));
    }

    #[test]
    fn random_shooting_runs() {
        let (m, s) = single_particle_world();
        let flow = ActionableFlow::from_frames(vec![s.positions.clone(); 4], "rope").unwrap();
        let cfg = MpcConfig {
            planner: Planner::RandomShooting,
            ..Default::default()
        };
        let plan = plan_actions(&m, &s, &flow, 0, &cfg, &[0, 1]).unwrap();
        assert_eq!(plan, vec![GripperAction::default(); 3]);
    }
}
