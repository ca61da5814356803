use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::costs::{
    collision_residuals, limit_residuals, rest_residuals, smooth_residuals, sum_squares,
};
use super::lm::{levenberg_marquardt, LeastSquaresProblem, LmOptions};
use super::obstacle::swept_clearances;
use super::{Obstacle, TrajOptError};
use crate::kinematics::{JointConfig, JointTrajectory, RobotModel};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajOptWeights {
    pub w_s: f64,
    pub w_r: f64,
    pub w_l: f64,
    pub w_c: f64,
}

impl Default for TrajOptWeights {
    fn default() -> Self {
        Self {
            w_s: 10.0,
            w_r: 0.1,
            w_l: 100.0,
            w_c: 15.0,
        }
    }
}

pub const DEFAULT_EPS_SAFE: f64 = 0.02;
pub const DEFAULT_SWEPT_SAMPLES: usize = 5;
pub const DEFAULT_DT: f64 = 0.1;
const CLEARANCE_SLACK: f64 = 1e-4;

#[derive(Clone, Debug)]
pub struct TrajOptProblem {
    pub model: RobotModel,
    pub q_start: JointConfig,
    pub q_end: JointConfig,
    /// Number of configurations `T`, endpoints included.
    pub steps: usize,
    pub q_rest: JointConfig,
    pub weights: TrajOptWeights,
    pub eps_safe: f64,
    pub obstacles: Vec<Obstacle>,
    pub swept_samples: usize,
    /// Seconds per step, used by the velocity hinge.
    pub dt: f64,
    pub lm: LmOptions,
}

impl TrajOptProblem {
    pub fn new(model: RobotModel, q_start: JointConfig, q_end: JointConfig, steps: usize) -> Self {
        let q_rest = model.home_or_mid();
        Self {
            model,
            q_start,
            q_end,
            steps,
            q_rest,
            weights: TrajOptWeights::default(),
            eps_safe: DEFAULT_EPS_SAFE,
            obstacles: Vec::new(),
            swept_samples: DEFAULT_SWEPT_SAMPLES,
            dt: DEFAULT_DT,
            lm: LmOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<(), TrajOptError> {
        let n = self.model.dof();
        let bad = |s: &str| Err(TrajOptError::InvalidProblem(s.into()));
        if self.steps < 2 {
            return Err(TrajOptError::TooFewSteps(self.steps));
        }
        if self.q_start.len() != n || self.q_end.len() != n || self.q_rest.len() != n {
            return bad("joint vectors do not match the robot");
        }
        if !self.model.within_limits(&self.q_start) || !self.model.within_limits(&self.q_end) {
            return bad("start or end configuration violates joint limits");
        }
        let w = self.weights;
        if [w.w_s, w.w_r, w.w_l, w.w_c].iter().any(|v| !(*v >= 0.0))
            || !(self.eps_safe >= 0.0)
            || !(self.dt > 0.0)
        {
            return bad("weights, eps_safe and dt must be non-negative (dt positive)");
        }
        for o in &self.obstacles {
            o.validate()?;
        }
        Ok(())
    }

    fn n_interior(&self) -> usize {
        self.steps - 2
    }

    fn configs_from(&self, x: &DVector<f64>) -> Vec<JointConfig> {
        let n = self.model.dof();
        let mut out = Vec::with_capacity(self.steps);
        out.push(self.q_start.clone());
        for t in 0..self.n_interior() {
            out.push(x.rows(t * n, n).into_owned());
        }
        out.push(self.q_end.clone());
        out
    }

    fn interior_rest(&self, configs: &[JointConfig]) -> Vec<f64> {
        rest_residuals(
            &configs[1..configs.len() - 1],
            &self.q_rest,
            self.weights.w_r,
        )
    }

    fn blocks(&self, configs: &[JointConfig]) -> [Vec<f64>; 4] {
        let w = self.weights;
        [
            smooth_residuals(configs, w.w_s),
            self.interior_rest(configs),
            limit_residuals(configs, &self.model, w.w_l, self.dt),
            collision_residuals(
                configs,
                &self.model,
                &self.obstacles,
                self.eps_safe,
                w.w_c,
                self.swept_samples,
            ),
        ]
    }

    pub fn term_costs(&self, configs: &[JointConfig]) -> TermCosts {
        let [s, r, l, c] = self.blocks(configs);
        TermCosts {
            smooth: sum_squares(&s),
            rest: sum_squares(&r),
            limits: sum_squares(&l),
            collision: sum_squares(&c),
        }
    }

    /// Structured Jacobian: analytic for the quadratic and hinge blocks,
    /// per-segment forward differences for the collision block.
    fn structured_jacobian(&self, x: &DVector<f64>, r: &DVector<f64>) -> DMatrix<f64> {
        let n = self.model.dof();
        let t_len = self.steps;
        let m = self.n_interior();
        let configs = self.configs_from(x);
        let mut jac = DMatrix::zeros(r.len(), m * n);
        let var =
            |t: usize, k: usize| -> Option<usize> { (t >= 1 && t <= m).then(|| (t - 1) * n + k) };
        let w = self.weights;
        let (ss, sr, sl, sc) = (w.w_s.sqrt(), w.w_r.sqrt(), w.w_l.sqrt(), w.w_c.sqrt());

        for t in 1..t_len {
            for k in 0..n {
                let row = (t - 1) * n + k;
                if let Some(c) = var(t, k) {
                    jac[(row, c)] = ss;
                }
                if let Some(c) = var(t - 1, k) {
                    jac[(row, c)] = -ss;
                }
            }
        }
        let r0 = (t_len - 1) * n;
        for i in 0..m * n {
            jac[(r0 + i, i)] = sr;
        }
        let l0 = r0 + m * n;
        for (t, q) in configs.iter().enumerate() {
            for (k, j) in self.model.joints.iter().enumerate() {
                if let Some(c) = var(t, k) {
                    if q[k] > j.q_max {
                        jac[(l0 + 2 * (t * n + k), c)] = sl;
                    }
                    if q[k] < j.q_min {
                        jac[(l0 + 2 * (t * n + k) + 1, c)] = -sl;
                    }
                }
            }
        }
        let v0 = l0 + 2 * t_len * n;
        for t in 1..t_len {
            for (k, j) in self.model.joints.iter().enumerate() {
                let d = configs[t][k] - configs[t - 1][k];
                if d.abs() > j.velocity_limit * self.dt {
                    let row = v0 + (t - 1) * n + k;
                    if let Some(c) = var(t, k) {
                        jac[(row, c)] = sl * d.signum();
                    }
                    if let Some(c) = var(t - 1, k) {
                        jac[(row, c)] = -sl * d.signum();
                    }
                }
            }
        }
        let c0 = v0 + (t_len - 1) * n;
        let n_obs = self.obstacles.len();
        let h = self.lm.fd_step;
        for seg in 0..t_len - 1 {
            let base_rows = c0 + seg * n_obs;
            let base = swept_clearances(
                &self.model,
                &configs[seg],
                &configs[seg + 1],
                &self.obstacles,
                self.swept_samples,
            );
            // a 1e-6 rad nudge cannot move a clearance this far into the margin
            if base.iter().all(|d| *d > self.eps_safe + 1e-3) {
                continue;
            }
            for (side, t) in [(0usize, seg), (1, seg + 1)] {
                for k in 0..n {
                    let Some(col) = var(t, k) else { continue };
                    let mut qa = configs[seg].clone();
                    let mut qb = configs[seg + 1].clone();
                    if side == 0 {
                        qa[k] += h;
                    } else {
                        qb[k] += h;
                    }
                    let moved = swept_clearances(
                        &self.model,
                        &qa,
                        &qb,
                        &self.obstacles,
                        self.swept_samples,
                    );
                    for (o, d) in moved.iter().enumerate() {
                        let row = base_rows + o;
                        let rp = sc * (self.eps_safe - d).max(0.0);
                        jac[(row, col)] = (rp - r[row]) / h;
                    }
                }
            }
        }
        jac
    }
}

impl LeastSquaresProblem for TrajOptProblem {
    fn residuals(&self, x: &DVector<f64>) -> DVector<f64> {
        let configs = self.configs_from(x);
        let blocks = self.blocks(&configs);
        DVector::from_iterator(
            blocks.iter().map(Vec::len).sum(),
            blocks.into_iter().flatten(),
        )
    }

    fn jacobian(&self, x: &DVector<f64>, r: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(self.structured_jacobian(x, r))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TermCosts {
    pub smooth: f64,
    pub rest: f64,
    pub limits: f64,
    pub collision: f64,
}

impl TermCosts {
    pub fn total(&self) -> f64 {
        self.smooth + self.rest + self.limits + self.collision
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajOptResult {
    pub trajectory: JointTrajectory,
    pub final_cost: f64,
    pub initial_cost: f64,
    pub costs: TermCosts,
    pub iterations: usize,
    pub lm_converged: bool,
    /// Clearance and joint limits satisfied at the end.
    pub converged: bool,
    /// `None` when there are no obstacles.
    pub min_clearance: Option<f64>,
}

impl TrajOptResult {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "trajectory": self.trajectory.configs.iter().map(|q| q.iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>(),
            "dt": self.trajectory.dt,
            "final_cost": self.final_cost,
            "initial_cost": self.initial_cost,
            "costs": self.costs,
            "iterations": self.iterations,
            "lm_converged": self.lm_converged,
            "converged": self.converged,
            "min_clearance": self.min_clearance,
        })
    }
}

/// `q_t = q_start + t/(T−1) (q_end − q_start)`.
pub fn init_trajectory(
    q_start: &JointConfig,
    q_end: &JointConfig,
    steps: usize,
) -> Result<Vec<JointConfig>, TrajOptError> {
    if steps < 2 {
        return Err(TrajOptError::TooFewSteps(steps));
    }
    let mut out: Vec<JointConfig> = (0..steps)
        .map(|t| q_start + (q_end - q_start) * (t as f64 / (steps - 1) as f64))
        .collect();
    out[0] = q_start.clone();
    out[steps - 1] = q_end.clone();
    Ok(out)
}

/// Minimum swept clearance over every segment and obstacle.
pub fn audit_clearance(
    model: &RobotModel,
    configs: &[JointConfig],
    obstacles: &[Obstacle],
    samples: usize,
) -> Option<f64> {
    if obstacles.is_empty() {
        return None;
    }
    configs
        .windows(2)
        .flat_map(|w| swept_clearances(model, &w[0], &w[1], obstacles, samples))
        .reduce(f64::min)
}

/// Optimizes the interior configurations with the endpoints held fixed.
pub fn optimize_trajectory(problem: &TrajOptProblem) -> Result<TrajOptResult, TrajOptError> {
    problem.validate()?;
    let n = problem.model.dof();
    let init = init_trajectory(&problem.q_start, &problem.q_end, problem.steps)?;
    let x0 = DVector::from_iterator(
        problem.n_interior() * n,
        init[1..problem.steps - 1]
            .iter()
            .flat_map(|q| q.iter().copied()),
    );
    let report = levenberg_marquardt(problem, x0, &problem.lm)?;
    let configs = problem.configs_from(&report.x);
    let costs = problem.term_costs(&configs);
    let min_clearance = audit_clearance(
        &problem.model,
        &configs,
        &problem.obstacles,
        2 * problem.swept_samples,
    );
    let clear = min_clearance.is_none_or(|c| c >= problem.eps_safe - CLEARANCE_SLACK);
    let in_limits = configs.iter().all(|q| problem.model.within_limits(q));
    Ok(TrajOptResult {
        trajectory: JointTrajectory {
            configs,
            dt: problem.dt,
        },
        final_cost: report.cost,
        initial_cost: report.initial_cost,
        costs,
        iterations: report.iterations,
        lm_converged: report.converged,
        converged: clear && in_limits,
        min_clearance,
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemJson {
    /// Path to a robot JSON file, relative to the problem file, or
    /// `builtin:panda`.
    robot: String,
    q_start: Vec<f64>,
    q_end: Vec<f64>,
    steps: usize,
    #[serde(default)]
    q_rest: Option<Vec<f64>>,
    #[serde(default)]
    weights: Option<TrajOptWeights>,
    #[serde(default)]
    eps_safe: Option<f64>,
    #[serde(default)]
    obstacles: Vec<Obstacle>,
    #[serde(default)]
    swept_samples: Option<usize>,
    #[serde(default)]
    dt: Option<f64>,
    #[serde(default)]
    lm: Option<LmOptions>,
}

pub fn load_robot(spec: &str, base: &Path) -> Result<RobotModel, TrajOptError> {
    if spec == "builtin:panda" {
        return Ok(RobotModel::panda_fixture());
    }
    let path = base.join(spec);
    Ok(RobotModel::load(&path)?)
}

impl TrajOptProblem {
    /// Parses a problem file; relative robot paths resolve against `base`.
    pub fn from_json_str(text: &str, base: &Path) -> Result<Self, TrajOptError> {
        let raw: ProblemJson =
            serde_json::from_str(text).map_err(|e| TrajOptError::InvalidProblem(e.to_string()))?;
        let model = load_robot(&raw.robot, base)?;
        let mut p = TrajOptProblem::new(
            model,
            DVector::from_vec(raw.q_start),
            DVector::from_vec(raw.q_end),
            raw.steps,
        );
        if let Some(r) = raw.q_rest {
            p.q_rest = DVector::from_vec(r);
        }
        if let Some(w) = raw.weights {
            p.weights = w;
        }
        if let Some(e) = raw.eps_safe {
            p.eps_safe = e;
        }
        p.obstacles = raw.obstacles;
        if let Some(s) = raw.swept_samples {
            p.swept_samples = s;
        }
        if let Some(dt) = raw.dt {
            p.dt = dt;
        }
        if let Some(lm) = raw.lm {
            p.lm = lm;
        }
        p.validate()?;
        Ok(p)
    }
}
