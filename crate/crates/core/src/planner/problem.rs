//! Planning problem definition and its TOML configuration document.

use crate::error::{Error, Result};
use crate::factors::{GpCovariance, GpOrder, GpPriorSpec, HingeParams};
use crate::graph::LmParams;
use crate::robot::{bundled_model, load_model_file, RobotModel};
use crate::sdf::{load_scene_file, Scene, SdfGrid};
use crate::spatial::PoseTransform;
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Joint angles, velocities and accelerations at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointState {
    pub q: DVector<f64>,
    pub v: DVector<f64>,
    pub a: DVector<f64>,
}

impl JointState {
    /// Configuration at rest.
    pub fn rest(q: DVector<f64>) -> Self {
        let n = q.len();
        JointState { q, v: DVector::zeros(n), a: DVector::zeros(n) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Goal {
    /// Joint-space goal configuration, reached at rest in full-state mode.
    Joint(DVector<f64>),
    /// End-effector pose in the world frame.
    Pose(PoseTransform),
}

/// What the joint-space goal prior constrains at the last step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalMode {
    /// `(q_g, 0, 0)`.
    #[default]
    FullState,
    /// `q_g` only.
    PositionOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FactorToggles {
    pub obstacles: bool,
    pub limits: bool,
    pub min_torque: bool,
}

impl Default for FactorToggles {
    fn default() -> Self {
        FactorToggles { obstacles: true, limits: true, min_torque: false }
    }
}

/// Noise standard deviations per factor family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sigmas {
    pub prior: f64,
    pub dynamics: f64,
    pub obstacle: f64,
    pub limit: f64,
    pub min_torque: f64,
    pub unactuated_torque: f64,
}

impl Default for Sigmas {
    fn default() -> Self {
        Sigmas { prior: 1e-4, dynamics: 1e-3, obstacle: 0.05, limit: 1e-2, min_torque: 1.0, unactuated_torque: 1e-4 }
    }
}

impl Sigmas {
    fn validate(&self) -> Result<()> {
        let all = [
            ("prior", self.prior),
            ("dynamics", self.dynamics),
            ("obstacle", self.obstacle),
            ("limit", self.limit),
            ("min_torque", self.min_torque),
            ("unactuated_torque", self.unactuated_torque),
        ];
        for (name, s) in all {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("sigmas.{name} must be positive, got {s}")));
            }
        }
        Ok(())
    }
}

/// Thresholds behind the success flag and trajectory validation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Largest allowed raw residual entry of any equality factor.
    pub tol_eq: f64,
    /// How far a joint quantity may exceed its limit.
    pub limit_slack: f64,
    /// Smallest allowed sphere clearance (m).
    pub min_clearance: f64,
    /// Largest allowed `|τ − τ_RNEA(q, q̇, q̈)|` (N·m).
    pub dynamics_defect: f64,
    /// Largest allowed goal error (rad, or the pose error norm).
    pub goal_error: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { tol_eq: 1e-4, limit_slack: 0.0, min_clearance: 0.0, dynamics_defect: 1e-3, goal_error: 1e-3 }
    }
}

#[derive(Debug, Clone)]
pub struct PlanningProblem {
    pub model: Arc<RobotModel>,
    pub start: JointState,
    pub goal: Goal,
    pub goal_mode: GoalMode,
    /// Trajectory duration `T` (s).
    pub horizon: f64,
    /// Number of intervals `N`; the trajectory has `N + 1` states.
    pub steps: usize,
    pub scene: Option<Scene>,
    pub sdf: Option<Arc<SdfGrid>>,
    pub obstacle_eps: f64,
    pub toggles: FactorToggles,
    pub sigmas: Sigmas,
    pub gp: GpPriorSpec,
    pub hinge: HingeParams,
    pub tolerances: Tolerances,
    pub solver: LmParams,
}

impl PlanningProblem {
    /// Rest-to-rest problem with default settings and no obstacles.
    pub fn new(model: RobotModel, start: DVector<f64>, goal: Goal, horizon: f64, steps: usize) -> Result<Self> {
        let d = model.dof();
        let p = PlanningProblem {
            model: Arc::new(model),
            start: JointState::rest(start),
            goal,
            goal_mode: GoalMode::default(),
            horizon,
            steps,
            scene: None,
            sdf: None,
            obstacle_eps: 0.1,
            toggles: FactorToggles::default(),
            sigmas: Sigmas::default(),
            gp: GpPriorSpec::identity(d),
            hinge: HingeParams::default(),
            tolerances: Tolerances::default(),
            solver: LmParams::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn dof(&self) -> usize {
        self.model.dof()
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn times(&self) -> Vec<f64> {
        let dt = self.dt();
        (0..=self.steps).map(|i| i as f64 * dt).collect()
    }

    /// Replaces the obstacle scene and rebuilds its distance field.
    pub fn set_scene(&mut self, scene: Option<Scene>) -> Result<()> {
        self.sdf = match &scene {
            Some(s) => Some(Arc::new(s.build()?)),
            None => None,
        };
        self.scene = scene;
        Ok(())
    }

    /// Whether obstacle factors are part of the graph.
    pub fn uses_obstacles(&self) -> bool {
        self.toggles.obstacles && self.sdf.is_some() && self.model.sphere_count() > 0
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dof();
        if self.steps < 2 {
            return Err(Error::Config(format!("steps must be at least 2, got {}", self.steps)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!("horizon must be positive, got {}", self.horizon)));
        }
        for (name, v) in [("start.q", &self.start.q), ("start.v", &self.start.v), ("start.a", &self.start.a)] {
            if v.len() != d {
                return Err(Error::Config(format!("{name} has {} entries, model has {d} joints", v.len())));
            }
        }
        for (j, joint) in self.model.joints.iter().enumerate() {
            let q = self.start.q[j];
            if q < joint.limits.q_min || q > joint.limits.q_max {
                return Err(Error::Config(format!(
                    "start.q[{j}] = {q} is outside the joint limits [{}, {}]",
                    joint.limits.q_min, joint.limits.q_max
                )));
            }
        }
        if let Goal::Joint(g) = &self.goal {
            if g.len() != d {
                return Err(Error::Config(format!("goal.q has {} entries, model has {d} joints", g.len())));
            }
        }
        if self.gp.dim() != d {
            return Err(Error::Config(format!("Q_C is {0}x{0}, model has {d} joints", self.gp.dim())));
        }
        if !(self.obstacle_eps >= 0.0) {
            return Err(Error::Config("factors.obstacle_eps must be non-negative".into()));
        }
        self.sigmas.validate()
    }
}

/// Problem configuration document (`*.cfg`, TOML).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    /// Name of a bundled model.
    #[serde(default)]
    pub model: Option<String>,
    /// Path to a model document, relative to the config file.
    #[serde(default)]
    pub model_file: Option<PathBuf>,
    pub horizon: f64,
    pub steps: usize,
    pub start: StateConfig,
    pub goal: GoalConfig,
    #[serde(default)]
    pub factors: FactorsConfig,
    #[serde(default)]
    pub scene: Option<Scene>,
    #[serde(default)]
    pub scene_file: Option<PathBuf>,
    #[serde(default)]
    pub sigmas: Sigmas,
    #[serde(default)]
    pub gp: GpConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub solver: LmParams,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateConfig {
    pub q: Vec<f64>,
    #[serde(default)]
    pub v: Option<Vec<f64>>,
    #[serde(default)]
    pub a: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalConfig {
    #[serde(default)]
    pub q: Option<Vec<f64>>,
    #[serde(default)]
    pub pose: Option<PoseConfig>,
    #[serde(default)]
    pub mode: GoalMode,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseConfig {
    /// Row-major rotation; identity when omitted.
    #[serde(default)]
    pub rotation: Option<[f64; 9]>,
    pub translation: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FactorsConfig {
    pub obstacles: bool,
    pub limits: bool,
    pub min_torque: bool,
    pub obstacle_eps: f64,
    pub hinge: HingeParams,
}

impl Default for FactorsConfig {
    fn default() -> Self {
        let t = FactorToggles::default();
        FactorsConfig {
            obstacles: t.obstacles,
            limits: t.limits,
            min_torque: t.min_torque,
            obstacle_eps: 0.1,
            hinge: HingeParams::default(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpConfig {
    /// Diagonal of Q_C; identity when omitted.
    pub qc_diag: Option<Vec<f64>>,
    pub covariance: GpCovariance,
}

/// Output paths, relative to the config file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub trajectory: Option<PathBuf>,
    pub trajectory_json: Option<PathBuf>,
    pub stats: Option<PathBuf>,
    pub plot: Option<PathBuf>,
}

fn vec_or_zero(v: &Option<Vec<f64>>, n: usize) -> DVector<f64> {
    v.as_ref().map(|x| DVector::from_column_slice(x)).unwrap_or_else(|| DVector::zeros(n))
}

impl ProblemConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Builds the problem; relative paths resolve against `base_dir`.
    pub fn to_problem(&self, base_dir: &Path) -> Result<PlanningProblem> {
        let model = match (&self.model, &self.model_file) {
            (Some(name), None) => bundled_model(name)?,
            (None, Some(path)) => load_model_file(base_dir.join(path))?,
            _ => return Err(Error::Config("exactly one of `model` and `model_file` must be set".into())),
        };
        let d = model.dof();
        let goal = match (&self.goal.q, &self.goal.pose) {
            (Some(q), None) => Goal::Joint(DVector::from_column_slice(q)),
            (None, Some(p)) => {
                let r = p.rotation.map(|r| Matrix3::from_row_slice(&r)).unwrap_or_else(Matrix3::identity);
                let pose = PoseTransform::new(r, Vector3::from(p.translation));
                if !pose.is_valid(1e-6) {
                    return Err(Error::Config("goal.pose.rotation is not orthonormal".into()));
                }
                Goal::Pose(pose.orthonormalized())
            }
            _ => return Err(Error::Config("goal needs exactly one of `q` and `pose`".into())),
        };
        let scene = match (&self.scene, &self.scene_file) {
            (Some(_), Some(_)) => return Err(Error::Config("set at most one of `scene` and `scene_file`".into())),
            (Some(s), None) => {
                s.grid.validate()?;
                s.obstacles.validate()?;
                Some(s.clone())
            }
            (None, Some(path)) => Some(load_scene_file(base_dir.join(path))?),
            (None, None) => None,
        };
        let qc = match &self.gp.qc_diag {
            Some(diag) if diag.len() != d => {
                return Err(Error::Config(format!("gp.qc_diag has {} entries, model has {d} joints", diag.len())))
            }
            Some(diag) => DMatrix::from_diagonal(&DVector::from_column_slice(diag)),
            None => DMatrix::identity(d, d),
        };
        let mut problem = PlanningProblem::new(model, DVector::from_column_slice(&self.start.q), goal, self.horizon, self.steps)?;
        problem.start.v = vec_or_zero(&self.start.v, d);
        problem.start.a = vec_or_zero(&self.start.a, d);
        problem.goal_mode = self.goal.mode;
        problem.toggles = FactorToggles {
            obstacles: self.factors.obstacles,
            limits: self.factors.limits,
            min_torque: self.factors.min_torque,
        };
        problem.obstacle_eps = self.factors.obstacle_eps;
        problem.hinge = self.factors.hinge;
        problem.sigmas = self.sigmas;
        problem.gp = GpPriorSpec::new(qc, GpOrder::ConstantAcceleration, self.gp.covariance)?;
        problem.tolerances = self.tolerances;
        problem.solver = self.solver;
        problem.set_scene(scene)?;
        problem.validate()?;
        Ok(problem)
    }
}

/// A parsed configuration file together with its directory.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ProblemConfig,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn problem(&self) -> Result<PlanningProblem> {
        self.config.to_problem(&self.base_dir)
    }

    /// Output path from the config, resolved against its directory.
    pub fn resolve(&self, p: &Option<PathBuf>) -> Option<PathBuf> {
        p.as_ref().map(|p| self.base_dir.join(p))
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<LoadedConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let config = ProblemConfig::parse(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(LoadedConfig { config, base_dir })
}
