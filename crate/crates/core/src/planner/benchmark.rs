//! Seeded benchmark suites over random goal configurations.
//!
//! A suite document names a base problem config and how to draw goals:
//!
//! ```toml
//! config = "../configs/arm3_reach.cfg"
//! trials = 20
//! seed = 7
//! mode = "replan"        # or "plan"
//! goal_margin = 0.1      # fraction of each joint range kept clear of the limits
//! perturbation = 0.2     # replan only: max per-joint goal change, rad
//!
//! [overrides]
//! min_torque = true
//! ```

use super::problem::{load_config, Goal, PlanningProblem};
use super::session::{open_session_with, ReplanChange, ReplanParams};
use super::solve::{plan_batch, plan_from, PlanOutcome};
use super::build::build_graph;
use super::trajectory::Trajectory;
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuiteMode {
    #[default]
    Plan,
    Replan,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteOverrides {
    pub min_torque: Option<bool>,
    pub steps: Option<usize>,
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    /// Base problem config, relative to the suite file.
    pub config: PathBuf,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: SuiteMode,
    #[serde(default = "default_margin")]
    pub goal_margin: f64,
    #[serde(default = "default_perturbation")]
    pub perturbation: f64,
    /// Plan trials may run in parallel; replan trials always run one at a
    /// time so their wall times are comparable.
    #[serde(default)]
    pub execution: Execution,
    #[serde(default)]
    pub overrides: SuiteOverrides,
}

fn default_trials() -> usize {
    20
}

fn default_margin() -> f64 {
    0.1
}

fn default_perturbation() -> f64 {
    0.2
}

impl SuiteConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let s: SuiteConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if !(0.0..0.5).contains(&self.goal_margin) {
            return Err(Error::Config(format!("goal_margin must lie in [0, 0.5), got {}", self.goal_margin)));
        }
        if !(self.perturbation >= 0.0) {
            return Err(Error::Config("perturbation must be non-negative".into()));
        }
        Ok(())
    }
}

/// A suite file with its directory, ready to run.
#[derive(Debug, Clone)]
pub struct LoadedSuite {
    pub suite: SuiteConfig,
    pub base_dir: PathBuf,
}

pub fn load_suite(path: impl AsRef<Path>) -> Result<LoadedSuite> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let suite = SuiteConfig::parse(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })?;
    Ok(LoadedSuite { suite, base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default() })
}

impl LoadedSuite {
    /// Base problem with the suite overrides applied.
    pub fn base_problem(&self) -> Result<PlanningProblem> {
        let mut p = load_config(self.base_dir.join(&self.suite.config))?.problem()?;
        let o = &self.suite.overrides;
        if let Some(m) = o.min_torque {
            p.toggles.min_torque = m;
        }
        if let Some(n) = o.steps {
            p.steps = n;
        }
        if let Some(t) = o.horizon {
            p.horizon = t;
        }
        p.validate()?;
        Ok(p)
    }

    pub fn run(&self) -> Result<SuiteSummary> {
        let base = self.base_problem()?;
        run_suite(&self.suite, &base)
    }
}

/// Goals drawn uniformly inside the joint limits, each range shrunk by
/// `margin` of its width on both sides.
pub fn sample_goals(problem: &PlanningProblem, n: usize, margin: f64, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bounds = shrunk_bounds(problem, margin);
    (0..n)
        .map(|_| DVector::from_iterator(bounds.len(), bounds.iter().map(|&(lo, hi)| rng.random_range(lo..=hi))))
        .collect()
}

fn shrunk_bounds(problem: &PlanningProblem, margin: f64) -> Vec<(f64, f64)> {
    problem
        .model
        .joints
        .iter()
        .map(|j| {
            let w = j.limits.q_max - j.limits.q_min;
            (j.limits.q_min + margin * w, j.limits.q_max - margin * w)
        })
        .collect()
}

/// Per-joint uniform changes of at most `size`, clamped to the shrunk
/// limits.
pub fn perturb_goals(problem: &PlanningProblem, goals: &[DVector<f64>], size: f64, margin: f64, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let bounds = shrunk_bounds(problem, margin);
    goals
        .iter()
        .map(|g| {
            DVector::from_iterator(
                g.len(),
                g.iter().zip(&bounds).map(|(&x, &(lo, hi))| (x + rng.random_range(-size..=size)).clamp(lo, hi)),
            )
        })
        .collect()
}

/// One solver run inside a trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub success: bool,
    pub time_s: f64,
    pub iterations: usize,
    pub total_torque: f64,
    pub final_error: f64,
}

impl RunRecord {
    fn from_outcome(o: &PlanOutcome) -> Self {
        RunRecord {
            success: o.success,
            time_s: o.stats.wall_time_ms / 1e3,
            iterations: o.stats.iterations,
            total_torque: o.trajectory.total_abs_torque(),
            final_error: o.stats.final_error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanTrial {
    pub goal: Vec<f64>,
    pub run: RunRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplanTrial {
    pub goal: Vec<f64>,
    pub new_goal: Vec<f64>,
    /// Batch solve of the new problem from the default initialization.
    pub dfgp_l: RunRecord,
    /// Batch solve of the new problem from the previous solution.
    pub dfgp_w: RunRecord,
    /// Incremental replan on the retained Bayes tree.
    pub idfgp: RunRecord,
    pub reeliminated_keys: usize,
    pub total_keys: usize,
    /// Mean per-joint |Δq| over the first and last quarter of the steps.
    pub early_change: f64,
    pub late_change: f64,
}

impl ReplanTrial {
    pub fn reeliminated_fraction(&self) -> f64 {
        self.reeliminated_keys as f64 / self.total_keys.max(1) as f64
    }

    pub fn is_local(&self) -> bool {
        self.early_change < self.late_change
    }
}

/// One row shaped like a results-table entry. Times are in seconds and
/// torques are summed |τ| over all steps and joints, averaged over the
/// successful runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowSummary {
    pub success_rate: f64,
    pub avg_time: f64,
    pub max_time: f64,
    pub median_time: f64,
    /// `None` when no run succeeded.
    pub avg_total_torque: Option<f64>,
}

impl RowSummary {
    pub fn from_runs<'a>(runs: impl IntoIterator<Item = &'a RunRecord>) -> Self {
        let runs: Vec<&RunRecord> = runs.into_iter().collect();
        let n = runs.len().max(1) as f64;
        let ok: Vec<&&RunRecord> = runs.iter().filter(|r| r.success).collect();
        let times: Vec<f64> = runs.iter().map(|r| r.time_s).collect();
        RowSummary {
            success_rate: ok.len() as f64 / n,
            avg_time: times.iter().sum::<f64>() / n,
            max_time: times.iter().copied().fold(0.0, f64::max),
            median_time: median(&times),
            avg_total_torque: (!ok.is_empty()).then(|| ok.iter().map(|r| r.total_torque).sum::<f64>() / ok.len() as f64),
        }
    }
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplanSummary {
    #[serde(rename = "DFGP-L")]
    pub dfgp_l: RowSummary,
    #[serde(rename = "DFGP-W")]
    pub dfgp_w: RowSummary,
    #[serde(rename = "iDFGP")]
    pub idfgp: RowSummary,
    pub median_reeliminated_fraction: f64,
    pub locality_rate: f64,
    /// Median over trials of DFGP-W time divided by iDFGP time.
    pub median_speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum SuiteSummary {
    Plan {
        trials: usize,
        seed: u64,
        #[serde(flatten)]
        row: RowSummary,
        results: Vec<PlanTrial>,
    },
    Replan {
        trials: usize,
        seed: u64,
        #[serde(flatten)]
        summary: ReplanSummary,
        results: Vec<ReplanTrial>,
    },
}

impl SuiteSummary {
    /// The summary with every wall-clock field zeroed, which is what a
    /// fixed seed reproduces exactly.
    pub fn without_timing(&self) -> SuiteSummary {
        let zero_row = |r: &RowSummary| RowSummary { avg_time: 0.0, max_time: 0.0, median_time: 0.0, ..r.clone() };
        let zero_run = |r: &RunRecord| RunRecord { time_s: 0.0, ..r.clone() };
        match self {
            SuiteSummary::Plan { trials, seed, row, results } => SuiteSummary::Plan {
                trials: *trials,
                seed: *seed,
                row: zero_row(row),
                results: results.iter().map(|t| PlanTrial { goal: t.goal.clone(), run: zero_run(&t.run) }).collect(),
            },
            SuiteSummary::Replan { trials, seed, summary, results } => SuiteSummary::Replan {
                trials: *trials,
                seed: *seed,
                summary: ReplanSummary {
                    dfgp_l: zero_row(&summary.dfgp_l),
                    dfgp_w: zero_row(&summary.dfgp_w),
                    idfgp: zero_row(&summary.idfgp),
                    median_speedup: 0.0,
                    ..summary.clone()
                },
                results: results
                    .iter()
                    .map(|t| ReplanTrial {
                        dfgp_l: zero_run(&t.dfgp_l),
                        dfgp_w: zero_run(&t.dfgp_w),
                        idfgp: zero_run(&t.idfgp),
                        ..t.clone()
                    })
                    .collect(),
            },
        }
    }
}

fn with_goal(base: &PlanningProblem, q: &DVector<f64>) -> PlanningProblem {
    let mut p = base.clone();
    p.goal = Goal::Joint(q.clone());
    p
}

pub fn run_suite(suite: &SuiteConfig, base: &PlanningProblem) -> Result<SuiteSummary> {
    suite.validate()?;
    let goals = sample_goals(base, suite.trials, suite.goal_margin, suite.seed);
    match suite.mode {
        SuiteMode::Plan => {
            let runs = map_indexed(&goals, suite.execution, |_, g| plan_batch(&with_goal(base, g)));
            let mut results = Vec::with_capacity(runs.len());
            for (g, r) in goals.iter().zip(runs) {
                let r = r?;
                results.push(PlanTrial { goal: g.as_slice().to_vec(), run: RunRecord::from_outcome(&r) });
            }
            let row = RowSummary::from_runs(results.iter().map(|t| &t.run));
            Ok(SuiteSummary::Plan { trials: suite.trials, seed: suite.seed, row, results })
        }
        SuiteMode::Replan => {
            let new_goals = perturb_goals(base, &goals, suite.perturbation, suite.goal_margin, suite.seed);
            let mut results = Vec::with_capacity(goals.len());
            for (g, g2) in goals.iter().zip(&new_goals) {
                results.push(replan_trial(base, g, g2)?);
            }
            let summary = ReplanSummary {
                dfgp_l: RowSummary::from_runs(results.iter().map(|t| &t.dfgp_l)),
                dfgp_w: RowSummary::from_runs(results.iter().map(|t| &t.dfgp_w)),
                idfgp: RowSummary::from_runs(results.iter().map(|t| &t.idfgp)),
                median_reeliminated_fraction: median(&results.iter().map(ReplanTrial::reeliminated_fraction).collect::<Vec<_>>()),
                locality_rate: results.iter().filter(|t| t.is_local()).count() as f64 / results.len() as f64,
                median_speedup: median(&results.iter().map(|t| t.dfgp_w.time_s / t.idfgp.time_s.max(1e-12)).collect::<Vec<_>>()),
            };
            Ok(SuiteSummary::Replan { trials: suite.trials, seed: suite.seed, summary, results })
        }
    }
}

/// Mean per-joint |Δq| over the first and last quarter of the steps.
pub fn quarter_changes(before: &Trajectory, after: &Trajectory) -> (f64, f64) {
    let n = before.len().min(after.len());
    let k = (n / 4).max(1);
    let mean = |range: std::ops::Range<usize>| {
        let len = range.len();
        let s: f64 = range.map(|i| (&after.q[i] - &before.q[i]).abs().mean()).sum();
        s / len as f64
    };
    (mean(0..k), mean(n - k..n))
}

pub fn replan_trial(base: &PlanningProblem, goal: &DVector<f64>, new_goal: &DVector<f64>) -> Result<ReplanTrial> {
    let mut session = open_session_with(with_goal(base, goal), ReplanParams::default())?;
    let previous = session.solution().clone();
    let target = with_goal(base, new_goal);

    let dfgp_l = plan_batch(&target)?;
    let pg = build_graph(&target)?;
    let dfgp_w = plan_from(&target, &pg, &previous.values)?;
    let idfgp = session.replan(ReplanChange::Goal(target.goal.clone()))?;

    let (early_change, late_change) = quarter_changes(&previous.trajectory, &idfgp.plan.trajectory);
    Ok(ReplanTrial {
        goal: goal.as_slice().to_vec(),
        new_goal: new_goal.as_slice().to_vec(),
        dfgp_l: RunRecord::from_outcome(&dfgp_l),
        dfgp_w: RunRecord::from_outcome(&dfgp_w),
        idfgp: RunRecord::from_outcome(&idfgp.plan),
        reeliminated_keys: idfgp.replan.reeliminated_keys,
        total_keys: idfgp.replan.total_keys,
        early_change,
        late_change,
    })
}
