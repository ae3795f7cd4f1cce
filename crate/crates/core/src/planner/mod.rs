//! Problem assembly, batch planning, incremental replanning and
//! trajectory validation.

mod benchmark;
mod build;
pub(crate) mod init;
mod problem;
mod session;
mod solve;
mod trajectory;
mod validate;

pub use benchmark::{
    load_suite, median, perturb_goals, quarter_changes, replan_trial, run_suite, sample_goals, LoadedSuite, PlanTrial, ReplanSummary,
    ReplanTrial, RowSummary, RunRecord, SuiteConfig, SuiteMode, SuiteOverrides, SuiteSummary,
};
pub use build::{build_graph, goal_factors, obstacle_factors, state_keys, GraphCounts, PlanningGraph};
pub use init::{initialize_between, initialize_trajectory, quintic, quintic_states};
pub use problem::{
    load_config, FactorToggles, FactorsConfig, Goal, GoalConfig, GoalMode, GpConfig, JointState, LoadedConfig, OutputConfig,
    PlanningProblem, PoseConfig, ProblemConfig, Sigmas, StateConfig, Tolerances,
};
pub use session::{open_session, open_session_with, ReplanChange, ReplanOutcome, ReplanParams, ReplanReport, ReplanSession};
pub use solve::{assess, max_equality_residual, plan_batch, plan_from, PlanOutcome};
pub use trajectory::Trajectory;
pub use validate::{validate_trajectory, LimitViolation, ValidationReport};
