//! Nonlinear factor graphs over Euclidean variables and their solvers.

mod bayes_tree;
mod factor;
mod incremental;
mod key;
mod linear;
mod lm;
mod noise;
mod ordering;
mod values;

pub use bayes_tree::{eliminate, solve, BayesTree, Clique, CliqueId, Conditional};
pub use factor::{Factor, FactorGraph, FactorId, FactorKind, LinearFactor, PriorFactor};
pub use key::VariableKey;
pub use linear::{graph_error_with, linearize, linearize_factor, linearize_with, GaussianFactorGraph, JacobianFactor};
pub use noise::NoiseModel;
pub use ordering::{default_ordering, forward_ordering, min_degree_ordering, ordering_for, Ordering, OrderingPolicy};
pub use values::VariableValues;
pub use incremental::{incremental_update, AffectedReport, FactorChange, IncrementalParams, IncrementalSolver};
pub use lm::{gauss_newton_step, optimize_lm, optimize_lm_with_ordering, LmParams, SolveStats, SolveStatus};
