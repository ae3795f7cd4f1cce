//! Kinodynamic motion planning on dynamic factor graphs.

pub mod error;
pub mod exec;
pub mod factors;
pub mod graph;
pub mod planner;
pub mod robot;
pub mod sdf;
pub mod spatial;

pub use error::{Error, GraphError, Result};
pub use exec::Execution;
