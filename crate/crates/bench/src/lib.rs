//! Benchmark scenes (shelf, tunnel, waiter), generalization sampling, the
//! experiment harness and the command-line front end.

pub mod cli;
pub mod generalize;
pub mod harness;
pub mod scene;
pub mod tasks;

pub use generalize::Scenario;
pub use harness::{BenchSpec, ExperimentSpec, Method, ResultRow};
pub use scene::{Scene, SceneError, Task};
pub use tasks::build_scene;
