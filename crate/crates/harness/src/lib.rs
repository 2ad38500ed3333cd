//! Multi-party simulation, operation counting and benchmarking for the
//! participatory-sensing protocols in `pepsi-core`, plus the state handling
//! behind the `pepsi` command-line tool.

pub mod bench;
pub mod home;
pub mod runner;
pub mod scenario;
pub mod steps;

pub use bench::{bench, bench_steps, BenchReport, Preset};
pub use runner::{run_scenario, Outcome, RunError, Verdict};
pub use scenario::{Event, Instantiation, ParseError, Scenario};
pub use steps::{count_ops, Step};
