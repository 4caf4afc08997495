//! Validation harness for the `weft` runtime: the reference example with
//! golden outputs, randomized equivalence fuzzing against a serial oracle,
//! happens-before verification of recorded schedules, and a speedup
//! benchmark. The `weft` binary exposes all of it as subcommands.

pub mod bench;
pub mod example;
pub mod fuzz;
pub mod rng;
pub mod schedule;
pub mod trace;

pub use bench::{benchmark_speedup, BenchReport, Workload};
pub use example::{run_minimal_example, ExampleOptions, ExampleReport};
pub use fuzz::{fuzz_equivalence, run_program, FuzzReport, RunOutcome, StepTasks};
pub use schedule::{build_graph, parse_events, verify_schedule, ScheduleError, Verdict};
pub use trace::{generate_program, TraceProgram, TraceStep};
