//! Runs trace programs through the runtime and checks them against the
//! serial oracle.

use std::fmt;
use std::ops::Range;

use weft::{
    make_task, task, AccessMode, Data, DynTaskCallable, Runtime, RuntimeConfig, RuntimeError,
    RunSummary,
};

use crate::trace::{generate_program, TraceProgram, TraceStep};

fn set(a: &mut i64, v: i64) {
    *a = v;
}

fn inc(a: &mut i64) {
    *a = a.wrapping_add(1);
}

fn add(dst: &mut i64, src: &mut i64) {
    *dst = dst.wrapping_add(*src);
}

fn mul(dst: &mut i64, src: &mut i64) {
    *dst = dst.wrapping_mul(*src);
}

fn reduce_sum(acc: &mut i64, src: &mut i64) {
    *acc = acc.wrapping_add(*src);
}

fn read(a: &mut i64) {
    let _ = *a;
}

/// The task set a trace program runs against. Modes mirror each body's
/// actual reads and writes.
pub struct StepTasks {
    pub set: DynTaskCallable<(Data<i64>, i64)>,
    pub inc: DynTaskCallable<(Data<i64>,)>,
    pub add: DynTaskCallable<(Data<i64>, Data<i64>)>,
    pub mul: DynTaskCallable<(Data<i64>, Data<i64>)>,
    pub reduce_sum: DynTaskCallable<(Data<i64>, Data<i64>)>,
    pub read: DynTaskCallable<(Data<i64>,)>,
}

impl StepTasks {
    pub fn new() -> StepTasks {
        use AccessMode::{In, InOut, Out, Parameter, Reduction};
        StepTasks {
            set: task!(set(Data<i64>, i64), [Out, Parameter]).unwrap().boxed(),
            inc: task!(inc(Data<i64>), [InOut]).unwrap().boxed(),
            add: task!(add(Data<i64>, Data<i64>), [InOut, In]).unwrap().boxed(),
            mul: task!(mul(Data<i64>, Data<i64>), [InOut, In]).unwrap().boxed(),
            reduce_sum: task!(reduce_sum(Data<i64>, Data<i64>), [Reduction, In])
                .unwrap()
                .boxed(),
            read: task!(read(Data<i64>), [In]).unwrap().boxed(),
        }
    }
}

impl Default for StepTasks {
    fn default() -> Self {
        StepTasks::new()
    }
}

/// Result of running a program: the final data values and, for parallel
/// runs, the finish summary.
pub struct RunOutcome {
    pub finals: Vec<i64>,
    pub summary: Option<RunSummary>,
}

/// Executes a program. `config.serial` runs every step inline with no
/// runtime; otherwise a runtime with `config.num_threads` executes it.
pub fn run_program(
    program: &TraceProgram,
    config: RuntimeConfig,
    record_events: bool,
) -> Result<RunOutcome, RuntimeError> {
    let tasks = StepTasks::new();
    run_program_with_tasks(program, config, record_events, &tasks)
}

/// [`run_program`] against a caller-supplied task set (used by mutation
/// tests that deliberately lie about a mode).
pub fn run_program_with_tasks(
    program: &TraceProgram,
    config: RuntimeConfig,
    record_events: bool,
    tasks: &StepTasks,
) -> Result<RunOutcome, RuntimeError> {
    let data: Vec<Data<i64>> = (0..program.n_data).map(|_| Data::new(0)).collect();
    let summary = if config.serial {
        for step in &program.steps {
            match *step {
                TraceStep::Set { dst, value } => tasks.set.run_inline((data[dst].clone(), value)),
                TraceStep::Inc { dst } => tasks.inc.run_inline((data[dst].clone(),)),
                TraceStep::Add { dst, src } => tasks
                    .add
                    .run_inline((data[dst].clone(), data[src].clone())),
                TraceStep::Mul { dst, src } => tasks
                    .mul
                    .run_inline((data[dst].clone(), data[src].clone())),
                TraceStep::ReduceSum { acc, src } => tasks
                    .reduce_sum
                    .run_inline((data[acc].clone(), data[src].clone())),
                TraceStep::Read { src } => tasks.read.run_inline((data[src].clone(),)),
            }
        }
        None
    } else {
        let mut rt = Runtime::builder(config)
            .record_events(record_events)
            .start()?;
        for step in &program.steps {
            match *step {
                TraceStep::Set { dst, value } => {
                    rt.invoke(&tasks.set, (data[dst].clone(), value))?
                }
                TraceStep::Inc { dst } => rt.invoke(&tasks.inc, (data[dst].clone(),))?,
                TraceStep::Add { dst, src } => {
                    rt.invoke(&tasks.add, (data[dst].clone(), data[src].clone()))?
                }
                TraceStep::Mul { dst, src } => {
                    rt.invoke(&tasks.mul, (data[dst].clone(), data[src].clone()))?
                }
                TraceStep::ReduceSum { acc, src } => {
                    rt.invoke(&tasks.reduce_sum, (data[acc].clone(), data[src].clone()))?
                }
                TraceStep::Read { src } => rt.invoke(&tasks.read, (data[src].clone(),))?,
            };
        }
        Some(rt.finish())
    };
    Ok(RunOutcome {
        finals: data.iter().map(Data::get).collect(),
        summary,
    })
}

/// One disagreement between a parallel run and the serial oracle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub seed: u64,
    pub threads: usize,
    pub expected: Vec<i64>,
    pub actual: Vec<i64>,
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "seed {} at {} threads: expected {:?}, got {:?}",
            self.seed, self.threads, self.expected, self.actual
        )
    }
}

/// Aggregate fuzzing result.
#[derive(Debug, Default)]
pub struct FuzzReport {
    pub programs: usize,
    pub runs: usize,
    pub mismatches: Vec<Mismatch>,
}

impl FuzzReport {
    pub fn ok(&self) -> bool {
        self.mismatches.is_empty()
    }
}

impl fmt::Display for FuzzReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} programs, {} runs, {} mismatch(es)",
            self.programs,
            self.runs,
            self.mismatches.len()
        )?;
        for mismatch in &self.mismatches {
            writeln!(f, "  MISMATCH {mismatch}")?;
        }
        Ok(())
    }
}

/// For every seed and thread count, runs the generated program through the
/// full runtime and compares the final data against the serial oracle.
pub fn fuzz_equivalence(
    seeds: Range<u64>,
    n_tasks: usize,
    n_data: usize,
    thread_counts: &[usize],
) -> FuzzReport {
    let tasks = StepTasks::new();
    let mut report = FuzzReport::default();
    for seed in seeds {
        let program = generate_program(seed, n_tasks, n_data);
        let expected = program.serial_oracle();
        report.programs += 1;
        for &threads in thread_counts {
            let config = RuntimeConfig::with_threads(threads);
            let outcome = run_program_with_tasks(&program, config, false, &tasks)
                .expect("generated programs submit cleanly");
            report.runs += 1;
            if outcome.finals != expected {
                report.mismatches.push(Mismatch {
                    seed,
                    threads,
                    expected: expected.clone(),
                    actual: outcome.finals,
                });
            }
        }
    }
    report
}

/// Mutation check for the equivalence checker itself: runs a fixed 4-step
/// program whose final write is declared `In` instead of `Out`, dropping
/// exactly the write-after-read edge the Out rule would add. Under FIFO
/// dispatch at one thread the corrupted graph provably reorders that write
/// before a delayed reader, so the checker must see a mismatch every time.
pub fn run_dropped_out_rule() -> (Vec<i64>, Vec<i64>) {
    use AccessMode::{In, Parameter};

    let program = TraceProgram {
        seed: 0,
        n_data: 2,
        steps: vec![
            TraceStep::Set { dst: 0, value: 5 },
            TraceStep::Inc { dst: 1 },
            TraceStep::Add { dst: 1, src: 0 },
            TraceStep::Set { dst: 0, value: 9 },
        ],
    };
    let expected = program.serial_oracle();

    let mut tasks = StepTasks::new();
    // The lying definition: same body, but the written argument is declared
    // as a read.
    tasks.set = make_task::<(Data<i64>, i64), _>(set, [In, Parameter], Some("set"), None)
        .unwrap()
        .boxed();

    let outcome = run_program_with_tasks(
        &program,
        RuntimeConfig::with_threads(1),
        false,
        &tasks,
    )
    .expect("mutation program submits cleanly");
    (expected, outcome.finals)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serial_and_parallel_agree_on_a_small_batch() {
        for seed in 0..20 {
            let program = generate_program(seed, 30, 4);
            let expected = program.serial_oracle();
            for threads in [1, 2, 4] {
                let outcome =
                    run_program(&program, RuntimeConfig::with_threads(threads), false).unwrap();
                assert_eq!(outcome.finals, expected, "seed {seed} threads {threads}");
            }
            let serial_config = RuntimeConfig {
                serial: true,
                ..Default::default()
            };
            let outcome = run_program(&program, serial_config, false).unwrap();
            assert_eq!(outcome.finals, expected, "seed {seed} serial mode");
        }
    }

    #[test]
    fn commutative_reductions_still_match_the_oracle() {
        use weft::ReductionMode;
        for seed in 0..10 {
            let program = generate_program(seed, 40, 4);
            let expected = program.serial_oracle();
            let config = RuntimeConfig {
                num_threads: 4,
                reduction_mode: ReductionMode::Commutative,
                ..Default::default()
            };
            let outcome = run_program(&program, config, false).unwrap();
            assert_eq!(outcome.finals, expected, "seed {seed}");
        }
    }

    #[test]
    fn fuzz_report_counts_runs() {
        let report = fuzz_equivalence(0..4, 10, 3, &[1, 2]);
        assert_eq!(report.programs, 4);
        assert_eq!(report.runs, 8);
        assert!(report.ok());
    }

    #[test]
    fn empty_seed_range_is_an_empty_report() {
        let report = fuzz_equivalence(0..0, 10, 3, &[1, 2]);
        assert_eq!(report.programs, 0);
        assert_eq!(report.runs, 0);
        assert!(report.ok());
    }

    #[test]
    fn dropped_out_rule_is_detected() {
        let (expected, actual) = run_dropped_out_rule();
        assert_eq!(expected, vec![9, 6]);
        assert_ne!(expected, actual, "corrupted mode list must cause a mismatch");
        assert_eq!(actual, vec![9, 10]);
    }
}
