//! The reference program: a two-element array pipelined through
//! set/increment/output tasks, twice. Its output, executed-task count and
//! dependency graph are the golden fixtures of the test suite.

use std::sync::{Arc, Mutex};

use weft::{
    make_task, task, AccessMode, Data, LogLevel, Logger, RuntimeConfig, RuntimeError, RunSummary,
};

pub struct ExampleOptions {
    pub threads: usize,
    pub log_level: LogLevel,
    pub serial: bool,
    /// Replaces the stderr logger (parallel mode only); used to capture the
    /// log for golden checks.
    pub logger: Option<Logger>,
}

impl Default for ExampleOptions {
    fn default() -> Self {
        ExampleOptions {
            threads: 2,
            log_level: LogLevel::Warning,
            serial: false,
            logger: None,
        }
    }
}

pub struct ExampleReport {
    /// What the output tasks printed, in execution order.
    pub lines: Vec<String>,
    /// Finish summary; absent in serial mode (no runtime exists).
    pub summary: Option<RunSummary>,
    /// DOT text of the dependency graph; absent in serial mode.
    pub dot: Option<String>,
}

fn set(a: &mut i64, b: i64) {
    *a = b;
}

fn increment(a: &mut i64) {
    *a += 1;
}

/// Runs the reference program and collects what its output tasks printed.
///
/// The program: `a = [1, 11]`, then for `i in 0..2`:
/// `set(&a[i], i); increment(&a[0]); output(&a[0])`. Six task instances;
/// the output tasks print `1` then `2` in every valid schedule.
pub fn run_minimal_example(options: ExampleOptions) -> Result<ExampleReport, RuntimeError> {
    use AccessMode::{In, InOut, Out, Parameter};

    let printed: Arc<Mutex<Vec<String>>> = Arc::default();
    let sink = printed.clone();

    let set_task = task!(set(Data<i64>, i64), [Out, Parameter])?;
    let increment_task = task!(increment(Data<i64>), [InOut])?;
    let output_task = make_task::<(Data<i64>,), _>(
        move |a: &mut i64| sink.lock().unwrap().push(a.to_string()),
        [In],
        Some("output"),
        None,
    )?;

    let a = [Data::new(1i64), Data::new(11i64)];

    if options.serial {
        weft::set_execution_mode(true)?;
        let run = || -> Result<(), RuntimeError> {
            for i in 0..2usize {
                set_task.call((a[i].clone(), i as i64))?;
                increment_task.call((a[0].clone(),))?;
                output_task.call((a[0].clone(),))?;
            }
            Ok(())
        };
        let result = run();
        weft::set_execution_mode(false)?;
        result?;
        let lines = printed.lock().unwrap().clone();
        return Ok(ExampleReport {
            lines,
            summary: None,
            dot: None,
        });
    }

    let config = RuntimeConfig {
        num_threads: options.threads,
        log_level: options.log_level,
        ..Default::default()
    };
    match options.logger {
        Some(logger) => weft::init_with(config, logger)?,
        None => weft::init(options.threads, options.log_level)?,
    }
    let run = || -> Result<(), RuntimeError> {
        for i in 0..2usize {
            set_task.call((a[i].clone(), i as i64))?;
            increment_task.call((a[0].clone(),))?;
            output_task.call((a[0].clone(),))?;
        }
        Ok(())
    };
    if let Err(err) = run() {
        // Tear the global runtime down before surfacing the error.
        let _ = weft::finish();
        return Err(err);
    }
    let summary = weft::finish()?;
    let lines = printed.lock().unwrap().clone();
    let dot = summary.graph.to_dot();
    Ok(ExampleReport {
        lines,
        summary: Some(summary),
        dot: Some(dot),
    })
}
