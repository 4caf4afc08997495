use std::fs;
use std::path::PathBuf;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use weft::{LogLevel, RuntimeConfig};
use weft_cli::bench::{benchmark_speedup, Workload};
use weft_cli::example::{run_minimal_example, ExampleOptions};
use weft_cli::fuzz::{fuzz_equivalence, run_program};
use weft_cli::schedule::{build_graph, format_events, parse_events, verify_schedule};
use weft_cli::trace::{generate_program, TraceProgram};

#[derive(Parser)]
#[command(
    name = "weft",
    about = "Harness for the weft task-parallel runtime",
    after_help = "The WEFT_LOG_LEVEL environment variable (error|warning|info|debug) \
                  overrides the runtime's log level. Logs go to stderr."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the reference set/increment/output program and print its output.
    Example {
        #[arg(long, default_value_t = 2)]
        threads: usize,
        /// error|warning|info|debug
        #[arg(long, default_value = "warning", value_parser = parse_log_level)]
        log_level: LogLevel,
        /// Run inline as plain function calls: no runtime, no threads.
        #[arg(long)]
        serial: bool,
        /// Write the dependency graph as DOT to this path.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Generate random task programs and compare runtime results against
    /// the serial oracle.
    Fuzz {
        /// Seed range `A..B` (B exclusive), e.g. 0..1000.
        #[arg(long, value_parser = parse_seed_range)]
        seeds: SeedRange,
        /// Tasks per program.
        #[arg(long)]
        tasks: usize,
        /// Data regions per program.
        #[arg(long)]
        data: usize,
        /// Comma-separated thread counts, e.g. 1,2,4,8.
        #[arg(long, value_delimiter = ',')]
        threads_list: Vec<usize>,
        /// Re-run one seed verbosely; writes replay-<seed>.trace and
        /// replay-<seed>-t<N>.events next to the current directory.
        #[arg(long)]
        replay: Option<u64>,
    },
    /// Measure speedup of independent CPU-bound tasks over serial execution.
    Bench {
        #[arg(long, default_value_t = 64)]
        tasks: usize,
        /// Per-task busy work in milliseconds.
        #[arg(long, default_value_t = 50)]
        work_ms: u64,
        /// Comma-separated thread counts, e.g. 1,4.
        #[arg(long, value_delimiter = ',', default_value = "1,4")]
        threads_list: Vec<usize>,
        /// Also write the table as CSV (header: threads,wall_ms,speedup).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Check a recorded event log against the dependency graph of a trace.
    Verify {
        /// Event file: lines of `<seq> <start|end> <instance_id>`.
        #[arg(long)]
        events: PathBuf,
        /// Trace file: lines of `<definition_kind> <mode:datum|param:value>...`.
        #[arg(long)]
        trace: PathBuf,
    },
}

#[derive(Clone, Copy)]
struct SeedRange {
    start: u64,
    end: u64,
}

fn parse_seed_range(s: &str) -> Result<SeedRange, String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("expected A..B, got `{s}`"))?;
    let start = a.parse().map_err(|_| format!("bad range start `{a}`"))?;
    let end = b.parse().map_err(|_| format!("bad range end `{b}`"))?;
    if end < start {
        return Err(format!("empty range {start}..{end}"));
    }
    Ok(SeedRange { start, end })
}

fn parse_log_level(s: &str) -> Result<LogLevel, String> {
    s.parse()
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Example {
            threads,
            log_level,
            serial,
            dot,
        } => cmd_example(threads, log_level, serial, dot),
        Command::Fuzz {
            seeds,
            tasks,
            data,
            threads_list,
            replay,
        } => cmd_fuzz(seeds, tasks, data, &threads_list, replay),
        Command::Bench {
            tasks,
            work_ms,
            threads_list,
            csv,
        } => cmd_bench(tasks, work_ms, &threads_list, csv),
        Command::Verify { events, trace } => cmd_verify(&events, &trace),
    }
}

fn cmd_example(
    threads: usize,
    log_level: LogLevel,
    serial: bool,
    dot: Option<PathBuf>,
) -> Result<()> {
    let report = run_minimal_example(ExampleOptions {
        threads,
        log_level,
        serial,
        logger: None,
    })?;
    for line in &report.lines {
        println!("{line}");
    }
    if let Some(path) = dot {
        match &report.dot {
            Some(text) => fs::write(&path, text)
                .with_context(|| format!("writing {}", path.display()))?,
            None => eprintln!("note: no dependency graph in serial mode; {} not written",
                path.display()),
        }
    }
    Ok(())
}

fn cmd_fuzz(
    seeds: SeedRange,
    tasks: usize,
    data: usize,
    threads_list: &[usize],
    replay: Option<u64>,
) -> Result<()> {
    if threads_list.is_empty() {
        bail!("--threads-list must name at least one thread count");
    }
    if let Some(seed) = replay {
        return cmd_replay(seed, tasks, data, threads_list);
    }
    let report = fuzz_equivalence(seeds.start..seeds.end, tasks, data, threads_list);
    print!("{report}");
    if !report.ok() {
        eprintln!("replay a failure with: weft fuzz --seeds {0}..{1} --tasks {tasks} --data {data} \
                   --threads-list {2} --replay <seed>",
            seeds.start,
            seeds.end,
            threads_list
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(","));
        std::process::exit(1);
    }
    Ok(())
}

fn cmd_replay(seed: u64, tasks: usize, data: usize, threads_list: &[usize]) -> Result<()> {
    let program = generate_program(seed, tasks, data);
    let expected = program.serial_oracle();
    println!("# seed {seed}: {} steps over {} data regions", program.steps.len(), program.n_data);
    print!("{program}");
    println!("# oracle: {expected:?}");

    let trace_path = format!("replay-{seed}.trace");
    fs::write(&trace_path, program.to_string()).with_context(|| format!("writing {trace_path}"))?;
    println!("# trace written to {trace_path}");

    let graph = build_graph(&program);
    let mut failed = false;
    for &threads in threads_list {
        let outcome = run_program(&program, RuntimeConfig::with_threads(threads), true)?;
        let events = outcome
            .summary
            .as_ref()
            .and_then(|s| s.events.clone())
            .unwrap_or_default();
        let events_path = format!("replay-{seed}-t{threads}.events");
        fs::write(&events_path, format_events(&events))
            .with_context(|| format!("writing {events_path}"))?;
        let verdict = verify_schedule(&events, &graph)?;
        let matches = outcome.finals == expected;
        println!(
            "# threads={threads}: finals {} oracle, schedule {verdict}; events in {events_path}",
            if matches { "match" } else { "DIVERGE from" },
        );
        if !matches {
            println!("#   got {:?}", outcome.finals);
            failed = true;
        }
    }
    if failed {
        std::process::exit(1);
    }
    Ok(())
}

fn cmd_bench(
    tasks: usize,
    work_ms: u64,
    threads_list: &[usize],
    csv: Option<PathBuf>,
) -> Result<()> {
    if threads_list.is_empty() {
        bail!("--threads-list must name at least one thread count");
    }
    let report = benchmark_speedup(
        tasks,
        Duration::from_millis(work_ms),
        threads_list,
        Workload::Independent,
    );
    print!("{report}");
    if let Some(path) = csv {
        fs::write(&path, report.to_csv())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn cmd_verify(events_path: &PathBuf, trace_path: &PathBuf) -> Result<()> {
    let trace_text = fs::read_to_string(trace_path)
        .with_context(|| format!("reading {}", trace_path.display()))?;
    let events_text = fs::read_to_string(events_path)
        .with_context(|| format!("reading {}", events_path.display()))?;
    let program = TraceProgram::parse(&trace_text)?;
    let events = parse_events(&events_text)?;
    let graph = build_graph(&program);
    let verdict = verify_schedule(&events, &graph)?;
    println!(
        "{verdict} ({} instances, {} edges, {} events)",
        graph.len(),
        graph.edge_count(),
        events.len()
    );
    if !verdict.is_ok() {
        std::process::exit(1);
    }
    Ok(())
}
