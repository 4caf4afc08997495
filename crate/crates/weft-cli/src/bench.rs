//! Speedup benchmark: CPU-bound spin tasks, measured serially (inline
//! calls, no runtime) and through the runtime at each thread count.

use std::fmt;
use std::time::{Duration, Instant};

use weft::{task, AccessMode, Data, Runtime, RuntimeConfig};

/// Shape of the benchmark DAG.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Workload {
    /// Every task owns its datum; the whole batch is parallel.
    Independent,
    /// Every task takes `InOut` on one shared datum; the critical path
    /// equals the total work, so speedup should sit at ~1.0.
    SerialChain,
}

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub threads: usize,
    pub wall: Duration,
    pub speedup: f64,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub workload: Workload,
    pub n_tasks: usize,
    pub work: Duration,
    pub serial_wall: Duration,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    /// CSV with the header `threads,wall_ms,speedup`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threads,wall_ms,speedup\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{:.3},{:.3}\n",
                row.threads,
                row.wall.as_secs_f64() * 1e3,
                row.speedup
            ));
        }
        out
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} tasks x {} ms each ({:?}); serial wall {:.1} ms",
            self.n_tasks,
            self.work.as_millis(),
            self.workload,
            self.serial_wall.as_secs_f64() * 1e3
        )?;
        writeln!(f, "{:>8} {:>12} {:>8}", "threads", "wall_ms", "speedup")?;
        for row in &self.rows {
            writeln!(
                f,
                "{:>8} {:>12.1} {:>8.2}",
                row.threads,
                row.wall.as_secs_f64() * 1e3,
                row.speedup
            )?;
        }
        Ok(())
    }
}

fn spin_iterations(iters: u64) {
    let mut x = 0u64;
    for i in 0..iters {
        x = std::hint::black_box(x.wrapping_mul(6364136223846793005).wrapping_add(i));
    }
    std::hint::black_box(x);
}

/// Iterations of [`spin_iterations`] that take ~1 ms on this host,
/// calibrated once. Fixed-work bodies (rather than deadline spins) keep the
/// benchmark honest when threads outnumber cores.
fn iterations_per_ms() -> u64 {
    use std::sync::OnceLock;
    static RATE: OnceLock<u64> = OnceLock::new();
    *RATE.get_or_init(|| {
        let mut iters = 100_000u64;
        loop {
            let start = Instant::now();
            spin_iterations(iters);
            let elapsed = start.elapsed();
            if elapsed >= Duration::from_millis(20) {
                return (iters as f64 / elapsed.as_secs_f64() / 1e3).max(1.0) as u64;
            }
            iters *= 4;
        }
    })
}

/// Busy-works for roughly `work` of single-core CPU time.
pub fn spin_for(work: Duration) {
    spin_iterations(iterations_per_ms() * work.as_millis() as u64);
}

fn spin_task(counter: &mut i64, work_ms: i64) {
    spin_for(Duration::from_millis(work_ms as u64));
    *counter = counter.wrapping_add(1);
}

/// Runs `n_tasks` bodies of `work` each: once inline (the serial baseline),
/// then through a runtime at every requested thread count.
/// `speedup = serial wall time / parallel wall time`.
pub fn benchmark_speedup(
    n_tasks: usize,
    work: Duration,
    thread_counts: &[usize],
    workload: Workload,
) -> BenchReport {
    use AccessMode::{InOut, Parameter};
    let spin = task!(spin_task(Data<i64>, i64), [InOut, Parameter]).unwrap();
    let work_ms = work.as_millis() as i64;
    iterations_per_ms(); // calibrate outside the timed regions

    let make_data = |n: usize| -> Vec<Data<i64>> {
        match workload {
            Workload::Independent => (0..n).map(|_| Data::new(0)).collect(),
            Workload::SerialChain => {
                let shared = Data::new(0);
                (0..n).map(|_| shared.clone()).collect()
            }
        }
    };

    let serial_start = Instant::now();
    for datum in make_data(n_tasks) {
        spin.run_inline((datum, work_ms));
    }
    let serial_wall = serial_start.elapsed();

    let mut rows = Vec::new();
    for &threads in thread_counts {
        let data = make_data(n_tasks);
        let mut rt = Runtime::start(RuntimeConfig::with_threads(threads))
            .expect("benchmark runtime starts");
        let start = Instant::now();
        for datum in data {
            rt.invoke(&spin, (datum, work_ms)).expect("benchmark submit");
        }
        rt.barrier().expect("benchmark tasks do not fail");
        let wall = start.elapsed();
        rt.finish();
        rows.push(BenchRow {
            threads,
            wall,
            speedup: serial_wall.as_secs_f64() / wall.as_secs_f64(),
        });
    }

    BenchReport {
        workload,
        n_tasks,
        work,
        serial_wall,
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_the_pinned_header() {
        let report = BenchReport {
            workload: Workload::Independent,
            n_tasks: 2,
            work: Duration::from_millis(1),
            serial_wall: Duration::from_millis(2),
            rows: vec![BenchRow {
                threads: 2,
                wall: Duration::from_millis(1),
                speedup: 2.0,
            }],
        };
        let csv = report.to_csv();
        assert!(csv.starts_with("threads,wall_ms,speedup\n"));
        assert!(csv.contains("2,1.000,2.000"));
    }

    #[test]
    fn tiny_benchmark_produces_sane_rows() {
        let report = benchmark_speedup(
            4,
            Duration::from_millis(2),
            &[1, 2],
            Workload::Independent,
        );
        assert_eq!(report.rows.len(), 2);
        for row in &report.rows {
            assert!(row.wall > Duration::ZERO);
            assert!(row.speedup > 0.0);
        }
    }
}
