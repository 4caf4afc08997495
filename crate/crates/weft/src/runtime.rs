//! Worker pool, ready queue and lifecycle.
//!
//! A runtime owns `num_threads - 1` worker threads; the thread that drives
//! submissions (the control thread) executes tasks itself while it is
//! blocked in [`Runtime::barrier`] or [`Runtime::finish`]. Dispatch is FIFO
//! from a single shared ready queue; the stored priority is never consulted.
//!
//! Two surfaces are provided. [`Runtime`] is an owned handle: exclusive
//! access (`&mut self`) is the submission permission, so a handle can be
//! moved across threads but never shared for submission. The free functions
//! [`init`], [`barrier`] and [`finish`] manage a single process-global
//! runtime with the classic lifecycle errors; task callables submit through
//! it (see [`crate::api`]).

use std::cell::Cell;
use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread::{self, JoinHandle, ThreadId};
use std::time::{Duration, Instant};

use crate::graph::DependencyGraph;
use crate::log::{LogLevel, Logger};
use crate::model::{
    AccessTarget, DefinitionError, InstanceId, RuntimeConfig, TaskDefinition, TaskInstance,
    TaskState,
};

/// Name of the environment variable that overrides the log level when the
/// runtime builds its own stderr logger (`error|warning|info|debug`).
pub const LOG_LEVEL_ENV: &str = "WEFT_LOG_LEVEL";

/// An executable task body. Panics are caught and turn into task failure.
pub type TaskBody = Box<dyn FnOnce() + Send + 'static>;

/// One failed task: its id and the captured panic message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskFailure {
    pub id: InstanceId,
    pub message: String,
}

/// Aggregate failure report returned by a barrier.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FailureReport {
    pub failures: Vec<TaskFailure>,
    /// Instances cancelled because a (transitive) predecessor failed, in
    /// cancellation order.
    pub cancelled: Vec<InstanceId>,
}

impl fmt::Display for FailureReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} task(s) failed, {} cancelled",
            self.failures.len(),
            self.cancelled.len()
        )
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RuntimeError {
    #[error("runtime is already initialized")]
    AlreadyInitialized,
    #[error("runtime is not initialized")]
    NotInitialized,
    #[error("invalid thread count {0}; at least 1 is required")]
    InvalidThreadCount(usize),
    #[error("operation requires the control thread (not a task body or foreign thread)")]
    SubmitFromWorker,
    #[error("execution mode cannot change while a runtime is running")]
    ModeChangeWhileRunning,
    #[error("the same data region is bound to more than one dependency argument")]
    AliasedArguments,
    #[error(transparent)]
    Definition(#[from] DefinitionError),
    #[error("{0}")]
    TasksFailed(FailureReport),
}

/// Start/end marker of one executed instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Start,
    End,
}

/// A scheduling event. Sequence numbers are allocated under the scheduler
/// lock, so their order is a valid happens-before witness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduleEvent {
    pub seq: u64,
    pub kind: EventKind,
    pub instance: InstanceId,
}

/// Result of [`Runtime::finish`].
pub struct RunSummary {
    pub executed_count: usize,
    pub failed_count: usize,
    pub cancelled_count: usize,
    pub wall_time: Duration,
    pub failures: FailureReport,
    /// The full dependency graph, retained for export and verification.
    pub graph: DependencyGraph,
    /// Recorded schedule events, when recording was enabled.
    pub events: Option<Vec<ScheduleEvent>>,
}

impl fmt::Debug for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RunSummary")
            .field("executed_count", &self.executed_count)
            .field("failed_count", &self.failed_count)
            .field("cancelled_count", &self.cancelled_count)
            .field("wall_time", &self.wall_time)
            .finish_non_exhaustive()
    }
}

thread_local! {
    static IN_TASK_BODY: Cell<bool> = const { Cell::new(false) };
}

pub(crate) fn in_task_body() -> bool {
    IN_TASK_BODY.with(Cell::get)
}

struct BodyGuard;

impl BodyGuard {
    fn enter() -> BodyGuard {
        IN_TASK_BODY.with(|f| f.set(true));
        BodyGuard
    }
}

impl Drop for BodyGuard {
    fn drop(&mut self) {
        IN_TASK_BODY.with(|f| f.set(false));
    }
}

#[derive(PartialEq, Eq, Clone, Copy)]
enum Phase {
    Running,
    ShuttingDown,
}

struct SchedulerState {
    phase: Phase,
    graph: DependencyGraph,
    ready: VecDeque<InstanceId>,
    bodies: HashMap<InstanceId, TaskBody>,
    next_instance: u64,
    /// Submitted instances not yet Finished, Failed or Cancelled.
    outstanding: usize,
    failures: Vec<TaskFailure>,
    cancelled: Vec<InstanceId>,
    events: Option<Vec<ScheduleEvent>>,
    next_seq: u64,
}

impl SchedulerState {
    fn record(&mut self, kind: EventKind, instance: InstanceId) {
        if let Some(events) = &mut self.events {
            events.push(ScheduleEvent {
                seq: self.next_seq,
                kind,
                instance,
            });
            self.next_seq += 1;
        }
    }
}

struct Job {
    id: InstanceId,
    body: TaskBody,
}

struct RuntimeCore {
    config: RuntimeConfig,
    logger: Logger,
    state: Mutex<SchedulerState>,
    wakeup: Condvar,
    started: Instant,
}

impl RuntimeCore {
    fn lock(&self) -> MutexGuard<'_, SchedulerState> {
        self.state.lock().expect("scheduler state poisoned")
    }

    /// Pops `id` off the front of the queue (already done by the caller),
    /// transitions it to Running and takes its body.
    fn claim(&self, state: &mut SchedulerState, id: InstanceId) -> Job {
        state
            .graph
            .mark_running(id)
            .expect("ready queue held a non-ready instance");
        state.record(EventKind::Start, id);
        let body = state
            .bodies
            .remove(&id)
            .expect("ready instance has a body");
        Job { id, body }
    }

    /// Runs a body outside the lock, then folds the outcome back in.
    fn execute(&self, job: Job) {
        let Job { id, body } = job;
        let outcome = catch_unwind(AssertUnwindSafe(|| {
            let _guard = BodyGuard::enter();
            body();
        }));
        let mut state = self.lock();
        state.record(EventKind::End, id);
        match outcome {
            Ok(()) => {
                let newly_ready = state
                    .graph
                    .mark_complete(id)
                    .expect("completed instance was running");
                for succ in newly_ready {
                    state.ready.push_back(succ);
                }
                state.outstanding -= 1;
            }
            Err(payload) => {
                let message = panic_message(payload.as_ref());
                self.logger
                    .warning(format_args!("task {id} failed: {message}"));
                state.failures.push(TaskFailure { id, message });
                let cancelled = state
                    .graph
                    .mark_failed(id)
                    .expect("failed instance was running");
                for &c in &cancelled {
                    state.bodies.remove(&c);
                }
                state.outstanding -= 1 + cancelled.len();
                state.cancelled.extend(cancelled);
            }
        }
        self.wakeup.notify_all();
    }

    fn worker_loop(&self, index: usize) {
        self.logger
            .debug(format_args!("worker {index} entering loop"));
        loop {
            let job = {
                let mut state = self.lock();
                loop {
                    if let Some(id) = state.ready.pop_front() {
                        break Some(self.claim(&mut state, id));
                    }
                    if state.phase == Phase::ShuttingDown {
                        break None;
                    }
                    state = self.wakeup.wait(state).expect("scheduler state poisoned");
                }
            };
            match job {
                Some(job) => self.execute(job),
                None => break,
            }
        }
        self.logger.debug(format_args!("worker {index} exiting"));
    }
}

fn panic_message(payload: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "task body panicked".to_string()
    }
}

/// Configures and starts a [`Runtime`].
pub struct RuntimeBuilder {
    config: RuntimeConfig,
    logger: Option<Logger>,
    record_events: bool,
}

impl RuntimeBuilder {
    pub fn new(config: RuntimeConfig) -> Self {
        RuntimeBuilder {
            config,
            logger: None,
            record_events: false,
        }
    }

    /// Replaces the stderr logger. An explicit logger is used as-is; the
    /// `WEFT_LOG_LEVEL` override only applies to the default one.
    pub fn logger(mut self, logger: Logger) -> Self {
        self.logger = Some(logger);
        self
    }

    /// Records start/end schedule events; they come back in the
    /// [`RunSummary`].
    pub fn record_events(mut self, on: bool) -> Self {
        self.record_events = on;
        self
    }

    pub fn start(self) -> Result<Runtime, RuntimeError> {
        let RuntimeBuilder {
            config,
            logger,
            record_events,
        } = self;
        if config.num_threads < 1 {
            return Err(RuntimeError::InvalidThreadCount(config.num_threads));
        }
        let logger = logger.unwrap_or_else(|| {
            let level = std::env::var(LOG_LEVEL_ENV)
                .ok()
                .and_then(|v| v.parse::<LogLevel>().ok())
                .unwrap_or(config.log_level);
            Logger::stderr(level)
        });

        logger.info(format_args!("### weft::init ###"));
        let core = Arc::new(RuntimeCore {
            state: Mutex::new(SchedulerState {
                phase: Phase::Running,
                graph: DependencyGraph::new(config.reduction_mode),
                ready: VecDeque::new(),
                bodies: HashMap::new(),
                next_instance: 1,
                outstanding: 0,
                failures: Vec::new(),
                cancelled: Vec::new(),
                events: record_events.then(Vec::new),
                next_seq: 0,
            }),
            wakeup: Condvar::new(),
            started: Instant::now(),
            config,
            logger,
        });

        let worker_count = core.config.num_threads - 1;
        let mut workers = Vec::with_capacity(worker_count);
        for k in 1..=worker_count {
            core.logger.info(format_args!(
                "adding worker: {k} of {}",
                core.config.num_threads
            ));
            let core = Arc::clone(&core);
            let handle = thread::Builder::new()
                .name(format!("weft-worker-{k}"))
                .spawn(move || core.worker_loop(k))
                .expect("failed to spawn worker thread");
            workers.push(handle);
        }
        core.logger.info(format_args!(
            "Running on {} threads.",
            core.config.num_threads
        ));

        Ok(Runtime {
            core,
            workers,
            finished: false,
        })
    }
}

/// An owned runtime handle.
///
/// Submission and barriers take `&mut self`: the handle can move between
/// threads, but only its exclusive owner drives it. Dropping an unfinished
/// runtime shuts the pool down without waiting for queued work; call
/// [`Runtime::finish`] for orderly teardown.
pub struct Runtime {
    core: Arc<RuntimeCore>,
    workers: Vec<JoinHandle<()>>,
    finished: bool,
}

impl fmt::Debug for Runtime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Runtime")
            .field("num_threads", &self.core.config.num_threads)
            .field("workers", &self.workers.len())
            .finish_non_exhaustive()
    }
}

impl Runtime {
    pub fn start(config: RuntimeConfig) -> Result<Runtime, RuntimeError> {
        RuntimeBuilder::new(config).start()
    }

    pub fn builder(config: RuntimeConfig) -> RuntimeBuilder {
        RuntimeBuilder::new(config)
    }

    pub fn config(&self) -> &RuntimeConfig {
        &self.core.config
    }

    /// Number of pool threads (excludes the control thread).
    pub fn worker_count(&self) -> usize {
        self.workers.len()
    }

    /// Registers one instance of `definition` bound to `targets` and queues
    /// it if its dependencies are already satisfied. The body never runs on
    /// the caller's stack; the call returns as soon as the instance is
    /// linked into the graph.
    pub fn submit(
        &mut self,
        definition: &Arc<TaskDefinition>,
        targets: Vec<AccessTarget>,
        body: impl FnOnce() + Send + 'static,
    ) -> Result<InstanceId, RuntimeError> {
        self.submit_boxed(definition, targets, Box::new(body))
    }

    pub fn submit_boxed(
        &mut self,
        definition: &Arc<TaskDefinition>,
        targets: Vec<AccessTarget>,
        body: TaskBody,
    ) -> Result<InstanceId, RuntimeError> {
        let core = &self.core;
        let mut state = core.lock();
        if state.phase != Phase::Running {
            return Err(RuntimeError::NotInitialized);
        }
        let id = InstanceId::new(state.next_instance);
        let instance = TaskInstance::new(id, definition.clone(), targets)?;
        state.next_instance += 1;
        let report = state
            .graph
            .register(instance)
            .expect("submission ids are monotone");
        core.logger.debug(format_args!(
            "submit {}#{id}: {} predecessor(s), priority {}",
            definition.display_name(),
            report.predecessors.len(),
            definition.priority(),
        ));
        match report.state {
            TaskState::Ready => {
                state.outstanding += 1;
                state.bodies.insert(id, body);
                state.ready.push_back(id);
                core.wakeup.notify_all();
            }
            TaskState::Waiting => {
                state.outstanding += 1;
                state.bodies.insert(id, body);
            }
            TaskState::Cancelled => {
                // A predecessor already failed; the instance joins the
                // cancelled closure instead of waiting forever.
                state.cancelled.push(id);
            }
            other => unreachable!("register produced {other}"),
        }
        Ok(id)
    }

    /// Waits until every instance submitted so far is Finished, Failed or
    /// Cancelled, executing ready tasks on this thread while it waits.
    /// Returns the aggregate failure report if any task has failed.
    pub fn barrier(&mut self) -> Result<(), RuntimeError> {
        loop {
            let job = {
                let mut state = self.core.lock();
                loop {
                    if let Some(id) = state.ready.pop_front() {
                        break Some(self.core.claim(&mut state, id));
                    }
                    if state.outstanding == 0 {
                        break None;
                    }
                    state = self
                        .core
                        .wakeup
                        .wait(state)
                        .expect("scheduler state poisoned");
                }
            };
            match job {
                Some(job) => self.core.execute(job),
                None => break,
            }
        }
        let state = self.core.lock();
        if state.failures.is_empty() {
            Ok(())
        } else {
            Err(RuntimeError::TasksFailed(FailureReport {
                failures: state.failures.clone(),
                cancelled: state.cancelled.clone(),
            }))
        }
    }

    /// Barrier, then tear down the pool. Failures are reported in the
    /// summary rather than as an error; teardown always completes.
    pub fn finish(mut self) -> RunSummary {
        let _ = self.barrier();
        self.shutdown();
        let core = &self.core;
        let mut state = core.lock();
        let executed_count = state.graph.executed_count();
        let failed_count = state.graph.failed_count();
        let cancelled_count = state.graph.cancelled_count();
        core.logger
            .info(format_args!("Executed {executed_count} tasks."));
        core.logger.info(format_args!("### weft::finish ###"));
        let reduction_mode = state.graph.reduction_mode();
        let graph = std::mem::replace(&mut state.graph, DependencyGraph::new(reduction_mode));
        let summary = RunSummary {
            executed_count,
            failed_count,
            cancelled_count,
            wall_time: core.started.elapsed(),
            failures: FailureReport {
                failures: std::mem::take(&mut state.failures),
                cancelled: std::mem::take(&mut state.cancelled),
            },
            graph,
            events: state.events.take(),
        };
        drop(state);
        summary
    }

    /// Renders the current graph; safe to call between submissions.
    pub fn export_dot(&self) -> String {
        self.core.lock().graph.to_dot()
    }

    fn shutdown(&mut self) {
        if self.finished {
            return;
        }
        {
            let mut state = self.core.lock();
            state.phase = Phase::ShuttingDown;
        }
        self.core.wakeup.notify_all();
        for worker in self.workers.drain(..) {
            let _ = worker.join();
        }
        self.finished = true;
    }
}

impl Drop for Runtime {
    fn drop(&mut self) {
        self.shutdown();
    }
}

// --- Process-global runtime -------------------------------------------------

struct CurrentRuntime {
    runtime: Runtime,
    control: ThreadId,
}

static CURRENT: Mutex<Option<CurrentRuntime>> = Mutex::new(None);

fn current_slot() -> MutexGuard<'static, Option<CurrentRuntime>> {
    CURRENT.lock().expect("global runtime slot poisoned")
}

/// Starts the process-global runtime. Errors if one is already running.
pub fn init(num_threads: usize, log_level: LogLevel) -> Result<(), RuntimeError> {
    let config = RuntimeConfig {
        num_threads,
        log_level,
        ..Default::default()
    };
    init_with_builder(RuntimeBuilder::new(config))
}

/// [`init`] with the defaults: 2 threads, `Warning`.
pub fn init_default() -> Result<(), RuntimeError> {
    init_with_builder(RuntimeBuilder::new(RuntimeConfig::default()))
}

/// Starts the process-global runtime with an explicit config and logger.
pub fn init_with(config: RuntimeConfig, logger: Logger) -> Result<(), RuntimeError> {
    init_with_builder(RuntimeBuilder::new(config).logger(logger))
}

fn init_with_builder(builder: RuntimeBuilder) -> Result<(), RuntimeError> {
    if in_task_body() {
        return Err(RuntimeError::SubmitFromWorker);
    }
    let mut slot = current_slot();
    if slot.is_some() {
        return Err(RuntimeError::AlreadyInitialized);
    }
    let runtime = builder.start()?;
    *slot = Some(CurrentRuntime {
        runtime,
        control: thread::current().id(),
    });
    Ok(())
}

/// Runs `f` against the global runtime after the control-thread checks.
/// The slot lock is held for the duration, serializing global operations.
pub(crate) fn with_current<R>(
    f: impl FnOnce(&mut Runtime) -> Result<R, RuntimeError>,
) -> Result<R, RuntimeError> {
    if in_task_body() {
        return Err(RuntimeError::SubmitFromWorker);
    }
    let mut slot = current_slot();
    let current = slot.as_mut().ok_or(RuntimeError::NotInitialized)?;
    if current.control != thread::current().id() {
        return Err(RuntimeError::SubmitFromWorker);
    }
    f(&mut current.runtime)
}

/// Barrier on the process-global runtime.
pub fn barrier() -> Result<(), RuntimeError> {
    with_current(Runtime::barrier)
}

/// Finishes and removes the process-global runtime. A second call returns
/// `NotInitialized`.
pub fn finish() -> Result<RunSummary, RuntimeError> {
    if in_task_body() {
        return Err(RuntimeError::SubmitFromWorker);
    }
    let mut slot = current_slot();
    let current = slot.take().ok_or(RuntimeError::NotInitialized)?;
    if current.control != thread::current().id() {
        // Put it back; a foreign thread may not tear the runtime down.
        *slot = Some(current);
        return Err(RuntimeError::SubmitFromWorker);
    }
    Ok(current.runtime.finish())
}

/// True while the process-global runtime is installed.
pub(crate) fn global_running() -> bool {
    current_slot().is_some()
}
