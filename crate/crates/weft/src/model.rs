//! Shared vocabulary: access modes, task descriptors, instance states and
//! runtime configuration.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::log::LogLevel;

/// Directionality clause attached to one task argument.
///
/// The mode of every argument, together with the runtime identity of the data
/// it is bound to, is the sole input to dependency analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AccessMode {
    /// The task reads the argument. It runs after every earlier writer of the
    /// same datum.
    In,
    /// The task overwrites the argument. It runs after earlier readers and
    /// writers of the same datum.
    Out,
    /// The task reads and writes the argument.
    InOut,
    /// The task updates the argument as part of a reduction. In
    /// [`ReductionMode::Chain`] this behaves exactly like `InOut`; in
    /// [`ReductionMode::Commutative`] consecutive reductions on one datum are
    /// mutually unordered.
    Reduction,
    /// The argument is a plain value, copied at submission time and ignored
    /// by dependency analysis.
    Parameter,
}

impl AccessMode {
    /// All five variants, in declaration order.
    pub const ALL: [AccessMode; 5] = [
        AccessMode::In,
        AccessMode::Out,
        AccessMode::InOut,
        AccessMode::Reduction,
        AccessMode::Parameter,
    ];

    /// True for modes that (may) write the datum: `Out`, `InOut`, `Reduction`.
    pub fn writes(self) -> bool {
        matches!(
            self,
            AccessMode::Out | AccessMode::InOut | AccessMode::Reduction
        )
    }

    /// True for every mode except `Parameter`.
    pub fn is_dependency(self) -> bool {
        !matches!(self, AccessMode::Parameter)
    }
}

impl fmt::Display for AccessMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AccessMode::In => "in",
            AccessMode::Out => "out",
            AccessMode::InOut => "inout",
            AccessMode::Reduction => "reduction",
            AccessMode::Parameter => "param",
        })
    }
}

impl FromStr for AccessMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "in" => Ok(AccessMode::In),
            "out" => Ok(AccessMode::Out),
            "inout" => Ok(AccessMode::InOut),
            "reduction" => Ok(AccessMode::Reduction),
            "param" => Ok(AccessMode::Parameter),
            other => Err(format!("unknown access mode `{other}`")),
        }
    }
}

/// Opaque identity key for a data region.
///
/// Two arguments alias if and only if their keys are equal; byte-range
/// overlap is never inspected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DatumId(u64);

static NEXT_DATUM: AtomicU64 = AtomicU64::new(0);

impl DatumId {
    /// Allocates a fresh, process-unique key.
    pub fn fresh() -> Self {
        DatumId(NEXT_DATUM.fetch_add(1, Ordering::Relaxed))
    }

    /// Builds a key from a caller-chosen value. Intended for offline graph
    /// reconstruction (trace replay), where datum indices come from a file;
    /// do not mix with [`DatumId::fresh`] keys in one graph.
    pub fn from_raw(raw: u64) -> Self {
        DatumId(raw)
    }

    pub fn raw(self) -> u64 {
        self.0
    }
}

impl fmt::Display for DatumId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d{}", self.0)
    }
}

/// Identifier of one task instance; assigned in submission order starting
/// at 1, so `u < v` holds for every dependency edge `(u, v)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InstanceId(u64);

impl InstanceId {
    pub fn new(n: u64) -> Self {
        InstanceId(n)
    }

    pub fn get(self) -> u64 {
        self.0
    }
}

impl fmt::Display for InstanceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A `Parameter` argument value as recorded on the instance, for logs and
/// diagnostics. The actual value passed to the task body is captured
/// separately (and exactly) at submission time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamValue {
    Int(i64),
    UInt(u64),
    Float(f64),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::UInt(v) => write!(f, "{v}"),
            ParamValue::Float(v) => write!(f, "{v}"),
        }
    }
}

macro_rules! param_from_int {
    ($($t:ty),*) => {$(
        impl From<$t> for ParamValue {
            fn from(v: $t) -> Self { ParamValue::Int(v as i64) }
        }
    )*};
}
param_from_int!(i8, i16, i32, i64, isize);

macro_rules! param_from_uint {
    ($($t:ty),*) => {$(
        impl From<$t> for ParamValue {
            fn from(v: $t) -> Self { ParamValue::UInt(v as u64) }
        }
    )*};
}
param_from_uint!(u8, u16, u32, u64, usize);

impl From<f32> for ParamValue {
    fn from(v: f32) -> Self {
        ParamValue::Float(v as f64)
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Float(v)
    }
}

/// What one argument position of an instance is bound to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AccessTarget {
    /// A data region, identified for aliasing purposes only.
    Datum(DatumId),
    /// A copied plain value.
    Param(ParamValue),
}

impl AccessTarget {
    pub fn datum(&self) -> Option<DatumId> {
        match self {
            AccessTarget::Datum(d) => Some(*d),
            AccessTarget::Param(_) => None,
        }
    }
}

/// One bound argument of a task instance: target plus the mode the
/// definition declared for that position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Access {
    pub target: AccessTarget,
    pub mode: AccessMode,
}

/// Kind of a formal argument slot: a dependency-carrying data reference or a
/// plain value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgKind {
    Data,
    Value,
}

/// Errors raised when registering a task definition or binding arguments.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DefinitionError {
    #[error("mode list has {got} entries but the function takes {expected} arguments")]
    ArityMismatch { expected: usize, got: usize },
    #[error("argument {position} is a {kind} slot but was declared `{mode}`")]
    InvalidParameterKind {
        position: usize,
        kind: &'static str,
        mode: String,
    },
}

/// Checks a mode list against a function arity. Pure: the list is accepted
/// verbatim on success.
pub fn validate_mode_list(modes: &[AccessMode], arity: usize) -> Result<(), DefinitionError> {
    if modes.len() != arity {
        return Err(DefinitionError::ArityMismatch {
            expected: arity,
            got: modes.len(),
        });
    }
    Ok(())
}

static NEXT_DEFINITION: AtomicU64 = AtomicU64::new(1);

/// A registered task: a mode list plus bookkeeping. The executable body is
/// held by the frontend ([`crate::api::TaskCallable`]), not by the
/// definition.
#[derive(Debug)]
pub struct TaskDefinition {
    id: u64,
    name: Option<String>,
    modes: Vec<AccessMode>,
    priority: i32,
}

impl TaskDefinition {
    /// Registers a definition. Ids are unique per registration and assigned
    /// in registration order, process-wide.
    pub fn register(
        name: Option<&str>,
        modes: Vec<AccessMode>,
        priority: Option<i32>,
    ) -> Arc<TaskDefinition> {
        Arc::new(TaskDefinition {
            id: NEXT_DEFINITION.fetch_add(1, Ordering::Relaxed),
            name: name.map(str::to_owned),
            modes,
            priority: priority.unwrap_or(0),
        })
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    /// Name used in DOT labels and logs: the registered name, or a
    /// placeholder derived from the definition id.
    pub fn display_name(&self) -> String {
        match &self.name {
            Some(n) => n.clone(),
            None => format!("task{}", self.id),
        }
    }

    pub fn modes(&self) -> &[AccessMode] {
        &self.modes
    }

    pub fn arity(&self) -> usize {
        self.modes.len()
    }

    /// Stored and surfaced in logs, never consulted by the scheduler.
    pub fn priority(&self) -> i32 {
        self.priority
    }
}

/// Lifecycle state of a task instance.
///
/// Transitions are `Created → Ready | Waiting → Running → Finished | Failed`,
/// plus `any pre-Running state → Cancelled`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskState {
    Created,
    Waiting,
    Ready,
    Running,
    Finished,
    Failed,
    Cancelled,
}

impl TaskState {
    /// Finished, Failed or Cancelled.
    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            TaskState::Finished | TaskState::Failed | TaskState::Cancelled
        )
    }
}

impl fmt::Display for TaskState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TaskState::Created => "created",
            TaskState::Waiting => "waiting",
            TaskState::Ready => "ready",
            TaskState::Running => "running",
            TaskState::Finished => "finished",
            TaskState::Failed => "failed",
            TaskState::Cancelled => "cancelled",
        };
        f.write_str(s)
    }
}

/// One submission of a definition with concrete targets.
#[derive(Debug, Clone)]
pub struct TaskInstance {
    id: InstanceId,
    definition: Arc<TaskDefinition>,
    accesses: Vec<Access>,
    state: TaskState,
    unfinished_predecessors: usize,
}

impl TaskInstance {
    /// Builds an instance, pairing each target with the definition's mode at
    /// the same position. Fails if the target list length does not match the
    /// definition arity, or if a `Parameter` position is bound to a datum
    /// (or a dependency position to a plain value).
    pub fn new(
        id: InstanceId,
        definition: Arc<TaskDefinition>,
        targets: Vec<AccessTarget>,
    ) -> Result<TaskInstance, DefinitionError> {
        if targets.len() != definition.arity() {
            return Err(DefinitionError::ArityMismatch {
                expected: definition.arity(),
                got: targets.len(),
            });
        }
        let accesses: Vec<Access> = definition
            .modes()
            .iter()
            .zip(targets)
            .map(|(&mode, target)| Access { target, mode })
            .collect();
        for (position, access) in accesses.iter().enumerate() {
            let kind_ok = match access.target {
                AccessTarget::Datum(_) => access.mode.is_dependency(),
                AccessTarget::Param(_) => access.mode == AccessMode::Parameter,
            };
            if !kind_ok {
                let kind = match access.target {
                    AccessTarget::Datum(_) => "data",
                    AccessTarget::Param(_) => "value",
                };
                return Err(DefinitionError::InvalidParameterKind {
                    position,
                    kind,
                    mode: access.mode.to_string(),
                });
            }
        }
        Ok(TaskInstance {
            id,
            definition,
            accesses,
            state: TaskState::Created,
            unfinished_predecessors: 0,
        })
    }

    pub fn id(&self) -> InstanceId {
        self.id
    }

    pub fn definition(&self) -> &Arc<TaskDefinition> {
        &self.definition
    }

    pub fn accesses(&self) -> &[Access] {
        &self.accesses
    }

    /// The datum-carrying accesses, in argument order.
    pub fn dependency_accesses(&self) -> impl Iterator<Item = (DatumId, AccessMode)> + '_ {
        self.accesses
            .iter()
            .filter_map(|a| a.target.datum().map(|d| (d, a.mode)))
    }

    pub fn state(&self) -> TaskState {
        self.state
    }

    pub fn unfinished_predecessors(&self) -> usize {
        self.unfinished_predecessors
    }

    pub(crate) fn set_state(&mut self, state: TaskState) {
        self.state = state;
    }

    pub(crate) fn set_unfinished(&mut self, n: usize) {
        self.unfinished_predecessors = n;
    }

    pub(crate) fn dec_unfinished(&mut self) {
        debug_assert!(self.unfinished_predecessors > 0);
        self.unfinished_predecessors -= 1;
    }
}

/// How consecutive `Reduction` accesses on one datum relate to each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReductionMode {
    /// Each reduction chains after the previous accessor; behaviorally
    /// identical to `InOut`.
    #[default]
    Chain,
    /// Reductions in one epoch (a maximal run of reductions on a datum) are
    /// mutually unordered; the epoch orders as a whole against its
    /// surroundings.
    Commutative,
}

/// Runtime configuration.
#[derive(Debug, Clone)]
pub struct RuntimeConfig {
    /// Total threads, including the control thread. The pool spawns
    /// `num_threads - 1` workers.
    pub num_threads: usize,
    pub log_level: LogLevel,
    pub reduction_mode: ReductionMode,
    /// When true, harness executors run instances inline instead of through
    /// a runtime.
    pub serial: bool,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        RuntimeConfig {
            num_threads: 2,
            log_level: LogLevel::Warning,
            reduction_mode: ReductionMode::Chain,
            serial: false,
        }
    }
}

impl RuntimeConfig {
    pub fn with_threads(num_threads: usize) -> Self {
        RuntimeConfig {
            num_threads,
            ..Default::default()
        }
    }
}
