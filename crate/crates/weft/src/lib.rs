//! A task-parallel runtime library.
//!
//! Functions are registered as tasks together with a per-argument access mode
//! (`In`, `Out`, `InOut`, `Reduction` or `Parameter`). Invoking the registered
//! task looks like calling the plain function, but instead submits a task
//! instance to a runtime which infers the dependency DAG from the runtime
//! identity of the data arguments and executes instances asynchronously on a
//! worker pool. A barrier (and `finish`) waits for everything submitted so
//! far, with the control thread pitching in on ready work while it waits.

pub mod api;
pub mod dot;
pub mod graph;
pub mod log;
pub mod model;
pub mod runtime;

pub use api::{
    execution_mode, make_task, set_execution_mode, Data, DynTaskCallable, TaskArg, TaskArgs,
    TaskCallable, TaskFn,
};
pub use graph::{predecessors_for_access, DatumAccessState, DependencyGraph, GraphError};
pub use log::{mask_timestamp, LogLevel, LogRecord, LogSink, Logger};
pub use model::{
    validate_mode_list, Access, AccessMode, AccessTarget, ArgKind, DatumId, DefinitionError,
    InstanceId, ParamValue, ReductionMode, RuntimeConfig, TaskDefinition, TaskInstance, TaskState,
};
pub use runtime::{
    barrier, finish, init, init_default, init_with, EventKind, FailureReport, RunSummary, Runtime,
    RuntimeBuilder, RuntimeError, ScheduleEvent, TaskBody, TaskFailure, LOG_LEVEL_ENV,
};
