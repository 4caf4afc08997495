//! User-facing surface: shared data regions, task registration, and
//! function-call-shaped invocation.
//!
//! A function over `&mut T` data arguments and plain numeric parameters is
//! registered with [`make_task`] (or the [`task!`] / [`taskify!`] shorthands)
//! together with one access mode per argument. The returned [`TaskCallable`]
//! is invoked like the original function; in parallel mode that submits an
//! instance to the process-global runtime and returns before the body runs,
//! in serial mode it is a plain inline call with no runtime at all.

use std::marker::PhantomData;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};

use crate::model::{
    validate_mode_list, AccessMode, AccessTarget, ArgKind, DatumId, DefinitionError, InstanceId,
    TaskDefinition,
};
use crate::runtime::{self, Runtime, RuntimeError};

/// A shared data region with a stable identity.
///
/// Clones refer to the same region and carry the same [`DatumId`]; dependency
/// analysis treats two arguments as aliases iff their ids are equal. The
/// value itself sits behind a mutex, so even untruthful mode declarations
/// cannot produce a data race (they produce wrong orderings instead).
pub struct Data<T> {
    inner: Arc<DataCell<T>>,
}

struct DataCell<T> {
    id: DatumId,
    value: Mutex<T>,
}

impl<T> Clone for Data<T> {
    fn clone(&self) -> Self {
        Data {
            inner: Arc::clone(&self.inner),
        }
    }
}

impl<T> std::fmt::Debug for Data<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Data({})", self.inner.id)
    }
}

impl<T: Send + 'static> Data<T> {
    pub fn new(value: T) -> Self {
        Data {
            inner: Arc::new(DataCell {
                id: DatumId::fresh(),
                value: Mutex::new(value),
            }),
        }
    }

    /// The region's identity key: equal for clones, distinct across regions,
    /// stable for the region's lifetime.
    pub fn id(&self) -> DatumId {
        self.inner.id
    }

    fn lock(&self) -> MutexGuard<'_, T> {
        // A task that panicked while holding the lock has already failed and
        // cancelled its dependents; ignore the poison flag.
        self.inner
            .value
            .lock()
            .unwrap_or_else(|poison| poison.into_inner())
    }

    /// Runs `f` with exclusive access to the value.
    pub fn with<R>(&self, f: impl FnOnce(&mut T) -> R) -> R {
        f(&mut self.lock())
    }

    pub fn get(&self) -> T
    where
        T: Clone,
    {
        self.with(|v| v.clone())
    }

    pub fn set(&self, value: T) {
        self.with(|v| *v = value);
    }
}

/// One formal argument slot of a task: either a [`Data`] region (dependency
/// modes) or a plain numeric value (`Parameter` mode).
///
/// Binding happens in two phases so a single call site can hand every body
/// reference a common lifetime: [`TaskArg::hold`] acquires the slot (locking
/// data regions), then [`TaskArg::project`] produces what the body receives.
pub trait TaskArg: Send + 'static {
    /// Owner of the acquired slot: a lock guard for data regions, the value
    /// itself for parameters.
    type Hold<'s>
    where
        Self: 's;
    /// What the task body receives for this slot.
    type Body<'b>;
    const KIND: ArgKind;
    fn target(&self) -> AccessTarget;
    fn hold(&self) -> Self::Hold<'_>;
    fn project<'b>(hold: &'b mut Self::Hold<'_>) -> Self::Body<'b>;
}

impl<T: Send + 'static> TaskArg for Data<T> {
    type Hold<'s> = MutexGuard<'s, T>;
    type Body<'b> = &'b mut T;
    const KIND: ArgKind = ArgKind::Data;

    fn target(&self) -> AccessTarget {
        AccessTarget::Datum(self.id())
    }

    fn hold(&self) -> MutexGuard<'_, T> {
        self.lock()
    }

    fn project<'b>(hold: &'b mut MutexGuard<'_, T>) -> &'b mut T {
        &mut *hold
    }
}

macro_rules! impl_param_arg {
    ($($t:ty),*) => {$(
        impl TaskArg for $t {
            type Hold<'s> = $t;
            type Body<'b> = $t;
            const KIND: ArgKind = ArgKind::Value;

            fn target(&self) -> AccessTarget {
                AccessTarget::Param((*self).into())
            }

            fn hold(&self) -> $t {
                *self
            }

            fn project(hold: &mut $t) -> $t {
                *hold
            }
        }
    )*};
}
impl_param_arg!(i8, i16, i32, i64, isize, u8, u16, u32, u64, usize, f32, f64);

/// A tuple of [`TaskArg`]s: the bound arguments of one invocation.
pub trait TaskArgs: Send + 'static {
    fn arity() -> usize {
        Self::kinds().len()
    }
    fn kinds() -> Vec<ArgKind>;
    fn targets(&self) -> Vec<AccessTarget>;
}

/// A function or closure callable with the bodies of `Args`.
pub trait TaskFn<Args: TaskArgs>: Send + Sync + 'static {
    fn call_with(&self, args: Args);
}

impl<Args: TaskArgs> TaskFn<Args> for Box<dyn TaskFn<Args>> {
    fn call_with(&self, args: Args) {
        (**self).call_with(args)
    }
}

struct SharedBody<F>(Arc<F>);

impl<Args: TaskArgs, F: TaskFn<Args>> TaskFn<Args> for SharedBody<F> {
    fn call_with(&self, args: Args) {
        self.0.call_with(args)
    }
}

/// A [`TaskCallable`] with the body type erased, so callables sharing an
/// argument signature share a type (storable in one struct or collection).
pub type DynTaskCallable<Args> = TaskCallable<Args, Box<dyn TaskFn<Args>>>;

macro_rules! impl_task_tuple {
    ($($A:ident),*) => {
        impl<$($A: TaskArg),*> TaskArgs for ($($A,)*) {
            fn kinds() -> Vec<ArgKind> {
                vec![$($A::KIND),*]
            }

            #[allow(non_snake_case)]
            fn targets(&self) -> Vec<AccessTarget> {
                let ($($A,)*) = self;
                vec![$($A.target()),*]
            }
        }

        impl<F, $($A: TaskArg),*> TaskFn<($($A,)*)> for F
        where
            F: for<'b> Fn($(<$A as TaskArg>::Body<'b>),*) + Send + Sync + 'static,
        {
            #[allow(non_snake_case)]
            fn call_with(&self, args: ($($A,)*)) {
                let ($($A,)*) = args;
                // Acquire every slot (value bindings shadow the owners,
                // which stay alive until scope end), then project all the
                // bodies at one call site where they can share a lifetime.
                $(let mut $A = $A.hold();)*
                (self)($(<$A as TaskArg>::project(&mut $A)),*);
            }
        }
    };
}

impl_task_tuple!();
impl_task_tuple!(A0);
impl_task_tuple!(A0, A1);
impl_task_tuple!(A0, A1, A2);
impl_task_tuple!(A0, A1, A2, A3);
impl_task_tuple!(A0, A1, A2, A3, A4);
impl_task_tuple!(A0, A1, A2, A3, A4, A5);
impl_task_tuple!(A0, A1, A2, A3, A4, A5, A6);
impl_task_tuple!(A0, A1, A2, A3, A4, A5, A6, A7);

/// A registered task: invoking it looks like calling the original function.
pub struct TaskCallable<Args: TaskArgs, F: TaskFn<Args>> {
    definition: Arc<TaskDefinition>,
    body: Arc<F>,
    _args: PhantomData<fn(Args)>,
}

impl<Args: TaskArgs, F: TaskFn<Args>> Clone for TaskCallable<Args, F> {
    fn clone(&self) -> Self {
        TaskCallable {
            definition: Arc::clone(&self.definition),
            body: Arc::clone(&self.body),
            _args: PhantomData,
        }
    }
}

impl<Args: TaskArgs, F: TaskFn<Args>> std::fmt::Debug for TaskCallable<Args, F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "TaskCallable({})", self.definition.display_name())
    }
}

impl<Args: TaskArgs, F: TaskFn<Args>> TaskCallable<Args, F> {
    pub fn definition(&self) -> &Arc<TaskDefinition> {
        &self.definition
    }

    /// Invokes the task. Serial mode (global flag or the `serial` cargo
    /// feature) runs the body inline on this thread with no runtime
    /// involved; parallel mode submits an instance to the process-global
    /// runtime and returns before the body runs.
    pub fn call(&self, args: Args) -> Result<(), RuntimeError> {
        #[cfg(feature = "serial")]
        {
            self.run_inline(args);
            Ok(())
        }
        #[cfg(not(feature = "serial"))]
        {
            if serial_mode() {
                self.run_inline(args);
                return Ok(());
            }
            runtime::with_current(|rt| rt.invoke(self, args).map(|_| ()))
        }
    }

    /// Plain synchronous call, bypassing every runtime concern.
    pub fn run_inline(&self, args: Args) {
        self.body.call_with(args);
    }

    /// Type-erases the body; see [`DynTaskCallable`].
    pub fn boxed(&self) -> DynTaskCallable<Args> {
        let body: Box<dyn TaskFn<Args>> = Box::new(SharedBody(Arc::clone(&self.body)));
        TaskCallable {
            definition: Arc::clone(&self.definition),
            body: Arc::new(body),
            _args: PhantomData,
        }
    }

    pub(crate) fn body(&self) -> &Arc<F> {
        &self.body
    }
}

impl Runtime {
    /// Submits one invocation of `callable` to this runtime. The invocation
    /// itself never touches the data arguments; only the task body does,
    /// once scheduled.
    pub fn invoke<Args: TaskArgs, F: TaskFn<Args>>(
        &mut self,
        callable: &TaskCallable<Args, F>,
        args: Args,
    ) -> Result<InstanceId, RuntimeError> {
        let targets = args.targets();
        let mut datums: Vec<DatumId> = targets.iter().filter_map(AccessTarget::datum).collect();
        datums.sort_unstable();
        if datums.windows(2).any(|pair| pair[0] == pair[1]) {
            // The body would need two live references to one region.
            return Err(RuntimeError::AliasedArguments);
        }
        let body = Arc::clone(callable.body());
        self.submit_boxed(
            callable.definition(),
            targets,
            Box::new(move || body.call_with(args)),
        )
    }
}

/// Registers `body` as a task with one access mode per argument.
///
/// Data arguments (`Data<T>`, received by the body as `&mut T`) take the
/// dependency modes; plain numeric arguments take `Parameter` and are copied
/// at submission time. Registration is pure: it touches no runtime state and
/// works before `init`.
///
/// The argument tuple usually needs a turbofish, e.g.
/// `make_task::<(Data<i64>, i64), _>(set, [Out, Parameter], Some("set"), None)`;
/// the [`task!`] macro writes that out from the signature.
pub fn make_task<Args: TaskArgs, F: TaskFn<Args>>(
    body: F,
    modes: impl IntoIterator<Item = AccessMode>,
    name: Option<&str>,
    priority: Option<i32>,
) -> Result<TaskCallable<Args, F>, DefinitionError> {
    let modes: Vec<AccessMode> = modes.into_iter().collect();
    validate_mode_list(&modes, Args::arity())?;
    for (position, (&mode, kind)) in modes.iter().zip(Args::kinds()).enumerate() {
        let ok = match kind {
            ArgKind::Data => mode.is_dependency(),
            ArgKind::Value => mode == AccessMode::Parameter,
        };
        if !ok {
            return Err(DefinitionError::InvalidParameterKind {
                position,
                kind: match kind {
                    ArgKind::Data => "data",
                    ArgKind::Value => "value",
                },
                mode: mode.to_string(),
            });
        }
    }
    Ok(TaskCallable {
        definition: TaskDefinition::register(name, modes, priority),
        body: Arc::new(body),
        _args: PhantomData,
    })
}

/// Registers a named function as a task, naming it after itself:
/// `task!(set(Data<i64>, i64), [Out, Parameter])`. Semantically identical to
/// the equivalent [`make_task`] call; use one or the other per call site.
#[macro_export]
macro_rules! task {
    ($f:ident($($arg_ty:ty),* $(,)?), [$($mode:expr),* $(,)?]) => {
        $crate::make_task::<($($arg_ty,)*), _>(
            $f,
            [$($mode),*],
            Some(stringify!($f)),
            None,
        )
    };
}

/// Statement form of [`task!`] that binds the callable:
/// `taskify!(set_task = set(Data<i64>, i64), [Out, Parameter]);`.
#[macro_export]
macro_rules! taskify {
    ($binding:ident = $f:ident($($arg_ty:ty),* $(,)?), [$($mode:expr),* $(,)?]) => {
        let $binding = $crate::task!($f($($arg_ty),*), [$($mode),*])
            .expect("invalid task definition");
    };
}

static SERIAL_MODE: AtomicBool = AtomicBool::new(false);

/// True when invocations run inline as plain function calls.
pub fn execution_mode() -> bool {
    cfg!(feature = "serial") || SERIAL_MODE.load(Ordering::SeqCst)
}

/// Switches every subsequent [`TaskCallable::call`] between parallel
/// submission (`false`, the default) and inline serial execution (`true`).
/// Fails while the process-global runtime is running.
pub fn set_execution_mode(serial: bool) -> Result<(), RuntimeError> {
    if runtime::in_task_body() || runtime::global_running() {
        return Err(RuntimeError::ModeChangeWhileRunning);
    }
    SERIAL_MODE.store(serial, Ordering::SeqCst);
    Ok(())
}

pub(crate) fn serial_mode() -> bool {
    SERIAL_MODE.load(Ordering::SeqCst)
}
