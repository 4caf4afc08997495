//! Dependency tracking: per-datum access history, edge inference for each
//! new instance, and the growing DAG.
//!
//! The engine is a sequential state machine. All mutations must be
//! externally serialized (the runtime does this under its scheduler lock);
//! read-only export may run only while no mutation is in flight.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use crate::model::{
    AccessMode, DatumId, InstanceId, ReductionMode, TaskInstance, TaskState,
};

/// Per-datum access record from which new edges are computed.
///
/// `writer_set` holds the last write the next reader must await (at most one
/// instance under these update rules; kept as a set to mirror its role as an
/// edge source). `reader_set` holds the reads since that write.
/// `reduction_set` holds the open commutative reduction epoch and is always
/// empty in [`ReductionMode::Chain`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatumAccessState {
    pub writer_set: BTreeSet<InstanceId>,
    pub reader_set: BTreeSet<InstanceId>,
    pub reduction_set: BTreeSet<InstanceId>,
}

impl DatumAccessState {
    fn debug_check(&self) {
        debug_assert!(self.writer_set.len() <= 1);
        debug_assert!(self.writer_set.is_disjoint(&self.reader_set));
    }
}

/// Predecessors a new access must wait for, given the datum's current state.
///
/// - `In` waits for the last write, including any open reduction epoch
///   (read-after-write).
/// - `Out` and `InOut` wait for the last write, all reads since it, and any
///   open reduction epoch (write-after-write plus write-after-read).
/// - `Reduction` waits for the last write and the reads since it. In
///   [`ReductionMode::Commutative`] those sets are frozen while an epoch is
///   open, so every reduction in the epoch sees the same snapshot and no
///   edges form between them; in [`ReductionMode::Chain`] the previous
///   reduction *is* the last write, so reductions chain.
///
/// Pure function; `mode` must not be `Parameter`.
pub fn predecessors_for_access(
    state: &DatumAccessState,
    mode: AccessMode,
    reduction_mode: ReductionMode,
) -> BTreeSet<InstanceId> {
    let _ = reduction_mode; // the mode shapes `state` via the update rules
    let mut preds = BTreeSet::new();
    match mode {
        AccessMode::In => {
            preds.extend(&state.writer_set);
            preds.extend(&state.reduction_set);
        }
        AccessMode::Out | AccessMode::InOut => {
            preds.extend(&state.writer_set);
            preds.extend(&state.reader_set);
            preds.extend(&state.reduction_set);
        }
        AccessMode::Reduction => {
            preds.extend(&state.writer_set);
            preds.extend(&state.reader_set);
        }
        AccessMode::Parameter => unreachable!("parameter accesses carry no datum"),
    }
    preds
}

/// Engine errors. Both signal caller bugs rather than recoverable states.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("instance id {0} is not above every id already registered")]
    DuplicateInstanceId(InstanceId),
    #[error("instance {0} is not in the graph")]
    UnknownInstance(InstanceId),
    #[error("instance {id} is {actual}, expected {expected}")]
    InvalidTransition {
        id: InstanceId,
        actual: TaskState,
        expected: TaskState,
    },
}

/// Outcome of registering one instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterReport {
    /// Distinct predecessors, deduplicated across the instance's accesses.
    pub predecessors: BTreeSet<InstanceId>,
    /// State the instance entered: `Ready`, `Waiting`, or `Cancelled` when a
    /// predecessor had already failed or been cancelled.
    pub state: TaskState,
}

struct Node {
    instance: TaskInstance,
    successors: BTreeSet<InstanceId>,
}

/// The growing DAG plus the per-datum history it is inferred from.
///
/// Every edge `(u, v)` satisfies `u < v`, so acyclicity is structural.
/// Completed nodes are retained for export and post-run verification.
pub struct DependencyGraph {
    nodes: BTreeMap<InstanceId, Node>,
    history: HashMap<DatumId, DatumAccessState>,
    reduction_mode: ReductionMode,
    edge_count: usize,
    executed_count: usize,
    failed_count: usize,
    cancelled_count: usize,
}

impl DependencyGraph {
    pub fn new(reduction_mode: ReductionMode) -> Self {
        DependencyGraph {
            nodes: BTreeMap::new(),
            history: HashMap::new(),
            reduction_mode,
            edge_count: 0,
            executed_count: 0,
            failed_count: 0,
            cancelled_count: 0,
        }
    }

    pub fn reduction_mode(&self) -> ReductionMode {
        self.reduction_mode
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Count of `Finished` instances.
    pub fn executed_count(&self) -> usize {
        self.executed_count
    }

    pub fn failed_count(&self) -> usize {
        self.failed_count
    }

    pub fn cancelled_count(&self) -> usize {
        self.cancelled_count
    }

    pub fn instance(&self, id: InstanceId) -> Option<&TaskInstance> {
        self.nodes.get(&id).map(|n| &n.instance)
    }

    pub fn state(&self, id: InstanceId) -> Option<TaskState> {
        self.nodes.get(&id).map(|n| n.instance.state())
    }

    pub fn instances(&self) -> impl Iterator<Item = &TaskInstance> {
        self.nodes.values().map(|n| &n.instance)
    }

    pub fn successors(&self, id: InstanceId) -> impl Iterator<Item = InstanceId> + '_ {
        self.nodes.get(&id).into_iter().flat_map(|n| n.successors.iter().copied())
    }

    /// All edges in ascending `(pred, succ)` order.
    pub fn edges(&self) -> Vec<(InstanceId, InstanceId)> {
        let mut out = Vec::with_capacity(self.edge_count);
        for (&u, node) in &self.nodes {
            for &v in &node.successors {
                out.push((u, v));
            }
        }
        out
    }

    /// The access history of one datum, if it has been touched.
    pub fn datum_state(&self, datum: DatumId) -> Option<&DatumAccessState> {
        self.history.get(&datum)
    }

    /// Registers a new instance: computes its predecessor edges from the
    /// per-datum history, links it into the DAG, and advances the history.
    ///
    /// When the same datum appears in several of the instance's accesses,
    /// every access computes its edges against the pre-instance state (so no
    /// self-edges arise) and the history updates are then applied
    /// left-to-right, which lets the strongest write mode win the final
    /// writer set.
    pub fn register(&mut self, mut instance: TaskInstance) -> Result<RegisterReport, GraphError> {
        let id = instance.id();
        if let Some((&last, _)) = self.nodes.last_key_value() {
            if id <= last {
                return Err(GraphError::DuplicateInstanceId(id));
            }
        }

        // Phase 1: edges against the pre-instance state.
        let mut predecessors: BTreeSet<InstanceId> = BTreeSet::new();
        for (datum, mode) in instance.dependency_accesses() {
            if let Some(state) = self.history.get(&datum) {
                predecessors.extend(predecessors_for_access(state, mode, self.reduction_mode));
            }
        }

        // Phase 2: history updates, left-to-right.
        for (datum, mode) in instance.dependency_accesses() {
            let state = self.history.entry(datum).or_default();
            match (mode, self.reduction_mode) {
                (AccessMode::In, _) => {
                    if !state.writer_set.contains(&id) {
                        state.reader_set.insert(id);
                    }
                }
                (AccessMode::Out | AccessMode::InOut, _)
                | (AccessMode::Reduction, ReductionMode::Chain) => {
                    state.writer_set.clear();
                    state.writer_set.insert(id);
                    state.reader_set.clear();
                    if matches!(mode, AccessMode::Out | AccessMode::InOut) {
                        state.reduction_set.clear();
                    }
                }
                (AccessMode::Reduction, ReductionMode::Commutative) => {
                    state.reduction_set.insert(id);
                }
                (AccessMode::Parameter, _) => unreachable!(),
            }
            state.debug_check();
        }

        let mut unfinished = 0;
        let mut poisoned = false;
        let mut new_edges = 0;
        for &pred in &predecessors {
            // Structural acyclicity: history only ever holds earlier ids.
            assert!(pred < id, "edge source {pred} not below new instance {id}");
            let pred_node = self
                .nodes
                .get_mut(&pred)
                .expect("predecessor must be registered");
            if pred_node.successors.insert(id) {
                new_edges += 1;
            }
            match pred_node.instance.state() {
                TaskState::Finished => {}
                TaskState::Failed | TaskState::Cancelled => poisoned = true,
                _ => unfinished += 1,
            }
        }
        self.edge_count += new_edges;

        let state = if poisoned {
            // A dependency can never be satisfied; joining the cancelled
            // closure keeps barriers from waiting forever.
            self.cancelled_count += 1;
            TaskState::Cancelled
        } else if unfinished == 0 {
            TaskState::Ready
        } else {
            TaskState::Waiting
        };
        instance.set_unfinished(unfinished);
        instance.set_state(state);
        self.nodes.insert(
            id,
            Node {
                instance,
                successors: BTreeSet::new(),
            },
        );

        Ok(RegisterReport {
            predecessors,
            state,
        })
    }

    fn expect_state(
        &mut self,
        id: InstanceId,
        expected: TaskState,
    ) -> Result<&mut Node, GraphError> {
        let node = self
            .nodes
            .get_mut(&id)
            .ok_or(GraphError::UnknownInstance(id))?;
        let actual = node.instance.state();
        if actual != expected {
            return Err(GraphError::InvalidTransition {
                id,
                actual,
                expected,
            });
        }
        Ok(node)
    }

    /// Transitions a dequeued instance `Ready → Running`.
    pub fn mark_running(&mut self, id: InstanceId) -> Result<(), GraphError> {
        let node = self.expect_state(id, TaskState::Ready)?;
        node.instance.set_state(TaskState::Running);
        Ok(())
    }

    /// Transitions `Running → Finished` and returns the successors that just
    /// became ready, in ascending id order.
    pub fn mark_complete(&mut self, id: InstanceId) -> Result<Vec<InstanceId>, GraphError> {
        let node = self.expect_state(id, TaskState::Running)?;
        node.instance.set_state(TaskState::Finished);
        let successors: Vec<InstanceId> = node.successors.iter().copied().collect();
        self.executed_count += 1;
        let mut newly_ready = Vec::new();
        for succ in successors {
            let node = self.nodes.get_mut(&succ).expect("successor registered");
            node.instance.dec_unfinished();
            if node.instance.unfinished_predecessors() == 0
                && node.instance.state() == TaskState::Waiting
            {
                node.instance.set_state(TaskState::Ready);
                newly_ready.push(succ);
            }
        }
        Ok(newly_ready)
    }

    /// Transitions `Running → Failed` and cancels every transitive successor
    /// that has not started. Returns the cancelled ids in ascending order.
    pub fn mark_failed(&mut self, id: InstanceId) -> Result<Vec<InstanceId>, GraphError> {
        let node = self.expect_state(id, TaskState::Running)?;
        node.instance.set_state(TaskState::Failed);
        let mut queue: VecDeque<InstanceId> = node.successors.iter().copied().collect();
        self.failed_count += 1;

        let mut cancelled = BTreeSet::new();
        while let Some(next) = queue.pop_front() {
            if cancelled.contains(&next) {
                continue;
            }
            let node = self.nodes.get_mut(&next).expect("successor registered");
            match node.instance.state() {
                TaskState::Created | TaskState::Waiting | TaskState::Ready => {
                    node.instance.set_state(TaskState::Cancelled);
                    let successors: Vec<InstanceId> = node.successors.iter().copied().collect();
                    self.cancelled_count += 1;
                    cancelled.insert(next);
                    queue.extend(successors);
                }
                // Already cancelled by an earlier failure: its closure was
                // handled then.
                TaskState::Cancelled => {}
                other => {
                    // A successor cannot outrun an unfinished predecessor.
                    unreachable!("successor {next} of failed {id} is {other}")
                }
            }
        }
        Ok(cancelled.into_iter().collect())
    }
}

/// Renders the DAG as deterministic DOT text; see [`crate::dot`].
impl DependencyGraph {
    pub fn to_dot(&self) -> String {
        crate::dot::render(self)
    }
}

pub(crate) fn instance_label(instance: &TaskInstance) -> String {
    format!("{}#{}", instance.definition().display_name(), instance.id())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AccessTarget, TaskDefinition};
    use std::sync::Arc;

    fn def(name: &str, modes: &[AccessMode]) -> Arc<TaskDefinition> {
        TaskDefinition::register(Some(name), modes.to_vec(), None)
    }

    fn datum_instance(
        id: u64,
        definition: &Arc<TaskDefinition>,
        targets: Vec<AccessTarget>,
    ) -> TaskInstance {
        TaskInstance::new(InstanceId::new(id), definition.clone(), targets).unwrap()
    }

    fn ids(v: &[u64]) -> BTreeSet<InstanceId> {
        v.iter().copied().map(InstanceId::new).collect()
    }

    /// The pipelined set/increment/output program over a two-element array:
    /// T1 set(a0), T2 inc(a0), T3 out(a0), T4 set(a1), T5 inc(a0), T6 out(a0).
    fn pipeline_graph() -> (DependencyGraph, DatumId, DatumId) {
        let set = def("set", &[AccessMode::Out, AccessMode::Parameter]);
        let inc = def("increment", &[AccessMode::InOut]);
        let out = def("output", &[AccessMode::In]);
        let a0 = DatumId::fresh();
        let a1 = DatumId::fresh();
        let mut g = DependencyGraph::new(ReductionMode::Chain);
        let steps: Vec<TaskInstance> = vec![
            datum_instance(
                1,
                &set,
                vec![AccessTarget::Datum(a0), AccessTarget::Param(0i64.into())],
            ),
            datum_instance(2, &inc, vec![AccessTarget::Datum(a0)]),
            datum_instance(3, &out, vec![AccessTarget::Datum(a0)]),
            datum_instance(
                4,
                &set,
                vec![AccessTarget::Datum(a1), AccessTarget::Param(1i64.into())],
            ),
            datum_instance(5, &inc, vec![AccessTarget::Datum(a0)]),
            datum_instance(6, &out, vec![AccessTarget::Datum(a0)]),
        ];
        for s in steps {
            g.register(s).unwrap();
        }
        (g, a0, a1)
    }

    fn run_to_completion_order(g: &mut DependencyGraph, order: &[u64]) {
        for &i in order {
            let id = InstanceId::new(i);
            g.mark_running(id).unwrap();
            g.mark_complete(id).unwrap();
        }
    }

    #[test]
    fn first_access_has_no_predecessors() {
        let state = DatumAccessState::default();
        for mode in [AccessMode::In, AccessMode::Out, AccessMode::InOut, AccessMode::Reduction] {
            assert!(predecessors_for_access(&state, mode, ReductionMode::Chain).is_empty());
        }
    }

    #[test]
    fn in_waits_for_writer_only() {
        let state = DatumAccessState {
            writer_set: ids(&[1]),
            reader_set: BTreeSet::new(),
            reduction_set: BTreeSet::new(),
        };
        assert_eq!(
            predecessors_for_access(&state, AccessMode::In, ReductionMode::Chain),
            ids(&[1])
        );
    }

    #[test]
    fn inout_waits_for_writer_and_readers() {
        let state = DatumAccessState {
            writer_set: ids(&[2]),
            reader_set: ids(&[3]),
            reduction_set: BTreeSet::new(),
        };
        assert_eq!(
            predecessors_for_access(&state, AccessMode::InOut, ReductionMode::Chain),
            ids(&[2, 3])
        );
    }

    #[test]
    fn pipeline_edge_set_matches_hand_derivation() {
        let (g, _, _) = pipeline_graph();
        let edges: Vec<(u64, u64)> = g
            .edges()
            .into_iter()
            .map(|(u, v)| (u.get(), v.get()))
            .collect();
        assert_eq!(edges, vec![(1, 2), (2, 3), (2, 5), (3, 5), (5, 6)]);
        assert_eq!(g.edge_count(), 5);
        // T4 is independent.
        assert_eq!(g.successors(InstanceId::new(4)).count(), 0);
        assert_eq!(g.state(InstanceId::new(4)), Some(TaskState::Ready));
    }

    #[test]
    fn all_parameter_task_is_immediately_ready() {
        let noop = def("noop", &[AccessMode::Parameter]);
        let mut g = DependencyGraph::new(ReductionMode::Chain);
        let report = g
            .register(datum_instance(
                1,
                &noop,
                vec![AccessTarget::Param(3i64.into())],
            ))
            .unwrap();
        assert!(report.predecessors.is_empty());
        assert_eq!(report.state, TaskState::Ready);
    }

    #[test]
    fn chain_reductions_serialize() {
        let red = def("reduce", &[AccessMode::Reduction]);
        let d = DatumId::fresh();
        let mut g = DependencyGraph::new(ReductionMode::Chain);
        g.register(datum_instance(1, &red, vec![AccessTarget::Datum(d)]))
            .unwrap();
        let report = g
            .register(datum_instance(2, &red, vec![AccessTarget::Datum(d)]))
            .unwrap();
        assert_eq!(report.predecessors, ids(&[1]));
    }

    #[test]
    fn commutative_reductions_share_a_snapshot() {
        let set = def("set", &[AccessMode::Out]);
        let red = def("reduce", &[AccessMode::Reduction]);
        let out = def("output", &[AccessMode::In]);
        let d = DatumId::fresh();
        let mut g = DependencyGraph::new(ReductionMode::Commutative);
        g.register(datum_instance(1, &set, vec![AccessTarget::Datum(d)]))
            .unwrap();
        let r2 = g
            .register(datum_instance(2, &red, vec![AccessTarget::Datum(d)]))
            .unwrap();
        let r3 = g
            .register(datum_instance(3, &red, vec![AccessTarget::Datum(d)]))
            .unwrap();
        // Same snapshot, no edge between the reductions.
        assert_eq!(r2.predecessors, ids(&[1]));
        assert_eq!(r3.predecessors, ids(&[1]));
        // The next read closes the epoch and waits for both reductions.
        let r4 = g
            .register(datum_instance(4, &out, vec![AccessTarget::Datum(d)]))
            .unwrap();
        assert_eq!(r4.predecessors, ids(&[1, 2, 3]));
    }

    #[test]
    fn commutative_epoch_orders_after_intervening_reader() {
        let red = def("reduce", &[AccessMode::Reduction]);
        let out = def("output", &[AccessMode::In]);
        let d = DatumId::fresh();
        let mut g = DependencyGraph::new(ReductionMode::Commutative);
        g.register(datum_instance(1, &red, vec![AccessTarget::Datum(d)]))
            .unwrap();
        g.register(datum_instance(2, &out, vec![AccessTarget::Datum(d)]))
            .unwrap();
        // The reader saw reduction 1; a later reduction must wait for the
        // reader (write-after-read), ordering it transitively after 1.
        let r3 = g
            .register(datum_instance(3, &red, vec![AccessTarget::Datum(d)]))
            .unwrap();
        assert!(r3.predecessors.contains(&InstanceId::new(2)));
    }

    #[test]
    fn out_after_readers_takes_war_and_waw_edges() {
        let set = def("set", &[AccessMode::Out]);
        let out = def("output", &[AccessMode::In]);
        let d = DatumId::fresh();
        let mut g = DependencyGraph::new(ReductionMode::Chain);
        g.register(datum_instance(1, &set, vec![AccessTarget::Datum(d)]))
            .unwrap();
        g.register(datum_instance(2, &out, vec![AccessTarget::Datum(d)]))
            .unwrap();
        g.register(datum_instance(3, &out, vec![AccessTarget::Datum(d)]))
            .unwrap();
        let report = g
            .register(datum_instance(4, &set, vec![AccessTarget::Datum(d)]))
            .unwrap();
        assert_eq!(report.predecessors, ids(&[1, 2, 3]));
    }

    #[test]
    fn readers_reset_after_write() {
        let set = def("set", &[AccessMode::Out]);
        let out = def("output", &[AccessMode::In]);
        let d = DatumId::fresh();
        let mut g = DependencyGraph::new(ReductionMode::Chain);
        g.register(datum_instance(1, &out, vec![AccessTarget::Datum(d)]))
            .unwrap();
        g.register(datum_instance(2, &set, vec![AccessTarget::Datum(d)]))
            .unwrap();
        let state = g.datum_state(d).unwrap();
        assert!(state.reader_set.is_empty());
        assert_eq!(state.writer_set, ids(&[2]));
    }

    #[test]
    fn same_datum_twice_takes_no_self_edge_and_write_wins() {
        let f = def("f", &[AccessMode::In, AccessMode::Out]);
        let d = DatumId::fresh();
        let mut g = DependencyGraph::new(ReductionMode::Chain);
        g.register(datum_instance(
            1,
            &def("seed", &[AccessMode::Out]),
            vec![AccessTarget::Datum(d)],
        ))
        .unwrap();
        let report = g
            .register(datum_instance(
                2,
                &f,
                vec![AccessTarget::Datum(d), AccessTarget::Datum(d)],
            ))
            .unwrap();
        assert_eq!(report.predecessors, ids(&[1]));
        let state = g.datum_state(d).unwrap();
        assert_eq!(state.writer_set, ids(&[2]));
        assert!(state.reader_set.is_empty());
    }

    #[test]
    fn same_datum_write_then_read_keeps_sets_disjoint() {
        let f = def("f", &[AccessMode::Out, AccessMode::In]);
        let d = DatumId::fresh();
        let mut g = DependencyGraph::new(ReductionMode::Chain);
        g.register(datum_instance(
            1,
            &f,
            vec![AccessTarget::Datum(d), AccessTarget::Datum(d)],
        ))
        .unwrap();
        let state = g.datum_state(d).unwrap();
        assert_eq!(state.writer_set, ids(&[1]));
        assert!(state.reader_set.is_empty());
    }

    #[test]
    fn register_rejects_non_increasing_ids() {
        let f = def("f", &[AccessMode::In]);
        let d = DatumId::fresh();
        let mut g = DependencyGraph::new(ReductionMode::Chain);
        g.register(datum_instance(5, &f, vec![AccessTarget::Datum(d)]))
            .unwrap();
        let err = g
            .register(datum_instance(5, &f, vec![AccessTarget::Datum(d)]))
            .unwrap_err();
        assert_eq!(err, GraphError::DuplicateInstanceId(InstanceId::new(5)));
        let err = g
            .register(datum_instance(3, &f, vec![AccessTarget::Datum(d)]))
            .unwrap_err();
        assert_eq!(err, GraphError::DuplicateInstanceId(InstanceId::new(3)));
    }

    #[test]
    fn completing_first_pipeline_task_readies_the_increment() {
        let (mut g, _, _) = pipeline_graph();
        g.mark_running(InstanceId::new(1)).unwrap();
        let ready = g.mark_complete(InstanceId::new(1)).unwrap();
        assert_eq!(ready, vec![InstanceId::new(2)]);
    }

    #[test]
    fn completing_a_sink_readies_nothing() {
        let (mut g, _, _) = pipeline_graph();
        run_to_completion_order(&mut g, &[1, 2, 3, 4, 5]);
        g.mark_running(InstanceId::new(6)).unwrap();
        assert!(g.mark_complete(InstanceId::new(6)).unwrap().is_empty());
        assert_eq!(g.executed_count(), 6);
    }

    #[test]
    fn completing_increment_readies_only_the_output() {
        let (mut g, _, _) = pipeline_graph();
        run_to_completion_order(&mut g, &[1]);
        g.mark_running(InstanceId::new(2)).unwrap();
        // T5 still awaits T3.
        assert_eq!(
            g.mark_complete(InstanceId::new(2)).unwrap(),
            vec![InstanceId::new(3)]
        );
    }

    #[test]
    fn complete_requires_running() {
        let (mut g, _, _) = pipeline_graph();
        let err = g.mark_complete(InstanceId::new(1)).unwrap_err();
        assert_eq!(
            err,
            GraphError::InvalidTransition {
                id: InstanceId::new(1),
                actual: TaskState::Ready,
                expected: TaskState::Running,
            }
        );
    }

    #[test]
    fn failing_the_increment_cancels_downstream() {
        let (mut g, _, _) = pipeline_graph();
        run_to_completion_order(&mut g, &[1]);
        g.mark_running(InstanceId::new(2)).unwrap();
        let cancelled = g.mark_failed(InstanceId::new(2)).unwrap();
        assert_eq!(
            cancelled,
            vec![InstanceId::new(3), InstanceId::new(5), InstanceId::new(6)]
        );
        assert_eq!(g.failed_count(), 1);
        assert_eq!(g.cancelled_count(), 3);
        // T4 is untouched.
        assert_eq!(g.state(InstanceId::new(4)), Some(TaskState::Ready));
    }

    #[test]
    fn failing_a_sink_cancels_nothing() {
        let (mut g, _, _) = pipeline_graph();
        run_to_completion_order(&mut g, &[1, 2, 3, 4, 5]);
        g.mark_running(InstanceId::new(6)).unwrap();
        assert!(g.mark_failed(InstanceId::new(6)).unwrap().is_empty());
    }

    #[test]
    fn failing_after_partial_completion_cancels_the_remainder() {
        let (mut g, _, _) = pipeline_graph();
        run_to_completion_order(&mut g, &[1, 2, 3, 4]);
        g.mark_running(InstanceId::new(5)).unwrap();
        let cancelled = g.mark_failed(InstanceId::new(5)).unwrap();
        assert_eq!(cancelled, vec![InstanceId::new(6)]);
    }

    #[test]
    fn registering_against_a_failed_writer_cancels_immediately() {
        let set = def("set", &[AccessMode::Out]);
        let out = def("output", &[AccessMode::In]);
        let d = DatumId::fresh();
        let mut g = DependencyGraph::new(ReductionMode::Chain);
        g.register(datum_instance(1, &set, vec![AccessTarget::Datum(d)]))
            .unwrap();
        g.mark_running(InstanceId::new(1)).unwrap();
        g.mark_failed(InstanceId::new(1)).unwrap();
        let report = g
            .register(datum_instance(2, &out, vec![AccessTarget::Datum(d)]))
            .unwrap();
        assert_eq!(report.state, TaskState::Cancelled);
    }

    #[test]
    fn empty_graph_has_no_edges() {
        let g = DependencyGraph::new(ReductionMode::Chain);
        assert!(g.is_empty());
        assert!(g.edges().is_empty());
    }
}
