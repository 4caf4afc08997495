//! Schedule verification: checks recorded start/end events against the
//! dependency graph (every edge's predecessor must end before its successor
//! starts), plus the line-oriented event file format.
//!
//! Event lines are `<seq> <start|end> <instance_id>`.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use weft::{
    AccessMode, AccessTarget, DatumId, DependencyGraph, EventKind, InstanceId, ParamValue,
    ReductionMode, ScheduleEvent, TaskDefinition, TaskInstance,
};

use crate::trace::{StepTarget, TraceProgram};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScheduleError {
    #[error("malformed event log: {0}")]
    Malformed(String),
    #[error("bad event line `{line}`: {reason}")]
    Parse { line: String, reason: String },
}

/// Outcome of a verification: either every edge is respected, or the list
/// of violated edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Ok,
    Violations(Vec<(InstanceId, InstanceId)>),
}

impl Verdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, Verdict::Ok)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Ok => write!(f, "OK"),
            Verdict::Violations(edges) => {
                write!(f, "{} violated edge(s):", edges.len())?;
                for (u, v) in edges {
                    write!(f, " ({u},{v})")?;
                }
                Ok(())
            }
        }
    }
}

/// Checks that for every edge `(u, v)` of `graph`, `u` ended before `v`
/// started. Instances without events (never scheduled, e.g. cancelled) pose
/// no constraint on their outgoing edges.
pub fn verify_schedule(
    events: &[ScheduleEvent],
    graph: &DependencyGraph,
) -> Result<Verdict, ScheduleError> {
    let mut starts: HashMap<InstanceId, u64> = HashMap::new();
    let mut ends: HashMap<InstanceId, u64> = HashMap::new();
    let mut seqs: HashMap<u64, InstanceId> = HashMap::new();

    for event in events {
        if graph.instance(event.instance).is_none() {
            return Err(ScheduleError::Malformed(format!(
                "event references unknown instance {}",
                event.instance
            )));
        }
        if let Some(other) = seqs.insert(event.seq, event.instance) {
            return Err(ScheduleError::Malformed(format!(
                "sequence {} used by instances {} and {}",
                event.seq, other, event.instance
            )));
        }
        let slot = match event.kind {
            EventKind::Start => &mut starts,
            EventKind::End => &mut ends,
        };
        if slot.insert(event.instance, event.seq).is_some() {
            return Err(ScheduleError::Malformed(format!(
                "instance {} has more than one {:?} event",
                event.instance, event.kind
            )));
        }
    }
    for (&id, &end) in &ends {
        match starts.get(&id) {
            None => {
                return Err(ScheduleError::Malformed(format!(
                    "instance {id} ended without starting"
                )))
            }
            Some(&start) if start >= end => {
                return Err(ScheduleError::Malformed(format!(
                    "instance {id} starts at {start}, after its end at {end}"
                )))
            }
            Some(_) => {}
        }
    }
    for &id in starts.keys() {
        if !ends.contains_key(&id) {
            return Err(ScheduleError::Malformed(format!(
                "instance {id} started but never ended"
            )));
        }
    }

    let mut violations = Vec::new();
    for (u, v) in graph.edges() {
        let Some(&v_start) = starts.get(&v) else {
            continue;
        };
        match ends.get(&u) {
            Some(&u_end) if u_end < v_start => {}
            _ => violations.push((u, v)),
        }
    }
    if violations.is_empty() {
        Ok(Verdict::Ok)
    } else {
        Ok(Verdict::Violations(violations))
    }
}

pub fn format_events(events: &[ScheduleEvent]) -> String {
    let mut out = String::new();
    for event in events {
        let kind = match event.kind {
            EventKind::Start => "start",
            EventKind::End => "end",
        };
        out.push_str(&format!("{} {} {}\n", event.seq, kind, event.instance));
    }
    out
}

pub fn parse_events(text: &str) -> Result<Vec<ScheduleEvent>, ScheduleError> {
    let mut events = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |reason: &str| ScheduleError::Parse {
            line: line.to_string(),
            reason: reason.to_string(),
        };
        let mut tokens = line.split_whitespace();
        let seq: u64 = tokens
            .next()
            .ok_or_else(|| err("missing sequence"))?
            .parse()
            .map_err(|_| err("bad sequence number"))?;
        let kind = match tokens.next().ok_or_else(|| err("missing kind"))? {
            "start" => EventKind::Start,
            "end" => EventKind::End,
            _ => return Err(err("kind must be start|end")),
        };
        let instance: u64 = tokens
            .next()
            .ok_or_else(|| err("missing instance id"))?
            .parse()
            .map_err(|_| err("bad instance id"))?;
        if tokens.next().is_some() {
            return Err(err("trailing tokens"));
        }
        events.push(ScheduleEvent {
            seq,
            kind,
            instance: InstanceId::new(instance),
        });
    }
    Ok(events)
}

/// Rebuilds the dependency graph a trace program induces, without running
/// anything. Uses the default Chain reduction mode.
pub fn build_graph(program: &TraceProgram) -> DependencyGraph {
    let mut defs: HashMap<&'static str, Arc<TaskDefinition>> = HashMap::new();
    let mut graph = DependencyGraph::new(ReductionMode::Chain);
    for (index, step) in program.steps.iter().enumerate() {
        let accesses = step.accesses();
        let def = defs
            .entry(step.kind_name())
            .or_insert_with(|| {
                let modes: Vec<AccessMode> = accesses.iter().map(|&(m, _)| m).collect();
                TaskDefinition::register(Some(step.kind_name()), modes, None)
            })
            .clone();
        let targets = accesses
            .iter()
            .map(|&(_, target)| match target {
                StepTarget::Datum(d) => AccessTarget::Datum(DatumId::from_raw(d as u64)),
                StepTarget::Param(v) => AccessTarget::Param(ParamValue::Int(v)),
            })
            .collect();
        let instance = TaskInstance::new(InstanceId::new(index as u64 + 1), def, targets)
            .expect("trace steps are well-formed");
        graph.register(instance).expect("ids are monotone");
    }
    graph
}
