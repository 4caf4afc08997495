//! Deterministic DOT export of a dependency graph.
//!
//! Nodes and edges are emitted in ascending instance-id order and every
//! formatting choice is fixed, so the output is byte-stable for golden
//! comparisons. Each node is labeled `<name>#<instance_id>` and filled with
//! a palette color assigned round-robin as definitions first appear in the
//! graph, so instances of one definition always share a color.

use std::collections::HashMap;
use std::fmt::Write;

use crate::graph::{instance_label, DependencyGraph};

/// Fill colors, cycled per definition.
pub const PALETTE: [&str; 8] = [
    "lightblue",
    "lightcoral",
    "lightgreen",
    "khaki",
    "plum",
    "lightsalmon",
    "paleturquoise",
    "lightgray",
];

pub fn render(graph: &DependencyGraph) -> String {
    let mut out = String::new();
    out.push_str("digraph task_graph {\n");
    out.push_str("  rankdir=TB;\n");
    out.push_str("  node [shape=ellipse, style=filled];\n");

    let mut color_of_definition: HashMap<u64, &str> = HashMap::new();
    for instance in graph.instances() {
        let def_id = instance.definition().id();
        let next = color_of_definition.len();
        let color = *color_of_definition
            .entry(def_id)
            .or_insert_with(|| PALETTE[next % PALETTE.len()]);
        let _ = writeln!(
            out,
            "  n{} [label=\"{}\", fillcolor=\"{}\"];",
            instance.id(),
            instance_label(instance),
            color
        );
    }
    for (pred, succ) in graph.edges() {
        let _ = writeln!(out, "  n{pred} -> n{succ};");
    }
    out.push_str("}\n");
    out
}
