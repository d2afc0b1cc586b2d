//! Referential-integrity rules for parsed scene graphs.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{EdgeKind, NodeKind, SceneGraph};

/// One failed validation rule. `element` names the offending node, edge or
/// action where that is meaningful.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub element: Option<String>,
    pub message: String,
}

impl Violation {
    pub(crate) fn new(rule: &str, element: Option<String>, message: String) -> Self {
        Violation {
            rule: rule.to_string(),
            element,
            message,
        }
    }
}

/// Checks every structural rule and returns all violations found, in rule
/// evaluation order. An empty result means the graph is well formed.
pub fn validate_scene_graph(graph: &SceneGraph) -> Vec<Violation> {
    let mut out = Vec::new();

    let mut seen: HashSet<&str> = HashSet::new();
    for n in &graph.nodes {
        if !seen.insert(n.id.as_str()) {
            out.push(Violation::new(
                "duplicate-node-id",
                Some(n.id.clone()),
                format!("node id {:?} appears more than once", n.id),
            ));
        }
    }

    let kind_of: HashMap<&str, NodeKind> = graph
        .nodes
        .iter()
        .map(|n| (n.id.as_str(), n.kind))
        .collect();

    let environments = graph
        .nodes
        .iter()
        .filter(|n| n.kind == NodeKind::Environment)
        .count();
    if environments != 1 {
        out.push(Violation::new(
            "singleton-environment",
            None,
            format!("expected exactly one environment node, found {environments}"),
        ));
    }
    let agents = graph
        .nodes
        .iter()
        .filter(|n| n.kind == NodeKind::Agent)
        .count();
    if agents > 1 {
        out.push(Violation::new(
            "singleton-agent",
            None,
            format!("expected at most one agent node, found {agents}"),
        ));
    }

    for (i, e) in graph.binary_edges.iter().enumerate() {
        let edge_name = format!("binary_edges[{i}]");
        for endpoint in [&e.from, &e.to] {
            if !kind_of.contains_key(endpoint.as_str()) {
                out.push(Violation::new(
                    "edge-endpoint-unknown",
                    Some(edge_name.clone()),
                    format!("{} edge references unknown node {:?}", e.kind, endpoint),
                ));
            }
        }
        if e.kind == EdgeKind::CreatedFrom {
            for endpoint in [&e.from, &e.to] {
                if let Some(kind) = kind_of.get(endpoint.as_str()) {
                    if *kind != NodeKind::DynamicObject {
                        out.push(Violation::new(
                            "createdfrom-endpoint-kind",
                            Some(edge_name.clone()),
                            format!(
                                "created_from endpoint {:?} must be a dynamic_object, \
                                 found {kind}",
                                endpoint
                            ),
                        ));
                    }
                }
            }
        }
    }

    // Contains/IsChildOf and HasPart/IsPartOf are inverse pairs: asserting
    // both over the same ordered pair contradicts itself.
    let edge_set: HashSet<(EdgeKind, &str, &str)> = graph
        .binary_edges
        .iter()
        .map(|e| (e.kind, e.from.as_str(), e.to.as_str()))
        .collect();
    for (a, b) in [
        (EdgeKind::Contains, EdgeKind::IsChildOf),
        (EdgeKind::HasPart, EdgeKind::IsPartOf),
    ] {
        for (kind, from, to) in &edge_set {
            if *kind == a && edge_set.contains(&(b, from, to)) {
                out.push(Violation::new(
                    "inverse-edge-mismatch",
                    None,
                    format!("{a}({from}, {to}) contradicts {b}({from}, {to})"),
                ));
            }
        }
    }

    // Nodes listed as created by an action must be produced by an edge.
    let created_targets: HashSet<&str> = graph
        .binary_edges
        .iter()
        .filter(|e| e.kind == EdgeKind::CreatedFrom)
        .map(|e| e.to.as_str())
        .collect();

    for (i, action) in graph.actions.iter().enumerate() {
        let action_name = format!("actions[{i}]");
        match kind_of.get(action.agent.as_str()) {
            None => out.push(Violation::new(
                "action-participant-unknown",
                Some(action_name.clone()),
                format!("action agent {:?} is not a node", action.agent),
            )),
            Some(kind) if *kind != NodeKind::Agent => out.push(Violation::new(
                "agent-not-agent-kind",
                Some(action_name.clone()),
                format!("action agent {:?} has kind {kind}", action.agent),
            )),
            Some(_) => {}
        }
        for (slot, id) in action.participants() {
            if !kind_of.contains_key(id) {
                out.push(Violation::new(
                    "action-participant-unknown",
                    Some(action_name.clone()),
                    format!("action {slot} {id:?} is not a node"),
                ));
            }
        }
        for id in &action.created {
            if !created_targets.contains(id.as_str()) {
                out.push(Violation::new(
                    "created-missing-createdfrom",
                    Some(action_name.clone()),
                    format!("created object {id:?} has no created_from edge producing it"),
                ));
            }
        }
        if action.start.0 < 0.0 {
            out.push(Violation::new(
                "timestamp-negative",
                Some(action_name.clone()),
                format!("action starts at {}", action.start.0),
            ));
        }
        if let Some(end) = action.end {
            if end.0 < action.start.0 {
                out.push(Violation::new(
                    "timestamp-order",
                    Some(action_name.clone()),
                    format!(
                        "action ends at {} before it starts at {}",
                        end.0, action.start.0
                    ),
                ));
            }
        }
    }

    out
}

/// Checks that a segment window length is positive and at most the
/// processing cap.
pub(crate) fn validate_segment_window(duration_s: f64, max_s: f64) -> Option<Violation> {
    if duration_s <= 0.0 || duration_s > max_s {
        Some(Violation::new(
            "segment-window",
            None,
            format!("segment duration {duration_s} s outside (0, {max_s}]"),
        ))
    } else {
        None
    }
}
