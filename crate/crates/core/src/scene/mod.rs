//! Typed video scene graphs: strongly-typed nodes, binary edges, and
//! timestamped action hyperedges, with a total parser that quarantines
//! malformed model output instead of failing.

mod bundle;
mod validate;

pub use bundle::{
    merge_segments, render_bundle_for_prompt, SceneBundle, SceneGraphDocument, SegmentPayload,
};
pub use validate::{validate_scene_graph, Violation};

use std::fmt;

use serde::{Deserialize, Serialize};

/// Version tag of the scene graph wire schema.
pub const SCENE_SCHEMA_VERSION: &str = "scene-graph-schema/v1";

/// JSON Schema document describing the scene graph wire format.
pub const SCENE_SCHEMA_JSON: &str = include_str!("../../schema/scene_graph.schema.json");

#[derive(Debug, thiserror::Error)]
pub enum SceneError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("segment list is not globalized; adjust timestamps first")]
    NotGlobalized,
    #[error("overlapping segments: [{a_start}, {a_end}) and [{b_start}, {b_end})")]
    OverlappingSegments {
        a_start: f64,
        a_end: f64,
        b_start: f64,
        b_end: f64,
    },
    #[error("bundle serialization failed: {0}")]
    Serialize(#[from] serde_json::Error),
}

/// What a node denotes in the environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Agent,
    Environment,
    EnvironmentChild,
    EnvironmentChildPart,
    DynamicObject,
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NodeKind::Agent => "agent",
            NodeKind::Environment => "environment",
            NodeKind::EnvironmentChild => "environment_child",
            NodeKind::EnvironmentChildPart => "environment_child_part",
            NodeKind::DynamicObject => "dynamic_object",
        };
        f.write_str(s)
    }
}

/// Static relation between two nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Contains,
    IsChildOf,
    HasPart,
    IsPartOf,
    InitiallyLocatedAt,
    CreatedFrom,
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EdgeKind::Contains => "contains",
            EdgeKind::IsChildOf => "is_child_of",
            EdgeKind::HasPart => "has_part",
            EdgeKind::IsPartOf => "is_part_of",
            EdgeKind::InitiallyLocatedAt => "initially_located_at",
            EdgeKind::CreatedFrom => "created_from",
        };
        f.write_str(s)
    }
}

/// Seconds since segment start (or video start once globalized).
///
/// Accepts numbers or clock strings (`"M:SS"`, `"H:MM:SS"`, fractional
/// seconds allowed) on the wire; always serializes as a number.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct Timestamp(pub f64);

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D>(deserializer: D) -> Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Wire {
            Number(f64),
            Clock(String),
        }
        match Wire::deserialize(deserializer)? {
            Wire::Number(s) => Ok(Timestamp(s)),
            Wire::Clock(text) => parse_clock(&text)
                .map(Timestamp)
                .ok_or_else(|| serde::de::Error::custom(format!("invalid timestamp {text:?}"))),
        }
    }
}

/// Parses `M:SS`, `MM:SS` or `H:MM:SS` into seconds. The final field may
/// carry a fraction.
pub fn parse_clock(text: &str) -> Option<f64> {
    let fields: Vec<&str> = text.split(':').collect();
    if !(2..=3).contains(&fields.len()) {
        return None;
    }
    let mut total = 0.0f64;
    for (i, field) in fields.iter().enumerate() {
        if field.is_empty() {
            return None;
        }
        let last = i == fields.len() - 1;
        let value: f64 = if last {
            field.parse().ok()?
        } else {
            // Non-final fields are whole numbers.
            field.parse::<u32>().ok()? as f64
        };
        if !last && i > 0 && value >= 60.0 {
            return None;
        }
        if last && !(0.0..60.0).contains(&value) {
            return None;
        }
        total = total * 60.0 + value;
    }
    Some(total)
}

/// Formats seconds as `M:SS` or `H:MM:SS` (whole seconds only).
pub fn format_clock(seconds: f64) -> String {
    let total = seconds.round().max(0.0) as u64;
    let (h, m, s) = (total / 3600, (total % 3600) / 60, total % 60);
    if h > 0 {
        format!("{h}:{m:02}:{s:02}")
    } else {
        format!("{m}:{s:02}")
    }
}

/// One entity in the scene. `articulated` marks objects with movable
/// parts (doors, lids).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneNode {
    pub id: String,
    pub kind: NodeKind,
    pub description: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub initial_state: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub articulated: Option<bool>,
}

/// Directed static relation between two nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinaryEdge {
    pub kind: EdgeKind,
    pub from: String,
    pub to: String,
}

/// Timestamped interaction connecting the agent to optional participant
/// slots. `created` lists nodes that come into existence through this
/// action; each must also be the `to` endpoint of a `created_from` edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionHyperedge {
    pub action: String,
    pub agent: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub source: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub target: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub location: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tool: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub created: Vec<String>,
    pub start: Timestamp,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub end: Option<Timestamp>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub resulting_state_of_source: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub resulting_state_of_target: Option<String>,
}

impl ActionHyperedge {
    /// Filled participant slots other than the agent, with the slot name.
    pub fn participants(&self) -> Vec<(&'static str, &str)> {
        let mut out = Vec::new();
        for (slot, value) in [
            ("source", &self.source),
            ("target", &self.target),
            ("location", &self.location),
            ("tool", &self.tool),
        ] {
            if let Some(id) = value {
                out.push((slot, id.as_str()));
            }
        }
        for id in &self.created {
            out.push(("created", id.as_str()));
        }
        out
    }
}

/// One parsed scene graph segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneGraph {
    pub nodes: Vec<SceneNode>,
    #[serde(default)]
    pub binary_edges: Vec<BinaryEdge>,
    #[serde(default)]
    pub actions: Vec<ActionHyperedge>,
}

impl SceneGraph {
    pub fn node(&self, id: &str) -> Option<&SceneNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn node_ids(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(|n| n.id.as_str())
    }
}

/// Outcome of a total parse: either a valid graph or the quarantined raw
/// bytes plus the reasons it was rejected.
#[derive(Debug, Clone, PartialEq)]
pub enum ParseOutcome {
    Parsed(SceneGraph),
    Rejected {
        raw_output: String,
        violations: Vec<Violation>,
    },
}

impl ParseOutcome {
    pub fn is_parsed(&self) -> bool {
        matches!(self, ParseOutcome::Parsed(_))
    }
}

/// Parses model output into a scene graph. Never fails: syntactically or
/// semantically invalid input comes back as `Rejected` with the original
/// bytes preserved verbatim.
pub fn parse_scene_graph(raw: &str) -> ParseOutcome {
    let reject = |rule: &str, message: String| ParseOutcome::Rejected {
        raw_output: raw.to_string(),
        violations: vec![Violation {
            rule: rule.to_string(),
            element: None,
            message,
        }],
    };
    let value: serde_json::Value = match serde_json::from_str(raw) {
        Ok(v) => v,
        Err(e) => return reject("json-syntax", e.to_string()),
    };
    let graph: SceneGraph = match serde_json::from_value(value) {
        Ok(g) => g,
        Err(e) => return reject("schema-shape", e.to_string()),
    };
    let violations = validate_scene_graph(&graph);
    if violations.is_empty() {
        ParseOutcome::Parsed(graph)
    } else {
        ParseOutcome::Rejected {
            raw_output: raw.to_string(),
            violations,
        }
    }
}
