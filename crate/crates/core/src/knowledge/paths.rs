//! Simple-path enumeration over knowledge graphs and natural language
//! rendering of the resulting relation chains.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::conceptnet::{ConceptId, RelationId};

use super::{KnowledgeError, KnowledgeGraph};

/// Upper bound on enumerated paths per graph unless overridden.
pub const DEFAULT_PATH_CAP: usize = 5000;

/// One hop of a semantic path: the relation taken and the node reached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathHop {
    pub relation: RelationId,
    pub node: ConceptId,
}

/// A root-anchored simple path plus its rendered sentence and, once
/// ranked, its similarity score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticPath {
    pub root: ConceptId,
    pub hops: Vec<PathHop>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub text: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub score: Option<f64>,
}

impl SemanticPath {
    /// Alternating concept and relation ids, root first.
    pub fn elements(&self) -> Vec<String> {
        let mut out = vec![self.root.to_string()];
        for hop in &self.hops {
            out.push(hop.relation.to_string());
            out.push(hop.node.to_string());
        }
        out
    }

    pub fn len(&self) -> usize {
        self.hops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hops.is_empty()
    }
}

/// Enumerates all simple paths out of the graph root with 1 to `graph.depth`
/// hops, in lexicographic (relation, node) order with shorter prefixes
/// first, stopping once `cap` paths have been collected.
pub fn extract_paths(graph: &KnowledgeGraph, cap: usize) -> Vec<SemanticPath> {
    let mut adjacency: BTreeMap<&ConceptId, Vec<(&RelationId, &ConceptId)>> = BTreeMap::new();
    for e in &graph.edges {
        adjacency
            .entry(&e.start)
            .or_default()
            .push((&e.relation, &e.end));
    }
    for targets in adjacency.values_mut() {
        targets.sort();
    }

    let mut out = Vec::new();
    let mut hops: Vec<PathHop> = Vec::new();
    dfs(graph, &adjacency, &graph.root, &mut hops, cap, &mut out);
    out
}

fn dfs(
    graph: &KnowledgeGraph,
    adjacency: &BTreeMap<&ConceptId, Vec<(&RelationId, &ConceptId)>>,
    node: &ConceptId,
    hops: &mut Vec<PathHop>,
    cap: usize,
    out: &mut Vec<SemanticPath>,
) {
    if out.len() >= cap || hops.len() >= graph.depth {
        return;
    }
    let Some(targets) = adjacency.get(node) else {
        return;
    };
    for (relation, end) in targets {
        if out.len() >= cap {
            return;
        }
        // Simple paths only: skip nodes already on the path (or the root).
        if **end == graph.root || hops.iter().any(|h| &h.node == *end) {
            continue;
        }
        hops.push(PathHop {
            relation: (*relation).clone(),
            node: (*end).clone(),
        });
        out.push(SemanticPath {
            root: graph.root.clone(),
            hops: hops.clone(),
            text: None,
            score: None,
        });
        dfs(graph, adjacency, end, hops, cap, out);
        hops.pop();
    }
}

/// Sentence fragment for a relation, or `None` for relations without a
/// rendering template.
fn relation_phrase(relation: &RelationId) -> Option<&'static str> {
    Some(match relation.name() {
        "UsedFor" => "is used for",
        "PartOf" => "is part of",
        "HasProperty" => "has property",
        "AtLocation" => "is located at",
        "CapableOf" => "is capable of",
        "MadeOf" => "is made of",
        "HasA" => "has",
        "IsA" => "is a",
        "Causes" => "causes",
        "ReceivesAction" => "receives action",
        "SimilarTo" => "is similar to",
        "Synonym" => "is a synonym of",
        _ => return None,
    })
}

/// Renders a path as one sentence. Consecutive hops chain with
/// ", which": `dishwasher is located at kitchen, which is part of house`.
pub fn render_path(path: &SemanticPath) -> Result<String, KnowledgeError> {
    if path.hops.is_empty() {
        return Err(KnowledgeError::EmptyPath);
    }
    let mut text = path.root.label();
    for (i, hop) in path.hops.iter().enumerate() {
        let phrase = relation_phrase(&hop.relation)
            .ok_or_else(|| KnowledgeError::MissingTemplate(hop.relation.clone()))?;
        if i > 0 {
            text.push_str(", which ");
        } else {
            text.push(' ');
        }
        text.push_str(phrase);
        text.push(' ');
        text.push_str(&hop.node.label());
    }
    Ok(text)
}
