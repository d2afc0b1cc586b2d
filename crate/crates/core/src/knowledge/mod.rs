//! Object-rooted knowledge graphs: depth-bounded expansion from a root
//! concept over a normalized assertion store, path enumeration, natural
//! language rendering, and similarity-based path ranking.

mod paths;
mod ranking;

pub use paths::{extract_paths, render_path, PathHop, SemanticPath, DEFAULT_PATH_CAP};
pub use ranking::{
    cosine_similarity, default_reference_sentences, filter_paths, parse_reference_sentences,
    score_paths, EmbeddingBackend, EncoderError, HashEncoder, HttpEncoder,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::conceptnet::{AssertionStore, ConceptId, RelationId};

/// Expansion depth used when none is configured.
pub const DEFAULT_GRAPH_DEPTH: usize = 3;
/// Strict lower bound on normalized edge weights kept during expansion.
pub const DEFAULT_WEIGHT_THRESHOLD: f64 = 0.7;
/// Ranked paths kept per root after filtering.
pub const DEFAULT_MAX_PATHS: usize = 30;

#[derive(Debug, thiserror::Error)]
pub enum KnowledgeError {
    #[error("assertion store has no fitted weight transform; normalize weights first")]
    StoreNotNormalized,
    #[error("graph depth must be at least 1")]
    ZeroDepth,
    #[error("no rendering template for relation {0}")]
    MissingTemplate(RelationId),
    #[error("cannot render a path with no hops")]
    EmptyPath,
    #[error("reference sentence set is empty")]
    EmptyReferenceSet,
    #[error(transparent)]
    Encoder(#[from] EncoderError),
}

/// One directed edge retained in a knowledge graph, with its normalized
/// weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub start: ConceptId,
    pub relation: RelationId,
    pub end: ConceptId,
    pub weight: f64,
}

/// Knowledge graph rooted at one concept.
///
/// `layers` maps every reachable node to its expansion layer; the root is
/// layer 0. Edges are stored in canonical (start, relation, end) order and
/// hold at most one edge per ordered node pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeGraph {
    pub root: ConceptId,
    pub depth: usize,
    pub threshold: f64,
    pub edges: Vec<GraphEdge>,
    pub layers: BTreeMap<ConceptId, usize>,
}

impl KnowledgeGraph {
    pub fn node_count(&self) -> usize {
        self.layers.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }
}

/// Expands a knowledge graph around `root`.
///
/// Layer by layer up to `depth`, every frontier node's outgoing assertions
/// with normalized weight strictly above `threshold` become candidate
/// edges. Symmetric relations only expand from the root itself. When two
/// candidates connect the same ordered node pair, the heavier edge wins;
/// equal weights fall back to the lexicographically smaller relation id.
/// A root with no assertions yields a root-only graph.
pub fn build_graph(
    store: &AssertionStore,
    root: &ConceptId,
    depth: usize,
    threshold: f64,
) -> Result<KnowledgeGraph, KnowledgeError> {
    if !store.is_normalized() {
        return Err(KnowledgeError::StoreNotNormalized);
    }
    if depth == 0 {
        return Err(KnowledgeError::ZeroDepth);
    }

    let mut layers: BTreeMap<ConceptId, usize> = BTreeMap::new();
    layers.insert(root.clone(), 0);
    // Ordered pair -> (relation, weight) of the strongest edge seen.
    let mut best: BTreeMap<(ConceptId, ConceptId), (RelationId, f64)> = BTreeMap::new();
    let mut frontier = vec![root.clone()];

    for layer in 0..depth {
        let mut next: Vec<ConceptId> = Vec::new();
        for node in &frontier {
            for a in store.neighbors(node, layer > 0) {
                let weight = a.norm_weight.ok_or(KnowledgeError::StoreNotNormalized)?;
                if weight <= threshold {
                    continue;
                }
                let key = (a.start.clone(), a.end.clone());
                let candidate = (a.relation.clone(), weight);
                match best.get(&key) {
                    Some((rel, w)) if *w > weight || (*w == weight && rel <= &candidate.0) => {}
                    _ => {
                        best.insert(key, candidate);
                    }
                }
                if !layers.contains_key(&a.end) {
                    layers.insert(a.end.clone(), layer + 1);
                    next.push(a.end.clone());
                }
            }
        }
        next.sort();
        next.dedup();
        frontier = next;
        if frontier.is_empty() {
            break;
        }
    }

    let edges = best
        .into_iter()
        .map(|((start, end), (relation, weight))| GraphEdge {
            start,
            relation,
            end,
            weight,
        })
        .collect::<Vec<_>>();
    let mut edges = edges;
    edges.sort_by(|a, b| (&a.start, &a.relation, &a.end).cmp(&(&b.start, &b.relation, &b.end)));

    Ok(KnowledgeGraph {
        root: root.clone(),
        depth,
        threshold,
        edges,
        layers,
    })
}
