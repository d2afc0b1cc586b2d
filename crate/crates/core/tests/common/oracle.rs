//! Independent reference implementations the acceptance suite compares
//! against. Both deliberately avoid the library's data structures: the
//! graph builder rescans the flat assertion list once per layer instead
//! of using the adjacency index, and the quantile map walks the sorted
//! sample linearly instead of binary searching.

use std::collections::{BTreeMap, BTreeSet};

use egovqa_core::conceptnet::{AssertionStore, ConceptId, RelationId};

/// Edge identity with the weight carried as raw bits so sets compare
/// exactly.
pub type EdgeKey = (ConceptId, RelationId, ConceptId, u64);

pub struct ReferenceGraph {
    pub layers: BTreeMap<ConceptId, usize>,
    pub edges: BTreeSet<EdgeKey>,
}

/// Layered expansion restated plainly: every layer-k node contributes all
/// its outgoing assertions strictly above the threshold; symmetric
/// relations only count from layer 0; the strongest edge per ordered pair
/// wins, equal weights falling back to the smaller relation id; endpoints
/// first reached while scanning layer k join layer k + 1.
pub fn reference_build(
    store: &AssertionStore,
    root: &ConceptId,
    depth: usize,
    threshold: f64,
) -> ReferenceGraph {
    let mut layers: BTreeMap<ConceptId, usize> = BTreeMap::new();
    layers.insert(root.clone(), 0);
    let mut best: BTreeMap<(ConceptId, ConceptId), (f64, RelationId)> = BTreeMap::new();

    for k in 0..depth {
        let mut discovered: Vec<ConceptId> = Vec::new();
        for a in store.assertions() {
            if layers.get(&a.start) != Some(&k) {
                continue;
            }
            if k > 0 && store.relations().is_symmetric(&a.relation) {
                continue;
            }
            let weight = a.norm_weight.expect("store must be normalized");
            if weight <= threshold {
                continue;
            }
            let key = (a.start.clone(), a.end.clone());
            let replace = match best.get(&key) {
                None => true,
                Some((w, rel)) => weight > *w || (weight == *w && a.relation < *rel),
            };
            if replace {
                best.insert(key, (weight, a.relation.clone()));
            }
            discovered.push(a.end.clone());
        }
        for node in discovered {
            layers.entry(node).or_insert(k + 1);
        }
    }

    let edges = best
        .into_iter()
        .map(|((start, end), (weight, relation))| (start, relation, end, weight.to_bits()))
        .collect();
    ReferenceGraph { layers, edges }
}

/// Empirical-CDF position of `x` in the sorted sample: rank r maps to
/// r / (n - 1), exact matches take the lowest tied rank, in-between
/// values interpolate linearly, everything outside clamps to 0 or 1.
pub fn reference_quantile(sorted: &[f64], x: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return if x > sorted[0] { 1.0 } else { 0.0 };
    }
    if x <= sorted[0] {
        return 0.0;
    }
    if x > sorted[n - 1] {
        return 1.0;
    }
    let denom = (n - 1) as f64;
    for (i, v) in sorted.iter().enumerate() {
        if *v == x {
            return i as f64 / denom;
        }
        if *v > x {
            let lo = sorted[i - 1];
            return ((i - 1) as f64 + (x - lo) / (*v - lo)) / denom;
        }
    }
    unreachable!("x within the sample range must match or be bracketed");
}
