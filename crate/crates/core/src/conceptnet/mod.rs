//! ConceptNet assertion store: dump ingestion, neighbor lookup, and
//! empirical-quantile weight normalization.

mod dump;
mod quantile;

pub use dump::{ingest_dump, load_assertions, IngestStats};
pub use quantile::QuantileTransform;

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

/// Default number of quantile landmarks kept by the weight transform.
pub const DEFAULT_N_QUANTILES: usize = 1000;

/// Version tag embedded in the serialized store header.
pub const STORE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid concept id {0:?}: expected /c/<lang>/<term>")]
    InvalidConcept(String),
    #[error("invalid relation id {0:?}: expected /r/<Name>")]
    InvalidRelation(String),
    #[error("self-loop assertion on {0:?}")]
    SelfLoop(String),
    #[error("normalized weight {0} outside [0,1]")]
    WeightOutOfRange(f64),
    #[error("cannot fit quantile transform on an empty store")]
    EmptyStore,
    #[error("quantile transform needs a nonempty reference sample")]
    EmptyReference,
    #[error("store file is missing its header line")]
    MissingHeader,
    #[error("store file has unsupported format {format:?} version {version}")]
    UnsupportedFormat { format: String, version: u32 },
    #[error("store file line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error("relations file line {line}: {message}")]
    RelationsFile { line: usize, message: String },
}

/// Canonical ConceptNet concept identifier, e.g. `/c/en/dishwasher`.
///
/// Identifiers are normalized to their three-segment form at construction;
/// sense suffixes such as `/c/en/dishwasher/n` are stripped so that all
/// senses of a term share one node.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConceptId(String);

impl ConceptId {
    pub fn new(id: &str) -> Result<Self, StoreError> {
        let mut parts = id.split('/');
        let (empty, ns, lang, term) = (parts.next(), parts.next(), parts.next(), parts.next());
        match (empty, ns, lang, term) {
            (Some(""), Some("c"), Some(lang), Some(term))
                if lang.len() == 2 && !term.is_empty() =>
            {
                Ok(ConceptId(format!("/c/{lang}/{term}")))
            }
            _ => Err(StoreError::InvalidConcept(id.to_string())),
        }
    }

    /// Builds `/c/<lang>/<term>` from a surface form ("storing dishes").
    pub fn from_label(language: &str, label: &str) -> Result<Self, StoreError> {
        let term = label.trim().to_lowercase().replace(' ', "_");
        ConceptId::new(&format!("/c/{language}/{term}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn language(&self) -> &str {
        self.0.split('/').nth(2).unwrap_or("")
    }

    /// Surface form: the last path segment with underscores as spaces.
    pub fn label(&self) -> String {
        self.0.rsplit('/').next().unwrap_or("").replace('_', " ")
    }
}

impl fmt::Display for ConceptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Canonical relation identifier, e.g. `/r/UsedFor`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelationId(String);

impl RelationId {
    pub fn new(id: &str) -> Result<Self, StoreError> {
        let rest = id
            .strip_prefix("/r/")
            .filter(|name| !name.is_empty() && !name.contains('/'));
        match rest {
            Some(_) => Ok(RelationId(id.to_string())),
            None => Err(StoreError::InvalidRelation(id.to_string())),
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Relation name without the `/r/` prefix.
    pub fn name(&self) -> &str {
        self.0.strip_prefix("/r/").unwrap_or(&self.0)
    }
}

impl fmt::Display for RelationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One whitelisted relation together with its symmetry flag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub id: RelationId,
    pub symmetric: bool,
}

/// The predefined relation set R: which relations are ingested and which of
/// them are symmetric (expanded only from the root layer).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationSet {
    relations: Vec<Relation>,
}

impl RelationSet {
    pub fn new(mut relations: Vec<Relation>) -> Self {
        relations.sort_by(|a, b| a.id.cmp(&b.id));
        relations.dedup_by(|a, b| a.id == b.id);
        RelationSet { relations }
    }

    /// The shipped default whitelist of non-lexical semantic relations.
    pub fn default_whitelist() -> Self {
        Self::parse_config(DEFAULT_RELATIONS).expect("built-in relation whitelist must parse")
    }

    /// Parses the line-oriented relations config: one relation id per line,
    /// optionally followed by the word `symmetric`. `#` starts a comment.
    pub fn parse_config(text: &str) -> Result<Self, StoreError> {
        let mut relations = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let id = fields.next().unwrap_or("");
            let id = RelationId::new(id).map_err(|_| StoreError::RelationsFile {
                line: idx + 1,
                message: format!("invalid relation id {id:?}"),
            })?;
            let symmetric = match fields.next() {
                None => false,
                Some("symmetric") => true,
                Some(other) => {
                    return Err(StoreError::RelationsFile {
                        line: idx + 1,
                        message: format!("unexpected token {other:?}"),
                    })
                }
            };
            relations.push(Relation { id, symmetric });
        }
        Ok(RelationSet::new(relations))
    }

    pub fn from_config_file(path: &Path) -> Result<Self, StoreError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_config(&text)
    }

    pub fn contains(&self, id: &RelationId) -> bool {
        self.relations.binary_search_by(|r| r.id.cmp(id)).is_ok()
    }

    pub fn is_symmetric(&self, id: &RelationId) -> bool {
        self.relations
            .binary_search_by(|r| r.id.cmp(id))
            .map(|i| self.relations[i].symmetric)
            .unwrap_or(false)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Relation> {
        self.relations.iter()
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }
}

const DEFAULT_RELATIONS: &str = include_str!("../../data/relations.default.txt");

/// One ConceptNet edge: a relational triple with its confidence weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub start: ConceptId,
    #[serde(rename = "rel")]
    pub relation: RelationId,
    pub end: ConceptId,
    #[serde(rename = "weight")]
    pub raw_weight: f64,
    #[serde(
        rename = "norm_weight",
        skip_serializing_if = "Option::is_none",
        default
    )]
    pub norm_weight: Option<f64>,
}

impl Assertion {
    pub fn new(
        start: ConceptId,
        relation: RelationId,
        end: ConceptId,
        raw_weight: f64,
    ) -> Result<Self, StoreError> {
        if start == end {
            return Err(StoreError::SelfLoop(start.0));
        }
        Ok(Assertion {
            start,
            relation,
            end,
            raw_weight,
            norm_weight: None,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct StoreHeader {
    format: String,
    version: u32,
    language: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct StoreMeta {
    relations: Vec<Relation>,
    quantile: Option<QuantileTransform>,
}

/// Indexed collection of assertions for one language, with the relation
/// whitelist and (once fitted) the weight transform.
///
/// Immutable after [`AssertionStore::normalize_weights`]; safe to share
/// across concurrent readers.
#[derive(Debug, Clone)]
pub struct AssertionStore {
    language: String,
    relations: RelationSet,
    assertions: Vec<Assertion>,
    by_start: HashMap<ConceptId, Vec<usize>>,
    quantile: Option<QuantileTransform>,
}

impl AssertionStore {
    /// Builds a store from explicit assertions. Duplicate (start, relation,
    /// end) triples collapse last-write-wins; rows sort canonically.
    pub fn from_assertions(
        language: &str,
        relations: RelationSet,
        assertions: Vec<Assertion>,
    ) -> Result<Self, StoreError> {
        let mut dedup = std::collections::BTreeMap::new();
        for a in assertions {
            if let Some(nw) = a.norm_weight {
                if !(0.0..=1.0).contains(&nw) {
                    return Err(StoreError::WeightOutOfRange(nw));
                }
            }
            dedup.insert((a.start.clone(), a.relation.clone(), a.end.clone()), a);
        }
        let assertions: Vec<Assertion> = dedup.into_values().collect();
        let by_start = Self::index(&assertions);
        Ok(AssertionStore {
            language: language.to_string(),
            relations,
            assertions,
            by_start,
            quantile: None,
        })
    }

    fn index(assertions: &[Assertion]) -> HashMap<ConceptId, Vec<usize>> {
        let mut by_start: HashMap<ConceptId, Vec<usize>> = HashMap::new();
        for (i, a) in assertions.iter().enumerate() {
            by_start.entry(a.start.clone()).or_default().push(i);
        }
        by_start
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn relations(&self) -> &RelationSet {
        &self.relations
    }

    pub fn len(&self) -> usize {
        self.assertions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assertions.is_empty()
    }

    pub fn assertions(&self) -> &[Assertion] {
        &self.assertions
    }

    pub fn quantile_transform(&self) -> Option<&QuantileTransform> {
        self.quantile.as_ref()
    }

    pub fn is_normalized(&self) -> bool {
        self.quantile.is_some()
    }

    /// Concepts that appear in the start slot of at least one assertion.
    pub fn start_concepts(&self) -> impl Iterator<Item = &ConceptId> {
        self.by_start.keys()
    }

    /// Fits the weight transform on all raw weights currently in the store.
    pub fn fit_quantile_transform(
        &self,
        n_quantiles: usize,
    ) -> Result<QuantileTransform, StoreError> {
        if self.assertions.is_empty() {
            return Err(StoreError::EmptyStore);
        }
        let weights: Vec<f64> = self.assertions.iter().map(|a| a.raw_weight).collect();
        QuantileTransform::fit(&weights, n_quantiles)
    }

    /// Sets every assertion's normalized weight to `qt(raw_weight)` and
    /// records the transform. Idempotent for a fixed transform.
    pub fn normalize_weights(&mut self, qt: QuantileTransform) {
        for a in &mut self.assertions {
            a.norm_weight = Some(qt.transform(a.raw_weight));
        }
        self.quantile = Some(qt);
    }

    /// All assertions out of `concept`, ordered by (relation, end).
    /// Symmetric relations are dropped when `exclude_symmetric` is set.
    /// Unknown concepts yield an empty list.
    pub fn neighbors(&self, concept: &ConceptId, exclude_symmetric: bool) -> Vec<&Assertion> {
        let Some(ids) = self.by_start.get(concept) else {
            return Vec::new();
        };
        let mut out: Vec<&Assertion> = ids
            .iter()
            .map(|&i| &self.assertions[i])
            .filter(|a| !(exclude_symmetric && self.relations.is_symmetric(&a.relation)))
            .collect();
        out.sort_by(|a, b| (&a.relation, &a.end).cmp(&(&b.relation, &b.end)));
        out
    }

    /// Writes the line-delimited store format: a header line, a metadata
    /// line (whitelist + transform), then one assertion per line in
    /// canonical (start, relation, end) order.
    pub fn save<W: Write>(&self, mut w: W) -> Result<(), StoreError> {
        let header = StoreHeader {
            format: "egovqa.store".to_string(),
            version: STORE_FORMAT_VERSION,
            language: self.language.clone(),
        };
        let meta = StoreMeta {
            relations: self.relations.iter().cloned().collect(),
            quantile: self.quantile.clone(),
        };
        serde_json::to_writer(&mut w, &header).map_err(io_err)?;
        w.write_all(b"\n")?;
        serde_json::to_writer(&mut w, &meta).map_err(io_err)?;
        w.write_all(b"\n")?;
        for a in &self.assertions {
            serde_json::to_writer(&mut w, a).map_err(io_err)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save_to_path(&self, path: &Path) -> Result<(), StoreError> {
        let file = std::fs::File::create(path)?;
        self.save(std::io::BufWriter::new(file))
    }

    pub fn load<R: BufRead>(r: R) -> Result<Self, StoreError> {
        let mut lines = r.lines();
        let header_line = lines.next().ok_or(StoreError::MissingHeader)??;
        let header: StoreHeader = serde_json::from_str(&header_line)
            .map_err(|source| StoreError::Parse { line: 1, source })?;
        if header.format != "egovqa.store" || header.version != STORE_FORMAT_VERSION {
            return Err(StoreError::UnsupportedFormat {
                format: header.format,
                version: header.version,
            });
        }
        let meta_line = lines.next().ok_or(StoreError::MissingHeader)??;
        let meta: StoreMeta = serde_json::from_str(&meta_line)
            .map_err(|source| StoreError::Parse { line: 2, source })?;
        let mut assertions = Vec::new();
        for (idx, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let a: Assertion = serde_json::from_str(&line).map_err(|source| StoreError::Parse {
                line: idx + 3,
                source,
            })?;
            assertions.push(a);
        }
        let by_start = Self::index(&assertions);
        Ok(AssertionStore {
            language: header.language,
            relations: RelationSet::new(meta.relations),
            assertions,
            by_start,
            quantile: meta.quantile,
        })
    }

    pub fn load_from_path(path: &Path) -> Result<Self, StoreError> {
        let reader = dump::open_maybe_gzip(path)?;
        Self::load(reader)
    }
}

fn io_err(e: serde_json::Error) -> StoreError {
    StoreError::Io(std::io::Error::new(std::io::ErrorKind::Other, e))
}
