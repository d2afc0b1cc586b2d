//! Path ranking: sentence embeddings, cosine similarity against reference
//! sentences, and top-k filtering.

use sha2::{Digest, Sha256};

use super::{render_path, KnowledgeError, SemanticPath};

#[derive(Debug, thiserror::Error)]
pub enum EncoderError {
    #[error("embedding backend returned {got} vectors for {want} texts")]
    CountMismatch { want: usize, got: usize },
    #[error("embedding backend returned an empty vector for {0:?}")]
    EmptyVector(String),
    #[error("embedding request failed after {attempts} attempts: {message}")]
    Http { attempts: u32, message: String },
    #[error("embedding response was not valid JSON: {0}")]
    BadResponse(String),
}

/// Sentence encoder. Implementations must return one vector per input
/// text, all with the same dimension.
pub trait EmbeddingBackend {
    fn encode(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, EncoderError>;
}

/// Deterministic offline encoder: each text hashes to a unit vector.
///
/// Useful for reproducible tests and air-gapped runs; identical texts get
/// identical vectors but similarity carries no semantic signal.
#[derive(Debug, Clone)]
pub struct HashEncoder {
    dim: usize,
}

impl HashEncoder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        HashEncoder { dim }
    }

    fn encode_one(&self, text: &str) -> Vec<f32> {
        let digest = Sha256::digest(text.as_bytes());
        let mut state = u64::from_le_bytes(digest[..8].try_into().unwrap());
        // All-zero state would stick; the hash makes this practically
        // unreachable but the guard keeps the generator total.
        if state == 0 {
            state = 0x6a09e667f3bcc909;
        }
        let mut v: Vec<f32> = (0..self.dim)
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                let unit = (state >> 11) as f64 / (1u64 << 53) as f64;
                (unit * 2.0 - 1.0) as f32
            })
            .collect();
        let norm = v.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in &mut v {
                *x = (*x as f64 / norm) as f32;
            }
        } else {
            v[0] = 1.0;
        }
        v
    }
}

impl Default for HashEncoder {
    fn default() -> Self {
        HashEncoder::new(384)
    }
}

impl EmbeddingBackend for HashEncoder {
    fn encode(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, EncoderError> {
        Ok(texts.iter().map(|t| self.encode_one(t)).collect())
    }
}

/// Remote encoder speaking a one-shot JSON protocol:
/// POST `{"texts": [...]}`, response `{"vectors": [[...], ...]}`.
#[derive(Debug, Clone)]
pub struct HttpEncoder {
    pub endpoint: String,
    pub timeout_s: u64,
    pub max_retries: u32,
}

impl HttpEncoder {
    pub fn new(endpoint: &str) -> Self {
        HttpEncoder {
            endpoint: endpoint.to_string(),
            timeout_s: 60,
            max_retries: 3,
        }
    }
}

impl EmbeddingBackend for HttpEncoder {
    fn encode(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, EncoderError> {
        let agent = ureq::AgentBuilder::new()
            .timeout(std::time::Duration::from_secs(self.timeout_s))
            .build();
        let body = serde_json::json!({ "texts": texts });
        let attempts = self.max_retries.max(1);
        let mut last_err = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(std::time::Duration::from_millis(
                    250 * (1 << (attempt - 1)) as u64,
                ));
            }
            match agent.post(&self.endpoint).send_json(&body) {
                Ok(resp) => {
                    let parsed: serde_json::Value = resp
                        .into_json()
                        .map_err(|e| EncoderError::BadResponse(e.to_string()))?;
                    let vectors = parsed
                        .get("vectors")
                        .and_then(|v| v.as_array())
                        .ok_or_else(|| {
                            EncoderError::BadResponse("missing \"vectors\" array".into())
                        })?;
                    let mut out = Vec::with_capacity(vectors.len());
                    for v in vectors {
                        let row: Vec<f32> = v
                            .as_array()
                            .ok_or_else(|| {
                                EncoderError::BadResponse("vector row is not an array".into())
                            })?
                            .iter()
                            .map(|x| x.as_f64().unwrap_or(f64::NAN) as f32)
                            .collect();
                        out.push(row);
                    }
                    if out.len() != texts.len() {
                        return Err(EncoderError::CountMismatch {
                            want: texts.len(),
                            got: out.len(),
                        });
                    }
                    return Ok(out);
                }
                // 4xx responses are not retried; the request is wrong.
                Err(ureq::Error::Status(code, _)) if code < 500 => {
                    return Err(EncoderError::Http {
                        attempts: attempt + 1,
                        message: format!("status {code}"),
                    });
                }
                Err(e) => last_err = e.to_string(),
            }
        }
        Err(EncoderError::Http {
            attempts,
            message: last_err,
        })
    }
}

/// Cosine similarity in f64; zero-norm inputs score 0.
pub fn cosine_similarity(a: &[f32], b: &[f32]) -> f64 {
    let n = a.len().min(b.len());
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for i in 0..n {
        let (x, y) = (a[i] as f64, b[i] as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na.sqrt() * nb.sqrt())
}

/// Renders any unrendered paths, embeds references once and all path texts
/// in one batch, and sets each path's score to its mean cosine similarity
/// against the references.
pub fn score_paths(
    paths: &mut [SemanticPath],
    references: &[String],
    backend: &dyn EmbeddingBackend,
) -> Result<(), KnowledgeError> {
    if references.is_empty() {
        return Err(KnowledgeError::EmptyReferenceSet);
    }
    if paths.is_empty() {
        return Ok(());
    }
    for p in paths.iter_mut() {
        if p.text.is_none() {
            p.text = Some(render_path(p)?);
        }
    }
    let ref_vecs = checked_encode(backend, references)?;
    let texts: Vec<String> = paths
        .iter()
        .map(|p| p.text.clone().expect("rendered above"))
        .collect();
    let path_vecs = checked_encode(backend, &texts)?;

    for (p, v) in paths.iter_mut().zip(&path_vecs) {
        let mean = ref_vecs
            .iter()
            .map(|r| cosine_similarity(v, r))
            .sum::<f64>()
            / ref_vecs.len() as f64;
        p.score = Some(mean);
    }
    Ok(())
}

fn checked_encode(
    backend: &dyn EmbeddingBackend,
    texts: &[String],
) -> Result<Vec<Vec<f32>>, EncoderError> {
    let vecs = backend.encode(texts)?;
    if vecs.len() != texts.len() {
        return Err(EncoderError::CountMismatch {
            want: texts.len(),
            got: vecs.len(),
        });
    }
    for (t, v) in texts.iter().zip(&vecs) {
        if v.is_empty() {
            return Err(EncoderError::EmptyVector(t.clone()));
        }
    }
    Ok(vecs)
}

/// Keeps the `max_paths` best paths, ordered by score descending with
/// rendered text as the deterministic tie-break. Unscored paths sink to
/// the bottom.
pub fn filter_paths(mut paths: Vec<SemanticPath>, max_paths: usize) -> Vec<SemanticPath> {
    paths.sort_by(|a, b| {
        let sa = a.score.unwrap_or(f64::NEG_INFINITY);
        let sb = b.score.unwrap_or(f64::NEG_INFINITY);
        sb.total_cmp(&sa).then_with(|| {
            a.text
                .as_deref()
                .unwrap_or("")
                .cmp(b.text.as_deref().unwrap_or(""))
        })
    });
    paths.truncate(max_paths);
    paths
}

/// Parses the line-oriented reference sentence file (`#` comments).
pub fn parse_reference_sentences(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect()
}

/// Built-in household-activity reference sentences used when no custom
/// set is supplied.
pub fn default_reference_sentences() -> Vec<String> {
    parse_reference_sentences(include_str!("../../data/reference_sentences.default.txt"))
}

#[cfg(test)]
mod tests {
    use super::super::test_support::{c, r};
    use super::super::{KnowledgeError, PathHop, SemanticPath};
    use super::*;

    fn path_with(text: &str, score: Option<f64>) -> SemanticPath {
        SemanticPath {
            root: c("/c/en/root"),
            hops: vec![PathHop {
                relation: r("/r/IsA"),
                node: c("/c/en/x"),
            }],
            text: Some(text.to_string()),
            score,
        }
    }

    /// Planar encoder: every known text maps to (cos t, sin t, 0) so pair
    /// cosines are exact by construction.
    struct PlanarEncoder(Vec<(String, f64)>);

    impl EmbeddingBackend for PlanarEncoder {
        fn encode(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, EncoderError> {
            Ok(texts
                .iter()
                .map(|t| {
                    let cos = self
                        .0
                        .iter()
                        .find(|(k, _)| k == t)
                        .map(|(_, c)| *c)
                        .unwrap_or(1.0);
                    let sin = (1.0 - cos * cos).max(0.0).sqrt();
                    vec![cos as f32, sin as f32, 0.0]
                })
                .collect())
        }
    }

    #[test]
    fn cosine_identities() {
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[1.0, 0.0]), 1.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]), 0.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[-1.0, 0.0]), -1.0);
        assert_eq!(cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]), 0.0);
    }

    #[test]
    fn hash_encoder_is_deterministic_and_unit_norm() {
        let enc = HashEncoder::default();
        let texts = vec!["cupboard is used for storing dishes".to_string()];
        let a = enc.encode(&texts).unwrap();
        let b = enc.encode(&texts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].len(), 384);
        let norm: f64 = a[0].iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-5);
    }

    #[test]
    fn hash_encoder_distinct_texts_differ() {
        let enc = HashEncoder::new(64);
        let vecs = enc
            .encode(&["alpha".to_string(), "beta".to_string()])
            .unwrap();
        assert_ne!(vecs[0], vecs[1]);
        assert!(cosine_similarity(&vecs[0], &vecs[1]).abs() < 0.9);
    }

    #[test]
    fn score_paths_takes_mean_cosine_over_references() {
        // References at cosines 0.8 and 0.4 from the path text: mean 0.6.
        let enc = PlanarEncoder(vec![
            ("p".to_string(), 1.0),
            ("ref_a".to_string(), 0.8),
            ("ref_b".to_string(), 0.4),
        ]);
        let mut paths = vec![path_with("p", None)];
        let refs = vec!["ref_a".to_string(), "ref_b".to_string()];
        score_paths(&mut paths, &refs, &enc).unwrap();
        assert!((paths[0].score.unwrap() - 0.6).abs() < 1e-6);
    }

    #[test]
    fn score_paths_renders_missing_text() {
        let enc = HashEncoder::new(16);
        let mut paths = vec![SemanticPath {
            root: c("/c/en/cupboard"),
            hops: vec![PathHop {
                relation: r("/r/UsedFor"),
                node: c("/c/en/storing_dishes"),
            }],
            text: None,
            score: None,
        }];
        score_paths(&mut paths, &["storage".to_string()], &enc).unwrap();
        assert_eq!(
            paths[0].text.as_deref(),
            Some("cupboard is used for storing dishes")
        );
        assert!(paths[0].score.is_some());
    }

    #[test]
    fn score_paths_rejects_empty_reference_set() {
        let enc = HashEncoder::new(16);
        let mut paths = vec![path_with("p", None)];
        let err = score_paths(&mut paths, &[], &enc).unwrap_err();
        assert!(matches!(err, KnowledgeError::EmptyReferenceSet));
    }

    #[test]
    fn score_paths_empty_paths_is_noop() {
        let enc = HashEncoder::new(16);
        let mut paths: Vec<SemanticPath> = vec![];
        score_paths(&mut paths, &["r".to_string()], &enc).unwrap();
    }

    struct BrokenEncoder;
    impl EmbeddingBackend for BrokenEncoder {
        fn encode(&self, _texts: &[String]) -> Result<Vec<Vec<f32>>, EncoderError> {
            Ok(vec![])
        }
    }

    #[test]
    fn mismatched_vector_count_is_an_error() {
        let mut paths = vec![path_with("p", None)];
        let err = score_paths(&mut paths, &["r".to_string()], &BrokenEncoder).unwrap_err();
        assert!(matches!(
            err,
            KnowledgeError::Encoder(EncoderError::CountMismatch { .. })
        ));
    }

    #[test]
    fn filter_orders_by_score_then_text_and_truncates() {
        let paths = vec![
            path_with("bbb", Some(0.5)),
            path_with("aaa", Some(0.5)),
            path_with("ccc", Some(0.9)),
            path_with("ddd", Some(0.1)),
        ];
        let kept = filter_paths(paths, 3);
        let texts: Vec<&str> = kept.iter().map(|p| p.text.as_deref().unwrap()).collect();
        assert_eq!(texts, vec!["ccc", "aaa", "bbb"]);
    }

    #[test]
    fn filter_sinks_unscored_paths() {
        let paths = vec![path_with("unscored", None), path_with("scored", Some(-5.0))];
        let kept = filter_paths(paths, 2);
        assert_eq!(kept[0].text.as_deref(), Some("scored"));
    }

    #[test]
    fn filter_keeps_everything_when_under_limit() {
        let paths = vec![path_with("a", Some(0.1))];
        assert_eq!(filter_paths(paths, 30).len(), 1);
    }

    #[test]
    fn default_reference_sentences_load() {
        let refs = default_reference_sentences();
        assert!(refs.len() >= 20);
        assert!(refs.iter().all(|s| !s.starts_with('#')));
        assert!(refs.iter().all(|s| !s.trim().is_empty()));
    }

    #[test]
    fn reference_parser_strips_comments_and_blanks() {
        let refs = parse_reference_sentences("# header\n\n  a pan fries food  \n# x\nb\n");
        assert_eq!(refs, vec!["a pan fries food".to_string(), "b".to_string()]);
    }
}
