//! Per-segment scene graph documents and whole-video bundles.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::media::{TimeInterval, MAX_SEGMENT_S};

use super::validate::validate_segment_window;
use super::{parse_scene_graph, ParseOutcome, SceneError, SceneGraph, Violation};

/// Version tag embedded in serialized bundles.
pub const BUNDLE_FORMAT_VERSION: u32 = 1;

/// Segment content: either a validated graph or the quarantined raw model
/// output with the reasons it was rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SegmentPayload {
    Parsed {
        scene_graph: SceneGraph,
    },
    RawWrapped {
        raw_output: String,
        diagnostics: Vec<Violation>,
    },
}

/// One segment of a video together with its placement on the timeline.
///
/// Action timestamps are segment-relative until [`SceneGraphDocument::globalize`]
/// shifts them onto the video timeline; `globalized` records which state
/// the document is in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGraphDocument {
    pub segment_start: f64,
    pub segment_duration: f64,
    pub globalized: bool,
    #[serde(flatten)]
    pub payload: SegmentPayload,
}

impl SceneGraphDocument {
    /// Parses raw model output for the segment at `segment_start`. A bad
    /// segment window or any graph violation quarantines the raw bytes.
    pub fn from_raw(segment_start: f64, segment_duration: f64, raw: &str) -> Self {
        let mut diagnostics: Vec<Violation> = Vec::new();
        if let Some(v) = validate_segment_window(segment_duration, MAX_SEGMENT_S) {
            diagnostics.push(v);
        }
        let payload = match parse_scene_graph(raw) {
            ParseOutcome::Parsed(graph) if diagnostics.is_empty() => {
                SegmentPayload::Parsed { scene_graph: graph }
            }
            ParseOutcome::Parsed(_) => SegmentPayload::RawWrapped {
                raw_output: raw.to_string(),
                diagnostics,
            },
            ParseOutcome::Rejected {
                raw_output,
                violations,
            } => {
                diagnostics.extend(violations);
                SegmentPayload::RawWrapped {
                    raw_output,
                    diagnostics,
                }
            }
        };
        SceneGraphDocument {
            segment_start,
            segment_duration,
            globalized: false,
            payload,
        }
    }

    pub fn is_parsed(&self) -> bool {
        matches!(self.payload, SegmentPayload::Parsed { .. })
    }

    pub fn segment_end(&self) -> f64 {
        self.segment_start + self.segment_duration
    }

    /// Shifts action timestamps onto the video timeline. Idempotent:
    /// already globalized documents are left untouched.
    pub fn globalize(&mut self) {
        if self.globalized {
            return;
        }
        if let SegmentPayload::Parsed { scene_graph } = &mut self.payload {
            for action in &mut scene_graph.actions {
                action.start.0 += self.segment_start;
                if let Some(end) = &mut action.end {
                    end.0 += self.segment_start;
                }
            }
        }
        self.globalized = true;
    }
}

/// All segments of one video, ordered by segment start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneBundle {
    pub format: String,
    pub version: u32,
    pub video_id: String,
    pub segments: Vec<SceneGraphDocument>,
}

impl SceneBundle {
    pub fn parsed_segments(&self) -> impl Iterator<Item = &SceneGraphDocument> {
        self.segments.iter().filter(|d| d.is_parsed())
    }

    pub fn save<W: Write>(&self, mut w: W) -> Result<(), SceneError> {
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        Ok(())
    }

    pub fn save_to_path(&self, path: &Path) -> Result<(), SceneError> {
        let file = std::fs::File::create(path)?;
        self.save(std::io::BufWriter::new(file))
    }

    pub fn load<R: BufRead>(r: R) -> Result<Self, SceneError> {
        Ok(serde_json::from_reader(r)?)
    }

    pub fn load_from_path(path: &Path) -> Result<Self, SceneError> {
        let file = std::fs::File::open(path)?;
        Self::load(std::io::BufReader::new(file))
    }
}

/// Merges globalized segment documents into one bundle.
///
/// Documents are sorted by segment start; every document must already be
/// globalized and segment windows must not overlap (touching is fine).
pub fn merge_segments(
    video_id: &str,
    mut docs: Vec<SceneGraphDocument>,
) -> Result<SceneBundle, SceneError> {
    if docs.iter().any(|d| !d.globalized) {
        return Err(SceneError::NotGlobalized);
    }
    docs.sort_by(|a, b| a.segment_start.total_cmp(&b.segment_start));
    for pair in docs.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if b.segment_start < a.segment_end() {
            return Err(SceneError::OverlappingSegments {
                a_start: a.segment_start,
                a_end: a.segment_end(),
                b_start: b.segment_start,
                b_end: b.segment_end(),
            });
        }
    }
    Ok(SceneBundle {
        format: "egovqa.bundle".to_string(),
        version: BUNDLE_FORMAT_VERSION,
        video_id: video_id.to_string(),
        segments: docs,
    })
}

/// Renders a bundle as prompt-ready JSON.
///
/// With a window, segments starting after the window end are dropped and
/// actions are kept only when their start time falls inside the closed
/// window. Quarantined segments contribute their raw output verbatim.
pub fn render_bundle_for_prompt(bundle: &SceneBundle, window: Option<TimeInterval>) -> String {
    let mut rendered: Vec<serde_json::Value> = Vec::new();
    for doc in &bundle.segments {
        if let Some(w) = window {
            if doc.segment_start > w.end {
                continue;
            }
        }
        let mut obj = serde_json::json!({
            "segment_start": doc.segment_start,
            "segment_duration": doc.segment_duration,
        });
        match &doc.payload {
            SegmentPayload::Parsed { scene_graph } => {
                let mut graph = scene_graph.clone();
                if let Some(w) = window {
                    graph.actions.retain(|a| w.contains(a.start.0));
                }
                obj["scene_graph"] = serde_json::to_value(&graph).expect("graph serializes");
            }
            SegmentPayload::RawWrapped { raw_output, .. } => {
                obj["raw_output"] = serde_json::Value::String(raw_output.clone());
            }
        }
        rendered.push(obj);
    }
    serde_json::to_string_pretty(&rendered).expect("bundle render serializes")
}
