//! Pluggable multimodal model client: prompt bundles with stable hashes,
//! replayable backends, versioned prompt templates, and total extraction
//! of structured content from free-form model output.

mod backend;
mod extract;
mod prompts;

pub use backend::{FixtureBackend, HttpBackend, HttpModelConfig, MllmBackend, RecordingBackend};
pub use extract::{
    answer_question, attach_frame, extract_choice, parse_bbox_tags, parse_object_list,
    parse_time_tags, recognize_objects, ChoiceSet,
};
pub use prompts::{
    build_generation_prompt, build_mcq_bundle, build_object_prompt, template, template_hash,
    PromptTemplate, MCQ_TEMPLATE_ID, OBJ_REC_TEMPLATE_ID, SG_GEN_TEMPLATE_ID,
};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum MllmError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("no recorded response for prompt {hash} under {dir}")]
    FixtureMissing { hash: String, dir: PathBuf },
    #[error("model request failed after {attempts} attempts: {message}")]
    Http { attempts: u32, message: String },
    #[error("model response could not be read: {0}")]
    BadResponse(String),
    #[error("backend configuration: {0}")]
    Config(String),
    #[error("prompt bundle has no user parts")]
    EmptyBundle,
    #[error("bounding box ({x1}, {y1}, {x2}, {y2}) is not a normalized rectangle")]
    InvalidBBox { x1: f64, y1: f64, x2: f64, y2: f64 },
    #[error("malformed {tag} tag: {message}")]
    MalformedTag { tag: String, message: String },
    #[error("choice set needs 2 to 26 options, got {0}")]
    ChoiceCount(usize),
    #[error("scene graph schema text is empty")]
    EmptySchema,
}

/// Axis-aligned rectangle in normalized image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, MllmError> {
        let ordered = x1 <= x2 && y1 <= y2;
        let in_range = [x1, y1, x2, y2].iter().all(|v| (0.0..=1.0).contains(v));
        if !ordered || !in_range {
            return Err(MllmError::InvalidBBox { x1, y1, x2, y2 });
        }
        Ok(BBox { x1, y1, x2, y2 })
    }
}

/// Reference to one extracted frame, optionally with a rectangle the frame
/// tool must draw before the image is sent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRef {
    pub frame_id: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub time_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub overlay: Option<BBox>,
}

/// One element of a prompt: inline text, a frame reference, or a video
/// manifest reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Part {
    Text { text: String },
    Image { image: ImageRef },
    Video { manifest_id: String },
}

impl Part {
    pub fn text(text: impl Into<String>) -> Self {
        Part::Text { text: text.into() }
    }

    pub fn video(manifest_id: impl Into<String>) -> Self {
        Part::Video {
            manifest_id: manifest_id.into(),
        }
    }

    pub fn image(image: ImageRef) -> Self {
        Part::Image { image }
    }
}

/// A complete prompt: system text plus ordered user parts.
///
/// The hash is the SHA-256 of the bundle's canonical JSON, so any change
/// to content or part order changes the hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_text: String,
    pub user_parts: Vec<Part>,
}

impl PromptBundle {
    pub fn new(system_text: impl Into<String>) -> Self {
        PromptBundle {
            system_text: system_text.into(),
            user_parts: Vec::new(),
        }
    }

    pub fn push(&mut self, part: Part) -> &mut Self {
        self.user_parts.push(part);
        self
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("prompt bundle serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    pub fn num_parts(&self) -> usize {
        self.user_parts.len()
    }

    /// Total characters of system and inline text, the context-size
    /// measure recorded in prediction provenance.
    pub fn context_chars(&self) -> usize {
        self.system_text.chars().count()
            + self
                .user_parts
                .iter()
                .map(|p| match p {
                    Part::Text { text } => text.chars().count(),
                    _ => 0,
                })
                .sum::<usize>()
    }
}
