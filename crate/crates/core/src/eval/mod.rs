//! Inference orchestration and evaluation: question records, inference
//! configurations, per-category scoring, and per-micro-category ensemble
//! submission assembly.

mod ensemble;
mod run;
mod score;

pub use ensemble::{emit_submission, select_ensemble, MethodAssignment};
pub use run::{run_all, run_question, RunResources};
pub use score::{load_report, save_report, score, BucketStats, CategoryReport};

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::mllm::MllmError;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error("question {0}: {1}")]
    BadQuestion(String, String),
    #[error("duplicate question id {0:?}")]
    DuplicateQuestion(String),
    #[error("mode {0:?} requires the video to be included")]
    VideoRequired(String),
    #[error("unknown inference mode {0:?}")]
    BadMode(String),
    #[error("mode {mode} is missing a resource: {artifact}")]
    MissingResource { mode: String, artifact: String },
    #[error(transparent)]
    Mllm(#[from] MllmError),
    #[error("prediction references unknown question {0:?}")]
    UnknownQuestion(String),
    #[error("question {0:?} has no gold answer")]
    MissingGold(String),
    #[error("duplicate prediction for question {0:?}")]
    DuplicatePrediction(String),
    #[error("no predictions to score")]
    EmptyPredictions,
    #[error("predictions mix inference configurations")]
    MixedConfigs,
    #[error("no reports to select from")]
    NoReports,
    #[error("reports disagree on micro-categories: {0}")]
    InconsistentMicros(String),
    #[error("no method assigned for micro-category {0:?}")]
    UnassignedMicro(String),
    #[error("submission is missing predictions for: {0}")]
    MissingPredictions(String),
    #[error("report serialization failed: {0}")]
    Serialize(#[from] serde_json::Error),
}

/// The seven benchmark question categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "3D Perception")]
    Perception3d,
    Action,
    Gaze,
    Ingredient,
    Nutrition,
    #[serde(rename = "Object Motion")]
    ObjectMotion,
    Recipe,
}

impl Category {
    pub const ALL: [Category; 7] = [
        Category::Perception3d,
        Category::Action,
        Category::Gaze,
        Category::Ingredient,
        Category::Nutrition,
        Category::ObjectMotion,
        Category::Recipe,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Category::Perception3d => "3D Perception",
            Category::Action => "Action",
            Category::Gaze => "Gaze",
            Category::Ingredient => "Ingredient",
            Category::Nutrition => "Nutrition",
            Category::ObjectMotion => "Object Motion",
            Category::Recipe => "Recipe",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Context configuration for one inference pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "video")]
    VideoOnly,
    #[serde(rename = "snet")]
    SNet,
    #[serde(rename = "knet")]
    KNet,
    #[serde(rename = "snet+knet")]
    SNetPlusKNet,
    #[serde(rename = "knet-from-snet")]
    KNetFromSNetObjects,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::VideoOnly,
        Mode::SNet,
        Mode::KNet,
        Mode::SNetPlusKNet,
        Mode::KNetFromSNetObjects,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::VideoOnly => "video",
            Mode::SNet => "snet",
            Mode::KNet => "knet",
            Mode::SNetPlusKNet => "snet+knet",
            Mode::KNetFromSNetObjects => "knet-from-snet",
        }
    }

    /// Whether the raw video is part of the prompt by default. Scene graph
    /// text replaces the video in plain scene-graph mode.
    pub fn default_include_video(&self) -> bool {
        !matches!(self, Mode::SNet)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| EvalError::BadMode(s.to_string()))
    }
}

/// Mode plus the video-inclusion flag. Video-only inference cannot drop
/// the video.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct InferenceConfig {
    pub mode: Mode,
    pub include_video: bool,
}

impl InferenceConfig {
    pub fn new(mode: Mode, include_video: bool) -> Result<Self, EvalError> {
        if mode == Mode::VideoOnly && !include_video {
            return Err(EvalError::VideoRequired(mode.to_string()));
        }
        Ok(InferenceConfig {
            mode,
            include_video,
        })
    }

    pub fn standard(mode: Mode) -> Self {
        InferenceConfig {
            mode,
            include_video: mode.default_include_video(),
        }
    }
}

impl fmt::Display for InferenceConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}",
            self.mode,
            if self.include_video == self.mode.default_include_video() {
                ""
            } else if self.include_video {
                "+video"
            } else {
                "-video"
            }
        )
    }
}

/// One benchmark question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuestionRecord {
    pub id: String,
    pub video_id: String,
    pub category: Category,
    pub micro_category: String,
    pub question_text: String,
    pub choices: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gold: Option<usize>,
    /// Pre-extracted frame id pinned to the question, overriding TIME tags.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub image: Option<String>,
}

impl QuestionRecord {
    fn validate(&self) -> Result<(), EvalError> {
        let bad = |msg: String| EvalError::BadQuestion(self.id.clone(), msg);
        if self.id.is_empty() {
            return Err(bad("empty id".to_string()));
        }
        if self.id.contains([',', '"', '\n', '\r']) {
            return Err(bad("id contains CSV-unsafe characters".to_string()));
        }
        if !(2..=26).contains(&self.choices.len()) {
            return Err(bad(format!(
                "{} choices outside 2..=26",
                self.choices.len()
            )));
        }
        if let Some(g) = self.gold {
            if g >= self.choices.len() {
                return Err(bad(format!(
                    "gold index {g} out of range for {} choices",
                    self.choices.len()
                )));
            }
        }
        Ok(())
    }
}

/// Reads a JSON-lines question file, validating every record and
/// rejecting duplicate ids.
pub fn load_questions<R: BufRead>(r: R) -> Result<Vec<QuestionRecord>, EvalError> {
    let mut out: Vec<QuestionRecord> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let q: QuestionRecord = serde_json::from_str(&line).map_err(|source| EvalError::Parse {
            line: idx + 1,
            source,
        })?;
        q.validate()?;
        if !seen.insert(q.id.clone()) {
            return Err(EvalError::DuplicateQuestion(q.id));
        }
        out.push(q);
    }
    Ok(out)
}

pub fn load_questions_from_path(path: &Path) -> Result<Vec<QuestionRecord>, EvalError> {
    let file = std::fs::File::open(path)?;
    load_questions(std::io::BufReader::new(file))
}

/// How a prediction was produced, for audit and replay.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub prompt_hash: String,
    pub template_hash: String,
    pub context_chars: usize,
    pub num_parts: usize,
}

/// One model answer for one question under one configuration. A missing
/// answer is an abstention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub question_id: String,
    pub category: Category,
    pub micro_category: String,
    pub mode: Mode,
    pub include_video: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub answer: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub answer_label: Option<String>,
    pub provenance: Provenance,
}

impl Prediction {
    pub fn config(&self) -> InferenceConfig {
        InferenceConfig {
            mode: self.mode,
            include_video: self.include_video,
        }
    }
}

/// Writes predictions as JSON lines in their given order.
pub fn save_predictions<W: Write>(mut w: W, predictions: &[Prediction]) -> Result<(), EvalError> {
    for p in predictions {
        serde_json::to_writer(&mut w, p)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_predictions_to_path(path: &Path, predictions: &[Prediction]) -> Result<(), EvalError> {
    let file = std::fs::File::create(path)?;
    save_predictions(std::io::BufWriter::new(file), predictions)
}

pub fn load_predictions<R: BufRead>(r: R) -> Result<Vec<Prediction>, EvalError> {
    let mut out = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let p: Prediction = serde_json::from_str(&line).map_err(|source| EvalError::Parse {
            line: idx + 1,
            source,
        })?;
        out.push(p);
    }
    Ok(out)
}

pub fn load_predictions_from_path(path: &Path) -> Result<Vec<Prediction>, EvalError> {
    let file = std::fs::File::open(path)?;
    load_predictions(std::io::BufReader::new(file))
}

#[cfg(test)]
pub(crate) mod test_questions {
    use super::*;

    pub fn question(
        id: &str,
        video: &str,
        category: Category,
        micro: &str,
        gold: Option<usize>,
    ) -> QuestionRecord {
        QuestionRecord {
            id: id.to_string(),
            video_id: video.to_string(),
            category,
            micro_category: micro.to_string(),
            question_text: format!("Question {id}?"),
            choices: vec![
                "first option".into(),
                "second option".into(),
                "third option".into(),
                "fourth option".into(),
            ],
            gold,
            image: None,
        }
    }
}
