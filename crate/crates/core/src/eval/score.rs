//! Bucketed accuracy scoring of prediction files against gold answers.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EvalError, InferenceConfig, Prediction, QuestionRecord};

/// Correct and total counts for one bucket, with the derived percentage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BucketStats {
    pub correct: u64,
    pub total: u64,
    pub accuracy_pct: f64,
}

impl BucketStats {
    fn from_counts(correct: u64, total: u64) -> Self {
        BucketStats {
            correct,
            total,
            accuracy_pct: if total == 0 {
                0.0
            } else {
                100.0 * correct as f64 / total as f64
            },
        }
    }
}

/// Accuracy report for one configuration: overall, by category, and by
/// micro-category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryReport {
    pub config: InferenceConfig,
    pub overall: BucketStats,
    pub categories: BTreeMap<String, BucketStats>,
    pub micro_categories: BTreeMap<String, BucketStats>,
}

#[derive(Default)]
struct Tally {
    correct: u64,
    total: u64,
}

impl Tally {
    fn add(&mut self, correct: bool) {
        self.total += 1;
        self.correct += correct as u64;
    }
}

/// Scores predictions against the gold answers carried by `questions`.
///
/// Every prediction must reference a known question with a gold answer;
/// duplicate predictions for one question are rejected. Abstentions count
/// as incorrect. All predictions must share one configuration.
pub fn score(
    predictions: &[Prediction],
    questions: &[QuestionRecord],
) -> Result<CategoryReport, EvalError> {
    let first = predictions.first().ok_or(EvalError::EmptyPredictions)?;
    let config = first.config();
    if predictions.iter().any(|p| p.config() != config) {
        return Err(EvalError::MixedConfigs);
    }

    let by_id: HashMap<&str, &QuestionRecord> =
        questions.iter().map(|q| (q.id.as_str(), q)).collect();

    let mut seen: HashSet<&str> = HashSet::new();
    let mut overall = Tally::default();
    let mut categories: BTreeMap<String, Tally> = BTreeMap::new();
    let mut micros: BTreeMap<String, Tally> = BTreeMap::new();

    for p in predictions {
        let q = by_id
            .get(p.question_id.as_str())
            .ok_or_else(|| EvalError::UnknownQuestion(p.question_id.clone()))?;
        let gold = q.gold.ok_or_else(|| EvalError::MissingGold(q.id.clone()))?;
        if !seen.insert(p.question_id.as_str()) {
            return Err(EvalError::DuplicatePrediction(p.question_id.clone()));
        }
        let correct = p.answer == Some(gold);
        overall.add(correct);
        categories
            .entry(q.category.to_string())
            .or_default()
            .add(correct);
        micros
            .entry(q.micro_category.clone())
            .or_default()
            .add(correct);
    }

    let finish = |tallies: BTreeMap<String, Tally>| {
        tallies
            .into_iter()
            .map(|(k, t)| (k, BucketStats::from_counts(t.correct, t.total)))
            .collect::<BTreeMap<String, BucketStats>>()
    };

    Ok(CategoryReport {
        config,
        overall: BucketStats::from_counts(overall.correct, overall.total),
        categories: finish(categories),
        micro_categories: finish(micros),
    })
}

pub fn save_report(path: &Path, report: &CategoryReport) -> Result<(), EvalError> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_report(path: &Path) -> Result<CategoryReport, EvalError> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text).map_err(|source| EvalError::Parse { line: 1, source })?)
}
