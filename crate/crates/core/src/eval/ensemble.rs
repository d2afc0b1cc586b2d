//! Per-micro-category method selection and submission assembly.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CategoryReport, EvalError, InferenceConfig, Mode, Prediction};

/// Which configuration answers each micro-category.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodAssignment {
    pub assignments: BTreeMap<String, InferenceConfig>,
}

impl MethodAssignment {
    pub fn save(&self, path: &Path) -> Result<(), EvalError> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|source| EvalError::Parse { line: 1, source })
    }
}

/// Tie-break rank: knowledge context first, then scene context, then the
/// plain video baseline, then the combined modes. Lower wins.
fn mode_rank(mode: Mode) -> u8 {
    match mode {
        Mode::KNet => 0,
        Mode::SNet => 1,
        Mode::VideoOnly => 2,
        Mode::SNetPlusKNet => 3,
        Mode::KNetFromSNetObjects => 4,
    }
}

fn priority(config: InferenceConfig) -> (u8, bool) {
    (mode_rank(config.mode), !config.include_video)
}

/// Picks, per micro-category, the configuration whose report has the
/// highest accuracy there. Equal accuracies fall back to the fixed mode
/// priority. All reports must cover the same micro-categories.
pub fn select_ensemble(reports: &[CategoryReport]) -> Result<MethodAssignment, EvalError> {
    let first = reports.first().ok_or(EvalError::NoReports)?;
    let reference: BTreeSet<&String> = first.micro_categories.keys().collect();
    for report in &reports[1..] {
        let own: BTreeSet<&String> = report.micro_categories.keys().collect();
        if own != reference {
            let missing: Vec<String> = reference
                .symmetric_difference(&own)
                .map(|s| s.to_string())
                .collect();
            return Err(EvalError::InconsistentMicros(missing.join(", ")));
        }
    }

    let mut assignments = BTreeMap::new();
    for micro in reference {
        let best = reports
            .iter()
            .map(|r| (r.config, r.micro_categories[micro].accuracy_pct))
            .max_by(|(ca, aa), (cb, ab)| {
                aa.total_cmp(ab)
                    .then_with(|| priority(*cb).cmp(&priority(*ca)))
            })
            .expect("at least one report");
        assignments.insert(micro.clone(), best.0);
    }
    Ok(MethodAssignment { assignments })
}

/// Builds the submission CSV: for every question, the answer comes from
/// the prediction of the configuration assigned to its micro-category.
///
/// Rows are ordered by question id; abstentions emit an empty label. With
/// `required_ids`, the output is restricted to those ids and every one of
/// them must be covered.
pub fn emit_submission(
    assignment: &MethodAssignment,
    predictions_by_config: &[(InferenceConfig, Vec<Prediction>)],
    required_ids: Option<&BTreeSet<String>>,
) -> Result<String, EvalError> {
    let mut by_config: HashMap<InferenceConfig, HashMap<&str, &Prediction>> = HashMap::new();
    for (config, preds) in predictions_by_config {
        let entry = by_config.entry(*config).or_default();
        for p in preds {
            entry.insert(p.question_id.as_str(), p);
        }
    }

    // Union of question ids with their micro-category, over all configs.
    let mut micro_of: BTreeMap<&str, &str> = BTreeMap::new();
    for (_, preds) in predictions_by_config {
        for p in preds {
            micro_of.insert(&p.question_id, &p.micro_category);
        }
    }

    let mut rows: Vec<(String, String)> = Vec::new();
    let mut missing: Vec<String> = Vec::new();
    for (id, micro) in &micro_of {
        if let Some(required) = required_ids {
            if !required.contains(*id) {
                continue;
            }
        }
        let config = assignment
            .assignments
            .get(*micro)
            .ok_or_else(|| EvalError::UnassignedMicro(micro.to_string()))?;
        match by_config.get(config).and_then(|m| m.get(id)) {
            Some(p) => rows.push((id.to_string(), p.answer_label.clone().unwrap_or_default())),
            None => missing.push(id.to_string()),
        }
    }
    if let Some(required) = required_ids {
        for id in required {
            if !micro_of.contains_key(id.as_str()) {
                missing.push(id.clone());
            }
        }
    }
    if !missing.is_empty() {
        missing.sort();
        missing.dedup();
        return Err(EvalError::MissingPredictions(missing.join(", ")));
    }

    let mut csv = String::from("question_id,answer_label\n");
    for (id, label) in rows {
        csv.push_str(&id);
        csv.push(',');
        csv.push_str(&label);
        csv.push('\n');
    }
    Ok(csv)
}

#[cfg(test)]
mod tests {
    use super::super::{BucketStats, Category, Mode, Provenance};
    use super::*;

    fn stats(correct: u64, total: u64) -> BucketStats {
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

    fn report(mode: Mode, micros: &[(&str, u64, u64)]) -> CategoryReport {
        let micro_categories: BTreeMap<String, BucketStats> = micros
            .iter()
            .map(|(name, c, t)| (name.to_string(), stats(*c, *t)))
            .collect();
        let (correct, total) = micros
            .iter()
            .fold((0, 0), |(c, t), (_, mc, mt)| (c + mc, t + mt));
        CategoryReport {
            config: InferenceConfig::standard(mode),
            overall: stats(correct, total),
            categories: BTreeMap::new(),
            micro_categories,
        }
    }

    #[test]
    fn argmax_per_micro_category() {
        let reports = vec![
            report(Mode::VideoOnly, &[("a", 1, 4), ("b", 3, 4)]),
            report(Mode::KNet, &[("a", 3, 4), ("b", 1, 4)]),
        ];
        let assignment = select_ensemble(&reports).unwrap();
        assert_eq!(assignment.assignments["a"].mode, Mode::KNet);
        assert_eq!(assignment.assignments["b"].mode, Mode::VideoOnly);
    }

    #[test]
    fn ties_fall_back_to_mode_priority() {
        let reports = vec![
            report(Mode::SNetPlusKNet, &[("a", 2, 4)]),
            report(Mode::VideoOnly, &[("a", 2, 4)]),
            report(Mode::SNet, &[("a", 2, 4)]),
            report(Mode::KNet, &[("a", 2, 4)]),
            report(Mode::KNetFromSNetObjects, &[("a", 2, 4)]),
        ];
        let assignment = select_ensemble(&reports).unwrap();
        assert_eq!(assignment.assignments["a"].mode, Mode::KNet);

        let no_knet = vec![
            report(Mode::SNetPlusKNet, &[("a", 2, 4)]),
            report(Mode::SNet, &[("a", 2, 4)]),
        ];
        assert_eq!(
            select_ensemble(&no_knet).unwrap().assignments["a"].mode,
            Mode::SNet
        );
    }

    #[test]
    fn equal_rates_with_different_denominators_tie() {
        // 1/2 and 2/4 are the same accuracy; priority decides.
        let reports = vec![
            report(Mode::VideoOnly, &[("a", 2, 4)]),
            report(Mode::SNet, &[("a", 1, 2)]),
        ];
        let assignment = select_ensemble(&reports).unwrap();
        assert_eq!(assignment.assignments["a"].mode, Mode::SNet);
    }

    #[test]
    fn inconsistent_micro_sets_error_names_the_difference() {
        let reports = vec![
            report(Mode::KNet, &[("a", 1, 2), ("b", 1, 2)]),
            report(Mode::SNet, &[("a", 1, 2), ("c", 1, 2)]),
        ];
        match select_ensemble(&reports) {
            Err(EvalError::InconsistentMicros(diff)) => {
                assert!(diff.contains('b'));
                assert!(diff.contains('c'));
            }
            other => panic!("expected InconsistentMicros, got {other:?}"),
        }
    }

    #[test]
    fn no_reports_is_an_error() {
        assert!(matches!(select_ensemble(&[]), Err(EvalError::NoReports)));
    }

    fn pred(id: &str, micro: &str, mode: Mode, answer: Option<usize>) -> Prediction {
        Prediction {
            question_id: id.to_string(),
            category: Category::Action,
            micro_category: micro.to_string(),
            mode,
            include_video: mode.default_include_video(),
            answer,
            answer_label: answer.map(|i| crate::mllm::ChoiceSet::label(i).to_string()),
            provenance: Provenance {
                prompt_hash: "h".into(),
                template_hash: "t".into(),
                context_chars: 1,
                num_parts: 1,
            },
        }
    }

    fn assignment(pairs: &[(&str, Mode)]) -> MethodAssignment {
        MethodAssignment {
            assignments: pairs
                .iter()
                .map(|(m, mode)| (m.to_string(), InferenceConfig::standard(*mode)))
                .collect(),
        }
    }

    #[test]
    fn submission_picks_assigned_config_and_sorts_rows() {
        let knet = vec![
            pred("q2", "a", Mode::KNet, Some(0)),
            pred("q1", "b", Mode::KNet, Some(1)),
        ];
        let video = vec![
            pred("q2", "a", Mode::VideoOnly, Some(2)),
            pred("q1", "b", Mode::VideoOnly, Some(3)),
        ];
        let asg = assignment(&[("a", Mode::KNet), ("b", Mode::VideoOnly)]);
        let csv = emit_submission(
            &asg,
            &[
                (InferenceConfig::standard(Mode::KNet), knet),
                (InferenceConfig::standard(Mode::VideoOnly), video),
            ],
            None,
        )
        .unwrap();
        assert_eq!(csv, "question_id,answer_label\nq1,D\nq2,A\n");
    }

    #[test]
    fn abstentions_emit_empty_labels() {
        let preds = vec![pred("q1", "a", Mode::KNet, None)];
        let asg = assignment(&[("a", Mode::KNet)]);
        let csv = emit_submission(
            &asg,
            &[(InferenceConfig::standard(Mode::KNet), preds)],
            None,
        )
        .unwrap();
        assert_eq!(csv, "question_id,answer_label\nq1,\n");
    }

    #[test]
    fn missing_prediction_in_assigned_config_lists_ids() {
        // q1's micro is assigned to KNet, but only VideoOnly predicted it.
        let video = vec![pred("q1", "a", Mode::VideoOnly, Some(0))];
        let asg = assignment(&[("a", Mode::KNet)]);
        match emit_submission(
            &asg,
            &[(InferenceConfig::standard(Mode::VideoOnly), video)],
            None,
        ) {
            Err(EvalError::MissingPredictions(ids)) => assert_eq!(ids, "q1"),
            other => panic!("expected MissingPredictions, got {other:?}"),
        }
    }

    #[test]
    fn unassigned_micro_is_an_error() {
        let preds = vec![pred("q1", "mystery", Mode::KNet, Some(0))];
        let asg = assignment(&[("a", Mode::KNet)]);
        assert!(matches!(
            emit_submission(
                &asg,
                &[(InferenceConfig::standard(Mode::KNet), preds)],
                None
            ),
            Err(EvalError::UnassignedMicro(m)) if m == "mystery"
        ));
    }

    #[test]
    fn required_ids_restrict_and_guard_the_output() {
        let preds = vec![
            pred("q1", "a", Mode::KNet, Some(0)),
            pred("q2", "a", Mode::KNet, Some(1)),
        ];
        let asg = assignment(&[("a", Mode::KNet)]);
        let configs = [(InferenceConfig::standard(Mode::KNet), preds)];

        let only_q1: BTreeSet<String> = ["q1".to_string()].into();
        let csv = emit_submission(&asg, &configs, Some(&only_q1)).unwrap();
        assert_eq!(csv, "question_id,answer_label\nq1,A\n");

        let with_ghost: BTreeSet<String> = ["q1".to_string(), "ghost".to_string()].into();
        assert!(matches!(
            emit_submission(&asg, &configs, Some(&with_ghost)),
            Err(EvalError::MissingPredictions(ids)) if ids == "ghost"
        ));
    }

    #[test]
    fn assignment_save_load_round_trip() {
        let asg = assignment(&[("a", Mode::KNet), ("b", Mode::SNet)]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("assignment.json");
        asg.save(&path).unwrap();
        assert_eq!(MethodAssignment::load(&path).unwrap(), asg);
    }
}
