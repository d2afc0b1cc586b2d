//! Runs questions through the model under one inference configuration.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::OnceLock;

use crate::media::{full_manifest_id, gaze_window};
use crate::mllm::{
    answer_question, attach_frame, template_hash, ChoiceSet, MllmBackend, Part, MCQ_TEMPLATE_ID,
};
use crate::scene::{render_bundle_for_prompt, SceneBundle};

use super::{Category, EvalError, InferenceConfig, Mode, Prediction, Provenance, QuestionRecord};

/// Artifacts one inference pass draws on. Scene bundles are keyed by
/// video id; knowledge path texts are already rendered and ranked.
pub struct RunResources<'a> {
    pub backend: &'a dyn MllmBackend,
    pub bundles: Option<&'a BTreeMap<String, SceneBundle>>,
    pub path_texts: Option<&'a [String]>,
}

impl<'a> RunResources<'a> {
    fn bundle_for(&self, mode: Mode, video_id: &str) -> Result<&'a SceneBundle, EvalError> {
        let bundles = self.bundles.ok_or_else(|| EvalError::MissingResource {
            mode: mode.to_string(),
            artifact: "scene graph bundle".to_string(),
        })?;
        bundles
            .get(video_id)
            .ok_or_else(|| EvalError::MissingResource {
                mode: mode.to_string(),
                artifact: format!("scene graph bundle for video {video_id:?}"),
            })
    }

    fn paths(&self, mode: Mode) -> Result<&'a [String], EvalError> {
        self.path_texts.ok_or_else(|| EvalError::MissingResource {
            mode: mode.to_string(),
            artifact: "rendered knowledge paths".to_string(),
        })
    }
}

fn scene_context(
    q: &QuestionRecord,
    mode: Mode,
    resources: &RunResources,
) -> Result<Part, EvalError> {
    let bundle = resources.bundle_for(mode, &q.video_id)?;
    // Gaze questions pinned to a single moment only see the look-back
    // window ending there; everything else sees the whole timeline.
    let window = if q.category == Category::Gaze {
        let times = crate::mllm::parse_time_tags(&q.question_text)?;
        (times.len() == 1).then(|| gaze_window(times[0]))
    } else {
        None
    };
    let rendered = render_bundle_for_prompt(bundle, window);
    Ok(Part::text(format!("Scene graph of the video:\n{rendered}")))
}

fn knowledge_context(mode: Mode, resources: &RunResources) -> Result<Part, EvalError> {
    let texts = resources.paths(mode)?;
    let list = texts
        .iter()
        .map(|t| format!("- {t}"))
        .collect::<Vec<_>>()
        .join("\n");
    Ok(Part::text(format!(
        "Commonsense knowledge about relevant objects:\n{list}"
    )))
}

/// Answers one question under `cfg`, assembling context parts per mode:
/// scene graph text for scene modes, knowledge path texts for knowledge
/// modes, the video reference when the configuration includes it, and the
/// question's pinned frame when there is one.
pub fn run_question(
    q: &QuestionRecord,
    cfg: InferenceConfig,
    resources: &RunResources,
) -> Result<Prediction, EvalError> {
    let mut parts: Vec<Part> = Vec::new();

    if matches!(cfg.mode, Mode::SNet | Mode::SNetPlusKNet) {
        parts.push(scene_context(q, cfg.mode, resources)?);
    }
    if matches!(
        cfg.mode,
        Mode::KNet | Mode::SNetPlusKNet | Mode::KNetFromSNetObjects
    ) {
        parts.push(knowledge_context(cfg.mode, resources)?);
    }
    if cfg.include_video {
        parts.push(Part::video(full_manifest_id(&q.video_id)));
    }
    if let Some(image) = attach_frame(q.image.as_deref(), &q.question_text)? {
        parts.push(Part::image(image));
    }

    let choices = ChoiceSet::new(q.choices.clone())?;
    let (answer, _raw, bundle) =
        answer_question(resources.backend, &q.question_text, &choices, parts)?;

    Ok(Prediction {
        question_id: q.id.clone(),
        category: q.category,
        micro_category: q.micro_category.clone(),
        mode: cfg.mode,
        include_video: cfg.include_video,
        answer,
        answer_label: answer.map(|i| ChoiceSet::label(i).to_string()),
        provenance: Provenance {
            prompt_hash: bundle.hash(),
            template_hash: template_hash(MCQ_TEMPLATE_ID).expect("mcq template exists"),
            context_chars: bundle.context_chars(),
            num_parts: bundle.num_parts(),
        },
    })
}

/// Runs every question, optionally across `jobs` worker threads. Output
/// order always matches question order, so concurrency never changes the
/// result.
pub fn run_all(
    questions: &[QuestionRecord],
    cfg: InferenceConfig,
    resources: &RunResources,
    jobs: usize,
) -> Result<Vec<Prediction>, EvalError> {
    if jobs <= 1 {
        return questions
            .iter()
            .map(|q| run_question(q, cfg, resources))
            .collect();
    }

    let next = AtomicUsize::new(0);
    let slots: Vec<OnceLock<Result<Prediction, EvalError>>> =
        (0..questions.len()).map(|_| OnceLock::new()).collect();
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(questions.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(q) = questions.get(i) else { break };
                let result = run_question(q, cfg, resources);
                slots[i].set(result).expect("each slot is filled once");
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().expect("all slots filled"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::test_questions::question;
    use super::*;
    use crate::mllm::{MllmError, PromptBundle};
    use crate::scene::{merge_segments, SceneGraphDocument};

    /// Echo backend: always answers "Answer: A" and remembers nothing.
    struct Fixed(&'static str);
    impl MllmBackend for Fixed {
        fn complete(&self, _bundle: &PromptBundle) -> Result<String, MllmError> {
            Ok(self.0.to_string())
        }
    }

    /// Captures the bundle it was asked to complete.
    struct Capturing(std::sync::Mutex<Vec<PromptBundle>>);
    impl Capturing {
        fn new() -> Self {
            Capturing(std::sync::Mutex::new(Vec::new()))
        }
        fn last(&self) -> PromptBundle {
            self.0.lock().unwrap().last().unwrap().clone()
        }
    }
    impl MllmBackend for Capturing {
        fn complete(&self, bundle: &PromptBundle) -> Result<String, MllmError> {
            self.0.lock().unwrap().push(bundle.clone());
            Ok("A".to_string())
        }
    }

    fn bundle_with_actions(video_id: &str, times: &[f64]) -> SceneBundle {
        let actions: Vec<serde_json::Value> = times
            .iter()
            .map(|t| {
                serde_json::json!({
                    "action": format!("act-at-{t}"), "agent": "p1",
                    "start": t, "end": t + 1.0
                })
            })
            .collect();
        let raw = serde_json::json!({
            "nodes": [
                {"id": "p1", "kind": "agent", "description": "wearer"},
                {"id": "kitchen", "kind": "environment", "description": "kitchen"}
            ],
            "actions": actions
        })
        .to_string();
        let mut doc = SceneGraphDocument::from_raw(0.0, 400.0, &raw);
        assert!(doc.is_parsed(), "fixture must parse");
        // Action times in this fixture are already global.
        doc.globalized = true;
        merge_segments(video_id, vec![doc]).unwrap()
    }

    fn bundles_map(video_id: &str, times: &[f64]) -> BTreeMap<String, SceneBundle> {
        let mut m = BTreeMap::new();
        m.insert(video_id.to_string(), bundle_with_actions(video_id, times));
        m
    }

    fn text_of(bundle: &PromptBundle) -> String {
        bundle
            .user_parts
            .iter()
            .filter_map(|p| match p {
                Part::Text { text } => Some(text.clone()),
                _ => None,
            })
            .collect::<Vec<_>>()
            .join("\n---\n")
    }

    fn has_video(bundle: &PromptBundle) -> bool {
        bundle
            .user_parts
            .iter()
            .any(|p| matches!(p, Part::Video { .. }))
    }

    #[test]
    fn video_only_sends_video_and_no_graph_text() {
        let backend = Capturing::new();
        let resources = RunResources {
            backend: &backend,
            bundles: None,
            path_texts: None,
        };
        let q = question("q1", "v1", Category::Action, "m", Some(0));
        let p = run_question(&q, InferenceConfig::standard(Mode::VideoOnly), &resources).unwrap();
        let sent = backend.last();
        assert!(has_video(&sent));
        assert!(!text_of(&sent).contains("Scene graph"));
        assert!(!text_of(&sent).contains("Commonsense knowledge"));
        assert_eq!(p.answer, Some(0));
        assert_eq!(p.answer_label.as_deref(), Some("A"));
    }

    #[test]
    fn snet_sends_graph_text_without_video() {
        let backend = Capturing::new();
        let bundles = bundles_map("v1", &[10.0]);
        let resources = RunResources {
            backend: &backend,
            bundles: Some(&bundles),
            path_texts: None,
        };
        let q = question("q1", "v1", Category::Action, "m", Some(0));
        run_question(&q, InferenceConfig::standard(Mode::SNet), &resources).unwrap();
        let sent = backend.last();
        assert!(!has_video(&sent));
        assert!(text_of(&sent).contains("Scene graph of the video"));
        assert!(text_of(&sent).contains("act-at-10"));
    }

    #[test]
    fn snet_still_attaches_single_time_tag_frame() {
        let backend = Capturing::new();
        let bundles = bundles_map("v1", &[10.0]);
        let resources = RunResources {
            backend: &backend,
            bundles: Some(&bundles),
            path_texts: None,
        };
        let mut q = question("q1", "v1", Category::Action, "m", Some(0));
        q.question_text = "What is here <TIME>98.5</TIME>?".to_string();
        run_question(&q, InferenceConfig::standard(Mode::SNet), &resources).unwrap();
        let sent = backend.last();
        assert!(!has_video(&sent));
        let frame = sent.user_parts.iter().find_map(|p| match p {
            Part::Image { image } => Some(image.clone()),
            _ => None,
        });
        assert_eq!(frame.unwrap().frame_id, "t98.5");
    }

    #[test]
    fn knet_sends_paths_and_video() {
        let backend = Capturing::new();
        let texts = vec!["cupboard is used for storing dishes".to_string()];
        let resources = RunResources {
            backend: &backend,
            bundles: None,
            path_texts: Some(&texts),
        };
        let q = question("q1", "v1", Category::Ingredient, "m", Some(0));
        run_question(&q, InferenceConfig::standard(Mode::KNet), &resources).unwrap();
        let sent = backend.last();
        assert!(has_video(&sent));
        assert!(text_of(&sent).contains("- cupboard is used for storing dishes"));
    }

    #[test]
    fn combined_mode_concatenates_both_contexts() {
        let backend = Capturing::new();
        let bundles = bundles_map("v1", &[10.0]);
        let texts = vec!["knife is used for cutting".to_string()];
        let resources = RunResources {
            backend: &backend,
            bundles: Some(&bundles),
            path_texts: Some(&texts),
        };
        let q = question("q1", "v1", Category::Recipe, "m", Some(0));
        run_question(
            &q,
            InferenceConfig::standard(Mode::SNetPlusKNet),
            &resources,
        )
        .unwrap();
        let sent = backend.last();
        let text = text_of(&sent);
        assert!(text.contains("Scene graph of the video"));
        assert!(text.contains("knife is used for cutting"));
        assert!(has_video(&sent));
        let graph_pos = text.find("Scene graph").unwrap();
        let knowledge_pos = text.find("Commonsense knowledge").unwrap();
        assert!(graph_pos < knowledge_pos);
    }

    #[test]
    fn gaze_question_sees_only_the_lookback_window() {
        let backend = Capturing::new();
        let bundles = bundles_map("v1", &[100.0, 500.0, 900.0]);
        let resources = RunResources {
            backend: &backend,
            bundles: Some(&bundles),
            path_texts: None,
        };
        let mut q = question("q1", "v1", Category::Gaze, "gaze target", Some(0));
        q.question_text = "What was I looking at <TIME>600</TIME>?".to_string();
        run_question(&q, InferenceConfig::standard(Mode::SNet), &resources).unwrap();
        let text = text_of(&backend.last());
        assert!(!text.contains("act-at-100"), "before the 400 s window");
        assert!(text.contains("act-at-500"));
        assert!(!text.contains("act-at-900"), "after the query time");
    }

    #[test]
    fn gaze_without_time_tag_sees_everything() {
        let backend = Capturing::new();
        let bundles = bundles_map("v1", &[100.0, 900.0]);
        let resources = RunResources {
            backend: &backend,
            bundles: Some(&bundles),
            path_texts: None,
        };
        let q = question("q1", "v1", Category::Gaze, "gaze order", Some(0));
        run_question(&q, InferenceConfig::standard(Mode::SNet), &resources).unwrap();
        let text = text_of(&backend.last());
        assert!(text.contains("act-at-100"));
        assert!(text.contains("act-at-900"));
    }

    #[test]
    fn missing_bundle_names_the_artifact() {
        let backend = Fixed("A");
        let resources = RunResources {
            backend: &backend,
            bundles: None,
            path_texts: None,
        };
        let q = question("q1", "v1", Category::Action, "m", Some(0));
        let err = run_question(&q, InferenceConfig::standard(Mode::SNet), &resources).unwrap_err();
        match err {
            EvalError::MissingResource { mode, artifact } => {
                assert_eq!(mode, "snet");
                assert!(artifact.contains("scene graph bundle"));
            }
            other => panic!("expected MissingResource, got {other:?}"),
        }
    }

    #[test]
    fn missing_paths_names_the_artifact() {
        let backend = Fixed("A");
        let resources = RunResources {
            backend: &backend,
            bundles: None,
            path_texts: None,
        };
        let q = question("q1", "v1", Category::Action, "m", Some(0));
        let err = run_question(&q, InferenceConfig::standard(Mode::KNet), &resources).unwrap_err();
        assert!(
            matches!(err, EvalError::MissingResource { artifact, .. } if artifact.contains("knowledge paths"))
        );
    }

    #[test]
    fn unknown_video_in_bundle_map_is_missing_resource() {
        let backend = Fixed("A");
        let bundles = bundles_map("v1", &[10.0]);
        let resources = RunResources {
            backend: &backend,
            bundles: Some(&bundles),
            path_texts: None,
        };
        let q = question("q1", "v2", Category::Action, "m", Some(0));
        let err = run_question(&q, InferenceConfig::standard(Mode::SNet), &resources).unwrap_err();
        assert!(
            matches!(err, EvalError::MissingResource { artifact, .. } if artifact.contains("v2"))
        );
    }

    #[test]
    fn abstention_and_extraction_results_are_recorded() {
        let resources = |b: &'static Fixed| RunResources {
            backend: b,
            bundles: None,
            path_texts: None,
        };
        let q = question("q1", "v1", Category::Action, "m", Some(0));
        let cfg = InferenceConfig::standard(Mode::VideoOnly);

        static YES: Fixed = Fixed("Answer: B");
        let p = run_question(&q, cfg, &resources(&YES)).unwrap();
        assert_eq!(p.answer, Some(1));
        assert_eq!(p.answer_label.as_deref(), Some("B"));

        static NO: Fixed = Fixed("I cannot tell.");
        let p = run_question(&q, cfg, &resources(&NO)).unwrap();
        assert_eq!(p.answer, None);
        assert_eq!(p.answer_label, None);
    }

    #[test]
    fn provenance_is_populated() {
        let backend = Fixed("A");
        let resources = RunResources {
            backend: &backend,
            bundles: None,
            path_texts: None,
        };
        let q = question("q1", "v1", Category::Action, "m", Some(0));
        let p = run_question(&q, InferenceConfig::standard(Mode::VideoOnly), &resources).unwrap();
        assert_eq!(p.provenance.prompt_hash.len(), 64);
        assert_eq!(
            p.provenance.template_hash,
            template_hash(MCQ_TEMPLATE_ID).unwrap()
        );
        assert!(p.provenance.context_chars > 0);
        assert_eq!(p.provenance.num_parts, 2);
    }

    #[test]
    fn concurrent_run_matches_sequential_run() {
        let backend = Fixed("Answer: C");
        let resources = RunResources {
            backend: &backend,
            bundles: None,
            path_texts: None,
        };
        let questions: Vec<QuestionRecord> = (0..17)
            .map(|i| question(&format!("q{i:02}"), "v1", Category::Action, "m", Some(2)))
            .collect();
        let cfg = InferenceConfig::standard(Mode::VideoOnly);
        let sequential = run_all(&questions, cfg, &resources, 1).unwrap();
        let concurrent = run_all(&questions, cfg, &resources, 4).unwrap();
        assert_eq!(sequential, concurrent);
    }
}
