//! Versioned, content-addressed prompt templates and bundle builders for
//! the three model tasks: scene graph generation, object recognition, and
//! multiple-choice answering.

use sha2::{Digest, Sha256};

use super::{ChoiceSet, MllmError, Part, PromptBundle};

pub const SG_GEN_TEMPLATE_ID: &str = "sg-gen/v1";
pub const OBJ_REC_TEMPLATE_ID: &str = "obj-rec/v1";
pub const MCQ_TEMPLATE_ID: &str = "mcq/v1";

/// A named system prompt. The template text is the hashed unit, so any
/// wording change shows up in prediction provenance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: &'static str,
    pub text: &'static str,
}

const SG_GEN_TEXT: &str = "\
You describe one segment of a first-person kitchen video as a scene graph.
Return a single JSON object conforming to this JSON Schema:

{schema}

Rules:
- Use exactly one agent node for the camera wearer and exactly one environment node.
- Node ids are short snake_case strings. Objects that come into existence during \
the segment get ids starting with \"created:\" and a created_from edge from their origin.
- Action timestamps are seconds from the start of the segment.
Return only the JSON object, with no surrounding text and no code fences.";

const OBJ_REC_TEXT: &str = "\
You list the physical objects visible in a first-person kitchen video.
Reply with one flat Python list of lowercase object names, for example \
['mug', 'kettle']. Return nothing but the list.";

const MCQ_TEXT: &str = "\
You answer a multiple-choice question about a first-person kitchen video.
Consider all provided context, then reply with the letter of the single \
best option in the form 'Answer: X'. Always pick exactly one option.";

static TEMPLATES: &[PromptTemplate] = &[
    PromptTemplate {
        id: SG_GEN_TEMPLATE_ID,
        text: SG_GEN_TEXT,
    },
    PromptTemplate {
        id: OBJ_REC_TEMPLATE_ID,
        text: OBJ_REC_TEXT,
    },
    PromptTemplate {
        id: MCQ_TEMPLATE_ID,
        text: MCQ_TEXT,
    },
];

pub fn template(id: &str) -> Option<&'static PromptTemplate> {
    TEMPLATES.iter().find(|t| t.id == id)
}

/// SHA-256 of the template text, hex encoded.
pub fn template_hash(id: &str) -> Option<String> {
    template(id).map(|t| hex::encode(Sha256::digest(t.text.as_bytes())))
}

/// Prompt asking the model to produce a scene graph for one segment. The
/// schema text is embedded verbatim in the system prompt.
pub fn build_generation_prompt(
    schema_json: &str,
    manifest_id: &str,
) -> Result<PromptBundle, MllmError> {
    if schema_json.trim().is_empty() {
        return Err(MllmError::EmptySchema);
    }
    let system = SG_GEN_TEXT.replace("{schema}", schema_json);
    let mut bundle = PromptBundle::new(system);
    bundle
        .push(Part::video(manifest_id))
        .push(Part::text("Generate the scene graph for this segment."));
    Ok(bundle)
}

/// Prompt asking the model to enumerate visible objects.
pub fn build_object_prompt(manifest_id: &str) -> PromptBundle {
    let mut bundle = PromptBundle::new(OBJ_REC_TEXT);
    bundle
        .push(Part::video(manifest_id))
        .push(Part::text("List every distinct object you can see."));
    bundle
}

/// Prompt for one multiple-choice question: the labeled question block
/// first, then the caller's context parts in order.
pub fn build_mcq_bundle(
    question_text: &str,
    choices: &ChoiceSet,
    context_parts: Vec<Part>,
) -> PromptBundle {
    let mut bundle = PromptBundle::new(MCQ_TEXT);
    bundle.push(Part::text(format!(
        "{question_text}\n\nOptions:\n{}",
        choices.render_block()
    )));
    for part in context_parts {
        bundle.push(part);
    }
    bundle
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{SCENE_SCHEMA_JSON, SCENE_SCHEMA_VERSION};

    #[test]
    fn templates_resolve_by_id() {
        assert!(template(SG_GEN_TEMPLATE_ID).is_some());
        assert!(template(OBJ_REC_TEMPLATE_ID).is_some());
        assert!(template(MCQ_TEMPLATE_ID).is_some());
        assert!(template("mcq/v9").is_none());
    }

    #[test]
    fn template_hashes_are_distinct_hex() {
        let hashes: Vec<String> = [SG_GEN_TEMPLATE_ID, OBJ_REC_TEMPLATE_ID, MCQ_TEMPLATE_ID]
            .iter()
            .map(|id| template_hash(id).unwrap())
            .collect();
        for h in &hashes {
            assert_eq!(h.len(), 64);
            assert!(h.chars().all(|c| c.is_ascii_hexdigit()));
        }
        assert_ne!(hashes[0], hashes[1]);
        assert_ne!(hashes[1], hashes[2]);
        assert!(template_hash("nope").is_none());
    }

    #[test]
    fn generation_prompt_embeds_schema_verbatim() {
        let bundle = build_generation_prompt(SCENE_SCHEMA_JSON, "v1:seg2").unwrap();
        assert!(bundle.system_text.contains(SCENE_SCHEMA_JSON));
        assert!(bundle.system_text.contains(SCENE_SCHEMA_VERSION));
        assert!(!bundle.system_text.contains("{schema}"));
        assert_eq!(
            bundle.user_parts[0],
            Part::video("v1:seg2"),
            "video part must reference the segment manifest"
        );
        assert!(bundle.num_parts() >= 1);
    }

    #[test]
    fn empty_schema_is_an_error() {
        assert!(matches!(
            build_generation_prompt("  \n", "v1:seg0"),
            Err(MllmError::EmptySchema)
        ));
    }

    #[test]
    fn object_prompt_shape() {
        let bundle = build_object_prompt("v1:full");
        assert_eq!(bundle.user_parts[0], Part::video("v1:full"));
        assert!(bundle.system_text.contains("Python list"));
    }

    #[test]
    fn mcq_bundle_places_question_first_then_context() {
        let choices = ChoiceSet::new(vec!["red mug".into(), "blue cup".into()]).unwrap();
        let bundle = build_mcq_bundle(
            "What did I pick up?",
            &choices,
            vec![Part::text("context"), Part::video("v1:full")],
        );
        let Part::Text { text } = &bundle.user_parts[0] else {
            panic!("first part must be the question block");
        };
        assert!(text.contains("What did I pick up?"));
        assert!(text.contains("A. red mug"));
        assert!(text.contains("B. blue cup"));
        assert_eq!(bundle.user_parts[2], Part::video("v1:full"));
        assert_eq!(bundle.num_parts(), 3);
    }
}
