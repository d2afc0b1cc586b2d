//! Total extraction of structured content from free-form model output:
//! answer labels, object lists, and inline TIME/BBOX tags.

use super::prompts::build_mcq_bundle;
use super::{BBox, ImageRef, MllmBackend, MllmError, Part, PromptBundle};

/// Ordered multiple-choice options labeled A, B, C, ...
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChoiceSet {
    options: Vec<String>,
}

impl ChoiceSet {
    pub fn new(options: Vec<String>) -> Result<Self, MllmError> {
        if !(2..=26).contains(&options.len()) {
            return Err(MllmError::ChoiceCount(options.len()));
        }
        Ok(ChoiceSet { options })
    }

    pub fn len(&self) -> usize {
        self.options.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn options(&self) -> &[String] {
        &self.options
    }

    pub fn label(index: usize) -> char {
        (b'A' + index as u8) as char
    }

    /// `A. first\nB. second\n...`
    pub fn render_block(&self) -> String {
        self.options
            .iter()
            .enumerate()
            .map(|(i, text)| format!("{}. {}", Self::label(i), text))
            .collect::<Vec<_>>()
            .join("\n")
    }

    fn label_index(&self, c: char) -> Option<usize> {
        if !c.is_ascii_alphabetic() {
            return None;
        }
        let idx = (c.to_ascii_uppercase() as u8 - b'A') as usize;
        (idx < self.options.len()).then_some(idx)
    }
}

/// Maps a raw response to a choice index, or `None` for abstention.
///
/// Ordered rules, first hit wins:
/// 1. an `answer` keyword followed by optional `:`/`-`/`*`/space padding
///    and a label letter at a word boundary;
/// 2. a bare label as the first non-space character;
/// 3. the first parenthesized label like `(b)`;
/// 4. the whole response equal to one choice text, case-insensitively.
pub fn extract_choice(response: &str, choices: &ChoiceSet) -> Option<usize> {
    let chars: Vec<char> = response.chars().collect();
    rule_answer_keyword(&chars, choices)
        .or_else(|| rule_bare_label(&chars, choices))
        .or_else(|| rule_parenthesized(&chars, choices))
        .or_else(|| rule_exact_text(response, choices))
}

fn is_padding(c: char) -> bool {
    c.is_whitespace() || matches!(c, ':' | '-' | '*')
}

fn rule_answer_keyword(chars: &[char], choices: &ChoiceSet) -> Option<usize> {
    const KEYWORD: [char; 6] = ['a', 'n', 's', 'w', 'e', 'r'];
    let n = chars.len();
    for i in 0..n.saturating_sub(KEYWORD.len() - 1) {
        let matched = chars[i..i + KEYWORD.len()]
            .iter()
            .zip(KEYWORD)
            .all(|(c, k)| c.eq_ignore_ascii_case(&k));
        if !matched {
            continue;
        }
        let mut j = i + KEYWORD.len();
        while j < n && is_padding(chars[j]) {
            j += 1;
        }
        if j < n && chars[j] == '(' {
            j += 1;
        }
        if j < n {
            if let Some(idx) = choices.label_index(chars[j]) {
                let boundary = chars.get(j + 1).map_or(true, |c| !c.is_alphanumeric());
                if boundary {
                    return Some(idx);
                }
            }
        }
    }
    None
}

fn rule_bare_label(chars: &[char], choices: &ChoiceSet) -> Option<usize> {
    let mut i = 0;
    while i < chars.len() && chars[i].is_whitespace() {
        i += 1;
    }
    let first = *chars.get(i)?;
    let idx = choices.label_index(first)?;
    let boundary = chars.get(i + 1).map_or(true, |c| !c.is_alphanumeric());
    boundary.then_some(idx)
}

fn rule_parenthesized(chars: &[char], choices: &ChoiceSet) -> Option<usize> {
    for w in chars.windows(3) {
        if w[0] == '(' && w[2] == ')' {
            if let Some(idx) = choices.label_index(w[1]) {
                return Some(idx);
            }
        }
    }
    None
}

fn rule_exact_text(response: &str, choices: &ChoiceSet) -> Option<usize> {
    let trimmed = response.trim();
    choices
        .options
        .iter()
        .position(|opt| opt.trim().eq_ignore_ascii_case(trimmed))
}

/// Pulls a bracketed, quoted object list out of a response, tolerating
/// surrounding prose and code fences. Names are trimmed, lowercased and
/// deduplicated preserving first occurrence. No parsable list yields an
/// empty result.
pub fn parse_object_list(response: &str) -> Vec<String> {
    let mut search = response;
    let mut offset = 0usize;
    while let Some(open_rel) = search.find('[') {
        let open = offset + open_rel;
        let tail = &response[open + 1..];
        if let Some(close_rel) = tail.find(']') {
            if let Some(items) = parse_quoted_items(&tail[..close_rel]) {
                if !items.is_empty() {
                    let mut out: Vec<String> = Vec::new();
                    for item in items {
                        let cleaned = item.trim().to_lowercase();
                        if !cleaned.is_empty() && !out.contains(&cleaned) {
                            out.push(cleaned);
                        }
                    }
                    return out;
                }
            }
        }
        offset = open + 1;
        search = &response[offset..];
    }
    Vec::new()
}

/// Parses `'a', "b", ...` where every item is quoted. Commas inside
/// quotes are content, not separators.
fn parse_quoted_items(inner: &str) -> Option<Vec<String>> {
    let chars: Vec<char> = inner.chars().collect();
    let mut items = Vec::new();
    let mut i = 0;
    loop {
        while i < chars.len() && chars[i].is_whitespace() {
            i += 1;
        }
        if i >= chars.len() {
            break;
        }
        let quote = chars[i];
        if quote != '\'' && quote != '"' {
            return None;
        }
        i += 1;
        let start = i;
        while i < chars.len() && chars[i] != quote {
            i += 1;
        }
        if i >= chars.len() {
            return None;
        }
        items.push(chars[start..i].iter().collect::<String>());
        i += 1;
        while i < chars.len() && chars[i].is_whitespace() {
            i += 1;
        }
        if i < chars.len() {
            if chars[i] != ',' {
                return None;
            }
            i += 1;
        }
    }
    Some(items)
}

fn tag_contents<'a>(text: &'a str, tag: &str) -> Result<Vec<&'a str>, MllmError> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(i) = rest.find(&open) {
        let after = &rest[i + open.len()..];
        let Some(j) = after.find(&close) else {
            return Err(MllmError::MalformedTag {
                tag: tag.to_string(),
                message: format!("missing closing {close}"),
            });
        };
        out.push(&after[..j]);
        rest = &after[j + close.len()..];
    }
    Ok(out)
}

/// All `<TIME>seconds</TIME>` tags in order. Contents may be plain
/// seconds or a clock string like `1:38.5`.
pub fn parse_time_tags(text: &str) -> Result<Vec<f64>, MllmError> {
    let mut out = Vec::new();
    for content in tag_contents(text, "TIME")? {
        let trimmed = content.trim();
        let secs = trimmed
            .parse::<f64>()
            .ok()
            .filter(|s| s.is_finite())
            .or_else(|| crate::scene::parse_clock(trimmed))
            .ok_or_else(|| MllmError::MalformedTag {
                tag: "TIME".to_string(),
                message: format!("cannot read {trimmed:?} as seconds"),
            })?;
        out.push(secs);
    }
    Ok(out)
}

/// All `<BBOX>x1,y1,x2,y2</BBOX>` tags in order, as normalized rectangles.
pub fn parse_bbox_tags(text: &str) -> Result<Vec<BBox>, MllmError> {
    let mut out = Vec::new();
    for content in tag_contents(text, "BBOX")? {
        let fields: Vec<f64> = content
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| MllmError::MalformedTag {
                tag: "BBOX".to_string(),
                message: format!("{content:?}: {e}"),
            })?;
        if fields.len() != 4 {
            return Err(MllmError::MalformedTag {
                tag: "BBOX".to_string(),
                message: format!("expected 4 coordinates, got {}", fields.len()),
            });
        }
        let bbox = BBox::new(fields[0], fields[1], fields[2], fields[3]).map_err(|e| {
            MllmError::MalformedTag {
                tag: "BBOX".to_string(),
                message: e.to_string(),
            }
        })?;
        out.push(bbox);
    }
    Ok(out)
}

/// Resolves the frame a question pins itself to.
///
/// An explicit frame id wins; otherwise exactly one TIME tag selects the
/// frame at that time, and zero or multiple tags select none. A single
/// BBOX tag becomes the overlay of whichever frame was selected.
pub fn attach_frame(
    explicit_frame: Option<&str>,
    question_text: &str,
) -> Result<Option<ImageRef>, MllmError> {
    let times = parse_time_tags(question_text)?;
    let bboxes = parse_bbox_tags(question_text)?;
    let overlay = (bboxes.len() == 1).then(|| bboxes[0]);

    if let Some(frame_id) = explicit_frame {
        return Ok(Some(ImageRef {
            frame_id: frame_id.to_string(),
            time_s: None,
            overlay,
        }));
    }
    if times.len() == 1 {
        let t = times[0];
        return Ok(Some(ImageRef {
            frame_id: format!("t{t}"),
            time_s: Some(t),
            overlay,
        }));
    }
    Ok(None)
}

/// Asks the backend a multiple-choice question and extracts the label.
/// Returns the extracted index (`None` is an abstention), the raw
/// response, and the bundle that was sent, for provenance.
pub fn answer_question(
    backend: &dyn MllmBackend,
    question_text: &str,
    choices: &ChoiceSet,
    context_parts: Vec<Part>,
) -> Result<(Option<usize>, String, PromptBundle), MllmError> {
    let bundle = build_mcq_bundle(question_text, choices, context_parts);
    let response = backend.complete(&bundle)?;
    let index = extract_choice(&response, choices);
    Ok((index, response, bundle))
}

/// Runs an object-recognition bundle and parses the returned list.
pub fn recognize_objects(
    backend: &dyn MllmBackend,
    bundle: &PromptBundle,
) -> Result<Vec<String>, MllmError> {
    let response = backend.complete(bundle)?;
    Ok(parse_object_list(&response))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn choices(n: usize) -> ChoiceSet {
        ChoiceSet::new((0..n).map(|i| format!("choice {i}")).collect()).unwrap()
    }

    #[test]
    fn choice_set_bounds() {
        assert!(ChoiceSet::new(vec!["a".into()]).is_err());
        assert!(ChoiceSet::new(vec![]).is_err());
        assert!(ChoiceSet::new((0..27).map(|i| i.to_string()).collect::<Vec<_>>()).is_err());
        assert!(ChoiceSet::new(vec!["a".into(), "b".into()]).is_ok());
    }

    #[test]
    fn render_block_labels_options() {
        let c = ChoiceSet::new(vec!["red mug".into(), "blue cup".into()]).unwrap();
        assert_eq!(c.render_block(), "A. red mug\nB. blue cup");
        assert_eq!(ChoiceSet::label(25), 'Z');
    }

    #[test]
    fn extracts_answer_keyword_forms() {
        let c = choices(5);
        assert_eq!(extract_choice("Answer: B", &c), Some(1));
        assert_eq!(extract_choice("answer - c", &c), Some(2));
        assert_eq!(extract_choice("**Answer** A", &c), Some(0));
        assert_eq!(extract_choice("Final answer: (D).", &c), Some(3));
        assert_eq!(extract_choice("ANSWER:E", &c), Some(4));
    }

    #[test]
    fn keyword_requires_word_boundary_on_label() {
        let c = choices(4);
        // 'a' right after "answer" belongs to "answerable", not a label.
        assert_eq!(extract_choice("Answerable questions only.", &c), None);
        assert_eq!(extract_choice("The answer Bq", &c), None);
    }

    #[test]
    fn keyword_scan_continues_past_misses() {
        let c = choices(4);
        assert_eq!(
            extract_choice("I cannot answer that one. Final answer: C", &c),
            Some(2)
        );
    }

    #[test]
    fn extracts_bare_leading_label() {
        let c = choices(5);
        assert_eq!(extract_choice("C", &c), Some(2));
        assert_eq!(extract_choice("  b.", &c), Some(1));
        assert_eq!(extract_choice("d) because it is closest", &c), Some(3));
        assert_eq!(extract_choice("Because it is closest", &c), None);
    }

    #[test]
    fn extracts_parenthesized_label() {
        let c = choices(5);
        assert_eq!(extract_choice("The mug, option (a)", &c), Some(0));
        assert_eq!(extract_choice("Either (x) or (e)?", &c), Some(4));
    }

    #[test]
    fn extracts_exact_choice_text() {
        let c = ChoiceSet::new(vec!["A red cup".into(), "the blue kettle".into()]).unwrap();
        assert_eq!(extract_choice("  the Blue Kettle ", &c), Some(1));
    }

    #[test]
    fn rules_apply_in_order() {
        // Rule 1 beats the bare label and the parenthesized label.
        let c = choices(5);
        assert_eq!(extract_choice("B? No. Answer: (C)", &c), Some(2));
    }

    #[test]
    fn unresolvable_responses_abstain() {
        let c = choices(4);
        assert_eq!(extract_choice("", &c), None);
        assert_eq!(extract_choice("I am not sure.", &c), None);
        assert_eq!(extract_choice("The answer is unclear", &c), None);
        assert_eq!(extract_choice("(z)", &c), None);
        assert_eq!(extract_choice("F", &c), None);
    }

    #[test]
    fn label_out_of_range_is_not_matched() {
        let c = choices(2);
        assert_eq!(extract_choice("Answer: C", &c), None);
        assert_eq!(extract_choice("Answer: b", &c), Some(1));
    }

    #[test]
    fn extraction_is_total_over_fuzzed_strings() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xE60);
        let pool: Vec<char> =
            "abcdefghijklmnopqrstuvwxyzABCDEF ():-*.,'\"[]<>/\n\t0123456789answerANSWER•λ東"
                .chars()
                .collect();
        let c = choices(6);
        for _ in 0..10_000 {
            let len = rng.gen_range(0..60);
            let s: String = (0..len)
                .map(|_| pool[rng.gen_range(0..pool.len())])
                .collect();
            if let Some(idx) = extract_choice(&s, &c) {
                assert!(idx < c.len());
            }
            let _ = parse_object_list(&s);
            let _ = parse_time_tags(&s);
            let _ = parse_bbox_tags(&s);
        }
    }

    #[test]
    fn parses_plain_object_list() {
        assert_eq!(
            parse_object_list("['mug', 'kettle']"),
            vec!["mug", "kettle"]
        );
        assert_eq!(
            parse_object_list(r#"["Mug", "KETTLE"]"#),
            vec!["mug", "kettle"]
        );
    }

    #[test]
    fn parses_fenced_object_list() {
        assert_eq!(parse_object_list("```python\n['mug']\n```"), vec!["mug"]);
    }

    #[test]
    fn object_list_tolerates_prose_and_skips_non_lists() {
        assert_eq!(
            parse_object_list("Sure! Here you go: ['pan', 'lid'] — hope that helps"),
            vec!["pan", "lid"]
        );
        assert_eq!(
            parse_object_list("index [0] is wrong but ['spoon'] works"),
            vec!["spoon"]
        );
    }

    #[test]
    fn object_list_dedups_preserving_order() {
        assert_eq!(
            parse_object_list("['mug', 'Mug', 'kettle', 'mug']"),
            vec!["mug", "kettle"]
        );
    }

    #[test]
    fn object_list_keeps_commas_inside_quotes() {
        assert_eq!(
            parse_object_list("['bowl, large', 'cup']"),
            vec!["bowl, large", "cup"]
        );
    }

    #[test]
    fn no_list_yields_empty() {
        assert!(parse_object_list("I see nothing.").is_empty());
        assert!(parse_object_list("[1, 2, 3]").is_empty());
        assert!(parse_object_list("[]").is_empty());
        assert!(parse_object_list("[unquoted, items]").is_empty());
    }

    #[test]
    fn time_tags_parse_seconds_and_clock() {
        assert_eq!(
            parse_time_tags("at <TIME>98.5</TIME> and <TIME>1:40</TIME>").unwrap(),
            vec![98.5, 100.0]
        );
        assert!(parse_time_tags("no tags").unwrap().is_empty());
    }

    #[test]
    fn malformed_time_tag_names_the_tag() {
        let err = parse_time_tags("<TIME>noon</TIME>").unwrap_err();
        match err {
            MllmError::MalformedTag { tag, .. } => assert_eq!(tag, "TIME"),
            other => panic!("expected MalformedTag, got {other:?}"),
        }
        assert!(parse_time_tags("<TIME>98.5").is_err());
        assert!(parse_time_tags("<TIME>nan</TIME>").is_err());
    }

    #[test]
    fn bbox_tags_parse_rectangles() {
        let boxes = parse_bbox_tags("<BBOX>0.1,0.2,0.5,0.6</BBOX>").unwrap();
        assert_eq!(boxes.len(), 1);
        assert_eq!(boxes[0], BBox::new(0.1, 0.2, 0.5, 0.6).unwrap());
    }

    #[test]
    fn malformed_bbox_tag_names_the_tag() {
        for bad in [
            "<BBOX>0.1,0.2,0.5</BBOX>",
            "<BBOX>a,b,c,d</BBOX>",
            "<BBOX>0.5,0.2,0.1,0.6</BBOX>",
        ] {
            match parse_bbox_tags(bad).unwrap_err() {
                MllmError::MalformedTag { tag, .. } => assert_eq!(tag, "BBOX"),
                other => panic!("expected MalformedTag, got {other:?}"),
            }
        }
    }

    #[test]
    fn attach_frame_prefers_explicit_image() {
        let r = attach_frame(Some("frame_007"), "when? <TIME>5</TIME>")
            .unwrap()
            .unwrap();
        assert_eq!(r.frame_id, "frame_007");
        assert_eq!(r.time_s, None);
    }

    #[test]
    fn attach_frame_single_time_tag() {
        let r = attach_frame(None, "What am I looking at <TIME>98.5</TIME>?")
            .unwrap()
            .unwrap();
        assert_eq!(r.frame_id, "t98.5");
        assert_eq!(r.time_s, Some(98.5));
        assert!(r.overlay.is_none());
    }

    #[test]
    fn attach_frame_time_plus_bbox() {
        let r = attach_frame(
            None,
            "object at <TIME>98.5</TIME> in <BBOX>0.1,0.2,0.5,0.6</BBOX>",
        )
        .unwrap()
        .unwrap();
        assert_eq!(r.overlay, Some(BBox::new(0.1, 0.2, 0.5, 0.6).unwrap()));
    }

    #[test]
    fn attach_frame_zero_or_multiple_times_yield_none() {
        assert!(attach_frame(None, "no tags").unwrap().is_none());
        assert!(attach_frame(None, "<TIME>1</TIME> then <TIME>2</TIME>")
            .unwrap()
            .is_none());
    }

    #[test]
    fn attach_frame_propagates_malformed_tags() {
        assert!(attach_frame(None, "<TIME>noon</TIME>").is_err());
        assert!(attach_frame(Some("f"), "<BBOX>1,2</BBOX>").is_err());
    }

    #[test]
    fn recognize_objects_wires_backend_and_parser() {
        struct Canned;
        impl MllmBackend for Canned {
            fn complete(&self, _b: &PromptBundle) -> Result<String, MllmError> {
                Ok("Objects: ['Mug', 'kettle']".to_string())
            }
        }
        let mut bundle = PromptBundle::new("sys");
        bundle.push(Part::video("v:full"));
        assert_eq!(
            recognize_objects(&Canned, &bundle).unwrap(),
            vec!["mug", "kettle"]
        );
    }
}
