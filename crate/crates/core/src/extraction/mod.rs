//! Answer extraction from free-form model output and validation of the
//! `<think>…</think><answer>…</answer>` layout.
//!
//! Patterns are tried in a fixed order and the first family that yields a
//! value wins:
//!
//! 1. tagged: `<SMILES>…</SMILES>` or `<IUPAC>…</IUPAC>`, last occurrence
//! 2. fenced JSON: a fenced code block holding an object with a known key
//! 3. `bbox{…}`
//! 4. `**bold**`
//! 5. bare token (SMILES only): the last whitespace-separated token that
//!    parses
//!
//! For SMILES, the bbox, bold and bare candidates must parse as a molecule
//! or reaction; the last parseable candidate of a family is taken.

use std::ops::Range;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::fingerprint::Structure;

/// What the caller is looking for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expected {
    Smiles,
    Iupac,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerKind {
    Smiles,
    Iupac,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourcePattern {
    Tagged,
    FencedJson,
    Bbox,
    Bold,
    BareFallback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedAnswer {
    pub kind: AnswerKind,
    pub value: String,
    pub source: Option<SourcePattern>,
    /// Byte range of `value` in the input.
    pub span: Option<Range<usize>>,
}

impl ExtractedAnswer {
    pub fn none() -> ExtractedAnswer {
        ExtractedAnswer {
            kind: AnswerKind::None,
            value: String::new(),
            source: None,
            span: None,
        }
    }

    pub fn is_found(&self) -> bool {
        self.kind != AnswerKind::None
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceLayout {
    /// Byte range of the think block's content.
    pub think_span: Option<Range<usize>>,
    /// Byte range of the answer block's content.
    pub answer_span: Option<Range<usize>>,
    pub well_formed: bool,
}

const THINK_OPEN: &str = "<think>";
const THINK_CLOSE: &str = "</think>";
const ANSWER_OPEN: &str = "<answer>";
const ANSWER_CLOSE: &str = "</answer>";

fn block(text: &str, open: &str, close: &str) -> Option<Range<usize>> {
    let start = text.find(open)? + open.len();
    let end = start + text[start..].find(close)?;
    Some(start..end)
}

fn nested(content: &str) -> bool {
    [THINK_OPEN, THINK_CLOSE, ANSWER_OPEN, ANSWER_CLOSE]
        .iter()
        .any(|t| content.contains(t))
}

/// Locates the think and answer blocks. The layout is well formed when the
/// text is exactly one think block followed by exactly one answer block,
/// with only whitespace around and between them.
pub fn validate_trace(text: &str) -> TraceLayout {
    let think_span = block(text, THINK_OPEN, THINK_CLOSE);
    let answer_span = block(text, ANSWER_OPEN, ANSWER_CLOSE);
    let once = |tag: &str| text.matches(tag).count() == 1;
    let well_formed = match (&think_span, &answer_span) {
        (Some(t), Some(a)) => {
            [THINK_OPEN, THINK_CLOSE, ANSWER_OPEN, ANSWER_CLOSE]
                .iter()
                .all(|tag| once(tag))
                && text[..t.start - THINK_OPEN.len()].trim().is_empty()
                && text[t.end + THINK_CLOSE.len()..a.start - ANSWER_OPEN.len()]
                    .trim()
                    .is_empty()
                && text[a.end + ANSWER_CLOSE.len()..].trim().is_empty()
                && !nested(&text[t.clone()])
                && !nested(&text[a.clone()])
        }
        _ => false,
    };
    TraceLayout {
        think_span,
        answer_span,
        well_formed,
    }
}

static SMILES_TAG: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)<SMILES>(.*?)</SMILES>").unwrap());
static IUPAC_TAG: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)<IUPAC>(.*?)</IUPAC>").unwrap());
static FENCED: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)```[A-Za-z]*[ \t]*\n?(.*?)```").unwrap());
static BBOX: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"bbox\{([^{}]*)\}").unwrap());
static BOLD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\*\*([^*\n]+?)\*\*").unwrap());

const SMILES_KEYS: [&str; 4] = ["smiles", "SMILES", "product", "answer"];
const IUPAC_KEYS: [&str; 4] = ["iupac", "IUPAC", "name", "answer"];

fn trimmed(text: &str, range: Range<usize>) -> Range<usize> {
    let s = &text[range.clone()];
    let start = range.start + (s.len() - s.trim_start().len());
    let end = range.end - (s.len() - s.trim_end().len());
    start..end.max(start)
}

fn parses(candidate: &str) -> bool {
    Structure::parse(candidate).is_ok()
}

fn found(kind: AnswerKind, text: &str, span: Range<usize>, source: SourcePattern) -> ExtractedAnswer {
    ExtractedAnswer {
        kind,
        value: text[span.clone()].to_string(),
        source: Some(source),
        span: Some(span),
    }
}

/// Group-1 spans of `re` in `text`, trimmed, non-empty, in order.
fn captures(re: &Regex, text: &str) -> Vec<Range<usize>> {
    re.captures_iter(text)
        .filter_map(|c| c.get(1))
        .map(|m| trimmed(text, m.range()))
        .filter(|r| !r.is_empty())
        .collect()
}

fn fenced_value(text: &str, keys: &[&str]) -> Option<Range<usize>> {
    let mut best = None;
    for body in FENCED.captures_iter(text).filter_map(|c| c.get(1)) {
        let Ok(serde_json::Value::Object(map)) = serde_json::from_str(body.as_str()) else {
            continue;
        };
        let Some(value) = keys
            .iter()
            .find_map(|k| map.get(*k).and_then(|v| v.as_str()))
            .map(str::trim)
            .filter(|v| !v.is_empty())
        else {
            continue;
        };
        // locate the value in the raw body; escaped strings fall back to the body
        let raw = body.as_str();
        best = Some(match raw.find(value) {
            Some(off) => body.start() + off..body.start() + off + value.len(),
            None => trimmed(text, body.range()),
        });
    }
    best
}

fn strip_token(token: &str) -> &str {
    let t = token.trim_end_matches(['.', ',', ';', ':']);
    let t = t.trim_matches(|c| matches!(c, '`' | '"' | '\''));
    t.trim_end_matches(['.', ',', ';', ':'])
}

fn bare_token(text: &str) -> Option<Range<usize>> {
    let mut tokens: Vec<Range<usize>> = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                tokens.push(s..i);
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        tokens.push(s..text.len());
    }
    tokens.into_iter().rev().find_map(|r| {
        let raw = &text[r.clone()];
        let t = strip_token(raw);
        if t.len() < 2 || t.chars().all(|c| c.is_ascii_lowercase()) || !parses(t) {
            return None;
        }
        let off = raw.find(t)?;
        Some(r.start + off..r.start + off + t.len())
    })
}

/// Extracts the final answer of the expected kind from `text`.
pub fn extract_answer(text: &str, expected: Expected) -> ExtractedAnswer {
    let (kind, tag, keys) = match expected {
        Expected::Smiles => (AnswerKind::Smiles, &*SMILES_TAG, &SMILES_KEYS),
        Expected::Iupac => (AnswerKind::Iupac, &*IUPAC_TAG, &IUPAC_KEYS),
    };
    let valid = |r: &Range<usize>| expected == Expected::Iupac || parses(&text[r.clone()]);

    if let Some(r) = captures(tag, text).pop() {
        return found(kind, text, r, SourcePattern::Tagged);
    }
    if let Some(r) = fenced_value(text, keys) {
        return found(kind, text, r, SourcePattern::FencedJson);
    }
    if let Some(r) = captures(&BBOX, text).into_iter().rev().find(valid) {
        return found(kind, text, r, SourcePattern::Bbox);
    }
    if let Some(r) = captures(&BOLD, text).into_iter().rev().find(valid) {
        return found(kind, text, r, SourcePattern::Bold);
    }
    if expected == Expected::Smiles {
        if let Some(r) = bare_token(text) {
            return found(kind, text, r, SourcePattern::BareFallback);
        }
    }
    ExtractedAnswer::none()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smiles(text: &str) -> (String, Option<SourcePattern>) {
        let a = extract_answer(text, Expected::Smiles);
        (a.value, a.source)
    }

    #[test]
    fn canonical_layout() {
        let t = validate_trace("<think>x</think><answer>y</answer>");
        assert!(t.well_formed);
        assert_eq!(t.think_span, Some(7..8));
        assert_eq!(t.answer_span, Some(24..25));
    }

    #[test]
    fn unclosed_think() {
        let t = validate_trace("<think>x<answer>y</answer>");
        assert!(!t.well_formed);
        assert_eq!(t.think_span, None);
        assert!(t.answer_span.is_some());
    }

    #[test]
    fn layout_rules() {
        assert!(validate_trace("  <think>a</think>\n\n<answer>b</answer>\n").well_formed);
        assert!(!validate_trace("<think>a</think><think>b</think><answer>c</answer>").well_formed);
        assert!(!validate_trace("<answer>b</answer><think>a</think>").well_formed);
        assert!(!validate_trace("pre <think>a</think><answer>b</answer>").well_formed);
        assert!(!validate_trace("<think>a</think> mid <answer>b</answer>").well_formed);
        assert!(!validate_trace("answer: CCO").well_formed);
    }

    #[test]
    fn tagged_last_wins() {
        let text = "<think>maybe <SMILES>CCN</SMILES></think><answer><SMILES> CCO </SMILES></answer>";
        let a = extract_answer(text, Expected::Smiles);
        assert_eq!(a.value, "CCO");
        assert_eq!(a.source, Some(SourcePattern::Tagged));
        let layout = validate_trace(text);
        let answer = layout.answer_span.unwrap();
        let span = a.span.unwrap();
        assert!(answer.start <= span.start && span.end <= answer.end);
    }

    #[test]
    fn families() {
        assert_eq!(smiles("the answer is **CCO**"), ("CCO".into(), Some(SourcePattern::Bold)));
        assert_eq!(
            smiles("```json\n{\"smiles\": \"CCO\"}\n```"),
            ("CCO".into(), Some(SourcePattern::FencedJson))
        );
        assert_eq!(smiles("bbox{c1ccccc1}"), ("c1ccccc1".into(), Some(SourcePattern::Bbox)));
        assert_eq!(
            smiles("so the product is `CC(=O)O`."),
            ("CC(=O)O".into(), Some(SourcePattern::BareFallback))
        );
        assert_eq!(smiles("no idea"), (String::new(), None));
    }

    #[test]
    fn bold_prose_is_skipped_for_smiles() {
        let text = "**Step 1:** think. The product is **CCOC(C)=O** and **done**";
        assert_eq!(smiles(text), ("CCOC(C)=O".into(), Some(SourcePattern::Bold)));
    }

    #[test]
    fn tagged_beats_everything() {
        let text = "**CCN** ```json\n{\"smiles\": \"CCC\"}\n``` <SMILES>CCO</SMILES>";
        assert_eq!(smiles(text).0, "CCO");
    }

    #[test]
    fn iupac_answers() {
        let a = extract_answer("<IUPAC>ethanol</IUPAC>", Expected::Iupac);
        assert_eq!((a.kind, a.value.as_str()), (AnswerKind::Iupac, "ethanol"));
        let a = extract_answer("```\n{\"name\": \"propan-2-ol\"}\n```", Expected::Iupac);
        assert_eq!(a.value, "propan-2-ol");
        let a = extract_answer("just CCO", Expected::Iupac);
        assert_eq!(a.kind, AnswerKind::None);
    }

    #[test]
    fn json_key_priority() {
        let text = "```json\n{\"answer\": \"CCC\", \"smiles\": \"CCO\"}\n```";
        assert_eq!(smiles(text).0, "CCO");
    }
}
