//! The three-stage filter: structural checks on the trace, answer
//! consistency with the ground truth, and independent re-derivation by a
//! verifier model. Captions take a reconstruction check in place of the
//! verifier.

use serde::{Deserialize, Serialize};

use super::prompt::{verifier_slots, PromptError, TemplateStore};
use super::provider::{ChatMessage, ChatRequest, ProviderError, ProviderHandle, RequestMeta, RequestStage};
use super::sample::{Outcome, ReasoningSample, TaskKind};
use crate::evalharness::{Tokenizer, WhitespacePunctuation};
use crate::extraction::{extract_answer, validate_trace, Expected};
use crate::fingerprint::Structure;
use crate::molgraph::{molecules_equal, reactions_equal};
use crate::rlcore::normalize_iupac;

pub mod reason {
    pub const MISSING_TEXT: &str = "missing_text";
    pub const FORMAT: &str = "format";
    pub const GROUNDING: &str = "grounding";
    pub const LENGTH: &str = "length";
    pub const NO_ANSWER: &str = "no_answer";
    pub const UNPARSEABLE: &str = "unparseable_answer";
    pub const MISMATCH: &str = "mismatch";
    pub const NOT_APPLICABLE: &str = "not_applicable";
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StructuralRules {
    /// Matched case-insensitively as substrings.
    pub grounding_phrases: Vec<String>,
    pub min_think_tokens: usize,
    pub max_think_tokens: usize,
}

impl Default for StructuralRules {
    fn default() -> Self {
        StructuralRules {
            grounding_phrases: ["image", "depict", "I see", "analyz"].map(String::from).to_vec(),
            min_think_tokens: 64,
            max_think_tokens: 4096,
        }
    }
}

/// Checks tags (waived for captions), grounding phrases and reasoning length.
pub fn structural_filter(sample: &ReasoningSample, rules: &StructuralRules) -> Outcome {
    let Some(text) = sample.generated_text.as_deref() else {
        return Outcome::fail(reason::MISSING_TEXT);
    };
    let span = if sample.task == TaskKind::Caption {
        text
    } else {
        let layout = validate_trace(text);
        match (layout.well_formed, layout.think_span) {
            (true, Some(r)) => &text[r],
            _ => return Outcome::fail(reason::FORMAT),
        }
    };
    let lower = text.to_lowercase();
    if !rules
        .grounding_phrases
        .iter()
        .any(|p| lower.contains(&p.to_lowercase()))
    {
        return Outcome::fail(reason::GROUNDING);
    }
    let n = WhitespacePunctuation.count(span);
    if n < rules.min_think_tokens || n > rules.max_think_tokens {
        return Outcome::fail(reason::LENGTH);
    }
    Outcome::Pass
}

/// Whether `answer` names the same structure (or, for naming tasks, the
/// same normalized name) as `truth`.
pub fn answers_agree(task: TaskKind, answer: &str, truth: &str) -> Option<bool> {
    if task.expected() == Expected::Iupac {
        return Some(normalize_iupac(answer) == normalize_iupac(truth));
    }
    let (Ok(a), Ok(b)) = (Structure::parse(answer), Structure::parse(truth)) else {
        return None;
    };
    Some(match (&a, &b) {
        (Structure::Molecule(x), Structure::Molecule(y)) => molecules_equal(x, y),
        (Structure::Reaction(x), Structure::Reaction(y)) => reactions_equal(x, y),
        _ => false,
    })
}

fn judge(task: TaskKind, text: &str, truth: &str) -> Outcome {
    let answer = extract_answer(text, task.expected());
    if !answer.is_found() {
        return Outcome::fail(reason::NO_ANSWER);
    }
    match answers_agree(task, &answer.value, truth) {
        None => Outcome::fail(reason::UNPARSEABLE),
        Some(true) => Outcome::Pass,
        Some(false) => Outcome::fail(reason::MISMATCH),
    }
}

/// The trace's own answer must match the ground truth.
pub fn consistency_filter(sample: &ReasoningSample) -> Outcome {
    if sample.task == TaskKind::Caption {
        return Outcome::PassWith(reason::NOT_APPLICABLE.into());
    }
    match sample.generated_text.as_deref() {
        None => Outcome::fail(reason::MISSING_TEXT),
        Some(text) => judge(sample.task, text, &sample.ground_truth),
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VerifyError {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// Model name and sampling settings for verifier calls.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifierSettings {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

fn ask_verifier(
    sample: &ReasoningSample,
    text: &str,
    key_suffix: &str,
    templates: &TemplateStore,
    handle: &ProviderHandle,
    settings: &VerifierSettings,
) -> Result<Outcome, VerifyError> {
    let template = templates.get(&TemplateStore::verifier_id(sample.task))?;
    let prompt = template.render(&verifier_slots(sample, text)?)?;
    let request = ChatRequest {
        model: settings.model.clone(),
        messages: vec![ChatMessage::user(prompt)],
        temperature: settings.temperature,
        max_tokens: settings.max_tokens,
        meta: RequestMeta {
            key: format!("{}/{key_suffix}", sample.id),
            task: sample.task,
            stage: RequestStage::Verification,
            reference: Some(sample.ground_truth.clone()),
        },
    };
    let (reply, _) = handle.call(&request);
    Ok(judge(sample.task, &reply?.content, &sample.ground_truth))
}

/// The verifier sees the query and the reasoning, never the ground truth or
/// the trace's answer block, and must arrive at the ground truth.
pub fn verifier_filter(
    sample: &ReasoningSample,
    templates: &TemplateStore,
    handle: &ProviderHandle,
    settings: &VerifierSettings,
) -> Result<Outcome, VerifyError> {
    if sample.task == TaskKind::Caption {
        return caption_reconstruction_filter(sample, templates, handle, settings);
    }
    let Some(text) = sample.generated_text.as_deref() else {
        return Ok(Outcome::fail(reason::MISSING_TEXT));
    };
    let layout = validate_trace(text);
    let reasoning = layout.think_span.map_or(text, |r| &text[r]);
    ask_verifier(sample, reasoning, "verify", templates, handle, settings)
}

/// The verifier sees only the caption and must recover the structure.
pub fn caption_reconstruction_filter(
    sample: &ReasoningSample,
    templates: &TemplateStore,
    handle: &ProviderHandle,
    settings: &VerifierSettings,
) -> Result<Outcome, VerifyError> {
    let Some(caption) = sample.generated_text.as_deref() else {
        return Ok(Outcome::fail(reason::MISSING_TEXT));
    };
    let mut as_caption = sample.clone();
    as_caption.task = TaskKind::Caption;
    ask_verifier(&as_caption, caption, "reconstruct", templates, handle, settings)
}
