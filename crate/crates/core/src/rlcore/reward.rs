//! Verifiable rewards: structure accuracy (three formulations), IUPAC name
//! matching, trace format, and their weighted composite.

use serde::{Deserialize, Serialize};

use crate::extraction::{extract_answer, validate_trace, Expected, SourcePattern};
use crate::fingerprint::{structure_similarity, FingerprintParams, Structure};

const WEIGHT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccuracyVariant {
    /// 1 only for identical fingerprints (and equal heavy-atom counts when guarded).
    #[default]
    StructId,
    /// The Tanimoto similarity itself.
    DenseTanimoto,
    /// 1 only when the extracted string equals the ground truth byte for byte.
    ExactString,
}

impl std::str::FromStr for AccuracyVariant {
    type Err = RewardError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "struct_id" => Ok(AccuracyVariant::StructId),
            "dense_tanimoto" => Ok(AccuracyVariant::DenseTanimoto),
            "exact_string" => Ok(AccuracyVariant::ExactString),
            other => Err(RewardError::InvalidSpec(format!(
                "unknown accuracy variant '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RewardError {
    #[error("ground truth does not parse: {0}")]
    InvalidGroundTruth(String),
    #[error("invalid reward spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardSpec {
    pub accuracy_variant: AccuracyVariant,
    pub w_accuracy: f64,
    pub w_format: f64,
    pub fingerprint: FingerprintParams,
    /// Also require equal heavy-atom counts before granting a structure match.
    pub heavy_atom_guard: bool,
}

impl Default for RewardSpec {
    fn default() -> Self {
        RewardSpec {
            accuracy_variant: AccuracyVariant::StructId,
            w_accuracy: 0.9,
            w_format: 0.1,
            fingerprint: FingerprintParams::default(),
            heavy_atom_guard: true,
        }
    }
}

impl RewardSpec {
    pub fn with_variant(variant: AccuracyVariant) -> RewardSpec {
        RewardSpec {
            accuracy_variant: variant,
            ..RewardSpec::default()
        }
    }

    pub fn validate(&self) -> Result<(), RewardError> {
        let (a, f) = (self.w_accuracy, self.w_format);
        if !(a >= 0.0 && f >= 0.0) {
            return Err(RewardError::InvalidSpec(format!(
                "weights must be non-negative, got ({a}, {f})"
            )));
        }
        if ((a + f) - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(RewardError::InvalidSpec(format!(
                "weights must sum to 1, got {}",
                a + f
            )));
        }
        self.fingerprint
            .validate()
            .map_err(|e| RewardError::InvalidSpec(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardDetail {
    pub similarity: f64,
    pub source: Option<SourcePattern>,
    pub extracted: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardOutcome {
    pub accuracy: f64,
    pub format: f64,
    pub composite: f64,
    pub detail: RewardDetail,
}

struct Scored {
    score: f64,
    detail: RewardDetail,
}

fn score_smiles(prediction: &str, ground_truth: &str, spec: &RewardSpec) -> Result<Scored, RewardError> {
    let truth = Structure::parse(ground_truth)
        .map_err(|e| RewardError::InvalidGroundTruth(format!("'{ground_truth}': {e}")))?;
    let answer = extract_answer(prediction, Expected::Smiles);
    let mut detail = RewardDetail {
        similarity: 0.0,
        source: answer.source,
        extracted: answer.is_found().then(|| answer.value.clone()),
    };
    if !answer.is_found() {
        return Ok(Scored { score: 0.0, detail });
    }
    let Ok(pred) = Structure::parse(&answer.value) else {
        return Ok(Scored { score: 0.0, detail });
    };
    let sim = structure_similarity(&pred, &truth, spec.fingerprint);
    detail.similarity = sim.value;
    let score = match spec.accuracy_variant {
        AccuracyVariant::StructId => {
            let guard = !spec.heavy_atom_guard || pred.heavy_atom_count() == truth.heavy_atom_count();
            if sim.exact && guard { 1.0 } else { 0.0 }
        }
        AccuracyVariant::DenseTanimoto => sim.value,
        AccuracyVariant::ExactString => {
            if answer.value == ground_truth { 1.0 } else { 0.0 }
        }
    };
    Ok(Scored { score, detail })
}

/// Returns `(score, similarity)`. Missing or unparseable predictions score 0.
pub fn accuracy_reward_smiles(
    prediction: &str,
    ground_truth: &str,
    spec: &RewardSpec,
) -> Result<(f64, f64), RewardError> {
    let s = score_smiles(prediction, ground_truth, spec)?;
    Ok((s.score, s.detail.similarity))
}

/// Trim, collapse internal whitespace runs to one space, and case-fold.
pub fn normalize_iupac(name: &str) -> String {
    name.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

fn score_iupac(prediction: &str, ground_truth: &str) -> Scored {
    let answer = extract_answer(prediction, Expected::Iupac);
    let candidate = if answer.is_found() {
        answer.value.as_str()
    } else {
        prediction
    };
    let score = if !ground_truth.trim().is_empty()
        && normalize_iupac(candidate) == normalize_iupac(ground_truth)
    {
        1.0
    } else {
        0.0
    };
    Scored {
        score,
        detail: RewardDetail {
            similarity: score,
            source: answer.source,
            extracted: Some(candidate.to_string()),
        },
    }
}

/// 1 when the extracted name (or the whole output, if no name is tagged)
/// matches the ground truth after normalization.
pub fn accuracy_reward_iupac(prediction: &str, ground_truth: &str) -> f64 {
    score_iupac(prediction, ground_truth).score
}

pub fn format_reward(text: &str) -> f64 {
    if validate_trace(text).well_formed { 1.0 } else { 0.0 }
}

pub fn composite_reward(
    prediction: &str,
    ground_truth: &str,
    expected: Expected,
    spec: &RewardSpec,
) -> Result<RewardOutcome, RewardError> {
    spec.validate()?;
    let scored = match expected {
        Expected::Smiles => score_smiles(prediction, ground_truth, spec)?,
        Expected::Iupac => {
            if ground_truth.trim().is_empty() {
                return Err(RewardError::InvalidGroundTruth("empty IUPAC name".into()));
            }
            score_iupac(prediction, ground_truth)
        }
    };
    let format = format_reward(prediction);
    Ok(RewardOutcome {
        accuracy: scored.score,
        format,
        composite: combine(scored.score, format, spec),
        detail: scored.detail,
    })
}

/// `w_accuracy * accuracy + w_format * format`.
pub fn combine(accuracy: f64, format: f64, spec: &RewardSpec) -> f64 {
    spec.w_accuracy * accuracy + spec.w_format * format
}
