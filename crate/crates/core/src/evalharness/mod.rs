//! Scoring of prediction files (average Tanimoto similarity and the share of
//! exact hits) and token-count statistics over text corpora.

mod tokenize;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use tokenize::{MergeTable, MergeTableError, Tokenizer, WhitespacePunctuation};

use crate::extraction::{extract_answer, Expected};
use crate::fingerprint::{structure_similarity, FingerprintParams, Structure};
use crate::pipeline::TaskKind;
use crate::rlcore::normalize_iupac;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("no records to evaluate")]
    EmptyInput,
    #[error("record {id}: ground truth does not parse: {reason}")]
    InvalidGroundTruth { id: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalRecord {
    pub id: String,
    pub task: TaskKind,
    pub raw_output: String,
    pub ground_truth: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecordScore {
    pub similarity: f64,
    /// Identical bit sets (or canonical members) rather than a float test.
    pub exact: bool,
    pub extracted: bool,
    pub parsed: bool,
}

impl RecordScore {
    const MISS: RecordScore = RecordScore {
        similarity: 0.0,
        exact: false,
        extracted: false,
        parsed: false,
    };
}

/// Similarity of the answer extracted from `rec.raw_output` to the ground
/// truth. Missing or unparseable answers score 0.
pub fn score_record(rec: &EvalRecord, params: FingerprintParams) -> Result<RecordScore, EvalError> {
    let expected = rec.task.expected();
    let truth = match expected {
        Expected::Smiles => Some(Structure::parse(&rec.ground_truth).map_err(|e| {
            EvalError::InvalidGroundTruth {
                id: rec.id.clone(),
                reason: e.to_string(),
            }
        })?),
        Expected::Iupac => None,
    };
    let answer = extract_answer(&rec.raw_output, expected);
    if !answer.is_found() {
        return Ok(RecordScore::MISS);
    }
    let Some(truth) = truth else {
        let exact = normalize_iupac(&answer.value) == normalize_iupac(&rec.ground_truth);
        return Ok(RecordScore {
            similarity: if exact { 1.0 } else { 0.0 },
            exact,
            extracted: true,
            parsed: true,
        });
    };
    let Ok(pred) = Structure::parse(&answer.value) else {
        return Ok(RecordScore {
            extracted: true,
            ..RecordScore::MISS
        });
    };
    let sim = structure_similarity(&pred, &truth, params);
    Ok(RecordScore {
        similarity: sim.value,
        exact: sim.exact,
        extracted: true,
        parsed: true,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    /// Percentage.
    pub avg_similarity: f64,
    /// Percentage of exact hits.
    pub tani_at_1: f64,
    pub n_total: usize,
    pub n_parsed: usize,
    pub n_extracted: usize,
}

impl MetricSummary {
    pub fn from_scores(scores: &[RecordScore]) -> Result<MetricSummary, EvalError> {
        if scores.is_empty() {
            return Err(EvalError::EmptyInput);
        }
        let n = scores.len() as f64;
        // sorted summation keeps the mean independent of record order
        let mut sims: Vec<f64> = scores.iter().map(|s| s.similarity).collect();
        sims.sort_by(f64::total_cmp);
        let sum: f64 = sims.iter().sum();
        let hits = scores.iter().filter(|s| s.exact).count();
        Ok(MetricSummary {
            avg_similarity: 100.0 * sum / n,
            tani_at_1: 100.0 * hits as f64 / n,
            n_total: scores.len(),
            n_parsed: scores.iter().filter(|s| s.parsed).count(),
            n_extracted: scores.iter().filter(|s| s.extracted).count(),
        })
    }
}

pub fn evaluate(records: &[EvalRecord], params: FingerprintParams) -> Result<MetricSummary, EvalError> {
    let scores = records
        .iter()
        .map(|r| score_record(r, params))
        .collect::<Result<Vec<_>, _>>()?;
    MetricSummary::from_scores(&scores)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall: MetricSummary,
    pub by_task: BTreeMap<TaskKind, MetricSummary>,
}

impl EvalReport {
    pub fn build(records: &[EvalRecord], params: FingerprintParams) -> Result<EvalReport, EvalError> {
        let mut grouped: BTreeMap<TaskKind, Vec<RecordScore>> = BTreeMap::new();
        let mut all = Vec::with_capacity(records.len());
        for r in records {
            let s = score_record(r, params)?;
            grouped.entry(r.task).or_default().push(s);
            all.push(s);
        }
        let overall = MetricSummary::from_scores(&all)?;
        let by_task = grouped
            .into_iter()
            .map(|(t, s)| Ok((t, MetricSummary::from_scores(&s)?)))
            .collect::<Result<_, EvalError>>()?;
        Ok(EvalReport { overall, by_task })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<18} {:>7} {:>10} {:>9} {:>9}",
            "Task", "Samples", "Extracted", "Avg Sim.", "Tani@1.0"
        );
        let mut row = |name: &str, m: &MetricSummary| {
            let _ = writeln!(
                out,
                "{:<18} {:>7} {:>10} {:>9.1} {:>9.1}",
                name, m.n_total, m.n_extracted, m.avg_similarity, m.tani_at_1
            );
        };
        for (task, m) in &self.by_task {
            row(task.as_str(), m);
        }
        row("overall", &self.overall);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokenStats {
    pub sample_count: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub sd: f64,
}

pub fn token_stats<S: AsRef<str>>(texts: &[S], tokenizer: &dyn Tokenizer) -> Result<TokenStats, EvalError> {
    if texts.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let counts: Vec<f64> = texts.iter().map(|t| tokenizer.count(t.as_ref()) as f64).collect();
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<f64>() / n;
    let var = counts.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / n;
    Ok(TokenStats {
        sample_count: counts.len(),
        mean,
        sd: var.sqrt(),
    })
}

/// Rows of `(category, stats)` as a Samples / Average / SD table.
pub fn token_stats_table(rows: &[(String, TokenStats)]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<18} {:>8} {:>10} {:>10}", "Category", "Samples", "Average", "SD");
    for (name, s) in rows {
        let _ = writeln!(
            out,
            "{:<18} {:>8} {:>10.2} {:>10.2}",
            name, s.sample_count, s.mean, s.sd
        );
    }
    out
}
