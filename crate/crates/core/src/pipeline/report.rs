//! Per-task retention counts after the three filtering stages.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::sample::{ReasoningSample, TaskKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StageCounts {
    pub input: usize,
    pub generated: usize,
    pub pass_structural: usize,
    pub pass_consistency: usize,
    pub pass_verifier: usize,
    /// Samples stopped by a provider, lookup or validation error.
    pub errored: usize,
}

impl StageCounts {
    /// `pass_verifier / generated`, 0 when nothing was generated.
    pub fn retention_rate(&self) -> f64 {
        if self.generated == 0 {
            0.0
        } else {
            self.pass_verifier as f64 / self.generated as f64
        }
    }

    pub fn is_monotone(&self) -> bool {
        self.generated >= self.pass_structural
            && self.pass_structural >= self.pass_consistency
            && self.pass_consistency >= self.pass_verifier
    }

    fn add(&mut self, sample: &ReasoningSample, errored: bool) {
        let v = &sample.filter_verdicts;
        self.input += 1;
        self.errored += errored as usize;
        if sample.generated_text.is_none() {
            return;
        }
        self.generated += 1;
        if v.structural.is_pass() {
            self.pass_structural += 1;
            if v.consistency.is_pass() {
                self.pass_consistency += 1;
                if v.verifier.is_pass() {
                    self.pass_verifier += 1;
                }
            }
        }
    }

    fn merge(&mut self, o: &StageCounts) {
        self.input += o.input;
        self.generated += o.generated;
        self.pass_structural += o.pass_structural;
        self.pass_consistency += o.pass_consistency;
        self.pass_verifier += o.pass_verifier;
        self.errored += o.errored;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRetention {
    pub task: TaskKind,
    #[serde(flatten)]
    pub counts: StageCounts,
    pub retention_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetentionReport {
    pub tasks: Vec<TaskRetention>,
    pub total: StageCounts,
    pub total_retention_rate: f64,
}

impl RetentionReport {
    /// Builds the report from processed samples; `errored[i]` marks samples
    /// whose processing stopped on an error.
    pub fn from_samples<'a>(samples: impl IntoIterator<Item = (&'a ReasoningSample, bool)>) -> RetentionReport {
        let mut by_task: BTreeMap<TaskKind, StageCounts> = BTreeMap::new();
        for (s, errored) in samples {
            by_task.entry(s.task).or_default().add(s, errored);
        }
        let mut total = StageCounts::default();
        let tasks = by_task
            .into_iter()
            .map(|(task, counts)| {
                total.merge(&counts);
                TaskRetention {
                    task,
                    counts,
                    retention_rate: counts.retention_rate(),
                }
            })
            .collect();
        RetentionReport {
            tasks,
            total,
            total_retention_rate: total.retention_rate(),
        }
    }

    pub fn is_monotone(&self) -> bool {
        self.total.is_monotone() && self.tasks.iter().all(|t| t.counts.is_monotone())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<16} {:>9} {:>10} {:>11} {:>8} {:>9}",
            "Task", "Generated", "Structural", "Consistency", "Verifier", "Retention"
        );
        let mut row = |name: &str, c: &StageCounts| {
            let _ = writeln!(
                out,
                "{:<16} {:>9} {:>10} {:>11} {:>8} {:>8.1}%",
                name,
                c.generated,
                c.pass_structural,
                c.pass_consistency,
                c.pass_verifier,
                100.0 * c.retention_rate()
            );
        };
        for t in &self.tasks {
            row(t.task.as_str(), &t.counts);
        }
        row("total", &self.total);
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::sample::{FilterStage, Outcome};

    fn sample(task: TaskKind, passes: usize) -> ReasoningSample {
        let mut s = ReasoningSample::new("x", task, "C", "C");
        s.generated_text = Some("t".into());
        for (k, stage) in FilterStage::ALL.into_iter().enumerate() {
            let o = if k < passes { Outcome::Pass } else { Outcome::fail("r") };
            s.record_verdict(stage, o.clone()).unwrap();
            if !o.is_pass() {
                break;
            }
        }
        s
    }

    #[test]
    fn counts_and_rates() {
        let mut samples: Vec<ReasoningSample> = (0..7).map(|_| sample(TaskKind::MolRecognition, 3)).collect();
        samples.extend((0..3).map(|_| sample(TaskKind::MolRecognition, 1)));
        samples.push(sample(TaskKind::Caption, 0));
        let r = RetentionReport::from_samples(samples.iter().map(|s| (s, false)));
        let mol = &r.tasks[0].counts;
        assert_eq!(
            (mol.generated, mol.pass_structural, mol.pass_consistency, mol.pass_verifier),
            (10, 10, 7, 7)
        );
        assert_eq!(r.tasks[0].retention_rate, 0.7);
        assert!(r.is_monotone());
        let text = r.to_text();
        assert!(text.contains("70.0%"));
        assert!(text.lines().last().unwrap().starts_with("total"));
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["tasks"][0]["pass_verifier"], 7);
    }
}
