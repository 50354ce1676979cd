//! Sample records flowing through the generation pipeline and their filter
//! verdicts.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::extraction::Expected;
use crate::fingerprint::Structure;
use crate::molgraph::{parse_group, parse_smiles, split_reaction, MolGraph, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    MolRecognition,
    RxnRecognition,
    RxnPrediction,
    MolToIupac,
    Caption,
}

impl TaskKind {
    pub const ALL: [TaskKind; 5] = [
        TaskKind::MolRecognition,
        TaskKind::RxnRecognition,
        TaskKind::RxnPrediction,
        TaskKind::MolToIupac,
        TaskKind::Caption,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::MolRecognition => "mol_recognition",
            TaskKind::RxnRecognition => "rxn_recognition",
            TaskKind::RxnPrediction => "rxn_prediction",
            TaskKind::MolToIupac => "mol_to_iupac",
            TaskKind::Caption => "caption",
        }
    }

    /// Kind of answer a model is asked to produce.
    pub fn expected(self) -> Expected {
        match self {
            TaskKind::MolToIupac => Expected::Iupac,
            _ => Expected::Smiles,
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskKind::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown task '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    #[default]
    Pending,
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Verdict {
    pub status: VerdictStatus,
    pub reason: Option<String>,
    /// Position in the sample's sequence of recorded verdicts, starting at 1.
    pub step: Option<u64>,
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        self.status == VerdictStatus::Pass
    }

    pub fn is_pending(&self) -> bool {
        self.status == VerdictStatus::Pending
    }
}

/// Result of running one filter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    /// Passed with a note, e.g. when a rule does not apply to the task.
    PassWith(String),
    Fail(String),
}

impl Outcome {
    pub fn fail(reason: impl Into<String>) -> Outcome {
        Outcome::Fail(reason.into())
    }

    pub fn is_pass(&self) -> bool {
        !matches!(self, Outcome::Fail(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterStage {
    Structural,
    Consistency,
    Verifier,
}

impl FilterStage {
    pub const ALL: [FilterStage; 3] = [
        FilterStage::Structural,
        FilterStage::Consistency,
        FilterStage::Verifier,
    ];

    fn previous(self) -> Option<FilterStage> {
        match self {
            FilterStage::Structural => None,
            FilterStage::Consistency => Some(FilterStage::Structural),
            FilterStage::Verifier => Some(FilterStage::Consistency),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FilterVerdicts {
    pub structural: Verdict,
    pub consistency: Verdict,
    pub verifier: Verdict,
}

impl FilterVerdicts {
    pub fn get(&self, stage: FilterStage) -> &Verdict {
        match stage {
            FilterStage::Structural => &self.structural,
            FilterStage::Consistency => &self.consistency,
            FilterStage::Verifier => &self.verifier,
        }
    }

    fn get_mut(&mut self, stage: FilterStage) -> &mut Verdict {
        match stage {
            FilterStage::Structural => &mut self.structural,
            FilterStage::Consistency => &mut self.consistency,
            FilterStage::Verifier => &mut self.verifier,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Anchors {
    /// One entry per component, `None` where the lookup missed.
    pub iupac_names: Vec<Option<String>>,
    /// One list per component.
    pub functional_groups: Vec<Vec<String>>,
    pub demo_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub model_id: Option<String>,
    /// Unix seconds.
    pub timestamp: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReasoningSample {
    pub id: String,
    pub task: TaskKind,
    pub query: String,
    pub ground_truth: String,
    #[serde(default)]
    pub anchors: Anchors,
    #[serde(default)]
    pub generated_text: Option<String>,
    #[serde(default)]
    pub filter_verdicts: FilterVerdicts,
    #[serde(default)]
    pub image_ref: Option<String>,
    #[serde(default)]
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SampleError {
    #[error("sample has an empty id")]
    EmptyId,
    #[error("sample {id}: query does not parse: {reason}")]
    InvalidQuery { id: String, reason: String },
    #[error("sample {id}: ground truth does not parse: {reason}")]
    InvalidGroundTruth { id: String, reason: String },
    #[error("sample {id}: {stage:?} verdict already recorded")]
    AlreadyDecided { id: String, stage: FilterStage },
    #[error("sample {id}: {stage:?} requires the previous filter to pass")]
    OutOfOrder { id: String, stage: FilterStage },
}

/// One molecule the anchors describe, with the role it plays.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub role: Option<Role>,
    pub smiles: String,
}

impl ReasoningSample {
    pub fn new(id: impl Into<String>, task: TaskKind, query: impl Into<String>, ground_truth: impl Into<String>) -> Self {
        ReasoningSample {
            id: id.into(),
            task,
            query: query.into(),
            ground_truth: ground_truth.into(),
            anchors: Anchors::default(),
            generated_text: None,
            filter_verdicts: FilterVerdicts::default(),
            image_ref: None,
            provenance: Provenance::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SampleError> {
        if self.id.trim().is_empty() {
            return Err(SampleError::EmptyId);
        }
        self.components()?;
        match self.task {
            TaskKind::MolToIupac => {
                if self.ground_truth.trim().is_empty() {
                    return Err(SampleError::InvalidGroundTruth {
                        id: self.id.clone(),
                        reason: "empty name".into(),
                    });
                }
            }
            _ => {
                Structure::parse(&self.ground_truth).map_err(|e| SampleError::InvalidGroundTruth {
                    id: self.id.clone(),
                    reason: e.to_string(),
                })?;
            }
        }
        Ok(())
    }

    /// Molecules the anchors are computed for: the query molecule, or every
    /// reactant, agent and product of the reaction.
    pub fn components(&self) -> Result<Vec<Component>, SampleError> {
        let bad_query = |reason: String| SampleError::InvalidQuery {
            id: self.id.clone(),
            reason,
        };
        match self.task {
            TaskKind::MolRecognition | TaskKind::MolToIupac | TaskKind::Caption => {
                parse_smiles(&self.query).map_err(|e| bad_query(e.to_string()))?;
                Ok(vec![Component {
                    role: None,
                    smiles: self.query.trim().to_string(),
                }])
            }
            TaskKind::RxnRecognition | TaskKind::RxnPrediction => {
                let source = if self.task == TaskKind::RxnRecognition {
                    self.query.as_str()
                } else {
                    self.query.trim().trim_end_matches('>')
                };
                let groups: Vec<&str> = if self.task == TaskKind::RxnRecognition {
                    split_reaction(source)
                        .map_err(|e| bad_query(e.to_string()))?
                        .to_vec()
                } else {
                    let mut it = source.splitn(2, '>');
                    vec![it.next().unwrap_or(""), it.next().unwrap_or(""), &self.ground_truth]
                };
                let mut out = Vec::new();
                for (group, role) in groups.iter().zip([Role::Reactant, Role::Agent, Role::Product]) {
                    let members = parse_group(group, role).map_err(|e| bad_query(e.to_string()))?;
                    out.extend(
                        group
                            .split('.')
                            .filter(|s| !s.trim().is_empty())
                            .zip(members)
                            .map(|(s, _)| Component {
                                role: Some(role),
                                smiles: s.trim().to_string(),
                            }),
                    );
                }
                Ok(out)
            }
        }
    }

    pub fn component_graphs(&self) -> Result<Vec<MolGraph>, SampleError> {
        self.components()?
            .iter()
            .map(|c| {
                parse_smiles(&c.smiles).map_err(|e| SampleError::InvalidQuery {
                    id: self.id.clone(),
                    reason: e.to_string(),
                })
            })
            .collect()
    }

    /// Records a verdict, enforcing that stages run in order and each is
    /// decided at most once.
    pub fn record_verdict(&mut self, stage: FilterStage, outcome: Outcome) -> Result<(), SampleError> {
        if !self.filter_verdicts.get(stage).is_pending() {
            return Err(SampleError::AlreadyDecided {
                id: self.id.clone(),
                stage,
            });
        }
        if let Some(prev) = stage.previous() {
            if !self.filter_verdicts.get(prev).is_pass() {
                return Err(SampleError::OutOfOrder {
                    id: self.id.clone(),
                    stage,
                });
            }
        }
        let step = FilterStage::ALL
            .iter()
            .filter_map(|&s| self.filter_verdicts.get(s).step)
            .max()
            .unwrap_or(0)
            + 1;
        let (status, reason) = match outcome {
            Outcome::Pass => (VerdictStatus::Pass, None),
            Outcome::PassWith(r) => (VerdictStatus::Pass, Some(r)),
            Outcome::Fail(r) => (VerdictStatus::Fail, Some(r)),
        };
        *self.filter_verdicts.get_mut(stage) = Verdict {
            status,
            reason,
            step: Some(step),
        };
        Ok(())
    }

    pub fn is_retained(&self) -> bool {
        FilterStage::ALL
            .iter()
            .all(|&s| self.filter_verdicts.get(s).is_pass())
    }

    /// True once no further filter will run.
    pub fn is_settled(&self) -> bool {
        self.is_retained()
            || FilterStage::ALL
                .iter()
                .any(|&s| self.filter_verdicts.get(s).status == VerdictStatus::Fail)
    }
}
