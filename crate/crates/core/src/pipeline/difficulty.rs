//! Screening instances by rollout divergence: an instance is kept when some
//! but not all of its independent rollouts are correct.

use serde::{Deserialize, Serialize};

use super::sample::TaskKind;
use crate::extraction::Expected;
use crate::rlcore::{accuracy_reward_iupac, accuracy_reward_smiles, difficulty_retain, DapoError, RewardError, RewardSpec, RolloutPanel};

/// Either precomputed correctness flags or raw rollouts to score against
/// the ground truth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DifficultyInput {
    pub id: String,
    #[serde(default)]
    pub task: Option<TaskKind>,
    #[serde(default)]
    pub ground_truth: Option<String>,
    #[serde(default)]
    pub rollouts: Vec<String>,
    #[serde(default)]
    pub correctness: Option<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DifficultyVerdict {
    pub id: String,
    pub correctness: Vec<bool>,
    pub retained: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DifficultyError {
    #[error("{id}: give either correctness flags or rollouts with a ground truth")]
    Incomplete { id: String },
    #[error("{id}: {source}")]
    Reward {
        id: String,
        #[source]
        source: RewardError,
    },
    #[error("{id}: {source}")]
    Panel {
        id: String,
        #[source]
        source: DapoError,
    },
}

/// A rollout is correct when its accuracy reward is 1 under `spec`.
pub fn assess_difficulty(input: &DifficultyInput, spec: &RewardSpec) -> Result<DifficultyVerdict, DifficultyError> {
    let correctness = match (&input.correctness, &input.ground_truth) {
        (Some(c), _) => c.clone(),
        (None, Some(gt)) if !input.rollouts.is_empty() => {
            let task = input.task.unwrap_or(TaskKind::MolRecognition);
            input
                .rollouts
                .iter()
                .map(|r| match task.expected() {
                    Expected::Smiles => accuracy_reward_smiles(r, gt, spec)
                        .map(|(score, _)| score == 1.0)
                        .map_err(|source| DifficultyError::Reward {
                            id: input.id.clone(),
                            source,
                        }),
                    Expected::Iupac => Ok(accuracy_reward_iupac(r, gt) == 1.0),
                })
                .collect::<Result<Vec<bool>, _>>()?
        }
        _ => return Err(DifficultyError::Incomplete { id: input.id.clone() }),
    };
    let panel = RolloutPanel::new(correctness).map_err(|source| DifficultyError::Panel {
        id: input.id.clone(),
        source,
    })?;
    Ok(DifficultyVerdict {
        id: input.id.clone(),
        retained: difficulty_retain(&panel),
        correctness: panel.correctness().to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scored_rollouts() {
        let input = DifficultyInput {
            id: "q".into(),
            task: None,
            ground_truth: Some("CCO".into()),
            rollouts: ["<SMILES>OCC</SMILES>", "<SMILES>CCN</SMILES>", "nothing", "<SMILES>CCO</SMILES>"]
                .map(String::from)
                .to_vec(),
            correctness: None,
        };
        let v = assess_difficulty(&input, &RewardSpec::default()).unwrap();
        assert_eq!(v.correctness, [true, false, false, true]);
        assert!(v.retained);
    }

    #[test]
    fn flags_and_errors() {
        let mut input = DifficultyInput {
            id: "q".into(),
            task: None,
            ground_truth: None,
            rollouts: vec![],
            correctness: Some(vec![true; 4]),
        };
        assert!(!assess_difficulty(&input, &RewardSpec::default()).unwrap().retained);
        input.correctness = Some(vec![]);
        assert!(matches!(
            assess_difficulty(&input, &RewardSpec::default()),
            Err(DifficultyError::Panel { .. })
        ));
        input.correctness = None;
        assert!(matches!(
            assess_difficulty(&input, &RewardSpec::default()),
            Err(DifficultyError::Incomplete { .. })
        ));
    }
}
