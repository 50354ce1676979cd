//! Group-relative advantages, asymmetric ratio clipping and the token-level
//! clipped surrogate, plus the rollout-divergence difficulty filter.

use serde::{Deserialize, Serialize};

pub const DEFAULT_EPS_LOW: f64 = 0.2;
pub const DEFAULT_EPS_HIGH: f64 = 0.28;
/// Rollouts per instance when screening for moderate difficulty.
pub const DIFFICULTY_ROLLOUTS: usize = 4;
/// Rollouts per group during policy optimization.
pub const RL_GROUP_SIZE: usize = 8;

/// Standard deviations below this count as zero variance.
const ZERO_STD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DapoError {
    #[error("group needs at least 2 rollouts, got {0}")]
    GroupTooSmall(usize),
    #[error("all rewards in the group are equal; the group carries no signal")]
    FilteredOut,
    #[error("rollout {rollout}: {ratios} ratios for a length of {length}")]
    ShapeMismatch {
        rollout: usize,
        ratios: usize,
        length: usize,
    },
    #[error("{rewards} rewards but {rollouts} ratio lists")]
    RolloutCountMismatch { rewards: usize, rollouts: usize },
    #[error("rollout {rollout} token {token}: ratio {value} is not positive")]
    NonPositiveRatio {
        rollout: usize,
        token: usize,
        value: f64,
    },
    #[error("clip widths must be non-negative")]
    NegativeEpsilon,
    #[error("group has no tokens")]
    NoTokens,
    #[error("rollout panel is empty")]
    EmptyPanel,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
pub fn population_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// `(R_i - mean) / std` with the population standard deviation.
pub fn group_advantages(rewards: &[f64]) -> Result<Vec<f64>, DapoError> {
    if rewards.len() < 2 {
        return Err(DapoError::GroupTooSmall(rewards.len()));
    }
    let m = mean(rewards);
    let sd = population_std(rewards);
    if sd < ZERO_STD {
        return Err(DapoError::FilteredOut);
    }
    Ok(rewards.iter().map(|r| (r - m) / sd).collect())
}

pub fn clip_ratio(ratio: f64, eps_low: f64, eps_high: f64) -> f64 {
    ratio.clamp(1.0 - eps_low, 1.0 + eps_high)
}

/// `min(ratio * A, clip(ratio, 1 - eps_low, 1 + eps_high) * A)`.
pub fn clipped_term(ratio: f64, advantage: f64, eps_low: f64, eps_high: f64) -> f64 {
    (ratio * advantage).min(clip_ratio(ratio, eps_low, eps_high) * advantage)
}

/// One group of rollouts for a single query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DapoGroup {
    pub rewards: Vec<f64>,
    /// Per-token probability ratios, one list per rollout.
    pub ratios: Vec<Vec<f64>>,
    pub lengths: Vec<usize>,
    #[serde(default = "default_eps_low")]
    pub eps_low: f64,
    #[serde(default = "default_eps_high")]
    pub eps_high: f64,
}

fn default_eps_low() -> f64 {
    DEFAULT_EPS_LOW
}

fn default_eps_high() -> f64 {
    DEFAULT_EPS_HIGH
}

impl DapoGroup {
    /// Group with default clip widths; lengths are taken from the ratio lists.
    pub fn new(rewards: Vec<f64>, ratios: Vec<Vec<f64>>) -> DapoGroup {
        let lengths = ratios.iter().map(Vec::len).collect();
        DapoGroup {
            rewards,
            ratios,
            lengths,
            eps_low: DEFAULT_EPS_LOW,
            eps_high: DEFAULT_EPS_HIGH,
        }
    }

    pub fn validate(&self) -> Result<(), DapoError> {
        if self.rewards.len() < 2 {
            return Err(DapoError::GroupTooSmall(self.rewards.len()));
        }
        if self.ratios.len() != self.rewards.len() || self.lengths.len() != self.rewards.len() {
            return Err(DapoError::RolloutCountMismatch {
                rewards: self.rewards.len(),
                rollouts: self.ratios.len().max(self.lengths.len()),
            });
        }
        if self.eps_low < 0.0 || self.eps_high < 0.0 {
            return Err(DapoError::NegativeEpsilon);
        }
        for (i, (r, &len)) in self.ratios.iter().zip(&self.lengths).enumerate() {
            if r.len() != len {
                return Err(DapoError::ShapeMismatch {
                    rollout: i,
                    ratios: r.len(),
                    length: len,
                });
            }
            if let Some((t, &value)) = r.iter().enumerate().find(|(_, v)| v.is_nan() || **v <= 0.0) {
                return Err(DapoError::NonPositiveRatio {
                    rollout: i,
                    token: t,
                    value,
                });
            }
        }
        Ok(())
    }
}

/// Token-level clipped surrogate: the sum of clipped terms over every token
/// of every rollout, divided by the total token count.
pub fn dapo_objective(group: &DapoGroup) -> Result<f64, DapoError> {
    group.validate()?;
    let advantages = group_advantages(&group.rewards)?;
    let tokens: usize = group.lengths.iter().sum();
    if tokens == 0 {
        return Err(DapoError::NoTokens);
    }
    let total: f64 = group
        .ratios
        .iter()
        .zip(&advantages)
        .map(|(rs, &a)| {
            rs.iter()
                .map(|&r| clipped_term(r, a, group.eps_low, group.eps_high))
                .sum::<f64>()
        })
        .sum();
    Ok(total / tokens as f64)
}

/// Correctness of independent rollouts on one instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<bool>", into = "Vec<bool>")]
pub struct RolloutPanel(Vec<bool>);

impl RolloutPanel {
    pub fn new(correctness: Vec<bool>) -> Result<RolloutPanel, DapoError> {
        if correctness.is_empty() {
            return Err(DapoError::EmptyPanel);
        }
        Ok(RolloutPanel(correctness))
    }

    pub fn correctness(&self) -> &[bool] {
        &self.0
    }
}

impl TryFrom<Vec<bool>> for RolloutPanel {
    type Error = DapoError;

    fn try_from(v: Vec<bool>) -> Result<Self, Self::Error> {
        RolloutPanel::new(v)
    }
}

impl From<RolloutPanel> for Vec<bool> {
    fn from(p: RolloutPanel) -> Self {
        p.0
    }
}

/// Keeps an instance only when its rollouts disagree: at least one correct
/// and one incorrect.
pub fn difficulty_retain(panel: &RolloutPanel) -> bool {
    let c = panel.correctness();
    c.contains(&true) && c.contains(&false)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn advantages() {
        assert_eq!(group_advantages(&[1.0, 0.0, 0.0, 1.0]).unwrap(), vec![1.0, -1.0, -1.0, 1.0]);
        assert_eq!(group_advantages(&[1.0, 0.0]).unwrap(), vec![1.0, -1.0]);
        assert_eq!(group_advantages(&[1.0; 4]), Err(DapoError::FilteredOut));
        assert_eq!(group_advantages(&[1.0]), Err(DapoError::GroupTooSmall(1)));
    }

    #[test]
    fn clipping() {
        assert!((clipped_term(1.5, 1.0, 0.2, 0.28) - 1.28).abs() < 1e-15);
        // min(-0.5, 0.8 * -1)
        assert_eq!(clipped_term(0.5, -1.0, 0.2, 0.28), -0.8);
        assert_eq!(clipped_term(1.0, -0.7, 0.2, 0.28), -0.7);
        assert_eq!(clipped_term(1.0, 2.5, 0.2, 0.28), 2.5);
        assert_eq!(clipped_term(0.5, 1.0, 0.2, 0.28), 0.5);
        assert_eq!(clipped_term(2.0, -1.0, 0.2, 0.28), -2.0);
    }

    #[test]
    fn identity_ratio_objective() {
        let g = DapoGroup::new(vec![1.0, 0.0], vec![vec![1.0; 3], vec![1.0]]);
        assert!((dapo_objective(&g).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn objective_errors() {
        let g = DapoGroup::new(vec![1.0, 1.0], vec![vec![1.0], vec![1.0]]);
        assert_eq!(dapo_objective(&g), Err(DapoError::FilteredOut));
        let mut g = DapoGroup::new(vec![1.0, 0.0], vec![vec![1.0], vec![1.0]]);
        g.lengths[1] = 4;
        assert!(matches!(dapo_objective(&g), Err(DapoError::ShapeMismatch { rollout: 1, .. })));
        let g = DapoGroup::new(vec![1.0, 0.0], vec![vec![0.0], vec![1.0]]);
        assert!(matches!(dapo_objective(&g), Err(DapoError::NonPositiveRatio { .. })));
        let g = DapoGroup::new(vec![1.0, 0.0], vec![vec![], vec![]]);
        assert_eq!(dapo_objective(&g), Err(DapoError::NoTokens));
    }

    #[test]
    fn difficulty() {
        let retain = |v: &[bool]| difficulty_retain(&RolloutPanel::new(v.to_vec()).unwrap());
        assert!(retain(&[true, true, false, false]));
        assert!(!retain(&[true; 4]));
        assert!(!retain(&[false; 4]));
        assert!(retain(&[false, true]));
        assert_eq!(RolloutPanel::new(vec![]), Err(DapoError::EmptyPanel));
        assert!(serde_json::from_str::<RolloutPanel>("[]").is_err());
    }
}
