//! Verifiable rewards and the group-relative policy-optimization arithmetic
//! a trainer would call.

mod dapo;
mod reward;

pub use dapo::{
    clip_ratio, clipped_term, dapo_objective, difficulty_retain, group_advantages,
    population_std, DapoError, DapoGroup, RolloutPanel, DEFAULT_EPS_HIGH, DEFAULT_EPS_LOW,
    DIFFICULTY_ROLLOUTS, RL_GROUP_SIZE,
};
pub use reward::{
    accuracy_reward_iupac, accuracy_reward_smiles, combine, composite_reward, format_reward,
    normalize_iupac, AccuracyVariant, RewardDetail, RewardError, RewardOutcome, RewardSpec,
};
