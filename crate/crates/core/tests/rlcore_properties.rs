mod common;

use chemreason::extraction::Expected;
use chemreason::molgraph::{write_smiles, WriteMode};
use chemreason::rlcore::*;
use common::oracle::scalar_objective;
use proptest::prelude::*;

#[test]
fn three_rollout_group_is_frozen() {
    let ratios = vec![vec![0.9, 1.1, 1.4], vec![0.7, 1.0], vec![1.3]];
    let rewards = vec![1.0, 0.0, 0.5];
    let oracle = scalar_objective(&rewards, &ratios, 0.2, 0.28);
    let got = dapo_objective(&DapoGroup::new(rewards, ratios)).unwrap();
    assert!((oracle - 0.302_103_734_943_258_5).abs() < 1e-12);
    assert!((got - oracle).abs() < 1e-12);
}

#[test]
fn every_four_rollout_panel() {
    let mut kept = 0;
    for mask in 0u8..16 {
        let flags: Vec<bool> = (0..4).map(|k| mask & (1 << k) != 0).collect();
        let retained = difficulty_retain(&RolloutPanel::new(flags).unwrap());
        assert_eq!(retained, mask != 0 && mask != 15, "panel {mask:04b}");
        kept += retained as usize;
    }
    assert_eq!(kept, 14);
}

fn group() -> impl Strategy<Value = (Vec<f64>, Vec<Vec<f64>>)> {
    (2usize..10).prop_flat_map(|g| {
        (
            prop::collection::vec(-5.0f64..5.0, g),
            prop::collection::vec(prop::collection::vec(0.05f64..3.0, 1..12), g),
        )
    })
}

proptest! {
    #[test]
    fn advantages_are_standardized(rewards in prop::collection::vec(-10.0f64..10.0, 2..16)) {
        match group_advantages(&rewards) {
            Ok(a) => {
                let mean = a.iter().sum::<f64>() / a.len() as f64;
                prop_assert!(mean.abs() < 1e-9);
                prop_assert!((population_std(&a) - 1.0).abs() < 1e-9);
            }
            Err(e) => {
                prop_assert_eq!(e, DapoError::FilteredOut);
                prop_assert!(population_std(&rewards) < 1e-12);
            }
        }
    }

    #[test]
    fn constant_groups_are_dropped(v in -10.0f64..10.0, g in 2usize..12) {
        prop_assert_eq!(group_advantages(&vec![v; g]), Err(DapoError::FilteredOut));
    }

    #[test]
    fn clipping_stays_in_band(r in 0.0001f64..100.0) {
        let c = clip_ratio(r, DEFAULT_EPS_LOW, DEFAULT_EPS_HIGH);
        prop_assert!((0.8..=1.28).contains(&c));
    }

    #[test]
    fn objective_matches_the_scalar_form((rewards, ratios) in group()) {
        prop_assume!(population_std(&rewards) > 1e-6);
        let want = scalar_objective(&rewards, &ratios, DEFAULT_EPS_LOW, DEFAULT_EPS_HIGH);
        let got = dapo_objective(&DapoGroup::new(rewards, ratios)).unwrap();
        prop_assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn objective_ignores_rollout_order((rewards, ratios) in group(), rot in 0usize..10) {
        prop_assume!(population_std(&rewards) > 1e-6);
        let base = dapo_objective(&DapoGroup::new(rewards.clone(), ratios.clone())).unwrap();
        let k = rot % rewards.len();
        let (mut r2, mut q2) = (rewards, ratios);
        r2.rotate_left(k);
        q2.rotate_left(k);
        let moved = dapo_objective(&DapoGroup::new(r2, q2)).unwrap();
        prop_assert!((base - moved).abs() < 1e-12);
    }

    #[test]
    fn respelled_predictions(seed in 0u64..10_000, spelling in 0u64..1000) {
        let m = common::random_molecule(seed, 24);
        let gt = write_smiles(&m, WriteMode::Canonical);
        let alt = write_smiles(&m, WriteMode::Random(spelling));
        prop_assume!(alt != gt);
        let pred = format!("<think>read it</think><answer><SMILES>{alt}</SMILES></answer>");
        let variant = |v| accuracy_reward_smiles(&pred, &gt, &RewardSpec::with_variant(v)).unwrap();
        prop_assert_eq!(variant(AccuracyVariant::StructId), (1.0, 1.0));
        prop_assert_eq!(variant(AccuracyVariant::DenseTanimoto), (1.0, 1.0));
        prop_assert_eq!(variant(AccuracyVariant::ExactString).0, 0.0);
        let out = composite_reward(&pred, &gt, Expected::Smiles, &RewardSpec::default()).unwrap();
        prop_assert_eq!(out.composite, 1.0);
    }
}
