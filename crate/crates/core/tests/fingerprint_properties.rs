mod common;

use chemreason::fingerprint::{
    morgan_fingerprint, overlap, structure_similarity, tanimoto, Fingerprint, FingerprintParams, Structure,
};
use chemreason::molgraph::{parse_smiles, write_smiles, WriteMode};
use chemreason::rlcore::{accuracy_reward_smiles, AccuracyVariant, RewardSpec};
use common::oracle::popcount_tanimoto;
use proptest::prelude::*;

fn fp(smiles: &str) -> Fingerprint {
    morgan_fingerprint(&parse_smiles(smiles).unwrap(), FingerprintParams::default())
}

#[test]
fn ethylamine_against_ethanol_is_frozen() {
    let (a, b) = (fp("CCN"), fp("CCO"));
    assert_eq!(popcount_tanimoto(&a, &b), (3, 15));
    assert_eq!(tanimoto(&a, &b).unwrap(), 0.2);
    let spec = RewardSpec::with_variant(AccuracyVariant::DenseTanimoto);
    assert_eq!(accuracy_reward_smiles("<SMILES>CCN</SMILES>", "CCO", &spec).unwrap(), (0.2, 0.2));
}

#[test]
fn fixture_pairs_hit_exact_fractions() {
    assert_eq!(popcount_tanimoto(&fp("CCCCCCC"), &fp("CCCC")), (5, 10));
    assert_eq!(popcount_tanimoto(&fp("CCCCCc1ccc(cc1)C(=O)O"), &fp("CCCCc1ccc(cc1)C(=O)O")), (27, 30));
}

fn bits(width: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0..width, 0..200)
}

proptest! {
    #[test]
    fn tanimoto_is_the_count_ratio(a in bits(2048), b in bits(2048)) {
        let fa = Fingerprint::from_bits(2048, a).unwrap();
        let fb = Fingerprint::from_bits(2048, b).unwrap();
        let (c, u) = popcount_tanimoto(&fa, &fb);
        let t = tanimoto(&fa, &fb).unwrap();
        if u == 0 {
            prop_assert_eq!(t, 1.0);
        } else {
            prop_assert_eq!(t, f64::from(c) / f64::from(u));
        }
        prop_assert_eq!(t, tanimoto(&fb, &fa).unwrap());
        prop_assert!((0.0..=1.0).contains(&t));
        prop_assert_eq!(overlap(&fa, &fb).unwrap().is_identical(), fa == fb);
    }

    #[test]
    fn respelling_keeps_the_fingerprint(seed in 0u64..5000, spelling in 0u64..1000) {
        let m = common::random_molecule(seed, 20);
        let other = parse_smiles(&write_smiles(&m, WriteMode::Random(spelling))).unwrap();
        let params = FingerprintParams::default();
        prop_assert_eq!(morgan_fingerprint(&m, params), morgan_fingerprint(&other, params));
        let sim = structure_similarity(&Structure::Molecule(m), &Structure::Molecule(other), params);
        prop_assert!(sim.exact);
        prop_assert_eq!(sim.value, 1.0);
    }

    #[test]
    fn similarity_is_symmetric(s1 in 0u64..5000, s2 in 0u64..5000) {
        let params = FingerprintParams::default();
        let a = Structure::Molecule(common::random_molecule(s1, 16));
        let b = Structure::Molecule(common::random_molecule(s2, 16));
        let ab = structure_similarity(&a, &b, params);
        let ba = structure_similarity(&b, &a, params);
        prop_assert_eq!(ab, ba);
        prop_assert!((0.0..=1.0).contains(&ab.value));
        prop_assert_eq!(ab.exact, ab.value == 1.0);
    }
}
