//! One test per acceptance criterion. Each prints a single PASS/FAIL line;
//! run with `--nocapture` to see them.

mod common;

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use chemreason::evalharness::{evaluate, token_stats, token_stats_table, EvalRecord, EvalReport, WhitespacePunctuation};
use chemreason::extraction::{extract_answer, Expected, SourcePattern};
use chemreason::fingerprint::{overlap, tanimoto, Fingerprint, FingerprintParams};
use chemreason::funcgroups::match_substructure;
use chemreason::molgraph::{molecules_equal, parse_smiles, write_smiles, WriteMode};
use chemreason::pipeline::{
    parse_jsonl, run_pipeline, ChatProvider, Checkpoint, GenerationConfig, MockProvider, PipelineContext,
    ReasoningSample, ReplayProvider, RetryPolicy,
};
use chemreason::rlcore::*;
use common::oracle::{brute_force_matches, oracle_patterns, popcount_tanimoto, scalar_objective};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

fn report(n: u32, what: &str, outcome: Result<(), String>) {
    match &outcome {
        Ok(()) => println!("criterion {n:>2}: PASS  {what}"),
        Err(e) => println!("criterion {n:>2}: FAIL  {what}: {e}"),
    }
    if let Err(e) = outcome {
        panic!("criterion {n} failed: {e}");
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

#[test]
fn criterion_01_canonical_invariance() {
    let start = Instant::now();
    let outcome = (|| {
        let corpus = common::random_corpus(2024, 500, 30);
        for (n, m) in corpus.iter().enumerate() {
            check(m.heavy_atom_count() <= 30, || format!("#{n} too large"))?;
            let reference = write_smiles(m, WriteMode::Canonical);
            for seed in 0..20 {
                let s = write_smiles(m, WriteMode::Random(seed));
                let p = parse_smiles(&s).map_err(|e| format!("#{n} {s}: {e}"))?;
                let c = write_smiles(&p, WriteMode::Canonical);
                check(c == reference, || format!("#{n} seed {seed}: {c} != {reference}"))?;
            }
        }
        let elapsed = start.elapsed();
        check(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))
    })();
    report(1, "500 molecules x 20 spellings share one canonical SMILES in < 30 s", outcome);
}

#[derive(Deserialize)]
struct ExtractionCase {
    name: String,
    expected: Expected,
    text: String,
    answer: Option<String>,
    source: Option<SourcePattern>,
}

fn extraction_cases() -> Vec<ExtractionCase> {
    parse_jsonl(&std::fs::read_to_string(fixtures().join("extraction.jsonl")).unwrap()).unwrap()
}

#[test]
fn criterion_02_round_trip() {
    let outcome = (|| {
        let mut strings: Vec<String> = common::CASE_STUDY.iter().map(|s| s.to_string()).collect();
        strings.extend(
            extraction_cases()
                .into_iter()
                .filter(|c| c.name.starts_with("figure_"))
                .filter_map(|c| c.answer),
        );
        let mut graphs: Vec<_> = strings
            .iter()
            .map(|s| parse_smiles(s).map_err(|e| format!("{s}: {e}")))
            .collect::<Result<_, _>>()?;
        graphs.extend(common::random_corpus(2024, 500, 30));
        for m in &graphs {
            let c = write_smiles(m, WriteMode::Canonical);
            let back = parse_smiles(&c).map_err(|e| format!("{c}: {e}"))?;
            check(molecules_equal(&back, m), || format!("{c} does not round-trip"))?;
            check(write_smiles(&back, WriteMode::Canonical) == c, || format!("{c} is not stable"))?;
        }
        Ok(())
    })();
    report(2, "parse, canonical write, parse reproduces every corpus and case-study molecule", outcome);
}

#[test]
fn criterion_03_tanimoto_oracle() {
    let outcome = (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in 0..1000 {
            let draw = |rng: &mut ChaCha8Rng| {
                let density = rng.random_range(0.0..0.5);
                Fingerprint::from_bits(2048, (0..2048).filter(|_| rng.random_bool(density))).unwrap()
            };
            let (a, b) = (draw(&mut rng), draw(&mut rng));
            let (c, u) = popcount_tanimoto(&a, &b);
            let o = overlap(&a, &b).unwrap();
            check(o.shared == c && o.union() == u, || format!("pair {k}: counts differ"))?;
            let t = tanimoto(&a, &b).unwrap();
            let want = if u == 0 { 1.0 } else { f64::from(c) / f64::from(u) };
            check(t == want, || format!("pair {k}: {t} != {c}/{u}"))?;
        }
        Ok(())
    })();
    report(3, "Tanimoto equals c/(a+b-c) on 1000 random 2048-bit pairs", outcome);
}

#[test]
fn criterion_04_reward_variants() {
    let outcome = (|| {
        let mut n = 0;
        let mut seed = 0;
        while n < 100 {
            seed += 1;
            let m = common::random_molecule(40_000 + seed, 30);
            let gt = write_smiles(&m, WriteMode::Canonical);
            let alt = write_smiles(&m, WriteMode::Random(seed));
            if alt == gt {
                continue;
            }
            n += 1;
            let pred = format!("<answer><SMILES>{alt}</SMILES></answer>");
            let score = |v| accuracy_reward_smiles(&pred, &gt, &RewardSpec::with_variant(v)).map_err(|e| e.to_string());
            check(score(AccuracyVariant::StructId)?.0 == 1.0, || format!("struct_id on {alt}"))?;
            check(score(AccuracyVariant::ExactString)?.0 == 0.0, || format!("exact_string on {alt}"))?;
            check(score(AccuracyVariant::DenseTanimoto)?.0 == 1.0, || format!("dense_tanimoto on {alt}"))?;
        }
        Ok(())
    })();
    report(4, "re-spelled predictions: struct_id 1, exact_string 0, dense_tanimoto 1", outcome);
}

#[test]
fn criterion_05_dapo_math() {
    let outcome = (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in 0..1000 {
            let g = rng.random_range(2..=16);
            let rewards: Vec<f64> = (0..g).map(|_| rng.random_range(-3.0..3.0)).collect();
            let a = group_advantages(&rewards).map_err(|e| format!("group {k}: {e}"))?;
            let mean = a.iter().sum::<f64>() / a.len() as f64;
            check(mean.abs() < 1e-9, || format!("group {k}: mean {mean}"))?;
            let sd = population_std(&a);
            check((sd - 1.0).abs() < 1e-9, || format!("group {k}: sd {sd}"))?;
        }
        for g in [2, 4, 8] {
            check(group_advantages(&vec![0.7; g]) == Err(DapoError::FilteredOut), || {
                format!("constant group of {g} kept")
            })?;
        }
        for _ in 0..1000 {
            let r: f64 = rng.random_range(0.001..10.0);
            let c = clip_ratio(r, DEFAULT_EPS_LOW, DEFAULT_EPS_HIGH);
            check((0.8..=1.28).contains(&c), || format!("clip({r}) = {c}"))?;
        }
        for k in 0..100 {
            let g = rng.random_range(2..=RL_GROUP_SIZE);
            let rewards: Vec<f64> = (0..g).map(|_| f64::from(rng.random_range(0..=10u8)) / 10.0).collect();
            if population_std(&rewards) < 1e-12 {
                continue;
            }
            let ratios: Vec<Vec<f64>> = (0..g)
                .map(|_| (0..rng.random_range(1..40)).map(|_| rng.random_range(0.5..1.6)).collect())
                .collect();
            let want = scalar_objective(&rewards, &ratios, DEFAULT_EPS_LOW, DEFAULT_EPS_HIGH);
            let got = dapo_objective(&DapoGroup::new(rewards, ratios)).map_err(|e| e.to_string())?;
            check((got - want).abs() < 1e-12, || format!("group {k}: {got} vs {want}"))?;
        }
        Ok(())
    })();
    report(5, "advantages standardized, flat groups filtered, clip band [0.8, 1.28], objective matches scalar form", outcome);
}

#[test]
fn criterion_06_extraction_corpus() {
    let outcome = (|| {
        let cases = extraction_cases();
        check(cases.len() >= 20, || format!("only {} fixtures", cases.len()))?;
        for c in &cases {
            let got = extract_answer(&c.text, c.expected);
            let value = got.is_found().then(|| got.value.clone());
            check(value == c.answer && got.source == c.source, || {
                format!("{}: got {:?} via {:?}", c.name, value, got.source)
            })?;
        }
        Ok(())
    })();
    report(6, "every extraction fixture yields its expected answer", outcome);
}

fn pipeline_samples() -> Vec<ReasoningSample> {
    parse_jsonl(&std::fs::read_to_string(fixtures().join("pipeline/samples.jsonl")).unwrap()).unwrap()
}

fn replay(name: &str) -> Arc<ReplayProvider> {
    Arc::new(ReplayProvider::from_file(&fixtures().join("pipeline").join(name), "replay").unwrap())
}

#[test]
fn criterion_07_pipeline_offline() {
    let start = Instant::now();
    let outcome = (|| {
        let config = GenerationConfig {
            retry: RetryPolicy::no_wait(2),
            ..GenerationConfig::default()
        };
        let samples = pipeline_samples();
        check(samples.len() == 50, || format!("{} samples", samples.len()))?;
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let ck_path = dir.path().join("ckpt.jsonl");
        let run = |generator: Arc<ReplayProvider>, verifier: Arc<ReplayProvider>| {
            let ck = Checkpoint::open(&ck_path).map_err(|e| e.to_string())?;
            let ctx = PipelineContext::new(config.clone(), generator, verifier).map_err(|e| e.to_string())?;
            run_pipeline(&samples, &ctx, Some(&ck)).map_err(|e| e.to_string())
        };
        let first = run(replay("generator.jsonl"), replay("verifier.jsonl"))?;
        let t = first.report.total;
        check(
            t.generated > t.pass_structural && t.pass_structural > t.pass_consistency && t.pass_consistency > t.pass_verifier,
            || format!("not strictly decreasing: {t:?}"),
        )?;
        check(first.report.is_monotone(), || "a task row increases".into())?;

        let (generator, verifier) = (replay("generator.jsonl"), replay("verifier.jsonl"));
        let second = run(generator.clone(), verifier.clone())?;
        let calls = generator.calls() + verifier.calls();
        check(calls == 0, || format!("rerun made {calls} calls"))?;
        check(first.report.to_text() == second.report.to_text(), || "text report differs".into())?;
        check(first.report.to_json() == second.report.to_json(), || "json report differs".into())?;

        let ctx = PipelineContext::new(
            config.clone(),
            Arc::new(MockProvider::oracle("oracle")),
            Arc::new(MockProvider::oracle("oracle")),
        )
        .map_err(|e| e.to_string())?;
        let perfect = run_pipeline(&samples, &ctx, None).map_err(|e| e.to_string())?;
        check(perfect.report.total_retention_rate == 1.0, || {
            format!("oracle retention {}", perfect.report.total_retention_rate)
        })?;
        let elapsed = start.elapsed();
        check(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))
    })();
    report(7, "50-sample replay run strictly monotone, oracle keeps 100%, checkpoint rerun makes no calls", outcome);
}

#[test]
fn criterion_08_difficulty_truth_table() {
    let outcome = (|| {
        let mut kept = Vec::new();
        for mask in 0u8..16 {
            let flags: Vec<bool> = (0..DIFFICULTY_ROLLOUTS).map(|k| mask & (1 << k) != 0).collect();
            if difficulty_retain(&RolloutPanel::new(flags).map_err(|e| e.to_string())?) {
                kept.push(mask);
            }
        }
        check(kept == (1..15).collect::<Vec<u8>>(), || format!("kept {kept:?}"))
    })();
    report(8, "exactly the 14 mixed four-rollout panels are retained", outcome);
}

#[test]
fn criterion_09_eval_and_matcher() {
    let outcome = (|| {
        let records: Vec<EvalRecord> =
            parse_jsonl(&std::fs::read_to_string(fixtures().join("eval_records.jsonl")).unwrap()).unwrap();
        let params = FingerprintParams::default();
        let m = evaluate(&records, params).map_err(|e| e.to_string())?;
        check(format!("{:.1}", m.avg_similarity) == "85.0", || format!("avg {}", m.avg_similarity))?;
        check(m.tani_at_1 == 50.0, || format!("tani@1 {}", m.tani_at_1))?;
        let text = EvalReport::build(&records, params).map_err(|e| e.to_string())?.to_text();
        check(text.contains("85.0") && text.contains("50.0"), || text.clone())?;

        let patterns = oracle_patterns();
        for case in 0..200u64 {
            let mol = common::random_molecule(70_000 + case, 12);
            let pattern = &patterns[case as usize % patterns.len()];
            let mut got: Vec<Vec<usize>> = match_substructure(&mol, pattern)
                .into_iter()
                .map(|mut v| {
                    v.sort_unstable();
                    v
                })
                .collect();
            got.sort();
            let want: Vec<Vec<usize>> = brute_force_matches(&mol, pattern).into_iter().collect();
            check(got == want, || format!("case {case}: {}", pattern.source))?;
        }
        Ok(())
    })();
    report(9, "eval fixture gives 85.0 / 50.0 and the matcher equals brute force on 200 graphs", outcome);
}

#[test]
fn criterion_10_token_statistics() {
    let outcome = (|| {
        let s = token_stats(&["a b c", "a"], &WhitespacePunctuation).map_err(|e| e.to_string())?;
        check((s.sample_count, s.mean, s.sd) == (2, 2.0, 1.0), || format!("{s:?}"))?;
        let s = token_stats(&["one text only"], &WhitespacePunctuation).map_err(|e| e.to_string())?;
        check((s.mean, s.sd) == (3.0, 0.0), || format!("{s:?}"))?;
        let s = token_stats(&["a", "a b", "a b c", "a b c d"], &WhitespacePunctuation).map_err(|e| e.to_string())?;
        check(s.mean == 2.5 && s.sd == 1.25f64.sqrt(), || format!("{s:?}"))?;
        let table = token_stats_table(&[("Molecule".into(), s)]);
        let header: Vec<&str> = table.lines().next().unwrap_or("").split_whitespace().collect();
        check(header == ["Category", "Samples", "Average", "SD"], || table.clone())?;
        check(table.contains("2.50") && table.contains("1.12"), || table.clone())
    })();
    report(10, "token statistics match hand counts and the table has Samples / Average / SD", outcome);
}
