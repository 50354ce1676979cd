use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_chemreason"));
    for var in ["CHEMREASON_CONFIG", "CHEMREASON_API_KEY", "CHEMREASON_BASE_URL", "CHEMREASON_CACHE_DIR", "RUST_LOG"] {
        c.env_remove(var);
    }
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn run_with_stdin(args: &[&str], stdin: &str) -> Output {
    let mut child = bin()
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn core_fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(rel)
}

#[test]
fn tanimoto_of_two_spellings() {
    let o = run(&["tanimoto", "CCO", "OCC"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "1.000000\n");
    let o = run(&["tanimoto", "CCN", "CCO"]);
    assert_eq!(stdout(&o), "0.200000\n");
}

#[test]
fn malformed_smiles_names_the_error() {
    let o = run(&["canonicalize", "C1CC("]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("UnbalancedBranch"), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
}

#[test]
fn random_spellings_canonicalize_back() {
    let o = run(&["--seed", "11", "canonicalize", "--spellings", "5", "CC(=O)Oc1ccccc1C(=O)O"]);
    assert_eq!(o.status.code(), Some(0));
    let line = stdout(&o);
    let fields: Vec<&str> = line.trim_end().split('\t').collect();
    assert_eq!(fields.len(), 6);
    let back = run_with_stdin(&["canonicalize"], &fields[1..].join("\n"));
    for l in stdout(&back).lines() {
        assert_eq!(l, fields[0]);
    }
}

#[test]
fn evaluate_fixture() {
    let pred = core_fixture("eval_records.jsonl");
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("summary.json");
    let o = run(&["evaluate", "--pred", pred.to_str().unwrap(), "--json", json.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let overall = text.lines().find(|l| l.starts_with("overall")).unwrap();
    assert!(overall.contains("85.0") && overall.contains("50.0"), "{overall}");
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert!((v["overall"]["avg_similarity"].as_f64().unwrap() - 85.0).abs() < 1e-9);
    assert!((v["overall"]["tani_at_1"].as_f64().unwrap() - 50.0).abs() < 1e-9);
}

#[test]
fn help_for_every_subcommand() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    for sub in [
        "canonicalize",
        "fingerprint",
        "tanimoto",
        "groups",
        "extract",
        "reward",
        "advantages",
        "generate",
        "filter",
        "difficulty-filter",
        "evaluate",
        "stats",
    ] {
        let o = run(&[sub, "--help"]);
        assert_eq!(o.status.code(), Some(0), "{sub}");
        assert!(stdout(&o).contains("Usage"), "{sub}");
    }
}

#[test]
fn advantages_and_objective() {
    let input = "{\"rewards\":[1,0,0.5],\"ratios\":[[0.9,1.1,1.4],[0.7,1.0],[1.3]]}\n{\"id\":\"flat\",\"rewards\":[1,1,1,1]}\n";
    let o = run_with_stdin(&["advantages"], input);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!((rows[0]["objective"].as_f64().unwrap() - 0.302_103_734_943_258_5).abs() < 1e-12);
    assert_eq!(rows[1]["filtered"], true);
    let o = run_with_stdin(&["advantages"], "{\"rewards\":[1]}\n");
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn reward_scores_and_rejects_unknown_variant() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("pred.jsonl");
    std::fs::write(
        &p,
        "{\"id\":\"a\",\"prediction\":\"<think>t</think><answer><SMILES>OCC</SMILES></answer>\",\"ground_truth\":\"CCO\"}\n\
         {\"id\":\"b\",\"raw_output\":\"<SMILES>CCN</SMILES>\",\"ground_truth\":\"CCO\"}\n",
    )
    .unwrap();
    let o = run(&["reward", "--pred", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows[0]["composite"], 1.0);
    assert_eq!(rows[1]["accuracy"], 0.0);
    let o = run(&["reward", "--pred", p.to_str().unwrap(), "--variant", "dense_tanimoto"]);
    let rows: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!((rows[1]["accuracy"].as_f64().unwrap() - 0.2).abs() < 1e-12);
    assert_eq!(run(&["reward", "--pred", p.to_str().unwrap(), "--variant", "fuzzy"]).status.code(), Some(2));
}

#[test]
fn difficulty_filter_counts() {
    let o = run_with_stdin(
        &["difficulty-filter"],
        "{\"id\":\"q\",\"correctness\":[true,false,false,false]}\n{\"id\":\"r\",\"correctness\":[true,true,true,true]}\n",
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("kept 1 of 2"));
}

#[test]
fn extract_single_text() {
    let o = run_with_stdin(&["extract", "--text"], "<think>x</think><answer><SMILES>CCO</SMILES></answer>");
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["value"], "CCO");
    assert_eq!(v["source"], "tagged");
}

fn replay_config(dir: &Path) -> PathBuf {
    let fx = core_fixture("pipeline");
    let p = dir.join("replay.toml");
    std::fs::write(
        &p,
        format!(
            "[generation]\nconcurrency_limit = 2\n[generation.generator]\nmode = \"replay\"\nreplay_path = {:?}\n\
             [generation.verifier]\nmode = \"replay\"\nreplay_path = {:?}\n",
            fx.join("generator.jsonl"),
            fx.join("verifier.jsonl")
        ),
    )
    .unwrap();
    p
}

#[test]
fn replay_filter_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let config = replay_config(dir.path());
    let samples = core_fixture("pipeline/samples.jsonl");
    let out = dir.path().join("kept.jsonl");
    let ck = dir.path().join("progress.jsonl");
    let args = [
        "--config",
        config.to_str().unwrap(),
        "filter",
        "-i",
        samples.to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
        "--checkpoint",
        ck.to_str().unwrap(),
    ];
    let o = run(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let total = stdout(&o).lines().find(|l| l.starts_with("total")).unwrap().to_string();
    assert!(total.contains("70.0%"), "{total}");
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 35);
    let again = run(&args);
    assert_eq!(stdout(&again).lines().last().unwrap(), total);
}

#[test]
fn http_mode_without_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("http.toml");
    std::fs::write(&config, "[generation.generator]\nmode = \"http\"\n").unwrap();
    let samples = core_fixture("pipeline/samples.jsonl");
    let out = dir.path().join("gen.jsonl");
    let o = run(&[
        "--config",
        config.to_str().unwrap(),
        "generate",
        "-i",
        samples.to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("CHEMREASON_API_KEY"));
}

#[test]
fn exhausted_budget_exits_with_provider_status() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("budget.toml");
    std::fs::write(&config, "[generation]\ncall_budget = 3\n").unwrap();
    let samples = core_fixture("pipeline/samples.jsonl");
    let out = dir.path().join("gen.jsonl");
    let o = run(&[
        "--config",
        config.to_str().unwrap(),
        "generate",
        "-i",
        samples.to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 50);
}
