use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use chemreason::evalharness::{token_stats, token_stats_table, EvalReport, MergeTable, Tokenizer, WhitespacePunctuation};
use chemreason::extraction::{extract_answer, Expected};
use chemreason::fingerprint::{morgan_fingerprint, structure_similarity, FingerprintParams, Structure, StructureError};
use chemreason::funcgroups::{detect_functional_groups, Catalog};
use chemreason::molgraph::{
    canonical_smiles, parse_reaction, parse_smiles, write_smiles, ReactionError, Role, SmilesError, WriteMode,
};
use chemreason::pipeline::{
    assess_difficulty, read_jsonl, reformat_instruction, run_stages, to_jsonl, Checkpoint, DifficultyInput,
    FailureKind, PipelineContext, PipelineError, PipelineOutput, ProviderError, ReasoningSample, Stage, TaskKind,
};
use chemreason::rlcore::{composite_reward, dapo_objective, group_advantages, DapoGroup, DEFAULT_EPS_HIGH, DEFAULT_EPS_LOW};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::settings::Settings;
use crate::{Cli, CliError, Command, ExpectArg, FingerprintArgs};

type Result<T> = std::result::Result<T, CliError>;

fn input_err(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

pub fn dispatch(cli: &Cli) -> Result<()> {
    let env = |k: &str| std::env::var(k).ok();
    let settings = || Settings::load(cli.config.as_deref(), &env);
    match &cli.command {
        Command::Canonicalize { smiles, input, spellings } => {
            let lines = gather(smiles, input.as_deref())?;
            canonicalize(&lines, *spellings, cli.seed)
        }
        Command::Fingerprint { smiles, input, bits, fp } => {
            let lines = gather(smiles, input.as_deref())?;
            fingerprint(&lines, *bits, params(fp)?)
        }
        Command::Tanimoto { a, b, fp } => tanimoto(a, b, params(fp)?),
        Command::Groups { smiles, input, catalog } => {
            let catalog = match catalog {
                Some(p) => Catalog::from_file(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
                None => Catalog::builtin(),
            };
            groups(&gather(smiles, input.as_deref())?, &catalog)
        }
        Command::Extract { input, expect, field, text, out } => extract(input.as_deref(), *expect, field, *text, out.as_deref()),
        Command::Reward { pred, variant, out } => {
            let spec = settings()?.reward_spec(variant.as_deref())?;
            reward(pred, &spec, out.as_deref())
        }
        Command::Advantages { input, eps_low, eps_high, out } => advantages(input.as_deref(), *eps_low, *eps_high, out.as_deref()),
        Command::Generate { input, out, checkpoint } => {
            let s = settings()?;
            let output = pipeline(input, s, checkpoint.as_deref(), Stage::Generate, &env)?;
            let samples: Vec<&ReasoningSample> = output.results.iter().map(|r| &r.sample).collect();
            write_file(out, &to_jsonl(&samples))?;
            failures(&output)
        }
        Command::Filter { input, out, all, report, report_json, instruct, checkpoint } => {
            let s = settings()?;
            let output = pipeline(input, s, checkpoint.as_deref(), Stage::Verifier, &env)?;
            let retained: Vec<&ReasoningSample> = output.retained().collect();
            write_file(out, &to_jsonl(&retained))?;
            if let Some(p) = all {
                let samples: Vec<&ReasoningSample> = output.results.iter().map(|r| &r.sample).collect();
                write_file(p, &to_jsonl(&samples))?;
            }
            if let Some(p) = instruct {
                let mut records = Vec::with_capacity(retained.len());
                for s in &retained {
                    match reformat_instruction(s) {
                        Ok(r) => records.push(r),
                        Err(e) => log::warn!("no instruction record: {e}"),
                    }
                }
                if records.len() < retained.len() {
                    eprintln!("instruction records: {} of {} retained samples", records.len(), retained.len());
                }
                write_file(p, &to_jsonl(&records))?;
            }
            emit(report.as_deref(), &output.report.to_text())?;
            if let Some(p) = report_json {
                write_file(p, &output.report.to_json())?;
            }
            failures(&output)
        }
        Command::DifficultyFilter { input, variant, out } => {
            let spec = settings()?.reward_spec(variant.as_deref())?;
            let text = read_source(input.as_deref())?;
            let inputs: Vec<DifficultyInput> = chemreason::pipeline::parse_jsonl(&text).map_err(input_err)?;
            let verdicts = inputs
                .iter()
                .map(|i| assess_difficulty(i, &spec))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(input_err)?;
            let kept = verdicts.iter().filter(|v| v.retained).count();
            emit(out.as_deref(), &to_jsonl(&verdicts))?;
            eprintln!("kept {kept} of {}", verdicts.len());
            Ok(())
        }
        Command::Evaluate { pred, out, json, fp } => {
            let records = read_jsonl(pred).map_err(input_err)?;
            let report = EvalReport::build(&records, params(fp)?).map_err(input_err)?;
            emit(out.as_deref(), &report.to_text())?;
            if let Some(p) = json {
                write_file(p, &serde_json::to_string_pretty(&report).expect("report serializes"))?;
            }
            Ok(())
        }
        Command::Stats { input, field, group_by, lines, merges, out } => {
            let tokenizer: Box<dyn Tokenizer> = match merges {
                Some(p) => Box::new(MergeTable::from_file(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?),
                None => Box::new(WhitespacePunctuation),
            };
            let text = read_source(input.as_deref())?;
            stats(&text, field, group_by, *lines, tokenizer.as_ref(), out.as_deref())
        }
    }
}

fn params(fp: &FingerprintArgs) -> Result<FingerprintParams> {
    FingerprintParams::new(fp.radius, fp.width).map_err(|e| CliError::Config(e.to_string()))
}

fn read_source(path: Option<&Path>) -> Result<String> {
    match path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display()))),
        None => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s).map_err(input_err)?;
            Ok(s)
        }
    }
}

/// Positional arguments, or the non-blank lines of the input.
fn gather(args: &[String], input: Option<&Path>) -> Result<Vec<String>> {
    if !args.is_empty() {
        return Ok(args.to_vec());
    }
    Ok(read_source(input)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_file(p, text),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(input_err)
        }
    }
}

fn variant_name(debug: String) -> String {
    debug.split(|c: char| !c.is_alphanumeric()).next().unwrap_or_default().to_string()
}

fn describe_smiles(e: &SmilesError) -> String {
    match e {
        SmilesError::Graph(g) => format!("{}: {g}", variant_name(format!("{g:?}"))),
        _ => format!("{}: {e}", variant_name(format!("{e:?}"))),
    }
}

fn describe_reaction(e: &ReactionError) -> String {
    match e {
        ReactionError::Component { role, index, source } => format!("{role} {index}: {}", describe_smiles(source)),
        _ => format!("{}: {e}", variant_name(format!("{e:?}"))),
    }
}

fn describe_structure(e: &StructureError) -> String {
    match e {
        StructureError::Smiles(s) => describe_smiles(s),
        StructureError::Reaction(r) => describe_reaction(r),
    }
}

fn canonical_line(text: &str) -> std::result::Result<String, String> {
    if text.contains('>') {
        parse_reaction(text)
            .map(|r| r.to_canonical_smiles())
            .map_err(|e| describe_reaction(&e))
    } else {
        canonical_smiles(text).map_err(|e| describe_smiles(&e))
    }
}

fn random_spelling(text: &str, seed: u64) -> String {
    if text.contains('>') {
        let r = parse_reaction(text).expect("already parsed");
        [Role::Reactant, Role::Agent, Role::Product]
            .iter()
            .enumerate()
            .map(|(k, &role)| {
                r.role(role)
                    .iter()
                    .enumerate()
                    .map(|(i, m)| write_smiles(m, WriteMode::Random(seed ^ ((k as u64) << 32 | i as u64))))
                    .collect::<Vec<_>>()
                    .join(".")
            })
            .collect::<Vec<_>>()
            .join(">")
    } else {
        write_smiles(&parse_smiles(text).expect("already parsed"), WriteMode::Random(seed))
    }
}

fn canonicalize(lines: &[String], spellings: Option<u64>, seed: u64) -> Result<()> {
    let mut out = String::new();
    for (n, line) in lines.iter().enumerate() {
        let canon = canonical_line(line).map_err(|e| CliError::Input(format!("'{line}': {e}")))?;
        out.push_str(&canon);
        for k in 0..spellings.unwrap_or(0) {
            out.push('\t');
            out.push_str(&random_spelling(line, seed.wrapping_add((n as u64) << 20).wrapping_add(k)));
        }
        out.push('\n');
    }
    emit(None, &out)
}

fn fingerprint(lines: &[String], bits: bool, params: FingerprintParams) -> Result<()> {
    let mut out = String::new();
    for line in lines {
        let mol = parse_smiles(line).map_err(|e| CliError::Input(format!("'{line}': {}", describe_smiles(&e))))?;
        let fp = morgan_fingerprint(&mol, params);
        let body = if bits {
            fp.bits().map(|b| b.to_string()).collect::<Vec<_>>().join(",")
        } else {
            fp.to_hex()
        };
        out.push_str(&format!("{}\t{}\n", fp.set_count(), body));
    }
    emit(None, &out)
}

fn parse_structure(text: &str) -> Result<Structure> {
    Structure::parse(text).map_err(|e| CliError::Input(format!("'{text}': {}", describe_structure(&e))))
}

fn tanimoto(a: &str, b: &str, params: FingerprintParams) -> Result<()> {
    let (a, b) = (parse_structure(a)?, parse_structure(b)?);
    if matches!(a, Structure::Molecule(_)) != matches!(b, Structure::Molecule(_)) {
        return Err(CliError::Input("cannot compare a molecule with a reaction".into()));
    }
    emit(None, &format!("{:.6}\n", structure_similarity(&a, &b, params).value))
}

fn groups(lines: &[String], catalog: &Catalog) -> Result<()> {
    let mut out = String::new();
    for line in lines {
        let mol = parse_smiles(line).map_err(|e| CliError::Input(format!("'{line}': {}", describe_smiles(&e))))?;
        out.push_str(&format!("{line}\t{}\n", detect_functional_groups(&mol, catalog).join(",")));
    }
    emit(None, &out)
}

fn expected_for(arg: Option<ExpectArg>, record: Option<&Value>) -> Expected {
    match arg {
        Some(ExpectArg::Smiles) => Expected::Smiles,
        Some(ExpectArg::Iupac) => Expected::Iupac,
        None => record
            .and_then(|r| r.get("task"))
            .and_then(|t| serde_json::from_value::<TaskKind>(t.clone()).ok())
            .map_or(Expected::Smiles, TaskKind::expected),
    }
}

fn extract(input: Option<&Path>, expect: Option<ExpectArg>, field: &str, whole: bool, out: Option<&Path>) -> Result<()> {
    let text = read_source(input)?;
    if whole {
        let answer = extract_answer(&text, expected_for(expect, None));
        return emit(out, &(serde_json::to_string(&answer).expect("answer serializes") + "\n"));
    }
    let records: Vec<Value> = chemreason::pipeline::parse_jsonl(&text).map_err(input_err)?;
    let mut rows = Vec::with_capacity(records.len());
    for (k, r) in records.iter().enumerate() {
        let body = r
            .get(field)
            .and_then(Value::as_str)
            .ok_or_else(|| CliError::Input(format!("record {}: no string field '{field}'", k + 1)))?;
        let answer = extract_answer(body, expected_for(expect, Some(r)));
        let mut row = serde_json::to_value(&answer).expect("answer serializes");
        if let Some(id) = r.get("id") {
            row["id"] = id.clone();
        }
        rows.push(row);
    }
    emit(out, &to_jsonl(&rows))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RewardInput {
    #[serde(default)]
    id: Option<String>,
    #[serde(default)]
    task: Option<TaskKind>,
    #[serde(alias = "raw_output")]
    prediction: String,
    ground_truth: String,
}

#[derive(Serialize)]
struct RewardRow {
    #[serde(skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    #[serde(flatten)]
    outcome: chemreason::RewardOutcome,
}

fn reward(pred: &Path, spec: &chemreason::RewardSpec, out: Option<&Path>) -> Result<()> {
    let inputs: Vec<RewardInput> = read_jsonl(pred).map_err(input_err)?;
    let mut rows = Vec::with_capacity(inputs.len());
    for (k, r) in inputs.into_iter().enumerate() {
        let expected = r.task.map_or(Expected::Smiles, TaskKind::expected);
        let outcome = composite_reward(&r.prediction, &r.ground_truth, expected, spec).map_err(|e| {
            CliError::Input(format!("{}: {e}", r.id.clone().unwrap_or_else(|| format!("record {}", k + 1))))
        })?;
        rows.push(RewardRow { id: r.id, outcome });
    }
    emit(out, &to_jsonl(&rows))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AdvantageInput {
    #[serde(default)]
    id: Option<String>,
    rewards: Vec<f64>,
    #[serde(default)]
    ratios: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    eps_low: Option<f64>,
    #[serde(default)]
    eps_high: Option<f64>,
}

#[derive(Serialize)]
struct AdvantageRow {
    #[serde(skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    /// Groups whose rewards are all equal carry no signal.
    filtered: bool,
    advantages: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    objective: Option<f64>,
}

fn advantages(input: Option<&Path>, eps_low: Option<f64>, eps_high: Option<f64>, out: Option<&Path>) -> Result<()> {
    use chemreason::rlcore::DapoError;
    let text = read_source(input)?;
    let groups: Vec<AdvantageInput> = chemreason::pipeline::parse_jsonl(&text).map_err(input_err)?;
    let mut rows = Vec::with_capacity(groups.len());
    for (k, g) in groups.into_iter().enumerate() {
        let label = g.id.clone().unwrap_or_else(|| format!("group {}", k + 1));
        let fail = |e: DapoError| CliError::Input(format!("{label}: {e}"));
        let advantages = match group_advantages(&g.rewards) {
            Ok(a) => Some(a),
            Err(DapoError::FilteredOut) => None,
            Err(e) => return Err(fail(e)),
        };
        let objective = match (&g.ratios, &advantages) {
            (Some(ratios), Some(_)) => {
                let mut group = DapoGroup::new(g.rewards.clone(), ratios.clone());
                group.eps_low = eps_low.or(g.eps_low).unwrap_or(DEFAULT_EPS_LOW);
                group.eps_high = eps_high.or(g.eps_high).unwrap_or(DEFAULT_EPS_HIGH);
                Some(dapo_objective(&group).map_err(fail)?)
            }
            _ => None,
        };
        rows.push(AdvantageRow {
            id: g.id,
            filtered: advantages.is_none(),
            advantages,
            objective,
        });
    }
    emit(out, &to_jsonl(&rows))
}

fn pipeline_err(e: PipelineError) -> CliError {
    let msg = e.to_string();
    match e {
        PipelineError::Config(_) | PipelineError::Prompt(_) | PipelineError::Lookup(_) => CliError::Config(msg),
        PipelineError::Provider(ProviderError::MissingApiKey(_) | ProviderError::Fixture(_)) => CliError::Config(msg),
        PipelineError::Provider(_) => CliError::Provider(msg),
        PipelineError::Checkpoint(_) | PipelineError::DuplicateId(_) => CliError::Input(msg),
    }
}

fn pipeline(
    input: &Path,
    settings: Settings,
    checkpoint: Option<&Path>,
    through: Stage,
    env: &dyn Fn(&str) -> Option<String>,
) -> Result<PipelineOutput> {
    let samples: Vec<ReasoningSample> = read_jsonl(input).map_err(input_err)?;
    let ck_path: Option<PathBuf> = checkpoint.map(Path::to_path_buf).or(settings.generation.checkpoint_path.clone());
    let ctx = PipelineContext::from_config(settings.generation, env).map_err(pipeline_err)?;
    let ck = match &ck_path {
        Some(p) => Some(Checkpoint::open(p).map_err(input_err)?),
        None => None,
    };
    let output = run_stages(&samples, &ctx, ck.as_ref(), through).map_err(pipeline_err)?;
    if let Err(e) = ctx.persist_lookup_cache() {
        log::warn!("saving lookup cache: {e}");
    }
    log::info!(
        "{} samples, {} retained",
        output.results.len(),
        output.retained().count()
    );
    Ok(output)
}

/// Outputs are already written; per-sample failures still decide the exit status.
fn failures(output: &PipelineOutput) -> Result<()> {
    let failed: Vec<_> = output
        .results
        .iter()
        .filter_map(|r| r.error.as_ref().map(|e| (&r.sample.id, e)))
        .collect();
    let Some(&(id, first)) = failed.iter().max_by_key(|(_, e)| match e.kind {
        FailureKind::Input => 0,
        FailureKind::Provider | FailureKind::Lookup => 1,
        FailureKind::Prompt => 2,
    }) else {
        return Ok(());
    };
    let msg = format!("{} of {} samples stopped early; {id}: {first}", failed.len(), output.results.len());
    Err(match first.kind {
        FailureKind::Input => CliError::Input(msg),
        FailureKind::Prompt => CliError::Config(msg),
        FailureKind::Provider | FailureKind::Lookup => CliError::Provider(msg),
    })
}

fn stats(text: &str, field: &str, group_by: &str, lines: bool, tokenizer: &dyn Tokenizer, out: Option<&Path>) -> Result<()> {
    let mut grouped: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut all = Vec::new();
    if lines {
        all = text.lines().filter(|l| !l.trim().is_empty()).map(String::from).collect();
    } else {
        let records: Vec<Value> = chemreason::pipeline::parse_jsonl(text).map_err(input_err)?;
        for (k, r) in records.iter().enumerate() {
            let body = r
                .get(field)
                .and_then(Value::as_str)
                .ok_or_else(|| CliError::Input(format!("record {}: no string field '{field}'", k + 1)))?;
            let group = match r.get(group_by) {
                Some(Value::String(s)) => s.clone(),
                Some(other) => other.to_string(),
                None => "unknown".to_string(),
            };
            grouped.entry(group).or_default().push(body.to_string());
            all.push(body.to_string());
        }
    }
    let mut rows = Vec::new();
    for (name, texts) in &grouped {
        rows.push((name.clone(), token_stats(texts, tokenizer).map_err(input_err)?));
    }
    rows.push(("all".to_string(), token_stats(&all, tokenizer).map_err(input_err)?));
    emit(out, &token_stats_table(&rows))
}
