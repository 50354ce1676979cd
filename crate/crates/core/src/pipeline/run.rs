//! Anchor enrichment, trace generation and the staged run over a batch of
//! samples with bounded parallelism and checkpointed progress.

use std::collections::HashSet;
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use super::checkpoint::{Checkpoint, CheckpointError, Stage};
use super::config::{ConfigError, GenerationConfig, ProviderConfig, ProviderMode};
use super::filters::{consistency_filter, structural_filter, verifier_filter, VerifierSettings, VerifyError};
use super::limits::{CallBudget, TokenBucket};
use super::lookup::{fetch_iupac, IupacClient, LookupError};
use super::prompt::{build_prompt, DemoStore, PromptError, TemplateStore};
use super::provider::{
    ChatMessage, ChatProvider, ChatRequest, HttpProvider, MockProvider, ProviderError, ProviderHandle, ReplayProvider,
    RequestMeta, RequestStage,
};
use super::report::RetentionReport;
use super::sample::{FilterStage, Outcome, ReasoningSample, SampleError, TaskKind};
use super::transport::UreqTransport;
use crate::funcgroups::{detect_functional_groups, Catalog};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Lookup(#[from] LookupError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("duplicate sample id '{0}'")]
    DuplicateId(String),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnrichError {
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Lookup(#[from] LookupError),
}

/// Fills functional groups and IUPAC names per component and assigns a
/// demonstration. A lookup miss leaves the name empty.
pub fn enrich_anchors(
    sample: &ReasoningSample,
    catalog: &Catalog,
    client: Option<&IupacClient>,
    demos: &DemoStore,
) -> Result<ReasoningSample, EnrichError> {
    let mut out = sample.clone();
    let components = sample.components()?;
    let graphs = sample.component_graphs()?;
    out.anchors.functional_groups = graphs.iter().map(|g| detect_functional_groups(g, catalog)).collect();
    out.anchors.iupac_names = match client {
        Some(c) => components
            .iter()
            .map(|comp| fetch_iupac(&comp.smiles, c))
            .collect::<Result<_, _>>()?,
        None => vec![None; components.len()],
    };
    if out.anchors.demo_id.is_none() {
        out.anchors.demo_id = demos.assign(sample.task, &sample.id).map(|d| d.id.clone());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GenerateError {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationSettings {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub template_id: Option<String>,
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// What a correct generation for `sample` ends in.
fn reference_answer(sample: &ReasoningSample) -> String {
    match sample.task {
        TaskKind::Caption => sample.query.clone(),
        _ => sample.ground_truth.clone(),
    }
}

/// Stores the provider's reply as `generated_text`. Samples that already
/// carry text are returned unchanged without a call.
pub fn generate_trace(
    sample: &ReasoningSample,
    settings: &GenerationSettings,
    handle: &ProviderHandle,
    templates: &TemplateStore,
    demos: &DemoStore,
) -> Result<ReasoningSample, GenerateError> {
    if sample.generated_text.is_some() {
        return Ok(sample.clone());
    }
    let template_id = settings
        .template_id
        .clone()
        .unwrap_or_else(|| TemplateStore::generation_id(sample.task));
    let prompt = build_prompt(sample, templates.get(&template_id)?, demos)?;
    let request = ChatRequest {
        model: settings.model.clone(),
        messages: vec![ChatMessage::user(prompt)],
        temperature: settings.temperature,
        max_tokens: settings.max_tokens,
        meta: RequestMeta {
            key: format!("{}/{template_id}", sample.id),
            task: sample.task,
            stage: RequestStage::Generation,
            reference: Some(reference_answer(sample)),
        },
    };
    let (reply, attempts) = handle.call(&request);
    let reply = reply?;
    if attempts > 1 {
        log::info!("{}: generated after {attempts} attempts", sample.id);
    }
    let mut out = sample.clone();
    out.generated_text = Some(reply.content);
    out.provenance.model_id = Some(reply.model_id);
    out.provenance.timestamp = Some(reply.created.unwrap_or_else(now_unix));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderHook {
    pub program: String,
    pub args: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("render command failed: {0}")]
pub struct RenderError(pub String);

impl RenderHook {
    pub fn from_command(command: &[String]) -> Option<RenderHook> {
        let (program, args) = command.split_first()?;
        Some(RenderHook {
            program: program.clone(),
            args: args.to_vec(),
        })
    }

    /// Runs the command with the SMILES as final argument; the first line of
    /// its standard output is the image path.
    pub fn render(&self, smiles: &str) -> Result<String, RenderError> {
        let out = Command::new(&self.program)
            .args(&self.args)
            .arg(smiles)
            .output()
            .map_err(|e| RenderError(format!("{}: {e}", self.program)))?;
        if !out.status.success() {
            return Err(RenderError(format!(
                "{} exited with {}: {}",
                self.program,
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        let stdout = String::from_utf8_lossy(&out.stdout);
        stdout
            .lines()
            .next()
            .map(|l| l.trim().to_string())
            .filter(|l| !l.is_empty())
            .ok_or_else(|| RenderError(format!("{} printed no path", self.program)))
    }
}

/// Everything a run needs besides its inputs.
pub struct PipelineContext {
    pub config: GenerationConfig,
    pub catalog: Catalog,
    pub templates: TemplateStore,
    pub demos: DemoStore,
    pub generator: ProviderHandle,
    pub verifier: ProviderHandle,
    pub lookup: Option<IupacClient>,
    pub render: Option<RenderHook>,
}

fn handle_for(provider: Arc<dyn ChatProvider>, config: &GenerationConfig, budget: &Arc<CallBudget>) -> ProviderHandle {
    ProviderHandle {
        provider,
        retry: config.retry,
        bucket: config.rate_limit.map(|r| Arc::new(TokenBucket::new(r))),
        budget: budget.clone(),
    }
}

/// Builds the provider a config section describes. `env` resolves
/// environment variables.
pub fn provider_from_config(
    p: &ProviderConfig,
    env: &dyn Fn(&str) -> Option<String>,
) -> Result<Arc<dyn ChatProvider>, ProviderError> {
    Ok(match p.mode {
        ProviderMode::Mock => Arc::new(MockProvider::oracle(p.model.clone())),
        ProviderMode::Replay => {
            let path = p
                .replay_path
                .as_deref()
                .ok_or_else(|| ProviderError::Fixture("replay_path is not set".into()))?;
            Arc::new(ReplayProvider::from_file(path, p.model.clone())?)
        }
        ProviderMode::Http => {
            let key = env(&p.api_key_env).ok_or_else(|| ProviderError::MissingApiKey(p.api_key_env.clone()))?;
            Arc::new(HttpProvider::new(
                p.base_url.clone(),
                Some(key),
                Arc::new(UreqTransport::default()),
            ))
        }
    })
}

impl PipelineContext {
    /// Context with the given providers; everything else comes from `config`.
    pub fn new(
        config: GenerationConfig,
        generator: Arc<dyn ChatProvider>,
        verifier: Arc<dyn ChatProvider>,
    ) -> Result<PipelineContext, PipelineError> {
        config.validate()?;
        let budget = Arc::new(CallBudget::new(config.call_budget));
        let demos = match &config.demos_path {
            Some(p) => DemoStore::from_file(p)?,
            None => DemoStore::default(),
        };
        let lookup = if config.lookup.enabled {
            let client = if config.lookup.offline {
                IupacClient::offline()
            } else {
                IupacClient::new(
                    config.lookup.base_url.clone(),
                    Arc::new(UreqTransport::default()),
                    config.retry,
                )
            };
            if let Some(p) = &config.lookup.cache_path {
                if p.exists() {
                    client.load_cache(p)?;
                }
            }
            Some(client)
        } else {
            None
        };
        Ok(PipelineContext {
            generator: handle_for(generator, &config, &budget),
            verifier: handle_for(verifier, &config, &budget),
            render: config.render_command.as_deref().and_then(RenderHook::from_command),
            catalog: Catalog::builtin(),
            templates: TemplateStore::default(),
            demos,
            lookup,
            config,
        })
    }

    pub fn from_config(
        config: GenerationConfig,
        env: &dyn Fn(&str) -> Option<String>,
    ) -> Result<PipelineContext, PipelineError> {
        config.validate()?;
        let generator = provider_from_config(&config.generator, env)?;
        let verifier = provider_from_config(&config.verifier, env)?;
        PipelineContext::new(config, generator, verifier)
    }

    pub fn generation_settings(&self) -> GenerationSettings {
        GenerationSettings {
            model: self.config.generator.model.clone(),
            temperature: self.config.generator.temperature.unwrap_or(self.config.temperature),
            max_tokens: self.config.max_output_tokens,
            template_id: self.config.prompt_template_id.clone(),
        }
    }

    pub fn verifier_settings(&self) -> VerifierSettings {
        VerifierSettings {
            model: self.config.verifier.model.clone(),
            temperature: self.config.verifier.temperature.unwrap_or(self.config.verifier_temperature),
            max_tokens: self.config.max_output_tokens,
        }
    }

    /// Writes the lookup cache back if one is configured.
    pub fn persist_lookup_cache(&self) -> Result<(), LookupError> {
        match (&self.lookup, &self.config.lookup.cache_path) {
            (Some(c), Some(p)) => c.save_cache(p),
            _ => Ok(()),
        }
    }
}

/// What stopped a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    /// The sample itself is malformed.
    Input,
    /// Prompt assembly failed: unknown template or demonstration.
    Prompt,
    Lookup,
    Provider,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleFailure {
    pub kind: FailureKind,
    pub message: String,
}

impl std::fmt::Display for SampleFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleResult {
    pub sample: ReasoningSample,
    /// Why processing stopped early; the sample is retried on the next run.
    pub error: Option<SampleFailure>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    /// In input order.
    pub results: Vec<SampleResult>,
    pub report: RetentionReport,
}

impl PipelineOutput {
    pub fn retained(&self) -> impl Iterator<Item = &ReasoningSample> {
        self.results.iter().map(|r| &r.sample).filter(|s| s.is_retained())
    }
}

fn stopped(sample: ReasoningSample, kind: FailureKind, error: impl ToString) -> SampleResult {
    let message = error.to_string();
    log::warn!("{}: {message}", sample.id);
    SampleResult {
        sample,
        error: Some(SampleFailure { kind, message }),
    }
}

fn apply_filter(
    s: &mut ReasoningSample,
    stage: FilterStage,
    outcome: Outcome,
    ck: Option<&Checkpoint>,
    ck_stage: Stage,
) -> Result<(), CheckpointError> {
    s.record_verdict(stage, outcome).expect("filters run in order on pending verdicts");
    match ck {
        Some(c) => c.append(ck_stage, s),
        None => Ok(()),
    }
}

fn process(
    input: &ReasoningSample,
    ctx: &PipelineContext,
    ck: Option<&Checkpoint>,
    through: Stage,
) -> Result<SampleResult, CheckpointError> {
    let (reached, mut s) = match ck.and_then(|c| c.latest(&input.id)) {
        Some((stage, s)) => (Some(*stage), s.clone()),
        None => (None, input.clone()),
    };
    let todo = |stage: Stage| stage <= through && reached.is_none_or(|r| r < stage);
    let save = |stage: Stage, s: &ReasoningSample| ck.map_or(Ok(()), |c| c.append(stage, s));

    if todo(Stage::Enrich) {
        if let Err(e) = s.validate() {
            return Ok(stopped(s, FailureKind::Input, e));
        }
        s = match enrich_anchors(&s, &ctx.catalog, ctx.lookup.as_ref(), &ctx.demos) {
            Ok(e) => e,
            Err(e @ EnrichError::Sample(_)) => return Ok(stopped(s, FailureKind::Input, e)),
            Err(e @ EnrichError::Lookup(_)) => return Ok(stopped(s, FailureKind::Lookup, e)),
        };
        if let (Some(hook), None) = (&ctx.render, &s.image_ref) {
            match hook.render(&s.query) {
                Ok(path) => s.image_ref = Some(path),
                Err(e) => log::warn!("{}: {e}", s.id),
            }
        }
        save(Stage::Enrich, &s)?;
    }
    if todo(Stage::Generate) {
        s = match generate_trace(&s, &ctx.generation_settings(), &ctx.generator, &ctx.templates, &ctx.demos) {
            Ok(g) => g,
            Err(e @ GenerateError::Prompt(_)) => return Ok(stopped(s, FailureKind::Prompt, e)),
            Err(e @ GenerateError::Provider(_)) => return Ok(stopped(s, FailureKind::Provider, e)),
        };
        save(Stage::Generate, &s)?;
    }
    let v = |s: &ReasoningSample, st: FilterStage| s.filter_verdicts.get(st).clone();
    if todo(Stage::Structural) && v(&s, FilterStage::Structural).is_pending() {
        let o = structural_filter(&s, &ctx.config.structural);
        apply_filter(&mut s, FilterStage::Structural, o, ck, Stage::Structural)?;
    }
    if v(&s, FilterStage::Structural).is_pass()
        && todo(Stage::Consistency)
        && v(&s, FilterStage::Consistency).is_pending()
    {
        let o = consistency_filter(&s);
        apply_filter(&mut s, FilterStage::Consistency, o, ck, Stage::Consistency)?;
    }
    if v(&s, FilterStage::Consistency).is_pass()
        && todo(Stage::Verifier)
        && v(&s, FilterStage::Verifier).is_pending()
    {
        match verifier_filter(&s, &ctx.templates, &ctx.verifier, &ctx.verifier_settings()) {
            Ok(o) => apply_filter(&mut s, FilterStage::Verifier, o, ck, Stage::Verifier)?,
            Err(e @ VerifyError::Prompt(_)) => return Ok(stopped(s, FailureKind::Prompt, e)),
            Err(e @ VerifyError::Provider(_)) => return Ok(stopped(s, FailureKind::Provider, e)),
        }
    }
    Ok(SampleResult { sample: s, error: None })
}

/// Runs every sample through enrich, generate and the three filters. Work
/// already recorded in `checkpoint` is not repeated. Per-sample failures
/// are reported in the results, not raised.
pub fn run_pipeline(
    inputs: &[ReasoningSample],
    ctx: &PipelineContext,
    checkpoint: Option<&Checkpoint>,
) -> Result<PipelineOutput, PipelineError> {
    run_stages(inputs, ctx, checkpoint, Stage::Verifier)
}

/// As [`run_pipeline`], stopping once `through` is done.
pub fn run_stages(
    inputs: &[ReasoningSample],
    ctx: &PipelineContext,
    checkpoint: Option<&Checkpoint>,
    through: Stage,
) -> Result<PipelineOutput, PipelineError> {
    let mut seen = HashSet::new();
    for s in inputs {
        if !seen.insert(s.id.as_str()) {
            return Err(PipelineError::DuplicateId(s.id.clone()));
        }
    }
    let slots: Vec<Mutex<Option<Result<SampleResult, CheckpointError>>>> =
        inputs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = ctx.config.concurrency_limit.min(inputs.len()).max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= inputs.len() {
                    break;
                }
                let r = process(&inputs[i], ctx, checkpoint, through);
                *slots[i].lock().expect("result slot") = Some(r);
            });
        }
    });
    let results = slots
        .into_iter()
        .map(|m| m.into_inner().expect("result slot").expect("every sample processed"))
        .collect::<Result<Vec<_>, _>>()?;
    let report = RetentionReport::from_samples(results.iter().map(|r| (&r.sample, r.error.is_some())));
    Ok(PipelineOutput { results, report })
}
