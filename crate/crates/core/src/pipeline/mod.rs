//! Reasoning-trace generation with anchors, staged filtering, retention
//! reporting and difficulty screening.

pub mod checkpoint;
pub mod config;
pub mod difficulty;
pub mod filters;
pub mod instruct;
pub mod jsonl;
pub mod limits;
pub mod lookup;
pub mod prompt;
pub mod provider;
pub mod report;
pub mod run;
pub mod sample;
pub mod transport;

pub use checkpoint::{Checkpoint, CheckpointError, CheckpointRecord, Stage};
pub use config::{ConfigError, GenerationConfig, LookupConfig, ProviderConfig, ProviderMode};
pub use difficulty::{assess_difficulty, DifficultyError, DifficultyInput, DifficultyVerdict};
pub use filters::{
    answers_agree, caption_reconstruction_filter, consistency_filter, structural_filter, verifier_filter,
    StructuralRules, VerifierSettings, VerifyError,
};
pub use instruct::{reformat_instruction, InstructError, InstructionRecord};
pub use jsonl::{parse_jsonl, read_jsonl, to_jsonl, write_jsonl, JsonlError};
pub use limits::{CallBudget, RateLimit, RetryPolicy, TokenBucket};
pub use lookup::{fetch_iupac, IupacClient, LookupError, PUBCHEM_BASE};
pub use prompt::{build_prompt, Demo, DemoStore, PromptError, Template, TemplateStore};
pub use provider::{
    oracle_generation, ChatMessage, ChatProvider, ChatRequest, ChatResponse, HttpProvider, MockProvider,
    ProviderError, ProviderHandle, ReplayEntry, ReplayProvider, RequestMeta, RequestStage,
};
pub use report::{RetentionReport, StageCounts, TaskRetention};
pub use run::{
    enrich_anchors, generate_trace, FailureKind, SampleFailure, provider_from_config, run_pipeline, run_stages, EnrichError, GenerateError,
    GenerationSettings, PipelineContext, PipelineError, PipelineOutput, RenderError, RenderHook, SampleResult,
};
pub use sample::{
    Anchors, Component, FilterStage, FilterVerdicts, Outcome, Provenance, ReasoningSample, SampleError, TaskKind,
    Verdict, VerdictStatus,
};
pub use transport::{HttpReply, HttpTransport, TransportError, UreqTransport};
