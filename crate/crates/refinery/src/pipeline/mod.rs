//! Two-stage refinement over sharded corpora: ingest records, obtain
//! programs from a provider, execute, reassemble, and emit refined
//! records plus audit and statistics.
//!
//! Shards are independent units of work; all core modules invoked are
//! pure, so with a recorded provider cache the whole pipeline is a pure
//! function of (corpus, config).

pub mod provider;
pub mod records;

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::chunker::{count_words, reassemble, split_into_chunks, Chunk, DEFAULT_WINDOW};
use crate::executor::{
    apply_chunk_program, apply_doc_program, ExecPolicy, PolicyAction, RefinedResult,
};
use crate::metrics::{retention_ratio, write_histogram_csv, LengthHistogram};
use crate::program_dsl::{
    extract_fenced_code, parse_program, render_numbered, serialize_program, Stage,
};
use provider::{
    CachingProvider, CommandProvider, HttpProvider, ProgramProvider, ProgramRequest,
    SidecarProvider,
};
use records::{read_jsonl, write_jsonl, AuditRecord, CorpusRecord, RecordError};

/// Token-length histogram edges used for corpus statistics.
pub const DEFAULT_HISTOGRAM_EDGES: &[u64] = &[0, 50, 100, 200, 500, 1000, 2000, 5000, 10000];

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("record {id} failed: {message}")]
    RecordFailed { id: String, message: String },
}

/// Which provider implementation to construct.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Sidecar,
    Command,
    Http,
}

impl FromStr for ProviderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sidecar" => Ok(ProviderKind::Sidecar),
            "command" => Ok(ProviderKind::Command),
            "http" => Ok(ProviderKind::Http),
            other => Err(format!("unknown provider `{other}` (sidecar|command|http)")),
        }
    }
}

/// Which stages to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageSelection {
    Doc,
    Chunk,
    Both,
}

impl StageSelection {
    fn runs_doc(self) -> bool {
        matches!(self, StageSelection::Doc | StageSelection::Both)
    }

    fn runs_chunk(self) -> bool {
        matches!(self, StageSelection::Chunk | StageSelection::Both)
    }
}

impl FromStr for StageSelection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "doc" => Ok(StageSelection::Doc),
            "chunk" => Ok(StageSelection::Chunk),
            "both" => Ok(StageSelection::Both),
            other => Err(format!("unknown stage `{other}` (doc|chunk|both)")),
        }
    }
}

/// What to do when the provider or parser fails on a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorPolicy {
    /// Keep the original text and note the failure in the audit. At
    /// corpus scale transient failures must not silently delete data.
    Keep,
    /// Drop the record, noted in the audit.
    Drop,
    /// Abort the run.
    Fail,
}

impl FromStr for ErrorPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "keep" => Ok(ErrorPolicy::Keep),
            "drop" => Ok(ErrorPolicy::Drop),
            "fail" => Ok(ErrorPolicy::Fail),
            other => Err(format!("unknown error policy `{other}` (keep|drop|fail)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub window: usize,
    pub policy: ExecPolicy,
    pub shard_count: usize,
    pub stage: StageSelection,
    pub on_error: ErrorPolicy,
    pub provider: ProviderKind,
    /// Sidecar path, command line, or URL, depending on `provider`.
    pub provider_endpoint: Option<String>,
    pub cache_path: Option<PathBuf>,
    pub audit_out: Option<PathBuf>,
    pub stats_out: Option<PathBuf>,
    pub max_retries: u32,
    /// Upper bound on requests exchanged with the provider in one batch.
    pub max_in_flight: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            window: DEFAULT_WINDOW,
            policy: ExecPolicy::default(),
            shard_count: 1,
            stage: StageSelection::Both,
            on_error: ErrorPolicy::Keep,
            provider: ProviderKind::Sidecar,
            provider_endpoint: None,
            cache_path: None,
            audit_out: None,
            stats_out: None,
            max_retries: 3,
            max_in_flight: 8,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.shard_count < 1 {
            return Err(PipelineError::Config("shard count must be >= 1".into()));
        }
        if self.window < 1 {
            return Err(PipelineError::Config("window must be >= 1".into()));
        }
        if self.max_in_flight < 1 {
            return Err(PipelineError::Config("max_in_flight must be >= 1".into()));
        }
        self.policy
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))
    }

    /// Apply one `key = value` setting, as found in config files. CLI
    /// flags reuse the same keys and override file values.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<(), PipelineError> {
        let bad = |what: &str| PipelineError::Config(format!("invalid {what}: `{value}`"));
        match key {
            "window" => self.window = value.parse().map_err(|_| bad("window"))?,
            "tau" => {
                self.policy.removal_ratio_threshold = value.parse().map_err(|_| bad("tau"))?;
            }
            "on_over_threshold" => {
                self.policy.over_threshold_action =
                    serde_json::from_value(serde_json::Value::String(value.to_string()))
                        .map_err(|_| bad("on_over_threshold"))?;
            }
            "out_of_range" => {
                self.policy.out_of_range_lines =
                    serde_json::from_value(serde_json::Value::String(value.to_string()))
                        .map_err(|_| bad("out_of_range"))?;
            }
            "shards" => self.shard_count = value.parse().map_err(|_| bad("shards"))?,
            "stage" => self.stage = value.parse().map_err(PipelineError::Config)?,
            "on_error" => self.on_error = value.parse().map_err(PipelineError::Config)?,
            "provider" => self.provider = value.parse().map_err(PipelineError::Config)?,
            "provider_endpoint" => self.provider_endpoint = Some(value.to_string()),
            "cache" => self.cache_path = Some(PathBuf::from(value)),
            "audit_out" => self.audit_out = Some(PathBuf::from(value)),
            "stats_out" => self.stats_out = Some(PathBuf::from(value)),
            "max_retries" => self.max_retries = value.parse().map_err(|_| bad("max_retries"))?,
            "max_in_flight" => {
                self.max_in_flight = value.parse().map_err(|_| bad("max_in_flight"))?;
            }
            other => {
                return Err(PipelineError::Config(format!("unknown config key `{other}`")));
            }
        }
        Ok(())
    }

    /// Load settings from a flat `key = value` file. `#` starts a comment.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), PipelineError> {
        let text = fs::read_to_string(path).map_err(|source| PipelineError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                PipelineError::Config(format!(
                    "{}:{}: expected `key = value`",
                    path.display(),
                    lineno + 1
                ))
            })?;
            self.apply_kv(key.trim(), value.trim())?;
        }
        Ok(())
    }
}

/// Construct the provider named by the config, wrapped in the response
/// cache when one is configured.
pub fn build_provider(config: &PipelineConfig) -> Result<Arc<dyn ProgramProvider>, PipelineError> {
    let endpoint = || {
        config.provider_endpoint.clone().ok_or_else(|| {
            PipelineError::Config("provider_endpoint is required for this provider".into())
        })
    };
    let base: Arc<dyn ProgramProvider> = match config.provider {
        ProviderKind::Sidecar => Arc::new(SidecarProvider::from_path(Path::new(&endpoint()?))?),
        ProviderKind::Command => Arc::new(CommandProvider::new(endpoint()?)),
        ProviderKind::Http => Arc::new(
            HttpProvider::new(endpoint()?, config.max_retries)
                .map_err(|e| PipelineError::Config(e.to_string()))?,
        ),
    };
    match &config.cache_path {
        Some(path) => Ok(Arc::new(
            CachingProvider::open(path, base).map_err(|e| PipelineError::Config(e.to_string()))?,
        )),
        None => Ok(base),
    }
}

/// Mergeable per-stage statistics. Tokens are whitespace words by
/// default, consistent with the chunker.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageStats {
    pub stage: Stage,
    pub docs_in: u64,
    pub docs_kept: u64,
    pub docs_errored: u64,
    pub tokens_before: u64,
    pub tokens_after: u64,
    pub bytes_before: u64,
    pub bytes_after: u64,
    pub hist_before: LengthHistogram,
    pub hist_after: LengthHistogram,
}

impl StageStats {
    fn new(stage: Stage) -> Self {
        let edges = DEFAULT_HISTOGRAM_EDGES.to_vec();
        StageStats {
            stage,
            docs_in: 0,
            docs_kept: 0,
            docs_errored: 0,
            tokens_before: 0,
            tokens_after: 0,
            bytes_before: 0,
            bytes_after: 0,
            hist_before: LengthHistogram::new(edges.clone()).unwrap(),
            hist_after: LengthHistogram::new(edges).unwrap(),
        }
    }

    fn observe(&mut self, record: &CorpusRecord, output: Option<&CorpusRecord>, audit: &AuditRecord) {
        let before = count_words(&record.text) as u64;
        self.docs_in += 1;
        self.tokens_before += before;
        self.bytes_before += record.text.len() as u64;
        self.hist_before.add(before);
        if audit.error.is_some() {
            self.docs_errored += 1;
        }
        if let Some(out) = output {
            let after = count_words(&out.text) as u64;
            self.docs_kept += 1;
            self.tokens_after += after;
            self.bytes_after += out.text.len() as u64;
            self.hist_after.add(after);
        }
    }

    pub fn merge(&mut self, other: &StageStats) {
        debug_assert_eq!(self.stage, other.stage);
        self.docs_in += other.docs_in;
        self.docs_kept += other.docs_kept;
        self.docs_errored += other.docs_errored;
        self.tokens_before += other.tokens_before;
        self.tokens_after += other.tokens_after;
        self.bytes_before += other.bytes_before;
        self.bytes_after += other.bytes_after;
        self.hist_before.merge(&other.hist_before).unwrap();
        self.hist_after.merge(&other.hist_after).unwrap();
    }

    pub fn retention(&self) -> Option<f64> {
        retention_ratio(self.tokens_before as f64, self.tokens_after as f64).ok()
    }
}

/// Result of running one stage over a batch of records.
#[derive(Debug, Clone)]
pub struct StageOutcome {
    pub records: Vec<CorpusRecord>,
    pub audit: Vec<AuditRecord>,
    pub stats: StageStats,
}

enum StepFailure {
    Provider(String),
    Parse(String),
}

impl StepFailure {
    fn message(&self) -> String {
        match self {
            StepFailure::Provider(m) => format!("provider: {m}"),
            StepFailure::Parse(m) => format!("parse: {m}"),
        }
    }
}

fn error_audit(record: &CorpusRecord, stage: Stage, kept: bool, message: String) -> AuditRecord {
    AuditRecord {
        id: record.id.clone(),
        stage,
        kept,
        program_canonical: None,
        lines_removed: 0,
        replacements_made: 0,
        policy_action: PolicyAction::None,
        bytes_before: record.text.len() as u64,
        bytes_after: if kept { record.text.len() as u64 } else { 0 },
        error: Some(message),
        warnings: Vec::new(),
    }
}

fn handle_record_failure(
    record: &CorpusRecord,
    stage: Stage,
    failure: StepFailure,
    config: &PipelineConfig,
) -> Result<(Option<CorpusRecord>, AuditRecord), PipelineError> {
    let message = failure.message();
    match config.on_error {
        ErrorPolicy::Keep => Ok((
            Some(record.clone()),
            error_audit(record, stage, true, message),
        )),
        ErrorPolicy::Drop => Ok((None, error_audit(record, stage, false, message))),
        ErrorPolicy::Fail => Err(PipelineError::RecordFailed {
            id: record.id.clone(),
            message,
        }),
    }
}

fn obtain_program(
    provider: &dyn ProgramProvider,
    request: &ProgramRequest<'_>,
) -> Result<String, StepFailure> {
    provider
        .generate(request)
        .map_err(|e| StepFailure::Provider(e.to_string()))
}

fn parse_provider_output(
    raw: &str,
    stage: Stage,
) -> Result<(crate::program_dsl::RefinementProgram, Vec<String>), StepFailure> {
    let code = extract_fenced_code(raw).map_err(|e| StepFailure::Parse(e.to_string()))?;
    parse_program(&code, stage)
        .map(|parsed| (parsed.program, parsed.warnings))
        .map_err(|d| StepFailure::Parse(d.to_string()))
}

fn refine_doc_record(
    record: &CorpusRecord,
    provider: &dyn ProgramProvider,
    config: &PipelineConfig,
) -> Result<(Option<CorpusRecord>, AuditRecord), PipelineError> {
    let doc = record.to_document();
    let rendered = render_numbered(&doc.lines);
    let request = ProgramRequest {
        stage: Stage::Doc,
        record_id: &record.id,
        chunk_index: None,
        rendered: &rendered,
    };
    let step = obtain_program(provider, &request)
        .and_then(|raw| parse_provider_output(&raw, Stage::Doc));
    let (program, warnings) = match step {
        Ok(parsed) => parsed,
        Err(failure) => return handle_record_failure(record, Stage::Doc, failure, config),
    };
    let result = match apply_doc_program(&doc, &program) {
        Ok(result) => result,
        Err(e) => {
            return handle_record_failure(record, Stage::Doc, StepFailure::Parse(e.to_string()), config);
        }
    };

    let output = result.kept.then(|| record.clone());
    let audit = AuditRecord {
        id: record.id.clone(),
        stage: Stage::Doc,
        kept: result.kept,
        program_canonical: Some(serialize_program(&program)),
        lines_removed: result.lines_removed as u64,
        replacements_made: result.replacements_made as u64,
        policy_action: result.policy_action,
        bytes_before: record.text.len() as u64,
        bytes_after: output.as_ref().map_or(0, |r| r.text.len() as u64),
        error: None,
        warnings,
    };
    Ok((output, audit))
}

/// Per-chunk execution outcome folded into the record-level audit.
struct ChunkExecution {
    result: RefinedResult,
    warnings: Vec<String>,
    error: Option<String>,
}

fn keep_original_chunk(chunk: &Chunk) -> RefinedResult {
    RefinedResult {
        kept: true,
        lines: chunk.lines.clone(),
        ops_applied: 0,
        lines_removed: 0,
        replacements_made: 0,
        policy_action: PolicyAction::None,
    }
}

fn refine_chunk_record(
    record: &CorpusRecord,
    provider: &dyn ProgramProvider,
    config: &PipelineConfig,
) -> Result<(Option<CorpusRecord>, AuditRecord), PipelineError> {
    let doc = record.to_document();
    let chunks =
        split_into_chunks(&doc, config.window).map_err(|e| PipelineError::Config(e.to_string()))?;

    // Render every refinable chunk up front, then exchange programs in
    // bounded batches so batch-oriented providers see real batches.
    let rendered: Vec<Option<String>> = chunks
        .iter()
        .map(|c| (!c.skipped).then(|| render_numbered(&c.lines)))
        .collect();
    let mut requests = Vec::new();
    for (chunk, rendered) in chunks.iter().zip(&rendered) {
        if let Some(text) = rendered {
            requests.push(ProgramRequest {
                stage: Stage::Chunk,
                record_id: &record.id,
                chunk_index: Some(chunk.index),
                rendered: text,
            });
        }
    }
    let mut responses = Vec::with_capacity(requests.len());
    for batch in requests.chunks(config.max_in_flight) {
        responses.extend(provider.generate_batch(batch));
    }

    let mut executions: Vec<ChunkExecution> = Vec::with_capacity(chunks.len());
    let mut response_iter = responses.into_iter();
    for chunk in &chunks {
        if chunk.skipped {
            executions.push(ChunkExecution {
                result: keep_original_chunk(chunk),
                warnings: Vec::new(),
                error: None,
            });
            continue;
        }
        let step = response_iter
            .next()
            .expect("one response per refinable chunk")
            .map_err(|e| StepFailure::Provider(e.to_string()))
            .and_then(|raw| parse_provider_output(&raw, Stage::Chunk))
            .and_then(|(program, warnings)| {
                apply_chunk_program(&chunk.lines, &program, &config.policy)
                    .map(|result| (result, warnings))
                    .map_err(|e| StepFailure::Parse(e.to_string()))
            });
        match step {
            Ok((result, warnings)) => executions.push(ChunkExecution {
                result,
                warnings,
                error: None,
            }),
            Err(failure) => match config.on_error {
                ErrorPolicy::Keep => executions.push(ChunkExecution {
                    result: keep_original_chunk(chunk),
                    warnings: Vec::new(),
                    error: Some(failure.message()),
                }),
                ErrorPolicy::Drop => executions.push(ChunkExecution {
                    result: RefinedResult {
                        kept: false,
                        lines: Vec::new(),
                        ops_applied: 0,
                        lines_removed: chunk.lines.len(),
                        replacements_made: 0,
                        policy_action: PolicyAction::None,
                    },
                    warnings: Vec::new(),
                    error: Some(failure.message()),
                }),
                ErrorPolicy::Fail => {
                    return Err(PipelineError::RecordFailed {
                        id: record.id.clone(),
                        message: failure.message(),
                    });
                }
            },
        }
    }

    let mut lines_removed = 0u64;
    let mut replacements_made = 0u64;
    let mut policy_action = PolicyAction::None;
    let mut warnings = Vec::new();
    let mut error: Option<String> = None;
    let mut error_count = 0usize;
    for execution in &executions {
        lines_removed += execution.result.lines_removed as u64;
        replacements_made += execution.result.replacements_made as u64;
        policy_action = policy_action.max(execution.result.policy_action);
        warnings.extend(execution.warnings.iter().cloned());
        if let Some(message) = &execution.error {
            error_count += 1;
            if error.is_none() {
                error = Some(message.clone());
            }
        }
    }
    if error_count > 1 {
        error = error.map(|e| format!("{e} (+{} more chunk errors)", error_count - 1));
    }

    let pairs: Vec<(Chunk, RefinedResult)> = chunks
        .into_iter()
        .zip(executions.into_iter().map(|e| e.result))
        .collect();
    let lines = reassemble(&pairs).expect("chunk indices are contiguous by construction");
    let kept = !lines.is_empty();
    let output = kept.then(|| {
        let mut text = lines.join("\n");
        if doc.had_trailing_newline {
            text.push('\n');
        }
        CorpusRecord {
            id: record.id.clone(),
            text,
            meta: record.meta.clone(),
        }
    });

    // Canonical program for the audit: the per-chunk programs are not
    // concatenable, so record the reassembly summary instead of a
    // single program when more than one chunk took part.
    let audit = AuditRecord {
        id: record.id.clone(),
        stage: Stage::Chunk,
        kept,
        program_canonical: None,
        lines_removed,
        replacements_made,
        policy_action,
        bytes_before: record.text.len() as u64,
        bytes_after: output.as_ref().map_or(0, |r| r.text.len() as u64),
        error,
        warnings,
    };
    Ok((output, audit))
}

/// Run the document stage over records, in input order.
pub fn run_doc_stage(
    records: &[CorpusRecord],
    provider: &dyn ProgramProvider,
    config: &PipelineConfig,
) -> Result<StageOutcome, PipelineError> {
    run_stage(records, provider, config, Stage::Doc)
}

/// Run the chunk stage over records, in input order.
pub fn run_chunk_stage(
    records: &[CorpusRecord],
    provider: &dyn ProgramProvider,
    config: &PipelineConfig,
) -> Result<StageOutcome, PipelineError> {
    run_stage(records, provider, config, Stage::Chunk)
}

fn run_stage(
    records: &[CorpusRecord],
    provider: &dyn ProgramProvider,
    config: &PipelineConfig,
    stage: Stage,
) -> Result<StageOutcome, PipelineError> {
    config.validate()?;
    let mut outcome = StageOutcome {
        records: Vec::with_capacity(records.len()),
        audit: Vec::with_capacity(records.len()),
        stats: StageStats::new(stage),
    };
    for record in records {
        let (output, audit) = match stage {
            Stage::Doc => refine_doc_record(record, provider, config)?,
            Stage::Chunk => refine_chunk_record(record, provider, config)?,
        };
        outcome.stats.observe(record, output.as_ref(), &audit);
        if let Some(out) = output {
            outcome.records.push(out);
        }
        outcome.audit.push(audit);
    }
    Ok(outcome)
}

/// Output records, audit records, and per-stage statistics of a run.
pub type RunOutput = (Vec<CorpusRecord>, Vec<AuditRecord>, Vec<StageStats>);

/// Run the configured stage selection; in `both` mode the chunk stage
/// consumes the doc stage's survivors.
pub fn run_stages(
    records: &[CorpusRecord],
    provider: &dyn ProgramProvider,
    config: &PipelineConfig,
) -> Result<RunOutput, PipelineError> {
    let mut current: Vec<CorpusRecord> = records.to_vec();
    let mut audits = Vec::new();
    let mut stats = Vec::new();
    if config.stage.runs_doc() {
        let outcome = run_doc_stage(&current, provider, config)?;
        current = outcome.records;
        audits.extend(outcome.audit);
        stats.push(outcome.stats);
    }
    if config.stage.runs_chunk() {
        let outcome = run_chunk_stage(&current, provider, config)?;
        current = outcome.records;
        audits.extend(outcome.audit);
        stats.push(outcome.stats);
    }
    Ok((current, audits, stats))
}

/// Stable 64-bit hash used for shard placement: independent of input
/// ordering, process, and platform.
pub fn stable_hash64(value: &str) -> u64 {
    let digest = Sha256::digest(value.as_bytes());
    u64::from_be_bytes(digest[..8].try_into().unwrap())
}

fn partition_by_id(records: Vec<CorpusRecord>, shard_count: usize) -> Vec<Vec<CorpusRecord>> {
    let mut shards: Vec<Vec<CorpusRecord>> = (0..shard_count).map(|_| Vec::new()).collect();
    for record in records {
        let shard = (stable_hash64(&record.id) % shard_count as u64) as usize;
        shards[shard].push(record);
    }
    shards
}

/// Summary of a sharded run.
#[derive(Debug)]
pub struct RunSummary {
    pub shard_count: usize,
    pub output_files: Vec<PathBuf>,
    pub audit_files: Vec<PathBuf>,
    /// (shard index, error message) for shards that failed; completed
    /// shards stay intact on disk.
    pub failed_shards: Vec<(usize, String)>,
    /// Per-stage statistics merged across successful shards.
    pub stats: Vec<StageStats>,
}

fn shard_file(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("part-{index:05}.jsonl"))
}

/// Partition the corpus by stable id hash, process shards on a bounded
/// worker pool, and write per-shard outputs. Statistics merge in shard
/// order, so reruns produce byte-identical files.
pub fn shard_and_run(
    corpus_path: &Path,
    output_dir: &Path,
    provider: Arc<dyn ProgramProvider>,
    config: &PipelineConfig,
) -> Result<RunSummary, PipelineError> {
    config.validate()?;
    let records: Vec<CorpusRecord> = read_jsonl(corpus_path)?;
    {
        let mut seen = HashSet::new();
        for r in &records {
            if !seen.insert(r.id.as_str()) {
                log::warn!("duplicate record id `{}`; audits will repeat this id", r.id);
            }
        }
    }

    let mkdir = |dir: &Path| {
        fs::create_dir_all(dir).map_err(|source| PipelineError::Io {
            path: dir.to_path_buf(),
            source,
        })
    };
    mkdir(output_dir)?;
    if let Some(dir) = &config.audit_out {
        mkdir(dir)?;
    }

    type ShardResult = Result<(PathBuf, Option<PathBuf>, Vec<StageStats>), String>;
    let shards = partition_by_id(records, config.shard_count);
    let results: Vec<(usize, ShardResult)> =
        shards
            .into_par_iter()
            .enumerate()
            .map(|(index, shard)| {
                let run = || {
                    let (outputs, audits, stats) = run_stages(&shard, &provider, config)?;
                    let output_path = shard_file(output_dir, index);
                    write_jsonl(&output_path, &outputs)?;
                    let audit_path = match &config.audit_out {
                        Some(dir) => {
                            let path = shard_file(dir, index);
                            write_jsonl(&path, &audits)?;
                            Some(path)
                        }
                        None => None,
                    };
                    Ok::<_, PipelineError>((output_path, audit_path, stats))
                };
                (index, run().map_err(|e| e.to_string()))
            })
            .collect();

    let mut summary = RunSummary {
        shard_count: config.shard_count,
        output_files: Vec::new(),
        audit_files: Vec::new(),
        failed_shards: Vec::new(),
        stats: Vec::new(),
    };
    for (index, result) in results {
        match result {
            Ok((output_path, audit_path, stats)) => {
                summary.output_files.push(output_path);
                summary.audit_files.extend(audit_path);
                if summary.stats.is_empty() {
                    summary.stats = stats;
                } else {
                    for (merged, stage_stats) in summary.stats.iter_mut().zip(&stats) {
                        merged.merge(stage_stats);
                    }
                }
            }
            Err(message) => summary.failed_shards.push((index, message)),
        }
    }

    if let Some(dir) = &config.stats_out {
        write_stats(dir, &summary.stats).map_err(|source| PipelineError::Io {
            path: dir.clone(),
            source,
        })?;
    }
    Ok(summary)
}

/// Read every shard output and merge, ordering records by id.
pub fn merge_shard_outputs(files: &[PathBuf]) -> Result<Vec<CorpusRecord>, PipelineError> {
    let mut merged = Vec::new();
    for file in files {
        merged.extend(read_jsonl::<CorpusRecord>(file)?);
    }
    merged.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(merged)
}

/// Write merged statistics: a `summary.csv` of key/value rows plus
/// before/after token-length histograms per stage.
pub fn write_stats(dir: &Path, stats: &[StageStats]) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut summary = String::from("key,value\n");
    for stage_stats in stats {
        let prefix = stage_stats.stage.to_string();
        summary.push_str(&format!("{prefix}_docs_in,{}\n", stage_stats.docs_in));
        summary.push_str(&format!("{prefix}_docs_kept,{}\n", stage_stats.docs_kept));
        summary.push_str(&format!("{prefix}_docs_errored,{}\n", stage_stats.docs_errored));
        summary.push_str(&format!("{prefix}_tokens_before,{}\n", stage_stats.tokens_before));
        summary.push_str(&format!("{prefix}_tokens_after,{}\n", stage_stats.tokens_after));
        summary.push_str(&format!("{prefix}_bytes_before,{}\n", stage_stats.bytes_before));
        summary.push_str(&format!("{prefix}_bytes_after,{}\n", stage_stats.bytes_after));
        if let Some(ratio) = stage_stats.retention() {
            summary.push_str(&format!("{prefix}_retention_ratio,{ratio}\n"));
        }
        if let Some(mean) = stage_stats.hist_before.mean_tokens() {
            summary.push_str(&format!("{prefix}_mean_tokens_before,{mean}\n"));
        }
        if let Some(mean) = stage_stats.hist_after.mean_tokens() {
            summary.push_str(&format!("{prefix}_mean_tokens_after,{mean}\n"));
        }
        for (name, hist) in [
            ("before", &stage_stats.hist_before),
            ("after", &stage_stats.hist_after),
        ] {
            let file = fs::File::create(dir.join(format!("{prefix}_histogram_{name}.csv")))?;
            let mut writer = std::io::BufWriter::new(file);
            write_histogram_csv(hist, &mut writer)?;
            std::io::Write::flush(&mut writer)?;
        }
    }
    if let (Some(first), Some(last)) = (stats.first(), stats.last()) {
        if first.tokens_before > 0 {
            let total = last.tokens_after as f64 / first.tokens_before as f64;
            summary.push_str(&format!("total_retention_ratio,{total}\n"));
        }
    }
    fs::write(dir.join("summary.csv"), summary)
}
