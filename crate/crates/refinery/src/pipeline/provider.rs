//! Program providers: the external boundary that turns rendered document
//! text into program text. Implementations cover pre-generated sidecar
//! files, per-batch subprocesses, and HTTP text-generation endpoints,
//! plus a recorded-response cache for deterministic replay.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::{Mutex, RwLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::records::{RecordError, SidecarRecord};
use crate::program_dsl::Stage;

/// Environment variable holding the bearer token for HTTP providers.
/// The value is attached to requests and never logged.
pub const PROVIDER_TOKEN_ENV: &str = "REFINERY_PROVIDER_TOKEN";

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("no program recorded for {0}")]
    Missing(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("provider subprocess failed: {0}")]
    Subprocess(String),
    #[error("malformed provider response: {0}")]
    BadResponse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One generation request: the stage, the numbered text the provider
/// sees, and the identity of the record and chunk it belongs to.
#[derive(Debug, Clone, Copy)]
pub struct ProgramRequest<'a> {
    pub stage: Stage,
    pub record_id: &'a str,
    pub chunk_index: Option<usize>,
    pub rendered: &'a str,
}

impl ProgramRequest<'_> {
    fn describe(&self) -> String {
        match self.chunk_index {
            Some(i) => format!("id={} stage={} chunk={i}", self.record_id, self.stage),
            None => format!("id={} stage={}", self.record_id, self.stage),
        }
    }
}

/// Source of refinement programs. Implementations must be safe for
/// concurrent use; pipeline workers call them from multiple threads.
pub trait ProgramProvider: Send + Sync {
    fn generate(&self, request: &ProgramRequest<'_>) -> Result<String, ProviderError>;

    /// Batched generation; the default just loops. The command provider
    /// overrides this to exchange a whole batch with one subprocess.
    fn generate_batch(
        &self,
        requests: &[ProgramRequest<'_>],
    ) -> Vec<Result<String, ProviderError>> {
        requests.iter().map(|r| self.generate(r)).collect()
    }
}

impl<P: ProgramProvider + ?Sized> ProgramProvider for std::sync::Arc<P> {
    fn generate(&self, request: &ProgramRequest<'_>) -> Result<String, ProviderError> {
        (**self).generate(request)
    }

    fn generate_batch(
        &self,
        requests: &[ProgramRequest<'_>],
    ) -> Vec<Result<String, ProviderError>> {
        (**self).generate_batch(requests)
    }
}

/// Wrap a closure as a provider; handy for tests and embedding.
pub struct FnProvider<F>(pub F);

impl<F> ProgramProvider for FnProvider<F>
where
    F: Fn(&ProgramRequest<'_>) -> Result<String, ProviderError> + Send + Sync,
{
    fn generate(&self, request: &ProgramRequest<'_>) -> Result<String, ProviderError> {
        (self.0)(request)
    }
}

// --- sidecar ------------------------------------------------------------

type SidecarKey = (String, Stage, Option<usize>);

/// Pre-generated programs loaded from a sidecar file, keyed by
/// (id, stage, chunk_index).
pub struct SidecarProvider {
    programs: HashMap<SidecarKey, String>,
}

impl SidecarProvider {
    pub fn from_records(records: impl IntoIterator<Item = SidecarRecord>) -> Self {
        let mut programs = HashMap::new();
        for r in records {
            let key = (r.id, r.stage, r.chunk_index);
            if programs.insert(key.clone(), r.program).is_some() {
                log::warn!("duplicate sidecar entry for {key:?}; last one wins");
            }
        }
        SidecarProvider { programs }
    }

    pub fn from_path(path: &Path) -> Result<Self, RecordError> {
        let records: Vec<SidecarRecord> = super::records::read_jsonl(path)?;
        Ok(Self::from_records(records))
    }

    pub fn len(&self) -> usize {
        self.programs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.programs.is_empty()
    }
}

impl ProgramProvider for SidecarProvider {
    fn generate(&self, request: &ProgramRequest<'_>) -> Result<String, ProviderError> {
        let key = (
            request.record_id.to_string(),
            request.stage,
            request.chunk_index,
        );
        self.programs
            .get(&key)
            .cloned()
            .ok_or_else(|| ProviderError::Missing(request.describe()))
    }
}

// --- subprocess ----------------------------------------------------------

#[derive(Serialize)]
struct CommandRequestLine<'a> {
    id: &'a str,
    stage: Stage,
    #[serde(skip_serializing_if = "Option::is_none")]
    chunk_index: Option<usize>,
    text: &'a str,
}

#[derive(Deserialize)]
struct CommandResponseLine {
    #[serde(default)]
    id: Option<String>,
    program: String,
}

/// Spawns a subprocess per batch. Requests go to stdin as JSONL
/// `{id, stage, chunk_index?, text}`; the command answers with one JSONL
/// `{id?, program}` line per request, in order.
pub struct CommandProvider {
    command: String,
}

impl CommandProvider {
    pub fn new(command: impl Into<String>) -> Self {
        CommandProvider {
            command: command.into(),
        }
    }

    fn run_batch(
        &self,
        requests: &[ProgramRequest<'_>],
    ) -> Result<Vec<String>, ProviderError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| ProviderError::Subprocess(format!("spawn failed: {e}")))?;

        {
            let mut stdin = child.stdin.take().expect("stdin is piped");
            for request in requests {
                let line = serde_json::to_string(&CommandRequestLine {
                    id: request.record_id,
                    stage: request.stage,
                    chunk_index: request.chunk_index,
                    text: request.rendered,
                })
                .expect("request line serializes");
                stdin.write_all(line.as_bytes())?;
                stdin.write_all(b"\n")?;
            }
        } // dropping stdin closes the pipe

        let output = child
            .wait_with_output()
            .map_err(|e| ProviderError::Subprocess(format!("wait failed: {e}")))?;
        if !output.status.success() {
            let stderr = String::from_utf8_lossy(&output.stderr);
            return Err(ProviderError::Subprocess(format!(
                "exit status {}: {}",
                output.status,
                stderr.trim()
            )));
        }

        let stdout = String::from_utf8_lossy(&output.stdout);
        let mut programs = Vec::with_capacity(requests.len());
        for (line, request) in stdout.lines().filter(|l| !l.trim().is_empty()).zip(requests) {
            let response: CommandResponseLine = serde_json::from_str(line)
                .map_err(|e| ProviderError::BadResponse(format!("{e} in {line:?}")))?;
            if let Some(id) = &response.id {
                if id != request.record_id {
                    return Err(ProviderError::BadResponse(format!(
                        "response id {id} does not match request {}",
                        request.record_id
                    )));
                }
            }
            programs.push(response.program);
        }
        if programs.len() != requests.len() {
            return Err(ProviderError::BadResponse(format!(
                "{} responses for {} requests",
                programs.len(),
                requests.len()
            )));
        }
        Ok(programs)
    }
}

impl ProgramProvider for CommandProvider {
    fn generate(&self, request: &ProgramRequest<'_>) -> Result<String, ProviderError> {
        let mut batch = self.run_batch(std::slice::from_ref(request))?;
        Ok(batch.remove(0))
    }

    fn generate_batch(
        &self,
        requests: &[ProgramRequest<'_>],
    ) -> Vec<Result<String, ProviderError>> {
        match self.run_batch(requests) {
            Ok(programs) => programs.into_iter().map(Ok).collect(),
            Err(err) => {
                let message = err.to_string();
                requests
                    .iter()
                    .map(|_| Err(ProviderError::Subprocess(message.clone())))
                    .collect()
            }
        }
    }
}

// --- http ----------------------------------------------------------------

/// POSTs the rendered text to a text-generation endpoint and reads the
/// completion. Accepts either a raw text body or a JSON object carrying
/// the program under `program`, `text`, or `completion`.
pub struct HttpProvider {
    endpoint: String,
    client: reqwest::blocking::Client,
    token: Option<String>,
    max_retries: u32,
    backoff_base: Duration,
}

impl HttpProvider {
    pub fn new(endpoint: impl Into<String>, max_retries: u32) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        Ok(HttpProvider {
            endpoint: endpoint.into(),
            client,
            token: std::env::var(PROVIDER_TOKEN_ENV).ok(),
            max_retries,
            backoff_base: Duration::from_millis(100),
        })
    }

    #[cfg(test)]
    fn with_backoff(mut self, base: Duration) -> Self {
        self.backoff_base = base;
        self
    }

    fn post_once(&self, request: &ProgramRequest<'_>) -> Result<String, ProviderError> {
        let body = serde_json::json!({
            "id": request.record_id,
            "stage": request.stage,
            "chunk_index": request.chunk_index,
            "prompt": request.rendered,
        });
        let mut builder = self.client.post(&self.endpoint).json(&body);
        if let Some(token) = &self.token {
            builder = builder.bearer_auth(token);
        }
        let response = builder
            .send()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let status = response.status();
        let text = response
            .text()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(ProviderError::Transport(format!(
                "endpoint answered {status}"
            )));
        }
        if let Ok(value) = serde_json::from_str::<serde_json::Value>(&text) {
            for key in ["program", "text", "completion"] {
                if let Some(s) = value.get(key).and_then(|v| v.as_str()) {
                    return Ok(s.to_string());
                }
            }
            if let Some(s) = value.as_str() {
                return Ok(s.to_string());
            }
            return Err(ProviderError::BadResponse(
                "JSON response carries no program/text/completion field".to_string(),
            ));
        }
        Ok(text)
    }
}

impl ProgramProvider for HttpProvider {
    fn generate(&self, request: &ProgramRequest<'_>) -> Result<String, ProviderError> {
        let mut last_err = None;
        for attempt in 0..=self.max_retries {
            if attempt > 0 {
                std::thread::sleep(self.backoff_base * 2u32.pow(attempt - 1));
            }
            match self.post_once(request) {
                Ok(program) => return Ok(program),
                Err(err @ ProviderError::Transport(_)) => last_err = Some(err),
                Err(err) => return Err(err),
            }
        }
        Err(last_err.unwrap_or_else(|| ProviderError::Transport("no attempts made".into())))
    }
}

// --- recorded-response cache ----------------------------------------------

#[derive(Serialize, Deserialize)]
struct CacheLine {
    key: String,
    program: String,
}

/// Wraps any provider with a persistent response cache keyed by the full
/// request (stage, id, chunk index, rendered text). Replaying a run with
/// a warm cache never consults the inner provider, which makes the whole
/// pipeline a pure function of corpus and config.
pub struct CachingProvider<P> {
    inner: P,
    entries: RwLock<HashMap<String, String>>,
    writer: Mutex<BufWriter<File>>,
    path: PathBuf,
}

impl<P: ProgramProvider> CachingProvider<P> {
    pub fn open(path: &Path, inner: P) -> Result<Self, ProviderError> {
        let mut entries = HashMap::new();
        if path.exists() {
            let lines: Vec<CacheLine> =
                super::records::read_jsonl(path).map_err(|e| match e {
                    RecordError::Io { source, .. } => ProviderError::Io(source),
                    other => ProviderError::BadResponse(other.to_string()),
                })?;
            for line in lines {
                entries.insert(line.key, line.program);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(CachingProvider {
            inner,
            entries: RwLock::new(entries),
            writer: Mutex::new(BufWriter::new(file)),
            path: path.to_path_buf(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn cached_responses(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    fn key(request: &ProgramRequest<'_>) -> String {
        let mut hasher = Sha256::new();
        hasher.update(request.stage.to_string().as_bytes());
        hasher.update([0x1f]);
        hasher.update(request.record_id.as_bytes());
        hasher.update([0x1f]);
        hasher.update(
            request
                .chunk_index
                .map(|i| i.to_string())
                .unwrap_or_default()
                .as_bytes(),
        );
        hasher.update([0x1f]);
        hasher.update(request.rendered.as_bytes());
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    fn store(&self, key: String, program: &str) -> Result<(), ProviderError> {
        let mut entries = self.entries.write().unwrap();
        if entries.contains_key(&key) {
            return Ok(());
        }
        let mut writer = self.writer.lock().unwrap();
        let line = serde_json::to_string(&CacheLine {
            key: key.clone(),
            program: program.to_string(),
        })
        .expect("cache line serializes");
        writer.write_all(line.as_bytes())?;
        writer.write_all(b"\n")?;
        writer.flush()?;
        entries.insert(key, program.to_string());
        Ok(())
    }
}

impl<P: ProgramProvider> ProgramProvider for CachingProvider<P> {
    fn generate(&self, request: &ProgramRequest<'_>) -> Result<String, ProviderError> {
        let key = Self::key(request);
        if let Some(hit) = self.entries.read().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let program = self.inner.generate(request)?;
        self.store(key, &program)?;
        Ok(program)
    }

    fn generate_batch(
        &self,
        requests: &[ProgramRequest<'_>],
    ) -> Vec<Result<String, ProviderError>> {
        let keys: Vec<String> = requests.iter().map(Self::key).collect();
        let mut results: Vec<Option<Result<String, ProviderError>>> =
            (0..requests.len()).map(|_| None).collect();
        let mut miss_indices = Vec::new();
        {
            let entries = self.entries.read().unwrap();
            for (i, key) in keys.iter().enumerate() {
                match entries.get(key) {
                    Some(hit) => results[i] = Some(Ok(hit.clone())),
                    None => miss_indices.push(i),
                }
            }
        }
        if !miss_indices.is_empty() {
            let misses: Vec<ProgramRequest<'_>> =
                miss_indices.iter().map(|i| requests[*i]).collect();
            let generated = self.inner.generate_batch(&misses);
            for (idx, outcome) in miss_indices.into_iter().zip(generated) {
                let outcome = outcome.and_then(|program| {
                    self.store(keys[idx].clone(), &program)?;
                    Ok(program)
                });
                results[idx] = Some(outcome);
            }
        }
        results.into_iter().map(|r| r.expect("all slots filled")).collect()
    }
}
