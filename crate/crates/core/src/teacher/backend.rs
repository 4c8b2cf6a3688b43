//! Text-generation backends and the retrying `generate` call.

use std::io::Write;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::cache::prompt_key;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub max_new_tokens: u32,
    pub temperature: f64,
    #[serde(default)]
    pub stop_sequences: Vec<String>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self { max_new_tokens: 300, temperature: 1.0, stop_sequences: Vec::new(), seed: None }
    }
}

impl GenerationParams {
    pub fn validate(&self) -> Result<(), TeacherError> {
        if self.max_new_tokens == 0 {
            return Err(TeacherError::InvalidParams("max_new_tokens must be at least 1".into()));
        }
        if !(self.temperature >= 0.0) || !self.temperature.is_finite() {
            return Err(TeacherError::InvalidParams(format!("temperature {} must be >= 0", self.temperature)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Local,
    Http,
    /// Built-in deterministic teacher, for offline runs.
    Stub,
}

/// Where a teacher lives. Credentials are read from `auth_env_var` at call
/// time and never written into configs or manifests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub kind: BackendKind,
    pub model_id: String,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub auth_env_var: Option<String>,
    /// Program and arguments for `kind = "local"`. The program receives the
    /// HTTP request JSON on stdin and prints the completion to stdout.
    #[serde(default)]
    pub command: Vec<String>,
}

impl BackendDescriptor {
    pub fn http(model_id: impl Into<String>, endpoint: impl Into<String>) -> Self {
        Self {
            kind: BackendKind::Http,
            model_id: model_id.into(),
            endpoint: Some(endpoint.into()),
            auth_env_var: None,
            command: Vec::new(),
        }
    }

    pub fn local(model_id: impl Into<String>, command: Vec<String>) -> Self {
        Self { kind: BackendKind::Local, model_id: model_id.into(), endpoint: None, auth_env_var: None, command }
    }

    pub fn validate(&self) -> Result<(), TeacherError> {
        match (self.kind, &self.endpoint) {
            (BackendKind::Http, None) => Err(TeacherError::InvalidBackend("http backend requires an endpoint".into())),
            (BackendKind::Local, Some(_)) => {
                Err(TeacherError::InvalidBackend("local backend must not set an endpoint".into()))
            }
            (BackendKind::Local, None) if self.command.is_empty() => {
                Err(TeacherError::InvalidBackend("local backend requires a command".into()))
            }
            _ => Ok(()),
        }
    }

    /// Instantiates the backend this descriptor names.
    pub fn connect(&self) -> Result<Box<dyn TextGenerator>, TeacherError> {
        self.validate()?;
        Ok(match self.kind {
            BackendKind::Http => Box::new(HttpBackend::new(self.clone())),
            BackendKind::Local => Box::new(LocalProcessBackend::new(self.clone())),
            BackendKind::Stub => Box::new(super::stub::StubTeacher::new(self.model_id.clone())),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP status {0}")]
    Status(u16),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("malformed backend response: {0}")]
    Protocol(String),
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        match self {
            Self::Transport(_) => true,
            Self::Status(code) => *code == 429 || *code >= 500,
            Self::Auth(_) | Self::Protocol(_) => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TeacherError {
    #[error("backend {model_id} failed after {attempts} attempt(s): {last}")]
    Exhausted { model_id: String, attempts: u32, last: BackendError },
    #[error("backend {model_id} failed: {source}")]
    Fatal { model_id: String, source: BackendError },
    #[error("backend {model_id} returned an empty completion")]
    EmptyCompletion { model_id: String },
    #[error("invalid generation params: {0}")]
    InvalidParams(String),
    #[error("invalid backend: {0}")]
    InvalidBackend(String),
    #[error(transparent)]
    Template(#[from] super::template::TemplateError),
    #[error("cache I/O error: {0}")]
    Cache(String),
}

/// One attempt at a completion. Implementations must be callable from many
/// threads at once.
pub trait TextGenerator: Send + Sync {
    fn model_id(&self) -> &str;
    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<String, BackendError>;
}

impl<G: TextGenerator + ?Sized> TextGenerator for &G {
    fn model_id(&self) -> &str {
        (**self).model_id()
    }

    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<String, BackendError> {
        (**self).complete(prompt, params)
    }
}

impl<G: TextGenerator + ?Sized> TextGenerator for Box<G> {
    fn model_id(&self) -> &str {
        (**self).model_id()
    }

    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<String, BackendError> {
        (**self).complete(prompt, params)
    }
}

impl<G: TextGenerator + ?Sized> TextGenerator for std::sync::Arc<G> {
    fn model_id(&self) -> &str {
        (**self).model_id()
    }

    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<String, BackendError> {
        (**self).complete(prompt, params)
    }
}

/// Exponential backoff: attempt `k` (0-based retry index) waits `base * factor^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    #[serde(with = "millis")]
    pub base_delay: Duration,
    pub factor: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_retries: 5, base_delay: Duration::from_secs(1), factor: 2 }
    }
}

impl RetryPolicy {
    pub fn delay(&self, retry: u32) -> Duration {
        self.base_delay.saturating_mul(self.factor.saturating_pow(retry))
    }
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    /// Raw completion, untrimmed.
    pub text: String,
    pub prompt_hash: String,
    pub cached: bool,
    pub latency_ms: u64,
    pub backend: String,
    #[serde(default)]
    pub retries: u32,
    #[serde(default)]
    pub created_at: Option<chrono::DateTime<chrono::Utc>>,
}

/// Calls the backend, retrying transient failures with exponential backoff.
pub fn generate(
    backend: &dyn TextGenerator,
    prompt: &str,
    params: &GenerationParams,
    retry: &RetryPolicy,
) -> Result<GenerationResult, TeacherError> {
    params.validate()?;
    let model_id = backend.model_id().to_string();
    let started = Instant::now();
    let mut retries = 0;
    let text = loop {
        match backend.complete(prompt, params) {
            Ok(text) => break text,
            Err(err) if err.is_retryable() && retries < retry.max_retries => {
                let wait = retry.delay(retries);
                retries += 1;
                tracing::warn!(model = %model_id, retry = retries, ?wait, error = %err, "retrying generation");
                std::thread::sleep(wait);
            }
            Err(err) if err.is_retryable() => {
                return Err(TeacherError::Exhausted { model_id, attempts: retries + 1, last: err });
            }
            Err(err) => return Err(TeacherError::Fatal { model_id, source: err }),
        }
    };
    if text.trim().is_empty() {
        return Err(TeacherError::EmptyCompletion { model_id });
    }
    Ok(GenerationResult {
        text,
        prompt_hash: prompt_key(&model_id, prompt, params),
        cached: false,
        latency_ms: started.elapsed().as_millis() as u64,
        backend: model_id,
        retries,
        created_at: Some(chrono::Utc::now()),
    })
}

/// Wire request shared by the HTTP and local-process backends.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CompletionRequest {
    pub model: String,
    pub prompt: String,
    pub max_tokens: u32,
    pub temperature: f64,
    pub stop: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CompletionResponse {
    pub text: String,
}

impl CompletionRequest {
    pub fn new(model: &str, prompt: &str, params: &GenerationParams) -> Self {
        Self {
            model: model.to_string(),
            prompt: prompt.to_string(),
            max_tokens: params.max_new_tokens,
            temperature: params.temperature,
            stop: params.stop_sequences.clone(),
        }
    }
}

pub struct HttpBackend {
    descriptor: BackendDescriptor,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(descriptor: BackendDescriptor) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(300)))
            .build()
            .into();
        Self { descriptor, agent }
    }
}

impl TextGenerator for HttpBackend {
    fn model_id(&self) -> &str {
        &self.descriptor.model_id
    }

    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<String, BackendError> {
        let endpoint = self.descriptor.endpoint.as_deref().ok_or_else(|| BackendError::Transport("no endpoint".into()))?;
        let mut request = self.agent.post(endpoint);
        if let Some(var) = &self.descriptor.auth_env_var {
            let token = std::env::var(var).map_err(|_| BackendError::Auth(format!("environment variable {var} is not set")))?;
            request = request.header("Authorization", format!("Bearer {token}"));
        }
        let body = CompletionRequest::new(&self.descriptor.model_id, prompt, params);
        let mut response = request.send_json(&body).map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        match status {
            200..=299 => {
                let parsed: CompletionResponse =
                    response.body_mut().read_json().map_err(|e| BackendError::Protocol(e.to_string()))?;
                Ok(parsed.text)
            }
            401 | 403 => Err(BackendError::Auth(format!("HTTP {status}"))),
            _ => Err(BackendError::Status(status)),
        }
    }
}

pub struct LocalProcessBackend {
    descriptor: BackendDescriptor,
}

impl LocalProcessBackend {
    pub fn new(descriptor: BackendDescriptor) -> Self {
        Self { descriptor }
    }
}

impl TextGenerator for LocalProcessBackend {
    fn model_id(&self) -> &str {
        &self.descriptor.model_id
    }

    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<String, BackendError> {
        let (program, args) = self
            .descriptor
            .command
            .split_first()
            .ok_or_else(|| BackendError::Transport("empty command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| BackendError::Transport(format!("spawn {program}: {e}")))?;
        let request = serde_json::to_vec(&CompletionRequest::new(&self.descriptor.model_id, prompt, params))
            .map_err(|e| BackendError::Protocol(e.to_string()))?;
        child
            .stdin
            .take()
            .expect("stdin is piped")
            .write_all(&request)
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let output = child.wait_with_output().map_err(|e| BackendError::Transport(e.to_string()))?;
        if !output.status.success() {
            return Err(BackendError::Transport(format!(
                "{program} exited with {}: {}",
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            )));
        }
        String::from_utf8(output.stdout).map_err(|e| BackendError::Protocol(e.to_string()))
    }
}
