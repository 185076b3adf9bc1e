//! Candidate proof generation: a uniform interface over chat-completion
//! endpoints and a fixture-backed mock.

mod http;
mod mock;

use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;
use thiserror::Error;

use crate::proof::TheoremStatement;
use crate::repl::Diagnostic;

pub use http::{HttpBackend, HttpConfig};
pub use mock::MockBackend;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationMode {
    Initial,
    SubLemma,
    FeedbackRepair,
}

/// A failed proof and what the compiler said about it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriorAttempt {
    pub proof: String,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decoding {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for Decoding {
    fn default() -> Self {
        Decoding { temperature: 1.0, max_tokens: 8192 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub statement: TheoremStatement,
    pub mode: GenerationMode,
    pub k: usize,
    pub prior_attempt: Option<PriorAttempt>,
    pub decoding: Decoding,
}

impl GenerationRequest {
    pub fn new(statement: TheoremStatement, mode: GenerationMode, k: usize) -> Self {
        GenerationRequest { statement, mode, k, prior_attempt: None, decoding: Decoding::default() }
    }

    pub fn feedback(statement: TheoremStatement, k: usize, prior: PriorAttempt) -> Self {
        GenerationRequest {
            statement,
            mode: GenerationMode::FeedbackRepair,
            k,
            prior_attempt: Some(prior),
            decoding: Decoding::default(),
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.k == 0 {
            return Err(BackendError::InvalidRequest("k must be at least 1".into()));
        }
        if self.mode == GenerationMode::FeedbackRepair && self.prior_attempt.is_none() {
            return Err(BackendError::InvalidRequest("feedback repair needs the prior attempt".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationResult {
    /// Extracted proof texts, at most `k`.
    pub candidates: Vec<String>,
    pub tokens_generated: u64,
    pub model_id: String,
    /// Token count is a whitespace estimate, not the endpoint's report.
    pub estimated: bool,
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("rate limited (retry after {retry_after:?})")]
    RateLimited { retry_after: Option<Duration> },
    #[error("backend returned no completion")]
    EmptyCompletion,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("no fixture for `{0}`")]
    MissingKey(String),
    #[error("bad fixture {path}: {reason}")]
    Fixture { path: String, reason: String },
}

pub trait Backend: Send + Sync {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult, BackendError>;
    fn model_id(&self) -> &str;
}

impl<B: Backend + ?Sized> Backend for std::sync::Arc<B> {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult, BackendError> {
        (**self).generate(request)
    }
    fn model_id(&self) -> &str {
        (**self).model_id()
    }
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult, BackendError> {
        (**self).generate(request)
    }
    fn model_id(&self) -> &str {
        (**self).model_id()
    }
}

/// Whitespace token estimate.
pub fn estimate_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

/// The Lean code of a completion: the last fenced block tagged `lean` or
/// `lean4`, else the last fenced block, else the whole text.
pub fn extract_code(raw: &str) -> String {
    let mut blocks: Vec<(String, String)> = Vec::new();
    let mut lines = raw.lines();
    while let Some(line) = lines.next() {
        let Some(tag) = line.trim_start().strip_prefix("```") else {
            continue;
        };
        let mut body = Vec::new();
        for l in lines.by_ref() {
            if l.trim_start().starts_with("```") {
                break;
            }
            body.push(l);
        }
        let mut text = body.join("\n");
        text.push('\n');
        blocks.push((tag.trim().to_lowercase(), text));
    }
    blocks
        .iter()
        .rev()
        .find(|(tag, _)| tag == "lean" || tag == "lean4")
        .or(blocks.last())
        .map(|(_, t)| t.clone())
        .unwrap_or_else(|| raw.to_string())
}

fn render_diagnostics(diagnostics: &[Diagnostic]) -> String {
    diagnostics
        .iter()
        .filter(|d| d.is_error())
        .map(|d| format!("line {}, column {}: {}", d.pos.line, d.pos.column, d.message))
        .collect::<Vec<_>>()
        .join("\n")
}

fn push_section(out: &mut String, text: &str) {
    let t = text.trim_matches('\n');
    if t.trim().is_empty() {
        return;
    }
    if !out.is_empty() {
        out.push_str("\n\n");
    }
    out.push_str(t);
}

/// The prompt sent for a request.
pub fn render_prompt(request: &GenerationRequest) -> String {
    let st = &request.statement;
    let mut problem = String::new();
    push_section(&mut problem, &st.header);
    push_section(&mut problem, st.informal_prefix.as_deref().unwrap_or(""));
    push_section(&mut problem, &st.statement_text);
    let mut out = String::new();
    match (&request.mode, &request.prior_attempt) {
        (GenerationMode::FeedbackRepair, Some(prior)) => {
            push_section(&mut out, "This is an incorrect proof:");
            push_section(&mut out, &prior.proof);
            push_section(&mut out, "Compilation errors are as follows:");
            push_section(&mut out, &render_diagnostics(&prior.diagnostics));
            push_section(&mut out, "Based on this feedback, produce a correct raw Lean code for the following problem:");
            push_section(&mut out, &problem);
        }
        _ => {
            push_section(&mut out, "Complete the following Lean 4 code:");
            push_section(&mut out, &format!("```lean4\n{problem}\n```"));
        }
    }
    out.push('\n');
    out
}

/// Run-wide sample and token counters, safe to share between threads.
#[derive(Debug, Default)]
pub struct UsageMeter {
    samples: AtomicU64,
    tokens: AtomicU64,
    calls: AtomicU64,
}

impl UsageMeter {
    pub fn record(&self, result: &GenerationResult) {
        self.samples.fetch_add(result.candidates.len() as u64, Ordering::SeqCst);
        self.tokens.fetch_add(result.tokens_generated, Ordering::SeqCst);
        self.calls.fetch_add(1, Ordering::SeqCst);
    }

    pub fn samples(&self) -> u64 {
        self.samples.load(Ordering::SeqCst)
    }

    pub fn tokens(&self) -> u64 {
        self.tokens.load(Ordering::SeqCst)
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

/// A backend that reports every successful call to a [`UsageMeter`].
pub struct Metered<B> {
    inner: B,
    pub meter: std::sync::Arc<UsageMeter>,
}

impl<B: Backend> Metered<B> {
    pub fn new(inner: B) -> Self {
        Metered { inner, meter: Default::default() }
    }
}

impl<B: Backend> Backend for Metered<B> {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult, BackendError> {
        let r = self.inner.generate(request)?;
        self.meter.record(&r);
        Ok(r)
    }
    fn model_id(&self) -> &str {
        self.inner.model_id()
    }
}
