use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::time::Duration;

use super::{estimate_tokens, extract_code, render_prompt, Backend, BackendError, GenerationRequest, GenerationResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpConfig {
    /// e.g. `https://api.openai.com/v1`; `/chat/completions` is appended.
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    pub api_key_env: String,
    /// Whether the endpoint honours `n`; otherwise `k` single calls are made.
    pub supports_n: bool,
    pub max_retries: u32,
    pub backoff: Duration,
    pub request_timeout: Duration,
}

impl HttpConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        HttpConfig {
            base_url: base_url.into(),
            model: model.into(),
            api_key_env: "APOLLO_API_KEY".into(),
            supports_n: true,
            max_retries: 3,
            backoff: Duration::from_secs(2),
            request_timeout: Duration::from_secs(600),
        }
    }
}

/// Chat-completion client.
pub struct HttpBackend {
    config: HttpConfig,
    client: reqwest::blocking::Client,
    token: Option<String>,
}

struct Reply {
    texts: Vec<String>,
    usage: Option<u64>,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.request_timeout)
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let token = std::env::var(&config.api_key_env).ok().filter(|t| !t.is_empty());
        Ok(HttpBackend { config, client, token })
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn call_once(&self, prompt: &str, n: usize, request: &GenerationRequest) -> Result<Reply, BackendError> {
        let mut body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": request.decoding.temperature,
            "max_tokens": request.decoding.max_tokens,
        });
        if n > 1 {
            body["n"] = json!(n);
        }
        let mut rb = self.client.post(self.url()).json(&body);
        if let Some(t) = &self.token {
            rb = rb.bearer_auth(t);
        }
        let resp = rb.send().map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status();
        if status.as_u16() == 429 {
            let retry_after = resp
                .headers()
                .get(reqwest::header::RETRY_AFTER)
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.trim().parse::<u64>().ok())
                .map(Duration::from_secs);
            return Err(BackendError::RateLimited { retry_after });
        }
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(BackendError::Transport(format!("HTTP {status}: {}", text.chars().take(200).collect::<String>())));
        }
        let v: Value = resp.json().map_err(|e| BackendError::Transport(e.to_string()))?;
        let texts: Vec<String> = v["choices"]
            .as_array()
            .map(|cs| cs.iter().filter_map(|c| c["message"]["content"].as_str().map(str::to_string)).collect())
            .unwrap_or_default();
        let usage = v["usage"]["completion_tokens"].as_u64();
        Ok(Reply { texts, usage })
    }

    /// One logical call with retries on transport errors and rate limits.
    fn call(&self, prompt: &str, n: usize, request: &GenerationRequest) -> Result<Reply, BackendError> {
        let mut attempt = 0;
        loop {
            match self.call_once(prompt, n, request) {
                Ok(r) => return Ok(r),
                Err(e @ (BackendError::Transport(_) | BackendError::RateLimited { .. })) => {
                    if attempt >= self.config.max_retries {
                        return Err(e);
                    }
                    let wait = match e {
                        BackendError::RateLimited { retry_after: Some(d) } => d,
                        _ => self.config.backoff * 2u32.pow(attempt),
                    };
                    tracing::warn!(attempt, error = %e, "retrying completion request");
                    std::thread::sleep(wait);
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

impl Backend for HttpBackend {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult, BackendError> {
        request.validate()?;
        let prompt = render_prompt(request);
        let replies = if self.config.supports_n {
            vec![self.call(&prompt, request.k, request)?]
        } else {
            (0..request.k).map(|_| self.call(&prompt, 1, request)).collect::<Result<Vec<_>, _>>()?
        };
        let mut candidates = Vec::new();
        let mut tokens = 0;
        let mut estimated = false;
        for r in replies {
            match r.usage {
                Some(u) => tokens += u,
                None => {
                    estimated = true;
                    tokens += r.texts.iter().map(|t| estimate_tokens(t)).sum::<u64>();
                }
            }
            candidates.extend(r.texts.iter().filter(|t| !t.trim().is_empty()).map(|t| extract_code(t)));
        }
        candidates.truncate(request.k);
        if candidates.is_empty() {
            return Err(BackendError::EmptyCompletion);
        }
        Ok(GenerationResult { candidates, tokens_generated: tokens, model_id: self.config.model.clone(), estimated })
    }

    fn model_id(&self) -> &str {
        &self.config.model
    }
}
