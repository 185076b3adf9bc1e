use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::HashMap;
use std::path::Path;
use std::time::Duration;

use super::{classify, CompileResult, Compiler, FixtureError, SessionError};
use crate::proof::normalize_trailing_ws;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub request: Value,
    pub response: Value,
}

/// Recorded request/response pairs. On disk either a bare array of
/// entries or an object that also names the REPL it was captured from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    #[serde(default)]
    pub repl_version: Option<String>,
    pub entries: Vec<TranscriptEntry>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OnDisk {
    Bare(Vec<TranscriptEntry>),
    Full(Transcript),
}

impl Transcript {
    pub fn load(path: &Path) -> Result<Transcript, FixtureError> {
        let err = |reason: String| FixtureError::Load { path: path.display().to_string(), reason };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        Self::from_json(&text).map_err(|e| err(e.to_string()))
    }

    pub fn from_json(text: &str) -> serde_json::Result<Transcript> {
        Ok(match serde_json::from_str(text)? {
            OnDisk::Bare(entries) => Transcript { repl_version: None, entries },
            OnDisk::Full(t) => t,
        })
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).expect("transcript serializes");
        std::fs::write(path, text + "\n")
    }

    pub fn push(&mut self, code: &str, result: &CompileResult) {
        self.entries.push(TranscriptEntry { request: json!({"cmd": code}), response: result.to_protocol() });
    }
}

fn key(code: &str) -> String {
    normalize_trailing_ws(code).trim_end().to_string()
}

/// Replays a transcript. Lookup is by code text with trailing whitespace
/// trimmed, so repeated checks of the same code give the same result.
pub struct MockSession {
    table: HashMap<String, Value>,
    strict: bool,
    calls: usize,
}

impl MockSession {
    pub fn new(transcript: &Transcript, strict: bool) -> Self {
        let mut table = HashMap::new();
        for e in &transcript.entries {
            if let Some(cmd) = e.request.get("cmd").and_then(Value::as_str) {
                table.entry(key(cmd)).or_insert_with(|| e.response.clone());
            }
        }
        MockSession { table, strict, calls: 0 }
    }

    pub fn load(path: &Path, strict: bool) -> Result<Self, FixtureError> {
        Ok(Self::new(&Transcript::load(path)?, strict))
    }

    pub fn calls(&self) -> usize {
        self.calls
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl Compiler for MockSession {
    fn check(&mut self, code: &str, _timeout: Duration) -> Result<CompileResult, SessionError> {
        self.calls += 1;
        match self.table.get(&key(code)) {
            Some(raw) => Ok(classify(raw).unwrap_or_else(|e| CompileResult::failure(e.to_string()))),
            None if self.strict => Err(FixtureError::UnknownRequest(code.to_string()).into()),
            None => Ok(CompileResult::failure("mock REPL: no transcript entry for this code")),
        }
    }
}

/// Passes checks through to `inner` and records every exchange.
pub struct RecordingSession<C> {
    inner: C,
    pub transcript: Transcript,
}

impl<C: Compiler> RecordingSession<C> {
    pub fn new(inner: C, repl_version: Option<String>) -> Self {
        RecordingSession { inner, transcript: Transcript { repl_version, entries: Vec::new() } }
    }

    pub fn into_transcript(self) -> Transcript {
        self.transcript
    }
}

impl<C: Compiler> Compiler for RecordingSession<C> {
    fn check(&mut self, code: &str, timeout: Duration) -> Result<CompileResult, SessionError> {
        let result = self.inner.check(code, timeout)?;
        let k = key(code);
        let seen = self
            .transcript
            .entries
            .iter()
            .any(|e| e.request.get("cmd").and_then(Value::as_str).map(key).as_deref() == Some(k.as_str()));
        if !seen {
            self.transcript.push(code, &result);
        }
        Ok(result)
    }
}
