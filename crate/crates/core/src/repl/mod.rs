//! Client for the Lean REPL JSON protocol.
//!
//! [`ReplSession`] drives a REPL subprocess; [`MockSession`] replays a
//! recorded transcript through the same [`Compiler`] interface.

mod mock;
mod pool;
mod session;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use std::time::Duration;
use thiserror::Error;

pub use mock::{MockSession, RecordingSession, Transcript, TranscriptEntry};
pub use pool::{Lease, SessionPool};
pub use session::{ProcessTransport, ReplSession, Transport, TransportFault};

/// Warning text Lean attaches to any declaration that still uses `sorry`.
pub const SORRY_MARKER: &str = "declaration uses 'sorry'";

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(300);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
    Info,
}

/// 1-based line, 0-based column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Position {
    pub line: usize,
    pub column: usize,
}

impl Position {
    pub fn new(line: usize, column: usize) -> Self {
        Position { line, column }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub pos: Position,
    pub end_pos: Option<Position>,
    pub message: String,
}

impl Diagnostic {
    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }

    pub fn is_sorry_warning(&self) -> bool {
        self.severity == Severity::Warning && self.message.contains(SORRY_MARKER)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SorryInfo {
    pub pos: Position,
    pub end_pos: Option<Position>,
    /// Pretty-printed goal: hypotheses, then `⊢ target`.
    pub goal: String,
    pub proof_state_id: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CompileStatus {
    Pass,
    PassWithSorries,
    Fail,
    Timeout,
    ReplCrash,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompileResult {
    pub status: CompileStatus,
    pub diagnostics: Vec<Diagnostic>,
    pub sorries: Vec<SorryInfo>,
    pub env_id: Option<u64>,
    /// Seconds.
    pub wall_time: f64,
}

impl CompileResult {
    fn bare(status: CompileStatus) -> Self {
        CompileResult { status, diagnostics: Vec::new(), sorries: Vec::new(), env_id: None, wall_time: 0.0 }
    }

    pub fn timeout() -> Self {
        Self::bare(CompileStatus::Timeout)
    }

    pub fn crash() -> Self {
        Self::bare(CompileStatus::ReplCrash)
    }

    /// A failure carrying a single synthetic error.
    pub fn failure(message: impl Into<String>) -> Self {
        let mut r = Self::bare(CompileStatus::Fail);
        r.diagnostics.push(Diagnostic {
            severity: Severity::Error,
            pos: Position::new(1, 0),
            end_pos: None,
            message: message.into(),
        });
        r
    }

    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.is_error())
    }

    pub fn has_errors(&self) -> bool {
        self.errors().next().is_some()
    }

    /// Pass or PassWithSorries: the file elaborates.
    pub fn compiles(&self) -> bool {
        matches!(self.status, CompileStatus::Pass | CompileStatus::PassWithSorries)
    }

    /// Render back into the REPL's response shape. `classify` of the
    /// result reproduces `self` apart from `wall_time`.
    pub fn to_protocol(&self) -> Value {
        match self.status {
            CompileStatus::Timeout => return json!({"timeout": true}),
            CompileStatus::ReplCrash => return json!({"crash": true}),
            _ => {}
        }
        let pos = |p: &Position| json!({"line": p.line, "column": p.column});
        let mut out = Map::new();
        if let Some(env) = self.env_id {
            out.insert("env".into(), json!(env));
        }
        let messages: Vec<Value> = self
            .diagnostics
            .iter()
            .map(|d| {
                let mut m = json!({"severity": d.severity, "pos": pos(&d.pos), "data": d.message});
                if let Some(e) = &d.end_pos {
                    m["endPos"] = pos(e);
                }
                m
            })
            .collect();
        out.insert("messages".into(), Value::Array(messages));
        let sorries: Vec<Value> = self
            .sorries
            .iter()
            .map(|s| {
                let mut m = json!({"pos": pos(&s.pos), "goal": s.goal});
                if let Some(e) = &s.end_pos {
                    m["endPos"] = pos(e);
                }
                if let Some(id) = s.proof_state_id {
                    m["proofState"] = json!(id);
                }
                m
            })
            .collect();
        out.insert("sorries".into(), Value::Array(sorries));
        Value::Object(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("malformed REPL response: {0}")]
    MalformedResponse(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FixtureError {
    #[error("no transcript entry for request:\n{0}")]
    UnknownRequest(String),
    #[error("cannot read transcript {path}: {reason}")]
    Load { path: String, reason: String },
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("failed to spawn REPL `{program}`: {source}")]
    SpawnFailed {
        program: String,
        #[source]
        source: std::io::Error,
    },
    #[error("import header failed to compile: {}", first_error(.0))]
    HeaderFailed(Vec<Diagnostic>),
    #[error(transparent)]
    Fixture(#[from] FixtureError),
}

fn first_error(diags: &[Diagnostic]) -> String {
    diags.iter().find(|d| d.is_error()).map(|d| d.message.clone()).unwrap_or_else(|| "no diagnostics".into())
}

/// Anything that can check a Lean file: a live session, a transcript
/// replay, or a wrapper around either.
pub trait Compiler: Send {
    fn check(&mut self, code: &str, timeout: Duration) -> Result<CompileResult, SessionError>;
}

impl<C: Compiler + ?Sized> Compiler for Box<C> {
    fn check(&mut self, code: &str, timeout: Duration) -> Result<CompileResult, SessionError> {
        (**self).check(code, timeout)
    }
}

impl<C: Compiler + ?Sized> Compiler for &mut C {
    fn check(&mut self, code: &str, timeout: Duration) -> Result<CompileResult, SessionError> {
        (**self).check(code, timeout)
    }
}

fn parse_pos(v: Option<&Value>, what: &str) -> Result<Option<Position>, ProtocolError> {
    match v {
        None | Some(Value::Null) => Ok(None),
        Some(p) => {
            let line = p.get("line").and_then(Value::as_u64);
            let column = p.get("column").and_then(Value::as_u64);
            match (line, column) {
                (Some(l), Some(c)) => Ok(Some(Position::new(l as usize, c as usize))),
                _ => Err(ProtocolError::MalformedResponse(format!("bad {what}: {p}"))),
            }
        }
    }
}

fn array<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a [Value], ProtocolError> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(&[]),
        Some(Value::Array(a)) => Ok(a),
        Some(other) => Err(ProtocolError::MalformedResponse(format!("`{key}` is not an array: {other}"))),
    }
}

/// Map one REPL response to a [`CompileResult`]. Any error makes the
/// result `Fail`; otherwise open sorries or the sorry warning make it
/// `PassWithSorries`.
pub fn classify(raw: &Value) -> Result<CompileResult, ProtocolError> {
    let obj = raw
        .as_object()
        .ok_or_else(|| ProtocolError::MalformedResponse(format!("expected an object, got {raw}")))?;
    if obj.get("timeout").and_then(Value::as_bool) == Some(true) {
        return Ok(CompileResult::timeout());
    }
    if obj.get("crash").and_then(Value::as_bool) == Some(true) {
        return Ok(CompileResult::crash());
    }
    // REPL-level failure, e.g. an unknown environment
    if !obj.contains_key("env") && !obj.contains_key("messages") {
        if let Some(m) = obj.get("message").and_then(Value::as_str) {
            return Ok(CompileResult::failure(m));
        }
    }
    let env_id = match obj.get("env") {
        None => None,
        Some(v) => Some(v.as_u64().ok_or_else(|| ProtocolError::MalformedResponse(format!("bad env: {v}")))?),
    };
    let mut diagnostics = Vec::new();
    for m in array(obj, "messages")? {
        let severity = match m.get("severity").and_then(Value::as_str) {
            Some("error") => Severity::Error,
            Some("warning") => Severity::Warning,
            Some("info") | Some("information") => Severity::Info,
            other => return Err(ProtocolError::MalformedResponse(format!("bad severity: {other:?}"))),
        };
        let pos = parse_pos(m.get("pos"), "pos")?
            .ok_or_else(|| ProtocolError::MalformedResponse(format!("message without pos: {m}")))?;
        let end_pos = parse_pos(m.get("endPos"), "endPos")?;
        let mut message = m.get("data").and_then(Value::as_str).unwrap_or_default().to_string();
        if severity == Severity::Error && message.is_empty() {
            message = "(empty error message)".into();
        }
        diagnostics.push(Diagnostic { severity, pos, end_pos, message });
    }
    let mut sorries = Vec::new();
    for s in array(obj, "sorries")? {
        let pos = parse_pos(s.get("pos"), "pos")?
            .ok_or_else(|| ProtocolError::MalformedResponse(format!("sorry without pos: {s}")))?;
        sorries.push(SorryInfo {
            pos,
            end_pos: parse_pos(s.get("endPos"), "endPos")?,
            goal: s.get("goal").and_then(Value::as_str).unwrap_or_default().to_string(),
            proof_state_id: s.get("proofState").and_then(Value::as_u64),
        });
    }
    let status = if diagnostics.iter().any(Diagnostic::is_error) {
        CompileStatus::Fail
    } else if !sorries.is_empty() || diagnostics.iter().any(Diagnostic::is_sorry_warning) {
        CompileStatus::PassWithSorries
    } else {
        CompileStatus::Pass
    };
    Ok(CompileResult { status, diagnostics, sorries, env_id, wall_time: 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_response_passes() {
        let r = classify(&json!({"env": 3})).unwrap();
        assert_eq!(r.status, CompileStatus::Pass);
        assert_eq!(r.env_id, Some(3));
        let r = classify(&json!({"env": 3, "messages": [], "sorries": []})).unwrap();
        assert_eq!(r.status, CompileStatus::Pass);
    }

    #[test]
    fn sorry_warning_is_not_failure() {
        let raw = json!({
            "env": 1,
            "messages": [{"severity": "warning", "pos": {"line": 1, "column": 8},
                          "endPos": {"line": 1, "column": 9}, "data": "declaration uses 'sorry'"}],
            "sorries": [{"pos": {"line": 2, "column": 2}, "endPos": {"line": 2, "column": 7},
                         "goal": "⊢ 1 = 1", "proofState": 0}]
        });
        let r = classify(&raw).unwrap();
        assert_eq!(r.status, CompileStatus::PassWithSorries);
        assert_eq!(r.sorries[0].goal, "⊢ 1 = 1");
        assert_eq!(r.sorries[0].proof_state_id, Some(0));
    }

    #[test]
    fn error_wins_over_sorries() {
        let raw = json!({
            "env": 1,
            "messages": [{"severity": "error", "pos": {"line": 3, "column": 2}, "data": "unknown tactic"}],
            "sorries": [{"pos": {"line": 2, "column": 2}, "goal": "⊢ True"}]
        });
        assert_eq!(classify(&raw).unwrap().status, CompileStatus::Fail);
    }

    #[test]
    fn malformed_inputs() {
        assert!(classify(&json!([1, 2])).is_err());
        assert!(classify(&json!({"env": 0, "messages": 5})).is_err());
        assert!(classify(&json!({"env": 0, "messages": [{"severity": "loud", "pos": {"line": 1, "column": 0}}]}))
            .is_err());
        assert!(classify(&json!({"env": 0, "sorries": [{"goal": "⊢ True"}]})).is_err());
    }

    #[test]
    fn repl_level_message_is_failure() {
        let r = classify(&json!({"message": "Unknown environment 9."})).unwrap();
        assert_eq!(r.status, CompileStatus::Fail);
        assert!(r.diagnostics[0].message.contains("Unknown environment"));
    }

    #[test]
    fn protocol_round_trip() {
        let raw = json!({
            "env": 4,
            "messages": [{"severity": "error", "pos": {"line": 3, "column": 2},
                          "endPos": {"line": 3, "column": 9}, "data": "linarith failed"},
                         {"severity": "info", "pos": {"line": 4, "column": 2}, "data": "Try these:\n• simp"}],
            "sorries": [{"pos": {"line": 2, "column": 2}, "goal": "x : ℝ\n⊢ x = x", "proofState": 7}]
        });
        let r = classify(&raw).unwrap();
        let again = classify(&r.to_protocol()).unwrap();
        assert_eq!(r, again);
        assert_eq!(classify(&CompileResult::timeout().to_protocol()).unwrap().status, CompileStatus::Timeout);
    }
}
