use serde_json::{json, Value};
use std::ffi::OsString;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::time::{Duration, Instant};

use super::{classify, CompileResult, CompileStatus, Compiler, SessionError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportFault {
    Timeout,
    Crashed(String),
}

/// One request, one response. Implementations must return within
/// `timeout` (plus a small constant) whatever the other side does.
pub trait Transport: Send {
    fn round_trip(&mut self, request: &Value, timeout: Duration) -> Result<Value, TransportFault>;

    /// Throw away the current REPL and start a fresh one.
    fn restart(&mut self) -> Result<(), SessionError>;
}

/// A REPL subprocess speaking blank-line-delimited JSON.
pub struct ProcessTransport {
    program: PathBuf,
    args: Vec<OsString>,
    cwd: Option<PathBuf>,
    envs: Vec<(OsString, OsString)>,
    child: Option<Child>,
    stdin: Option<ChildStdin>,
    responses: Option<Receiver<String>>,
}

impl ProcessTransport {
    pub fn new(program: impl Into<PathBuf>) -> Self {
        ProcessTransport {
            program: program.into(),
            args: Vec::new(),
            cwd: None,
            envs: Vec::new(),
            child: None,
            stdin: None,
            responses: None,
        }
    }

    pub fn arg(mut self, arg: impl Into<OsString>) -> Self {
        self.args.push(arg.into());
        self
    }

    pub fn args<I, S>(mut self, args: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<OsString>,
    {
        self.args.extend(args.into_iter().map(Into::into));
        self
    }

    pub fn current_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.cwd = Some(dir.into());
        self
    }

    pub fn env(mut self, key: impl Into<OsString>, value: impl Into<OsString>) -> Self {
        self.envs.push((key.into(), value.into()));
        self
    }

    pub fn spawn(&mut self) -> Result<(), SessionError> {
        self.kill();
        let mut cmd = Command::new(&self.program);
        cmd.args(&self.args).stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::null());
        if let Some(dir) = &self.cwd {
            cmd.current_dir(dir);
        }
        for (k, v) in &self.envs {
            cmd.env(k, v);
        }
        let mut child = cmd.spawn().map_err(|source| SessionError::SpawnFailed {
            program: self.program.display().to_string(),
            source,
        })?;
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            let mut reader = BufReader::new(stdout);
            let mut buf = String::new();
            let mut line = String::new();
            loop {
                line.clear();
                match reader.read_line(&mut line) {
                    Ok(0) | Err(_) => return,
                    Ok(_) => {}
                }
                if line.trim().is_empty() {
                    if !buf.trim().is_empty() && tx.send(std::mem::take(&mut buf)).is_err() {
                        return;
                    }
                } else {
                    buf.push_str(&line);
                }
            }
        });
        self.stdin = child.stdin.take();
        self.child = Some(child);
        self.responses = Some(rx);
        Ok(())
    }

    fn kill(&mut self) {
        self.stdin = None;
        self.responses = None;
        if let Some(mut child) = self.child.take() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

impl Drop for ProcessTransport {
    fn drop(&mut self) {
        self.kill();
    }
}

impl Transport for ProcessTransport {
    fn round_trip(&mut self, request: &Value, timeout: Duration) -> Result<Value, TransportFault> {
        let (Some(stdin), Some(rx)) = (self.stdin.as_mut(), self.responses.as_ref()) else {
            return Err(TransportFault::Crashed("REPL not running".into()));
        };
        let text = serde_json::to_string(request).expect("request serializes");
        if let Err(e) = write!(stdin, "{text}\n\n").and_then(|_| stdin.flush()) {
            return Err(TransportFault::Crashed(format!("write failed: {e}")));
        }
        match rx.recv_timeout(timeout) {
            Ok(body) => serde_json::from_str(&body)
                .map_err(|e| TransportFault::Crashed(format!("unparseable response ({e}): {body}"))),
            Err(RecvTimeoutError::Timeout) => {
                self.kill();
                Err(TransportFault::Timeout)
            }
            Err(RecvTimeoutError::Disconnected) => Err(TransportFault::Crashed("REPL exited".into())),
        }
    }

    fn restart(&mut self) -> Result<(), SessionError> {
        self.spawn()
    }
}

/// A live REPL with the import header compiled once into a base
/// environment that every check reuses.
pub struct ReplSession<T: Transport = ProcessTransport> {
    transport: T,
    header: String,
    base_env: Option<u64>,
    header_timeout: Duration,
}

impl ReplSession<ProcessTransport> {
    /// Launch `repl_executable` inside `project_root` and compile `header`.
    pub fn start(repl_executable: &Path, project_root: &Path, header: &str) -> Result<Self, SessionError> {
        Self::start_with(ProcessTransport::new(repl_executable).current_dir(project_root), header)
    }

    pub fn start_with(mut transport: ProcessTransport, header: &str) -> Result<Self, SessionError> {
        transport.spawn()?;
        ReplSession::with_transport(transport, header)
    }
}

impl<T: Transport> ReplSession<T> {
    /// Wrap a running transport and compile the header into the base env.
    pub fn with_transport(transport: T, header: &str) -> Result<Self, SessionError> {
        let mut s = ReplSession {
            transport,
            header: header.to_string(),
            base_env: None,
            header_timeout: super::DEFAULT_TIMEOUT,
        };
        s.compile_header()?;
        Ok(s)
    }

    pub fn header(&self) -> &str {
        &self.header
    }

    pub fn base_env(&self) -> Option<u64> {
        self.base_env
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    fn compile_header(&mut self) -> Result<(), SessionError> {
        self.base_env = None;
        if self.header.trim().is_empty() {
            return Ok(());
        }
        let request = json!({"cmd": self.header});
        let raw = match self.transport.round_trip(&request, self.header_timeout) {
            Ok(raw) => raw,
            Err(fault) => {
                return Err(SessionError::HeaderFailed(vec![super::Diagnostic {
                    severity: super::Severity::Error,
                    pos: super::Position::new(1, 0),
                    end_pos: None,
                    message: format!("REPL failed while compiling the header: {fault:?}"),
                }]))
            }
        };
        let result = classify(&raw).unwrap_or_else(|e| CompileResult::failure(e.to_string()));
        if result.status == CompileStatus::Fail {
            return Err(SessionError::HeaderFailed(result.diagnostics));
        }
        self.base_env = result.env_id;
        Ok(())
    }

    fn respawn(&mut self) -> Result<(), SessionError> {
        self.transport.restart()?;
        self.compile_header()
    }

    /// The header's imports are already in the base environment, and the
    /// REPL rejects `import` after the first command, so import lines are
    /// blanked. Blanking keeps line numbers intact.
    fn request_for(&self, code: &str) -> Value {
        match self.base_env {
            Some(env) => {
                let body: Vec<&str> =
                    code.split('\n').map(|l| if l.starts_with("import ") { "" } else { l }).collect();
                json!({"cmd": body.join("\n"), "env": env})
            }
            None => json!({"cmd": code}),
        }
    }
}

impl<T: Transport> Compiler for ReplSession<T> {
    fn check(&mut self, code: &str, timeout: Duration) -> Result<CompileResult, SessionError> {
        let mut crashes = 0;
        loop {
            let request = self.request_for(code);
            let started = Instant::now();
            let outcome = self.transport.round_trip(&request, timeout);
            let elapsed = started.elapsed().as_secs_f64();
            let fault = match outcome {
                Ok(raw) => match classify(&raw) {
                    Ok(mut r) => {
                        r.wall_time = elapsed;
                        return Ok(r);
                    }
                    Err(e) => TransportFault::Crashed(e.to_string()),
                },
                Err(f) => f,
            };
            match fault {
                TransportFault::Timeout => {
                    tracing::warn!(timeout_s = timeout.as_secs_f64(), "REPL timed out; respawning");
                    self.respawn()?;
                    let mut r = CompileResult::timeout();
                    r.wall_time = elapsed;
                    return Ok(r);
                }
                TransportFault::Crashed(why) => {
                    tracing::warn!(%why, attempt = crashes + 1, "REPL crashed; respawning");
                    self.respawn()?;
                    crashes += 1;
                    if crashes > 1 {
                        let mut r = CompileResult::crash();
                        r.wall_time = elapsed;
                        return Ok(r);
                    }
                }
            }
        }
    }
}
