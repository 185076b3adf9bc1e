//! A small emulator of the Lean 4 REPL JSON protocol.
//!
//! Goals are plain text. Closed arithmetic and polynomial identities are
//! decided by evaluation; anything else is scripted by a [`World`] file.

mod elab;
mod expr;
mod text;
mod world;

pub use world::{Effect, HintEntry, Rule, World};

use serde_json::{json, Map, Value};
use std::collections::BTreeSet;
use std::io::{BufRead, Write};

/// Request text that makes [`serve`] sleep for N milliseconds before replying.
pub const SLEEP_HOOK: &str = "toylean:sleep=";
/// Request text that makes [`serve`] exit without replying.
pub const CRASH_HOOK: &str = "toylean:crash";

/// One REPL process worth of state.
pub struct Repl {
    world: World,
    envs: BTreeSet<u64>,
    next_env: u64,
    next_state: u64,
}

fn pos_json(p: (usize, usize)) -> Value {
    json!({"line": p.0, "column": p.1})
}

impl Repl {
    pub fn new(world: World) -> Self {
        Repl { world, envs: BTreeSet::new(), next_env: 0, next_state: 0 }
    }

    /// Answer one request object.
    pub fn handle(&mut self, request: &Value) -> Value {
        let Some(cmd) = request.get("cmd").and_then(Value::as_str) else {
            return json!({"message": "unsupported request: expected a `cmd` field"});
        };
        let env = request.get("env").and_then(Value::as_u64);
        if let Some(e) = env {
            if !self.envs.contains(&e) {
                return json!({"message": format!("Unknown environment {e}.")});
            }
        }
        let (msgs, sorries) = self.check(cmd, env.is_some());
        let id = self.next_env;
        self.next_env += 1;
        self.envs.insert(id);

        let mut out = Map::new();
        out.insert("env".into(), json!(id));
        if !msgs.is_empty() {
            let ms: Vec<Value> = msgs
                .iter()
                .map(|m| {
                    json!({"severity": m.severity, "pos": pos_json(m.pos), "endPos": pos_json(m.end), "data": m.data})
                })
                .collect();
            out.insert("messages".into(), Value::Array(ms));
        }
        if !sorries.is_empty() {
            let ss: Vec<Value> = sorries
                .iter()
                .map(|s| {
                    let state = self.next_state;
                    self.next_state += 1;
                    json!({"pos": pos_json(s.pos), "endPos": pos_json(s.end), "goal": s.goal, "proofState": state})
                })
                .collect();
            out.insert("sorries".into(), Value::Array(ss));
        }
        Value::Object(out)
    }

    fn check(&self, cmd: &str, has_env: bool) -> (Vec<elab::Msg>, Vec<elab::SorryRec>) {
        let Some(masked) = text::mask_comments(cmd) else {
            let last = cmd.split('\n').count();
            let msg = elab::Msg {
                severity: "error",
                pos: (last, 0),
                end: (last, 0),
                data: "unterminated comment".into(),
            };
            return (vec![msg], Vec::new());
        };
        let mut lines: Vec<String> = masked.split('\n').map(str::to_string).collect();
        let mut msgs = Vec::new();
        for (i, line) in lines.iter_mut().enumerate() {
            let Some(rest) = line.strip_prefix("import ") else {
                continue;
            };
            let at = (i + 1, 0);
            let end = (i + 1, line.chars().count());
            if has_env {
                msgs.push(elab::Msg {
                    severity: "error",
                    pos: at,
                    end,
                    data: "invalid 'import' command, it must be used in the beginning of the file".into(),
                });
            } else {
                for module in rest.split_whitespace() {
                    let root = module.split('.').next().unwrap_or(module);
                    if !self.world.modules.iter().any(|m| m == root) {
                        msgs.push(elab::Msg {
                            severity: "error",
                            pos: at,
                            end,
                            data: format!("unknown module prefix '{root}'\n\nNo directory '{root}' or file '{root}.olean' in the search path entries"),
                        });
                    }
                }
            }
            *line = " ".repeat(line.chars().count());
        }
        let mut e = elab::Elab::new(&self.world);
        e.run(&lines.join("\n"));
        msgs.extend(e.msgs);
        (msgs, e.sorries)
    }
}

/// Serve requests separated by blank lines until EOF.
pub fn serve(input: impl BufRead, mut output: impl Write, world: World) -> std::io::Result<()> {
    let mut repl = Repl::new(world);
    let mut buf = String::new();
    let mut lines = input.lines();
    loop {
        let line = match lines.next() {
            Some(l) => l?,
            None => {
                if buf.trim().is_empty() {
                    return Ok(());
                }
                String::new()
            }
        };
        if !line.trim().is_empty() {
            buf.push_str(&line);
            buf.push('\n');
            continue;
        }
        if buf.trim().is_empty() {
            continue;
        }
        let response = match serde_json::from_str::<Value>(&buf) {
            Ok(req) => {
                let cmd = req.get("cmd").and_then(Value::as_str).unwrap_or("");
                if cmd.contains(CRASH_HOOK) {
                    std::process::exit(3);
                }
                if let Some(i) = cmd.find(SLEEP_HOOK) {
                    let ms: u64 = cmd[i + SLEEP_HOOK.len()..]
                        .chars()
                        .take_while(char::is_ascii_digit)
                        .collect::<String>()
                        .parse()
                        .unwrap_or(0);
                    std::thread::sleep(std::time::Duration::from_millis(ms));
                }
                repl.handle(&req)
            }
            Err(e) => json!({"message": format!("Could not parse JSON:\n{e}")}),
        };
        buf.clear();
        writeln!(output, "{}\n", serde_json::to_string(&response).expect("json"))?;
        output.flush()?;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_then_body_env() {
        let mut r = Repl::new(World::default());
        let h = r.handle(&json!({"cmd": "import Mathlib\nimport Aesop\nset_option maxHeartbeats 400000"}));
        assert_eq!(h, json!({"env": 0}));
        let b = r.handle(&json!({"cmd": "theorem t : 1 = 1 := by\n  sorry", "env": 0}));
        assert_eq!(b["env"], 1);
        assert_eq!(b["sorries"][0]["goal"], "⊢ 1 = 1");
        assert_eq!(b["messages"][0]["severity"], "warning");
    }

    #[test]
    fn bad_import_and_env() {
        let mut r = Repl::new(World::default());
        let h = r.handle(&json!({"cmd": "import Foo.Bar"}));
        assert!(h["messages"][0]["data"].as_str().unwrap().starts_with("unknown module prefix 'Foo'"));
        let u = r.handle(&json!({"cmd": "example : 1 = 1 := rfl", "env": 42}));
        assert!(u.get("message").is_some());
        let i = r.handle(&json!({"cmd": "import Mathlib", "env": 0}));
        assert!(i["messages"][0]["data"].as_str().unwrap().starts_with("invalid 'import'"));
    }

    #[test]
    fn serve_round_trip() {
        let input = "{\"cmd\": \"theorem t : 2 + 2 = 4 := by norm_num\"}\n\n{\"cmd\":\n \"bad\"}\n\n";
        let mut out = Vec::new();
        serve(input.as_bytes(), &mut out, World::default()).unwrap();
        let text = String::from_utf8(out).unwrap();
        let parts: Vec<&str> = text.split("\n\n").filter(|s| !s.is_empty()).collect();
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0], "{\"env\":0}");
        assert!(parts[1].contains("expected command"));
    }
}
