mod common;

use apollo::repl::{
    CompileStatus, Compiler, ProcessTransport, ReplSession, SessionError, Severity, Transport,
};
use common::{toy_session, ToyTransport, HEADER};
use std::time::{Duration, Instant};
use toylean::World;

const T: Duration = Duration::from_secs(5);

#[test]
fn header_becomes_base_env_zero() {
    let s = toy_session(World::default());
    assert_eq!(s.base_env(), Some(0));
}

#[test]
fn trivial_proof_passes() {
    let mut s = toy_session(World::default());
    let r = s.check("import Mathlib\ntheorem t : 1 = 1 := by rfl", T).unwrap();
    assert_eq!(r.status, CompileStatus::Pass, "{:?}", r.diagnostics);
}

#[test]
fn sorry_body_reports_goal() {
    let mut s = toy_session(World::default());
    let r = s.check("theorem t : 1 = 1 := by\n  sorry\n", T).unwrap();
    assert_eq!(r.status, CompileStatus::PassWithSorries);
    assert_eq!(r.sorries.len(), 1);
    assert!(r.sorries[0].goal.ends_with("⊢ 1 = 1"));
    assert!(r.diagnostics.iter().any(|d| d.is_sorry_warning()));
}

#[test]
fn unknown_tactic_fails_on_its_line() {
    let mut s = toy_session(World::default());
    let r = s.check("theorem t : 1 = 1 := by\n  foo_bar\n", T).unwrap();
    assert_eq!(r.status, CompileStatus::Fail);
    let e = r.errors().next().unwrap();
    assert!(e.message.contains("unknown"));
    assert_eq!(e.pos.line, 2);
}

#[test]
fn imports_are_blanked_keeping_lines() {
    let mut s = toy_session(World::default());
    let r = s.check("import Mathlib\nimport Aesop\ntheorem t : 1 = 1 := by\n  foo_bar\n", T).unwrap();
    assert_eq!(r.errors().next().unwrap().pos.line, 4);
}

#[test]
fn bad_header_is_header_failed() {
    let err = ReplSession::with_transport(ToyTransport::new(World::default()), "import NoSuchLib\n")
        .err()
        .expect("header must fail");
    match err {
        SessionError::HeaderFailed(diags) => {
            assert!(diags.iter().any(|d| d.severity == Severity::Error && d.message.contains("NoSuchLib")))
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn missing_executable_is_spawn_failed() {
    let err = ReplSession::start(
        std::path::Path::new("/nonexistent/lean-repl"),
        std::path::Path::new("/"),
        HEADER,
    )
    .err()
    .expect("spawn must fail");
    assert!(matches!(err, SessionError::SpawnFailed { .. }));
}

/// A shell REPL: answers `{"env": 0}` to everything, sleeps on `slow`,
/// exits on `die`.
fn stub() -> ProcessTransport {
    let script = r#"
buf=""
while IFS= read -r line; do
  if [ -z "$line" ]; then
    case "$buf" in
      *slow*) sleep 30 ;;
      *die*) exit 1 ;;
    esac
    [ -n "$buf" ] && printf '{"env": 0}\n\n'
    buf=""
  else
    buf="$buf$line"
  fi
done
"#;
    ProcessTransport::new("sh").arg("-c").arg(script)
}

#[test]
fn timeout_respawns_within_grace() {
    let mut s = ReplSession::start_with(stub(), "import Mathlib").unwrap();
    let timeout = Duration::from_secs(1);
    let started = Instant::now();
    let r = s.check("theorem slow : True := trivial", timeout).unwrap();
    assert_eq!(r.status, CompileStatus::Timeout);
    assert!(started.elapsed() < timeout + Duration::from_secs(2), "{:?}", started.elapsed());
    let r = s.check("theorem t : True := trivial", timeout).unwrap();
    assert_eq!(r.status, CompileStatus::Pass);
}

#[test]
fn crash_is_retried_once_then_reported() {
    let mut s = ReplSession::start_with(stub(), "import Mathlib").unwrap();
    let r = s.check("theorem die : True := trivial", T).unwrap();
    assert_eq!(r.status, CompileStatus::ReplCrash);
    let r = s.check("theorem t : True := trivial", T).unwrap();
    assert_eq!(r.status, CompileStatus::Pass);
}

#[test]
fn toy_transport_restart_resets_envs() {
    let mut t = ToyTransport::new(World::default());
    t.round_trip(&serde_json::json!({"cmd": "import Mathlib"}), T).unwrap();
    t.restart().unwrap();
    let v = t.round_trip(&serde_json::json!({"cmd": "example : True := trivial", "env": 0}), T).unwrap();
    assert!(v.get("message").is_some());
}
