mod common;

use apollo::orchestrator::{apollo, Module, Outcome, OutcomeStatus, RepairConfig};
use apollo::proof::{proof_length, ProofScript};
use apollo::repl::RecordingSession;
use common::{toy_session, worked};

fn config() -> RepairConfig {
    RepairConfig { max_depth: 1, ..Default::default() }
}

fn replay() -> Outcome {
    apollo(&worked::statement(), &config(), &worked::backend(), &mut worked::replay_session())
}

fn count(detail: &str, suffix: &str) -> usize {
    detail.split(", ").find_map(|p| p.strip_suffix(suffix)).and_then(|n| n.trim().parse().ok()).unwrap()
}

/// Regenerate the transcript from the toy REPL:
/// `cargo test -p apollo --test worked_example -- --ignored`
#[test]
#[ignore]
fn record_transcript() {
    let mut rec = RecordingSession::new(toy_session(worked::world()), Some("toylean".into()));
    let o = apollo(&worked::statement(), &config(), &worked::backend(), &mut rec);
    assert_eq!(o.status, OutcomeStatus::Proved);
    rec.into_transcript().save(&worked::transcript_path()).unwrap();
}

#[test]
fn replay_matches_the_walkthrough() {
    let o = replay();
    assert_eq!(o.status, OutcomeStatus::Proved, "{:#?}", o.audit);
    let root: Vec<_> = o.audit.iter().filter(|e| e.depth == 0).collect();
    let sorrified = root.iter().find(|e| e.module == "sorrifier").unwrap();
    assert_eq!(count(&sorrified.detail, " sorries"), 6);
    let solved = root.iter().find(|e| e.module == "auto_solver" && e.action == "done").unwrap();
    assert_eq!(count(&solved.detail, " closed"), 4);
    assert_eq!(count(&solved.detail, " remain"), 2);
    assert_eq!(o.ledger.triggers(Module::LlmReinvoker), 2);
    assert_eq!(o.audit.iter().map(|e| e.depth).max(), Some(1));
    assert!(root.iter().any(|e| e.module == "syntax_refiner"));
    assert!(o.assisted);
}

#[test]
fn replay_is_byte_identical() {
    let (a, b) = (replay(), replay());
    assert_eq!(a.final_script, b.final_script);
    assert_eq!(a.canonical(), b.canonical());
}

#[test]
fn replay_agrees_with_live_toy_repl() {
    let live = apollo(&worked::statement(), &config(), &worked::backend(), &mut toy_session(worked::world()));
    let replayed = replay();
    assert_eq!(live.final_script, replayed.final_script);
    assert_eq!(live.audit, replayed.audit);
}

#[test]
fn repaired_proof_is_longer_than_the_sketch() {
    let o = replay();
    let st = worked::statement();
    let final_script = ProofScript::parse(&o.final_script.unwrap(), &st).unwrap();
    let sketch = std::fs::read_to_string(worked::dir().join("llm/mathd_algebra_332/1.lean")).unwrap();
    let sketch = apollo::orchestrator::graft(&apollo::llm::extract_code(&sketch), &st).unwrap();
    assert_eq!(o.proof_length, Some(proof_length(&final_script)));
    assert!(proof_length(&final_script) > proof_length(&sketch));
    let text = final_script.serialize();
    assert!(text.contains("have h2 : x + y = 14 := by"));
    assert!(!text.contains("From the arithmetic mean") && !text.contains("/- 19"));
    assert_eq!(final_script.count_sorries(), 0);
}

#[test]
fn depth_zero_stops_with_two_sorries() {
    let c = RepairConfig { max_depth: 0, feedback_retry: false, ..config() };
    let o = apollo(&worked::statement(), &c, &worked::backend(), &mut worked::replay_session());
    assert_eq!(o.status, OutcomeStatus::PartialWithSorries);
    let script = o.final_script.unwrap();
    assert_eq!(apollo::proof::sorry_positions(&script).len(), 2);
}
