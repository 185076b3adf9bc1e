mod common;

use apollo::autosolver::{solve_sorries, SolverConfig};
use apollo::goals::{extract_goal, splice_subproof, transform_checked, SpliceMode};
use apollo::pp::check_with_preamble;
use apollo::proof::ProofScript;
use apollo::repl::{CompileStatus, Compiler};
use apollo::sorrifier::{sorrify, validate_statement, SorrifyConfig};
use common::{broken, toy_session};
use std::time::Duration;
use toylean::World;

const T: Duration = Duration::from_secs(10);

#[test]
fn extracted_goals_restate_as_valid_theorems() {
    let mut extracted = 0;
    for (path, text) in broken() {
        let mut s = toy_session(World::default());
        let parent = sorrify(&ProofScript::parse_source(&text).unwrap(), &mut s, &SorrifyConfig::default()).unwrap();
        for (i, info) in parent.compile_result.sorries.iter().enumerate() {
            let ctx = extract_goal(info, &parent.script, i + 1).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            let st = transform_checked(&ctx, &parent.script.statement.header, &mut s, T)
                .unwrap_or_else(|e| panic!("{}: {e}\n{}", path.display(), info.goal));
            validate_statement(&st, &mut s, T).unwrap();
            extracted += 1;
        }
    }
    assert!(extracted >= 20, "{extracted}");
}

#[test]
fn splicing_proved_subs_never_regresses() {
    let mut spliced = 0;
    for (path, text) in broken() {
        let mut s = toy_session(World::default());
        let parent = sorrify(&ProofScript::parse_source(&text).unwrap(), &mut s, &SorrifyConfig::default()).unwrap();
        let before = parent.script.count_sorries();
        for (i, info) in parent.compile_result.sorries.iter().enumerate() {
            let ctx = extract_goal(info, &parent.script, i + 1).unwrap();
            let st = transform_checked(&ctx, &parent.script.statement.header, &mut s, T).unwrap();
            let stub = ProofScript::parse(&st.with_sorry_body(), &st).unwrap();
            let r = check_with_preamble(&mut s, &stub, T).unwrap();
            let solved = solve_sorries(&stub, &r, &mut s, &SolverConfig::default()).unwrap();
            if solved.remaining() > 0 {
                continue;
            }
            for mode in [SpliceMode::Inline, SpliceMode::Standalone] {
                let joined = splice_subproof(&parent.script, &ctx, &solved.script, mode)
                    .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
                let r = s.check(&joined.serialize(), T).unwrap();
                assert!(
                    matches!(r.status, CompileStatus::Pass | CompileStatus::PassWithSorries),
                    "{} {mode:?}: {:?}\n{}",
                    path.display(),
                    r.diagnostics,
                    joined.serialize()
                );
                assert_eq!(joined.count_sorries(), before - 1, "{}", path.display());
                spliced += 1;
            }
        }
    }
    assert!(spliced >= 10, "{spliced}");
}
