//! Turn a failing proof into one that compiles, with `sorry` standing in
//! for every sub-proof that does not go through.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::time::Duration;
use thiserror::Error;

use crate::pp::check_with_preamble;
use crate::proof::{normalize_ws, BlockKind, EditError, ProofBlock, ProofScript, SourceSpan, TheoremStatement};
use crate::repl::{CompileResult, CompileStatus, Compiler, Diagnostic, SessionError};

const UNSOLVED: &str = "unsolved goals";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RepairKind {
    RemoveLine,
    RemoveBlock,
    ReplaceBlockWithSorry,
    InsertSorry,
}

/// One edit of the loop. `target` is the span of the node it applied to,
/// as it was in the script the action was applied to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairAction {
    pub kind: RepairKind,
    pub target: SourceSpan,
    pub diagnostic: Diagnostic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SorrifiedScript {
    pub script: ProofScript,
    pub actions: Vec<RepairAction>,
    pub compile_result: CompileResult,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RepairError {
    #[error("diagnostic at {}:{} is outside the proof body", .0.pos.line, .0.pos.column)]
    NoEnclosingNode(Diagnostic),
}

#[derive(Debug, Error)]
pub enum SorrifyError {
    #[error("the theorem statement itself does not elaborate")]
    StatementMalformed(Vec<Diagnostic>),
    #[error("no fixpoint after {iterations} iterations")]
    Nonterminating { iterations: usize },
    #[error("compiler gave no verdict ({0:?})")]
    NoVerdict(CompileStatus),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("repair edit failed: {0}")]
    Edit(#[from] EditError),
}

/// Per-node repair counts, keyed by indentation plus normalized header so
/// the key survives edits elsewhere in the file.
#[derive(Debug, Default, Clone)]
pub struct AttemptHistory {
    counts: HashMap<String, usize>,
}

impl AttemptHistory {
    fn key(node: &ProofBlock) -> String {
        format!("{}|{}", node.indent, normalize_ws(node.header()))
    }

    pub fn count(&self, node: &ProofBlock) -> usize {
        self.counts.get(&Self::key(node)).copied().unwrap_or(0)
    }

    pub fn record(&mut self, node: &ProofBlock) {
        *self.counts.entry(Self::key(node)).or_default() += 1;
    }
}

#[derive(Debug, Clone)]
pub struct SorrifyConfig {
    pub timeout: Duration,
}

impl Default for SorrifyConfig {
    fn default() -> Self {
        SorrifyConfig { timeout: crate::repl::DEFAULT_TIMEOUT }
    }
}

pub fn iteration_cap(script: &ProofScript) -> usize {
    2 * script.line_count() + 8
}

pub fn is_unsolved_goals(d: &Diagnostic) -> bool {
    d.is_error() && d.message.starts_with(UNSOLVED)
}

/// Compile the statement with a bare `sorry` body. Any error means the
/// statement cannot be proved as written.
pub fn validate_statement<C: Compiler + ?Sized>(
    statement: &TheoremStatement,
    compiler: &mut C,
    timeout: Duration,
) -> Result<CompileResult, SorrifyError> {
    let r = compiler.check(&statement.with_sorry_body(), timeout)?;
    match r.status {
        CompileStatus::Fail => Err(SorrifyError::StatementMalformed(r.diagnostics)),
        CompileStatus::Timeout | CompileStatus::ReplCrash => Err(SorrifyError::NoVerdict(r.status)),
        _ => Ok(r),
    }
}

/// The error to act on: the first real error by position. `unsolved goals`
/// reports are handled only once nothing else is wrong, since they are
/// often a consequence of an earlier failure.
pub fn select_diagnostic(result: &CompileResult) -> Option<&Diagnostic> {
    let mut errors: Vec<&Diagnostic> = result.errors().collect();
    errors.sort_by_key(|d| (d.pos, d.end_pos));
    errors.iter().find(|d| !is_unsolved_goals(d)).or_else(|| errors.first()).copied()
}

fn in_statement(script: &ProofScript, d: &Diagnostic) -> bool {
    (d.pos.line, d.pos.column) < (script.by_line(), script.by_end_col())
}

/// Smallest node an error can be pinned on. Anything nested in an
/// anonymous block (continuation lines, `calc` steps) counts as that block.
fn unit_at<'a>(script: &'a ProofScript, d: &Diagnostic) -> Option<&'a ProofBlock> {
    if in_statement(script, d) {
        return None;
    }
    let root = &script.root;
    let pos = (d.pos.line, d.pos.column);
    let mut node = root.innermost_at(pos.0, pos.1);
    if node.kind == BlockKind::Root {
        node = root.walk().into_iter().filter(|b| b.kind != BlockKind::Root && b.span.start() <= pos).last()?;
    }
    Some(root.ancestors(node.id).into_iter().find(|a| a.kind == BlockKind::AnonymousBlock).unwrap_or(node))
}

/// True when the error points into the proposition a `have` states, so a
/// `sorry` body cannot help.
fn in_stated_type(node: &ProofBlock, d: &Diagnostic) -> bool {
    if d.pos.line != node.span.start_line {
        return false;
    }
    let masked = crate::proof::lex::mask(node.header()).unwrap_or_default();
    let chars: Vec<char> = masked.chars().collect();
    let assign = chars.windows(2).position(|w| w == [':', '=']).unwrap_or(chars.len());
    d.pos.column < assign
}

fn replace_or_remove(node: &ProofBlock) -> RepairKind {
    if node.has_stated_goal() || node.kind == BlockKind::CaseBlock {
        RepairKind::ReplaceBlockWithSorry
    } else {
        RepairKind::RemoveBlock
    }
}

/// Pick the edit for one error.
///
/// * `unsolved goals` on a block: add `sorry` at the block's end.
/// * an error on a tactic line: remove the line, the first time its block
///   is hit and the block keeps other steps.
/// * an error inside the type a `have` states: the block is removed.
/// * otherwise the whole enclosing block goes: `have`/case blocks keep
///   their promise as `... := by sorry`, other blocks are removed.
pub fn choose_repair(
    diag: &Diagnostic,
    script: &ProofScript,
    history: &AttemptHistory,
) -> Result<RepairAction, RepairError> {
    let act = |kind, node: &ProofBlock| RepairAction { kind, target: node.span, diagnostic: diag.clone() };
    if is_unsolved_goals(diag) {
        if in_statement(script, diag) {
            return Ok(act(RepairKind::InsertSorry, &script.root));
        }
        let node = script.root.innermost_at(diag.pos.line, diag.pos.column);
        if matches!(node.kind, BlockKind::Root | BlockKind::HaveBlock | BlockKind::CaseBlock)
            && node.span.start_line == diag.pos.line
        {
            return Ok(act(RepairKind::InsertSorry, node));
        }
    }
    let node = unit_at(script, diag).ok_or_else(|| RepairError::NoEnclosingNode(diag.clone()))?;
    let root = &script.root;
    if matches!(node.kind, BlockKind::HaveBlock | BlockKind::CaseBlock) {
        // the error sits on the block's own header
        if node.kind == BlockKind::HaveBlock && in_stated_type(node, diag) {
            return Ok(act(RepairKind::RemoveBlock, node));
        }
        return Ok(act(replace_or_remove(node), node));
    }
    let parent = root.parent_of(node.id).unwrap_or(root);
    if parent.kind == BlockKind::Root {
        let kind = if parent.code_children() > 1 { RepairKind::RemoveLine } else { RepairKind::RemoveBlock };
        return Ok(act(kind, node));
    }
    if history.count(parent) == 0 && parent.code_children() > 1 {
        return Ok(act(RepairKind::RemoveLine, node));
    }
    Ok(act(replace_or_remove(parent), parent))
}

/// Apply an action to the script it was chosen for (or to the same
/// script during replay).
pub fn apply_action(script: &ProofScript, action: &RepairAction) -> Result<ProofScript, EditError> {
    let (line, col) = action.target.start();
    let node = script.node_starting_at(line, col).ok_or(EditError::NodeNotFound)?;
    match action.kind {
        RepairKind::RemoveLine => script.remove_line(node.span),
        RepairKind::RemoveBlock => script.remove_block(node.id),
        RepairKind::ReplaceBlockWithSorry => script.replace_block_with_sorry(node.id),
        RepairKind::InsertSorry => script.append_sorry(node.id),
    }
}

pub fn replay(original: &ProofScript, actions: &[RepairAction]) -> Result<ProofScript, EditError> {
    actions.iter().try_fold(original.clone(), |s, a| apply_action(&s, a))
}

/// Edit `script` until it compiles, leaving `sorry` where sub-proofs fail.
pub fn sorrify<C: Compiler + ?Sized>(
    script: &ProofScript,
    compiler: &mut C,
    config: &SorrifyConfig,
) -> Result<SorrifiedScript, SorrifyError> {
    let cap = iteration_cap(script);
    let mut current = script.clone();
    let mut actions = Vec::new();
    let mut history = AttemptHistory::default();
    for iteration in 0..cap {
        let result = check_with_preamble(compiler, &current, config.timeout)?;
        match result.status {
            CompileStatus::Pass | CompileStatus::PassWithSorries => {
                return Ok(SorrifiedScript { script: current, actions, compile_result: result, iterations: iteration });
            }
            CompileStatus::Timeout | CompileStatus::ReplCrash => return Err(SorrifyError::NoVerdict(result.status)),
            CompileStatus::Fail => {}
        }
        let diag = select_diagnostic(&result).expect("Fail carries an error");
        let action = match choose_repair(diag, &current, &history) {
            Ok(a) => a,
            Err(RepairError::NoEnclosingNode(_)) => return Err(SorrifyError::StatementMalformed(result.diagnostics)),
        };
        tracing::debug!(kind = ?action.kind, line = action.target.start_line, msg = %diag.message, "repair");
        if action.kind == RepairKind::RemoveLine {
            if let Some(parent) = current
                .node_starting_at(action.target.start_line, action.target.start_col)
                .and_then(|n| current.root.parent_of(n.id))
            {
                history.record(parent);
            }
        }
        current = apply_action(&current, &action)?;
        actions.push(action);
    }
    Err(SorrifyError::Nonterminating { iterations: cap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::repl::{Position, Severity};

    fn err(line: usize, col: usize, msg: &str) -> Diagnostic {
        Diagnostic { severity: Severity::Error, pos: Position::new(line, col), end_pos: None, message: msg.into() }
    }

    const FOUR: &str = "theorem t (x : ℝ) (h : x = 2) : x + x = 4 := by\n  have h2 : x = 2 := by\n    simp\n    foo_bar\n    norm_num\n    exact h\n  linarith\n";

    #[test]
    fn line_then_block() {
        let s = ProofScript::parse_source(FOUR).unwrap();
        let mut hist = AttemptHistory::default();
        let a = choose_repair(&err(4, 4, "unknown tactic"), &s, &hist).unwrap();
        assert_eq!(a.kind, RepairKind::RemoveLine);
        hist.record(&s.root.children[0]);
        let s2 = apply_action(&s, &a).unwrap();
        assert!(!s2.serialize().contains("foo_bar"));
        let b = choose_repair(&err(4, 4, "norm_num failed"), &s2, &hist).unwrap();
        assert_eq!(b.kind, RepairKind::ReplaceBlockWithSorry);
        let s3 = apply_action(&s2, &b).unwrap();
        assert!(s3.serialize().contains("have h2 : x = 2 := by sorry\n  linarith"));
    }

    #[test]
    fn unsolved_goals_insert() {
        let s = ProofScript::parse_source(FOUR).unwrap();
        let a = choose_repair(&err(2, 21, "unsolved goals\nx : ℝ\n⊢ x = 2"), &s, &AttemptHistory::default()).unwrap();
        assert_eq!(a.kind, RepairKind::InsertSorry);
        let out = apply_action(&s, &a).unwrap();
        assert!(out.serialize().contains("    exact h\n    sorry\n  linarith"));
        let r = choose_repair(&err(1, 46, "unsolved goals\n⊢ x + x = 4"), &s, &AttemptHistory::default()).unwrap();
        let out = apply_action(&s, &r).unwrap();
        assert!(out.serialize().ends_with("  linarith\n  sorry\n"), "{}", out.serialize());
    }

    #[test]
    fn statement_errors_have_no_node() {
        let s = ProofScript::parse_source(FOUR).unwrap();
        let e = choose_repair(&err(1, 20, "unknown identifier 'z'"), &s, &AttemptHistory::default()).unwrap_err();
        assert!(matches!(e, RepairError::NoEnclosingNode(_)));
    }

    #[test]
    fn continuation_lines_are_one_unit() {
        let text = "theorem t (a b : ℝ) : 0 ≤ a ^ 2 + b ^ 2 := by\n  have h : 0 ≤ a ^ 2 := by positivity\n  nlinarith [sq_nonneg a,\n    bad_lemma b]\n";
        let s = ProofScript::parse_source(text).unwrap();
        let a = choose_repair(&err(4, 4, "unknown identifier 'bad_lemma'"), &s, &AttemptHistory::default()).unwrap();
        assert_eq!(a.kind, RepairKind::RemoveLine);
        assert_eq!(a.target.start_line, 3);
        let out = apply_action(&s, &a).unwrap();
        assert_eq!(out.serialize(), "theorem t (a b : ℝ) : 0 ≤ a ^ 2 + b ^ 2 := by\n  have h : 0 ≤ a ^ 2 := by positivity\n");
    }

    #[test]
    fn last_root_line_becomes_sorry() {
        let s = ProofScript::parse_source("theorem t : 1 = 2 := by\n  norm_num\n").unwrap();
        let a = choose_repair(&err(2, 2, "norm_num failed"), &s, &AttemptHistory::default()).unwrap();
        assert_eq!(a.kind, RepairKind::RemoveBlock);
        assert_eq!(apply_action(&s, &a).unwrap().serialize(), "theorem t : 1 = 2 := by\n  sorry\n");
    }

    #[test]
    fn selection_skips_unsolved_first() {
        let raw = serde_json::json!({"env": 0, "messages": [
            {"severity": "error", "pos": {"line": 2, "column": 2}, "data": "unsolved goals\n⊢ False"},
            {"severity": "error", "pos": {"line": 5, "column": 4}, "data": "linarith failed"}
        ]});
        let r = crate::repl::classify(&raw).unwrap();
        assert_eq!(select_diagnostic(&r).unwrap().pos.line, 5);
    }
}
