//! Restate open goals as standalone lemmas and splice their proofs back.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;
use std::time::Duration;
use thiserror::Error;

use crate::proof::lex::{self, is_ident_char};
use crate::proof::{is_valid_ident, EditError, ParseError, ProofScript, TheoremStatement};
use crate::repl::{Compiler, Diagnostic, SorryInfo};
use crate::sorrifier::{validate_statement, SorrifyError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinderKind {
    Explicit,
    /// An anonymous instance, restated as `[T]`.
    Instance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub name: String,
    pub ty: String,
    pub binder: BinderKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalContext {
    pub hypotheses: Vec<Hypothesis>,
    pub target: String,
    /// Theorem the goal came from.
    pub theorem: String,
    /// Position of the sorry in the parent script.
    pub site: (usize, usize),
    pub fresh_name: String,
    /// Inaccessible names (`h✝`) and the accessible names given to them,
    /// in context order.
    pub renamed: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error("cannot split goal into hypotheses and target: {0}")]
    UnparseableGoal(String),
}

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("restated goal does not elaborate")]
    StatementRejected(Vec<Diagnostic>),
    #[error("restated goal is not a valid declaration: {0}")]
    Malformed(#[from] ParseError),
    #[error(transparent)]
    Check(SorrifyError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpliceError {
    #[error("no sorry at {0}:{1} in the parent")]
    SiteVanished(usize, usize),
    #[error("cannot splice a multi-line proof in front of `{0}`")]
    TrailingCode(String),
    #[error(transparent)]
    Edit(#[from] EditError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpliceMode {
    /// Put the sub-proof's tactics where the sorry was.
    #[default]
    Inline,
    /// Add the sub-lemma above the theorem and `exact` it.
    Standalone,
}

/// Identifier tokens of `text`, comments and strings excluded.
pub fn identifiers(text: &str) -> BTreeSet<String> {
    let masked = lex::mask(text).unwrap_or_else(|_| text.to_string());
    masked
        .split(|c: char| !is_ident_char(c) && c != '✝')
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// `{theorem}_sub{ordinal}_{nonce}` where the nonce is a short hash of the
/// goal text, re-drawn while it collides with anything in `taken`.
pub fn fresh_name(theorem: &str, ordinal: usize, goal: &str, taken: &BTreeSet<String>) -> String {
    let mut salt = 0u32;
    loop {
        let mut h = Sha256::new();
        h.update(goal.as_bytes());
        h.update(ordinal.to_le_bytes());
        h.update(salt.to_le_bytes());
        let hex: String = h.finalize().iter().take(3).map(|b| format!("{b:02x}")).collect();
        let name = format!("{theorem}_sub{ordinal}_{hex}");
        if !taken.contains(&name) {
            return name;
        }
        salt += 1;
    }
}

/// Split a pretty-printed goal into hypothesis entries and the target.
/// Continuation lines (indented) belong to the entry above them.
fn segment(goal: &str) -> Result<(Vec<String>, String), ExtractError> {
    let bad = || ExtractError::UnparseableGoal(goal.to_string());
    let mut entries: Vec<String> = Vec::new();
    let mut target: Option<String> = None;
    for (i, line) in goal.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if i == 0 && line.starts_with("case ") {
            continue;
        }
        let continued = line.starts_with(' ');
        if let Some(t) = target.as_mut() {
            if !continued {
                // a second goal
                return Err(bad());
            }
            t.push(' ');
            t.push_str(line.trim());
        } else if let Some(rest) = line.strip_prefix('⊢') {
            target = Some(rest.trim().to_string());
        } else if continued {
            let last = entries.last_mut().ok_or_else(bad)?;
            last.push(' ');
            last.push_str(line.trim());
        } else {
            entries.push(line.trim().to_string());
        }
    }
    let target = target.filter(|t| !t.is_empty()).ok_or_else(bad)?;
    Ok((entries, target))
}

/// Column of the first ` : ` outside brackets.
fn type_colon(entry: &str) -> Option<usize> {
    let mut depth = 0i32;
    let chars: Vec<char> = entry.chars().collect();
    let mut byte = 0;
    for i in 0..chars.len() {
        match chars[i] {
            '(' | '[' | '{' | '⟨' => depth += 1,
            ')' | ']' | '}' | '⟩' => depth -= 1,
            ':' if depth == 0 && i > 0 && chars[i - 1] == ' ' && chars.get(i + 1) == Some(&' ') => {
                return Some(byte);
            }
            _ => {}
        }
        byte += chars[i].len_utf8();
    }
    None
}

fn replace_ident(text: &str, from: &str, to: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let pat: Vec<char> = from.chars().collect();
    let glued = |c: Option<&char>| c.is_some_and(|c| is_ident_char(*c) || *c == '✝');
    let mut out = String::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i..].starts_with(&pat) && (i == 0 || !glued(chars.get(i - 1))) && !glued(chars.get(i + pat.len())) {
            out.push_str(to);
            i += pat.len();
        } else {
            out.push(chars[i]);
            i += 1;
        }
    }
    out
}

/// Parse the goal of `sorry` (as printed with the pp options) into a
/// context for a sub-lemma of `parent`.
pub fn extract_goal(sorry: &SorryInfo, parent: &ProofScript, ordinal: usize) -> Result<GoalContext, ExtractError> {
    let bad = || ExtractError::UnparseableGoal(sorry.goal.clone());
    if sorry.goal.contains("?m.") || sorry.goal.contains("?_") {
        return Err(bad());
    }
    let (entries, mut target) = segment(&sorry.goal)?;
    let mut taken = identifiers(&parent.serialize());
    taken.extend(identifiers(&sorry.goal));
    let mut hypotheses = Vec::new();
    let mut renamed: Vec<(String, String)> = Vec::new();
    for e in &entries {
        let at = type_colon(e).ok_or_else(bad)?;
        let (names, ty) = (&e[..at], e[at + 1..].trim());
        if ty.is_empty() || ty.contains(":=") {
            // `let` bindings have no faithful binder form
            return Err(bad());
        }
        for name in names.split_whitespace() {
            if is_valid_ident(name) {
                hypotheses.push(Hypothesis { name: name.to_string(), ty: ty.to_string(), binder: BinderKind::Explicit });
                continue;
            }
            let base = name.trim_end_matches('✝').trim_end_matches(|c: char| c.is_ascii_digit() || c == '✝');
            if base.is_empty() || !is_valid_ident(base) || !name.contains('✝') {
                return Err(bad());
            }
            let binder = if base == "inst" { BinderKind::Instance } else { BinderKind::Explicit };
            let mut k = 1;
            let fresh = loop {
                let cand = format!("{base}_{k}");
                if !taken.contains(&cand) {
                    break cand;
                }
                k += 1;
            };
            taken.insert(fresh.clone());
            renamed.push((name.to_string(), fresh.clone()));
            hypotheses.push(Hypothesis { name: fresh, ty: ty.to_string(), binder });
        }
    }
    for (from, to) in &renamed {
        target = replace_ident(&target, from, to);
        for h in hypotheses.iter_mut() {
            h.ty = replace_ident(&h.ty, from, to);
        }
    }
    let mut seen = BTreeSet::new();
    if !hypotheses.iter().all(|h| seen.insert(h.name.clone())) {
        // a shadowed name: later hypotheses could not refer to the earlier one
        return Err(bad());
    }
    let theorem = parent.statement.name.clone();
    let fresh_name = fresh_name(&theorem, ordinal, &sorry.goal, &taken);
    Ok(GoalContext { hypotheses, target, theorem, site: (sorry.pos.line, sorry.pos.column), fresh_name, renamed })
}

/// The context as a declaration: `theorem <fresh> (h : T) ... : target := by`,
/// under the parent's header.
pub fn transform_goal(ctx: &GoalContext, header: &str) -> Result<TheoremStatement, ParseError> {
    let mut text = format!("theorem {}", ctx.fresh_name);
    for h in &ctx.hypotheses {
        match h.binder {
            BinderKind::Explicit => text.push_str(&format!(" ({} : {})", h.name, h.ty)),
            BinderKind::Instance => text.push_str(&format!(" [{}]", h.ty)),
        }
    }
    text.push_str(&format!(" :\n    {} := by", ctx.target));
    TheoremStatement::new(header, text, None)
}

/// [`transform_goal`] checked by compiling the statement with a `sorry` body.
pub fn transform_checked<C: Compiler + ?Sized>(
    ctx: &GoalContext,
    header: &str,
    compiler: &mut C,
    timeout: Duration,
) -> Result<TheoremStatement, TransformError> {
    let st = transform_goal(ctx, header)?;
    match validate_statement(&st, compiler, timeout) {
        Ok(_) => Ok(st),
        Err(SorrifyError::StatementMalformed(d)) => Err(TransformError::StatementRejected(d)),
        Err(e) => Err(TransformError::Check(e)),
    }
}

/// Code lines of a proof body, dedented, with trailing blank lines cut.
fn body_of(sub: &ProofScript) -> Vec<String> {
    let body = sub.body_lines();
    let mut lines: Vec<String> = Vec::new();
    if !body[0].trim().is_empty() {
        lines.push(body[0].trim().to_string());
    }
    let rest = &body[1..];
    let dedent = rest
        .iter()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.len() - l.trim_start().len())
        .min()
        .unwrap_or(0);
    lines.extend(rest.iter().map(|l| if l.trim().is_empty() { String::new() } else { l[dedent..].trim_end().to_string() }));
    while lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    lines
}

fn rename_step(ctx: &GoalContext) -> Option<String> {
    (!ctx.renamed.is_empty())
        .then(|| format!("rename_i {}", ctx.renamed.iter().map(|(_, n)| n.as_str()).collect::<Vec<_>>().join(" ")))
}

/// Replace the sorry at `ctx.site` in `parent` with the proof in `sub`.
pub fn splice_subproof(
    parent: &ProofScript,
    ctx: &GoalContext,
    sub: &ProofScript,
    mode: SpliceMode,
) -> Result<ProofScript, SpliceError> {
    let (line, col) = ctx.site;
    if !parent.sorry_positions().contains(&(line, col)) {
        return Err(SpliceError::SiteVanished(line, col));
    }
    match mode {
        SpliceMode::Inline => {
            let mut steps: Vec<String> = rename_step(ctx).into_iter().collect();
            steps.extend(body_of(sub));
            splice_lines_at(parent, line, col, &steps)
        }
        SpliceMode::Standalone => {
            let args: Vec<&str> = ctx
                .hypotheses
                .iter()
                .filter(|h| h.binder == BinderKind::Explicit)
                .map(|h| h.name.as_str())
                .collect();
            let mut call = format!("exact {}", ctx.fresh_name);
            for a in args {
                call.push(' ');
                call.push_str(a);
            }
            let step = match rename_step(ctx) {
                Some(r) => format!("({r}; {call})"),
                None => call,
            };
            let replaced = parent.replace_sorry_at(line, col, &step)?;
            let header_len = sub.statement.header.len();
            let lemma = format!("{}\n\n", sub.serialize()[header_len..].trim_end());
            Ok(replaced.with_extra_preamble(&lemma)?)
        }
    }
}

fn splice_lines_at(parent: &ProofScript, line: usize, col: usize, steps: &[String]) -> Result<ProofScript, SpliceError> {
    if steps.len() == 1 {
        return Ok(parent.replace_sorry_at(line, col, &steps[0])?);
    }
    let i = line - parent.by_line();
    let text = &parent.body_lines()[i];
    let local_col = if i == 0 { col - parent.by_end_col() } else { col };
    let start = lex::byte_of_col(text, local_col);
    let end = start + "sorry".len();
    let (before, after) = (&text[..start], &text[end..]);
    let after_code = lex::mask(after).unwrap_or_default();
    if !after_code.trim().is_empty() {
        return Err(SpliceError::TrailingCode(after.trim().to_string()));
    }
    let mut out: Vec<String> = Vec::new();
    let indent = if before.trim().is_empty() {
        // the sorry stands alone: its column is the block's indentation
        if i == 0 {
            // right after the statement's `by`
            out.push(format!("{}{}", before.trim_end(), after.trim_end()));
            2
        } else {
            local_col
        }
    } else {
        out.push(format!("{}{}", before.trim_end(), after.trim_end()));
        let own = if i == 0 { 0 } else { text.len() - text.trim_start().len() };
        own + 2
    };
    let pad = " ".repeat(indent);
    out.extend(steps.iter().map(|s| if s.is_empty() { String::new() } else { format!("{pad}{s}") }));
    Ok(parent.splice_lines(line, line, out)?)
}
