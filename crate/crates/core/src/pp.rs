//! Pretty-printer options that make goal states self-contained (explicit
//! numeric types, coercions and binder types), so goals can be restated
//! as standalone lemmas.

use std::time::Duration;

use crate::proof::ProofScript;
use crate::repl::{CompileResult, Compiler, SessionError};

const PREAMBLE: &str = "\
set_option pp.instanceTypes true
set_option pp.numericTypes true
set_option pp.coercions.types true
set_option pp.letVarTypes true
set_option pp.structureInstanceTypes true
set_option pp.mvars.withType true
set_option pp.coercions true
set_option pp.funBinderTypes true
set_option pp.piBinderTypes true
";

pub const PREAMBLE_LINES: usize = 9;

pub fn pp_preamble() -> &'static str {
    PREAMBLE
}

/// Remove every preamble line from `text`.
pub fn strip_preamble(text: &str) -> String {
    let lines: Vec<&str> = PREAMBLE.lines().collect();
    let kept: Vec<&str> = text.split('\n').filter(|l| !lines.contains(&l.trim_end())).collect();
    kept.join("\n")
}

/// `script`'s text with the preamble spliced in just before the
/// declaration, and the 1-based line where the preamble starts.
pub fn with_preamble(script: &ProofScript) -> (String, usize) {
    let text = script.serialize();
    let header = script.preamble_text();
    if header.is_empty() || header.ends_with('\n') {
        let at = header.matches('\n').count() + 1;
        (format!("{header}{PREAMBLE}{}", &text[header.len()..]), at)
    } else {
        (format!("{PREAMBLE}{text}"), 1)
    }
}

/// Shift positions back to the un-prefixed file; anything reported
/// inside the preamble itself is dropped.
pub fn unshift(mut result: CompileResult, at: usize) -> CompileResult {
    let map = |line: usize| -> Option<usize> {
        if line < at {
            Some(line)
        } else if line < at + PREAMBLE_LINES {
            None
        } else {
            Some(line - PREAMBLE_LINES)
        }
    };
    result.diagnostics.retain_mut(|d| match map(d.pos.line) {
        Some(l) => {
            d.pos.line = l;
            if let Some(e) = &mut d.end_pos {
                e.line = map(e.line).unwrap_or(l);
            }
            true
        }
        None => false,
    });
    result.sorries.retain_mut(|s| match map(s.pos.line) {
        Some(l) => {
            s.pos.line = l;
            if let Some(e) = &mut s.end_pos {
                e.line = map(e.line).unwrap_or(l);
            }
            true
        }
        None => false,
    });
    result
}

/// Compile `script` with the preamble; positions refer to `script`.
pub fn check_with_preamble<C: Compiler + ?Sized>(
    compiler: &mut C,
    script: &ProofScript,
    timeout: Duration,
) -> Result<CompileResult, SessionError> {
    let (text, at) = with_preamble(script);
    Ok(unshift(compiler.check(&text, timeout)?, at))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::repl::{classify, CompileStatus};
    use serde_json::json;
    use std::collections::BTreeSet;

    #[test]
    fn nine_distinct_options() {
        let lines: BTreeSet<&str> = pp_preamble().lines().collect();
        assert_eq!(lines.len(), 9);
        assert!(lines.iter().all(|l| l.starts_with("set_option pp.")));
    }

    #[test]
    fn splice_and_strip() {
        let s = ProofScript::parse_source("import Mathlib\n\ntheorem t : True := by\n  trivial\n").unwrap();
        let (text, at) = with_preamble(&s);
        assert_eq!(at, 3);
        assert!(text.starts_with("import Mathlib\n\nset_option pp.instanceTypes true\n"));
        assert_eq!(strip_preamble(&text), s.serialize());
        assert!(!strip_preamble(&text).contains("set_option pp."));
    }

    #[test]
    fn positions_shift_back() {
        let raw = json!({"env": 1, "messages": [
            {"severity": "error", "pos": {"line": 14, "column": 2}, "endPos": {"line": 14, "column": 9}, "data": "x"},
            {"severity": "warning", "pos": {"line": 4, "column": 0}, "data": "inside preamble"},
            {"severity": "warning", "pos": {"line": 1, "column": 0}, "data": "header"}
        ]});
        let r = unshift(classify(&raw).unwrap(), 3);
        assert_eq!(r.status, CompileStatus::Fail);
        assert_eq!(r.diagnostics.len(), 2);
        assert_eq!(r.diagnostics[0].pos.line, 5);
        assert_eq!(r.diagnostics[0].end_pos.unwrap().line, 5);
    }
}
