//! Regex rewrite rules for superficial syntax mistakes (mostly Lean 3
//! leftovers) in model output.

use regex::Regex;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

use crate::proof::lex::{self, Region};
use crate::repl::CompileResult;

const DEFAULT_RULES: &str = include_str!("../rules/default.jsonl");

/// Passes of a single rule before it counts as runaway.
pub const MAX_PASSES: usize = 100;
/// Full sweeps over the table.
pub const MAX_SWEEPS: usize = 3;

const SENTINEL_BASE: u32 = 0xF0000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    WholeFile,
    PerLine,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteRule {
    pub id: String,
    pub pattern: String,
    pub replacement: String,
    pub scope: Scope,
    pub description: String,
}

#[derive(Debug, Error)]
pub enum RefineError {
    #[error("rule `{rule}` still changing the text after {MAX_PASSES} passes")]
    RuleBudgetExceeded { rule: String },
    #[error("rule `{rule}` has an invalid pattern: {reason}")]
    BadPattern { rule: String, reason: String },
    #[error("rules file line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("cannot read rules file: {0}")]
    Io(#[from] std::io::Error),
}

/// A validated, ordered rule table.
#[derive(Debug, Clone)]
pub struct RuleSet {
    rules: Vec<(RewriteRule, Regex)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Refined {
    pub text: String,
    /// Ids of the rules that changed the text, in first-use order.
    pub applied: Vec<String>,
}

impl RuleSet {
    pub fn new(rules: Vec<RewriteRule>) -> Result<Self, RefineError> {
        let rules = rules
            .into_iter()
            .map(|r| {
                let re = Regex::new(&r.pattern)
                    .map_err(|e| RefineError::BadPattern { rule: r.id.clone(), reason: e.to_string() })?;
                Ok((r, re))
            })
            .collect::<Result<_, RefineError>>()?;
        Ok(RuleSet { rules })
    }

    /// Parse the line-oriented table: one JSON object per line; blank
    /// lines and lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self, RefineError> {
        let mut rules = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let rule: RewriteRule =
                serde_json::from_str(t).map_err(|e| RefineError::Syntax { line: i + 1, reason: e.to_string() })?;
            rules.push(rule);
        }
        Self::new(rules)
    }

    pub fn load(path: &Path) -> Result<Self, RefineError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (r, _) in &self.rules {
            out.push_str(&serde_json::to_string(r).expect("rule serializes"));
            out.push('\n');
        }
        out
    }

    pub fn rules(&self) -> impl Iterator<Item = &RewriteRule> {
        self.rules.iter().map(|(r, _)| r)
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Only the rules with these ids, in table order.
    pub fn subset(&self, ids: &[&str]) -> RuleSet {
        RuleSet { rules: self.rules.iter().filter(|(r, _)| ids.contains(&r.id.as_str())).cloned().collect() }
    }
}

pub fn default_ruleset() -> RuleSet {
    RuleSet::parse(DEFAULT_RULES).expect("shipped rules are valid")
}

/// Source with every comment and string literal collapsed to one
/// private-use sentinel char.
struct Masked {
    text: String,
    regions: Vec<String>,
}

fn mask(source: &str) -> Option<Masked> {
    let kinds = lex::classify(source).ok()?;
    let chars: Vec<char> = source.chars().collect();
    let mut text = String::new();
    let mut regions = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if kinds[i] == Region::Code {
            text.push(chars[i]);
            i += 1;
            continue;
        }
        let kind = kinds[i];
        let start = i;
        while i < chars.len() && kinds[i] == kind && chars[i] != '\n' {
            i += 1;
        }
        if i == start {
            // a newline inside a block comment stays visible
            text.push('\n');
            i += 1;
            continue;
        }
        let id = char::from_u32(SENTINEL_BASE + regions.len() as u32)?;
        regions.push(chars[start..i].iter().collect());
        text.push(id);
    }
    Some(Masked { text, regions })
}

fn sentinels(text: &str) -> BTreeMap<char, usize> {
    let mut m = BTreeMap::new();
    for c in text.chars().filter(|c| (*c as u32) >= SENTINEL_BASE) {
        *m.entry(c).or_default() += 1;
    }
    m
}

fn unmask(text: &str, regions: &[String]) -> String {
    text.chars()
        .map(|c| {
            let k = (c as u32).wrapping_sub(SENTINEL_BASE) as usize;
            if (c as u32) >= SENTINEL_BASE && k < regions.len() {
                regions[k].clone()
            } else {
                c.to_string()
            }
        })
        .collect()
}

fn apply_once(rule: &RewriteRule, re: &Regex, text: &str) -> String {
    match rule.scope {
        Scope::WholeFile => re.replace_all(text, rule.replacement.as_str()).into_owned(),
        Scope::PerLine => text
            .split('\n')
            .map(|l| re.replace_all(l, rule.replacement.as_str()).into_owned())
            .collect::<Vec<_>>()
            .join("\n"),
    }
}

/// Apply `rules` in table order, each to a fixpoint, for at most
/// [`MAX_SWEEPS`] sweeps over the table. Comments and string literals are
/// never touched; a rewrite that would drop or duplicate one is rejected.
pub fn refine(source: &str, rules: &RuleSet) -> Result<Refined, RefineError> {
    let Some(masked) = mask(source) else {
        return Ok(Refined { text: source.to_string(), applied: Vec::new() });
    };
    let protected = sentinels(&masked.text);
    let mut text = masked.text;
    let mut applied: Vec<String> = Vec::new();
    for _ in 0..MAX_SWEEPS {
        let mut changed = false;
        for (rule, re) in &rules.rules {
            let mut passes = 0;
            loop {
                let next = apply_once(rule, re, &text);
                if next == text || sentinels(&next) != protected {
                    break;
                }
                passes += 1;
                if passes > MAX_PASSES {
                    return Err(RefineError::RuleBudgetExceeded { rule: rule.id.clone() });
                }
                text = next;
                changed = true;
                if !applied.contains(&rule.id) {
                    applied.push(rule.id.clone());
                }
            }
        }
        if !changed {
            break;
        }
    }
    Ok(Refined { text: unmask(&text, &masked.regions), applied })
}

/// Drop every comment. Lines left without code are removed; blank lines
/// are kept. Unparseable text is returned unchanged.
pub fn strip_comments(source: &str) -> String {
    let Ok(kinds) = lex::classify(source) else {
        return source.to_string();
    };
    let mut out: Vec<String> = Vec::new();
    let mut line = String::new();
    let mut had_comment = false;
    let flush = |line: &mut String, had: &mut bool, out: &mut Vec<String>| {
        if !(*had && line.trim().is_empty()) {
            out.push(if *had { line.trim_end().to_string() } else { line.clone() });
        }
        line.clear();
        *had = false;
    };
    for (c, k) in source.chars().zip(kinds) {
        if c == '\n' {
            flush(&mut line, &mut had_comment, &mut out);
        } else if k == Region::Comment {
            had_comment = true;
        } else {
            line.push(c);
        }
    }
    flush(&mut line, &mut had_comment, &mut out);
    out.join("\n")
}

/// Whether a failed compile looks like something the rules can fix: some
/// rule matches text on the line of an error.
pub fn should_refine(source: &str, result: &CompileResult, rules: &RuleSet) -> bool {
    if !result.has_errors() {
        return false;
    }
    let Some(masked) = mask(source) else {
        return false;
    };
    let error_lines: Vec<usize> = result.errors().map(|d| d.pos.line).collect();
    let line_of = |text: &str, byte: usize| text[..byte].matches('\n').count() + 1;
    rules.rules.iter().any(|(rule, re)| match rule.scope {
        Scope::WholeFile => re.find_iter(&masked.text).any(|m| {
            let (a, b) = (line_of(&masked.text, m.start()), line_of(&masked.text, m.end()));
            error_lines.iter().any(|l| (a..=b).contains(l))
        }),
        Scope::PerLine => {
            masked.text.split('\n').enumerate().any(|(i, l)| error_lines.contains(&(i + 1)) && re.is_match(l))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(s: &str) -> Refined {
        refine(s, &default_ruleset()).unwrap()
    }

    #[test]
    fn from_by_becomes_assign_by() {
        let r = run("theorem t : P from by tac");
        assert_eq!(r.text, "theorem t : P := by tac");
        assert_eq!(r.applied, vec!["from_by"]);
    }

    #[test]
    fn begin_end_becomes_by() {
        let r = run("theorem t (a b : ℝ) : a + b = b + a :=\nbegin\n  ring\nend");
        assert_eq!(r.text, "theorem t (a b : ℝ) : a + b = b + a :=\nby\n  ring");
        assert_eq!(r.applied, vec!["begin_end"]);
    }

    #[test]
    fn valid_lean4_unchanged() {
        let s = "theorem t (x : ℝ) (h : x = 2) : x + x = 4 := by\n  rw [h]\n  norm_num\n";
        let r = run(s);
        assert_eq!(r.text, s);
        assert!(r.applied.is_empty());
    }

    #[test]
    fn lean3_block_full_cleanup() {
        let s = "theorem t (x : ℝ) (h : 0 < x) : 0 < x * x :=\nbegin\n  have h2 : 0 < x, from h,\n  assume y,\n  rw h2 at h,\n  exact mul_pos h h,\nend";
        let r = run(s);
        assert_eq!(
            r.text,
            "theorem t (x : ℝ) (h : 0 < x) : 0 < x * x :=\nby\n  have h2 : 0 < x := h\n  intro y\n  rw [h2] at h\n  exact mul_pos h h"
        );
    }

    #[test]
    fn comments_and_strings_untouched() {
        let s = "theorem t : P := by -- from by begin\n  /- assume x,\n  rw h -/ simp\n  norm_num [\"real.pi\"]\n";
        let r = run(s);
        assert_eq!(r.text, s);
    }

    #[test]
    fn rule_that_would_eat_a_comment_is_rejected() {
        let rules = RuleSet::new(vec![RewriteRule {
            id: "eat".into(),
            pattern: "(?s)foo.*".into(),
            replacement: "bar".into(),
            scope: Scope::WholeFile,
            description: "test".into(),
        }])
        .unwrap();
        let r = refine("foo -- note\nx", &rules).unwrap();
        assert_eq!(r.text, "foo -- note\nx");
        assert!(r.applied.is_empty());
    }

    #[test]
    fn runaway_rule_is_caught() {
        let rules = RuleSet::new(vec![RewriteRule {
            id: "grow".into(),
            pattern: "a$".into(),
            replacement: "aa".into(),
            scope: Scope::PerLine,
            description: "test".into(),
        }])
        .unwrap();
        assert!(matches!(refine("a", &rules), Err(RefineError::RuleBudgetExceeded { .. })));
    }

    #[test]
    fn table_round_trips() {
        let d = default_ruleset();
        assert!(d.len() >= 5);
        assert!(d.rules().all(|r| !r.description.is_empty()));
        let again = RuleSet::parse(&d.to_text()).unwrap();
        assert_eq!(d.rules().collect::<Vec<_>>(), again.rules().collect::<Vec<_>>());
    }

    #[test]
    fn bad_rules_file() {
        assert!(matches!(RuleSet::parse("# c\n{not json}\n"), Err(RefineError::Syntax { line: 2, .. })));
        assert!(matches!(
            RuleSet::parse(r#"{"id":"x","pattern":"(","replacement":"","scope":"per-line","description":"d"}"#),
            Err(RefineError::BadPattern { .. })
        ));
    }

    #[test]
    fn comments_stripped() {
        let s = "theorem t : True := by\n  -- note\n  trivial -- done\n  /- block\n  more -/\n\n  rfl\n";
        assert_eq!(strip_comments(s), "theorem t : True := by\n  trivial\n\n  rfl\n");
        let q = "theorem t : \"-- not a comment\" = x := by rfl";
        assert_eq!(strip_comments(q), q);
    }

    #[test]
    fn lambda_and_namespaces() {
        let r = run("theorem t : True := by\n  have := fun x, real.sqrt x\n  trivial\n");
        assert_eq!(r.text, "theorem t : True := by\n  have := fun x => Real.sqrt x\n  trivial\n");
    }
}
