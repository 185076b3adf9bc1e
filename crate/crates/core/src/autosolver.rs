//! Close `sorry`s with Lean's own automation: the suggestions of `hint`
//! first, then a fixed suite of finishing tactics.

use serde::{Deserialize, Serialize};
use std::path::Path;
use std::time::Duration;

use crate::pp::check_with_preamble;
use crate::proof::ProofScript;
use crate::repl::{CompileResult, CompileStatus, Compiler, Diagnostic, SessionError, Severity};

pub const DEFAULT_CANDIDATE_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CandidateSource {
    Hint,
    Suite,
    Combination,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TacticCandidate {
    pub text: String,
    pub source: CandidateSource,
    pub rank: usize,
}

fn default_singles() -> Vec<String> {
    ["norm_num", "simp", "simp_all", "ring_nf", "norm_cast", "nlinarith", "linarith", "positivity", "omega", "field_simp"]
        .map(String::from)
        .to_vec()
}

fn default_first() -> Vec<String> {
    ["norm_num", "simp", "field_simp", "ring_nf"].map(String::from).to_vec()
}

fn default_then() -> Vec<String> {
    ["linarith", "nlinarith", "positivity"].map(String::from).to_vec()
}

fn default_max_combinations() -> usize {
    12
}

fn default_true() -> bool {
    true
}

fn default_timeout() -> Duration {
    DEFAULT_CANDIDATE_TIMEOUT
}

/// Which tactics to try. Loadable from a JSON file; missing fields keep
/// their defaults.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverConfig {
    #[serde(default = "default_singles")]
    pub singles: Vec<String>,
    /// Combinations are `first <;> then` over this product, in row order.
    #[serde(default = "default_first")]
    pub combine_first: Vec<String>,
    #[serde(default = "default_then")]
    pub combine_then: Vec<String>,
    #[serde(default = "default_max_combinations")]
    pub max_combinations: usize,
    #[serde(default = "default_true")]
    pub use_hint: bool,
    /// Per-candidate compile timeout.
    #[serde(skip, default = "default_timeout")]
    pub timeout: Duration,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            singles: default_singles(),
            combine_first: default_first(),
            combine_then: default_then(),
            max_combinations: default_max_combinations(),
            use_hint: true,
            timeout: DEFAULT_CANDIDATE_TIMEOUT,
        }
    }
}

impl SolverConfig {
    pub fn load(path: &Path) -> std::io::Result<SolverConfig> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

/// The suite: singles in configured order, then the combinations.
pub fn suite_candidates(config: &SolverConfig) -> Vec<TacticCandidate> {
    let singles = config.singles.iter().map(|t| (t.clone(), CandidateSource::Suite));
    let combos = config
        .combine_first
        .iter()
        .flat_map(|a| config.combine_then.iter().map(move |b| format!("{a} <;> {b}")))
        .take(config.max_combinations)
        .map(|t| (t, CandidateSource::Combination));
    singles
        .chain(combos)
        .filter(|(t, _)| !t.trim().is_empty() && !t.contains('\n'))
        .enumerate()
        .map(|(rank, (text, source))| TacticCandidate { text, source, rank })
        .collect()
}

/// A `hint` suggestion and whether it was reported as closing the goal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HintSuggestion {
    pub tactic: String,
    pub closes: bool,
}

/// Parse the `Try these:` messages of a `hint` run. Suggestions followed by
/// a `Remaining subgoals:` block only make progress.
pub fn parse_hint_output(message: &str) -> Vec<HintSuggestion> {
    let Some(rest) = message.trim_start().strip_prefix("Try these:") else {
        return Vec::new();
    };
    let mut out: Vec<HintSuggestion> = Vec::new();
    for line in rest.lines() {
        let t = line.trim();
        if let Some(tac) = t.strip_prefix('•') {
            out.push(HintSuggestion { tactic: tac.trim().to_string(), closes: true });
        } else if t.starts_with("Remaining subgoals") {
            if let Some(last) = out.last_mut() {
                last.closes = false;
            }
        }
    }
    out
}

/// One trial: the script with `tactic` in place of the sorry at `site`,
/// kept only if it compiles with strictly fewer sorries.
fn trial<C: Compiler + ?Sized>(
    compiler: &mut C,
    script: &ProofScript,
    site: (usize, usize),
    tactic: &str,
    timeout: Duration,
) -> Result<Option<(ProofScript, CompileResult)>, SessionError> {
    let Ok(candidate) = script.replace_sorry_at(site.0, site.1, tactic) else {
        return Ok(None);
    };
    if candidate.count_sorries() >= script.count_sorries() {
        return Ok(None);
    }
    let r = check_with_preamble(compiler, &candidate, timeout)?;
    Ok(matches!(r.status, CompileStatus::Pass | CompileStatus::PassWithSorries).then_some((candidate, r)))
}

fn on_line(d: &Diagnostic, line: usize) -> bool {
    d.severity == Severity::Info && d.pos.line == line
}

fn hint_suggestions<C: Compiler + ?Sized>(
    compiler: &mut C,
    script: &ProofScript,
    site: (usize, usize),
    timeout: Duration,
) -> Result<Vec<String>, SessionError> {
    let Ok(probe) = script.replace_sorry_at(site.0, site.1, "hint") else {
        return Ok(Vec::new());
    };
    let r = check_with_preamble(compiler, &probe, timeout)?;
    if matches!(r.status, CompileStatus::Timeout | CompileStatus::ReplCrash) {
        return Ok(Vec::new());
    }
    let mut out: Vec<String> = Vec::new();
    for d in r.diagnostics.iter().filter(|d| on_line(d, site.0)) {
        for s in parse_hint_output(&d.message) {
            if s.closes && !s.tactic.is_empty() && !s.tactic.contains("sorry") && !out.contains(&s.tactic) {
                out.push(s.tactic);
            }
        }
    }
    Ok(out)
}

/// `hint` suggestions for the sorry at `site` that close its goal, each
/// confirmed by a trial compile.
pub fn hint_candidates<C: Compiler + ?Sized>(
    compiler: &mut C,
    script: &ProofScript,
    site: (usize, usize),
    timeout: Duration,
) -> Result<Vec<TacticCandidate>, SessionError> {
    let mut out = Vec::new();
    for tactic in hint_suggestions(compiler, script, site, timeout)? {
        if trial(compiler, script, site, &tactic, timeout)?.is_some() {
            let rank = out.len();
            out.push(TacticCandidate { text: tactic, source: CandidateSource::Hint, rank });
        }
    }
    Ok(out)
}

/// A committed replacement: the sorry at `site` became `tactic`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Commit {
    pub site: (usize, usize),
    pub goal: Option<String>,
    pub tactic: TacticCandidate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solved {
    pub script: ProofScript,
    pub compile_result: CompileResult,
    pub commits: Vec<Commit>,
    /// Compiles spent, including the `hint` probes.
    pub trials: usize,
}

impl Solved {
    pub fn remaining(&self) -> usize {
        self.script.count_sorries()
    }
}

/// Counts compiles passing through.
struct Counting<'a, C: ?Sized> {
    inner: &'a mut C,
    calls: usize,
}

impl<C: Compiler + ?Sized> Compiler for Counting<'_, C> {
    fn check(&mut self, code: &str, timeout: Duration) -> Result<CompileResult, SessionError> {
        self.calls += 1;
        self.inner.check(code, timeout)
    }
}

/// Try to close every sorry of a compiling script, in position order.
/// `result` is the script's current compile result (with the pp options).
pub fn solve_sorries<C: Compiler + ?Sized>(
    script: &ProofScript,
    result: &CompileResult,
    compiler: &mut C,
    config: &SolverConfig,
) -> Result<Solved, SessionError> {
    let mut compiler = Counting { inner: compiler, calls: 0 };
    let mut current = script.clone();
    let mut current_result = result.clone();
    let mut commits = Vec::new();
    let suite = suite_candidates(config);
    let mut index = 0;
    while let Some(&site) = current.sorry_positions().get(index) {
        let goal = current_result
            .sorries
            .iter()
            .find(|s| (s.pos.line, s.pos.column) == site)
            .map(|s| s.goal.clone());
        let mut committed = None;
        if config.use_hint {
            for (rank, tactic) in hint_suggestions(&mut compiler, &current, site, config.timeout)?.into_iter().enumerate() {
                if let Some(hit) = trial(&mut compiler, &current, site, &tactic, config.timeout)? {
                    committed = Some((TacticCandidate { text: tactic, source: CandidateSource::Hint, rank }, hit));
                    break;
                }
            }
        }
        if committed.is_none() {
            for cand in &suite {
                if let Some(hit) = trial(&mut compiler, &current, site, &cand.text, config.timeout)? {
                    committed = Some((cand.clone(), hit));
                    break;
                }
            }
        }
        match committed {
            Some((tactic, (next, r))) => {
                tracing::debug!(line = site.0, tactic = %tactic.text, "closed sorry");
                commits.push(Commit { site, goal, tactic });
                current = next;
                current_result = r;
            }
            None => index += 1,
        }
    }
    Ok(Solved { script: current, compile_result: current_result, commits, trials: compiler.calls })
}

/// Re-apply recorded commits to the script they were found on.
pub fn replay_commits(script: &ProofScript, commits: &[Commit]) -> Result<ProofScript, crate::proof::EditError> {
    commits.iter().try_fold(script.clone(), |s, c| s.replace_sorry_at(c.site.0, c.site.1, &c.tactic.text))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_shape() {
        let c = suite_candidates(&SolverConfig::default());
        let singles = c.iter().filter(|t| t.source == CandidateSource::Suite).count();
        let combos = c.iter().filter(|t| t.source == CandidateSource::Combination).count();
        assert!(singles >= 10);
        assert!(combos <= 12 && combos > 0);
        assert_eq!(c[0].text, "norm_num");
        assert!(c.iter().enumerate().all(|(i, t)| t.rank == i && !t.text.contains('\n')));
        assert_eq!(c, suite_candidates(&SolverConfig::default()));
        let ring = c.iter().position(|t| t.text == "ring_nf").unwrap();
        let nl = c.iter().position(|t| t.text == "nlinarith").unwrap();
        assert!(ring < nl);
    }

    #[test]
    fn combination_cap() {
        let cfg = SolverConfig {
            combine_first: vec!["a".into(), "b".into(), "c".into(), "d".into(), "e".into()],
            combine_then: vec!["x".into(), "y".into(), "z".into()],
            ..SolverConfig::default()
        };
        let combos: Vec<_> =
            suite_candidates(&cfg).into_iter().filter(|t| t.source == CandidateSource::Combination).collect();
        assert_eq!(combos.len(), 12);
        assert_eq!(combos[0].text, "a <;> x");
    }

    #[test]
    fn hint_parsing() {
        let msg = "Try these:\n• linarith\n• simp\nRemaining subgoals:\n⊢ a = c\n• exact Nat.add_comm a b";
        let s = parse_hint_output(msg);
        assert_eq!(s.len(), 3);
        assert!(s[0].closes);
        assert!(!s[1].closes);
        assert_eq!(s[2].tactic, "exact Nat.add_comm a b");
        assert!(parse_hint_output("declaration uses 'sorry'").is_empty());
    }

    #[test]
    fn config_file_defaults() {
        let c: SolverConfig = serde_json::from_str(r#"{"singles": ["ring"]}"#).unwrap();
        assert_eq!(c.singles, vec!["ring"]);
        assert_eq!(c.max_combinations, 12);
        assert_eq!(c.timeout, DEFAULT_CANDIDATE_TIMEOUT);
    }
}
