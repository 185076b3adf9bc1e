//! The recursive repair loop: generate, refine, sorrify, auto-solve, and
//! recurse on whatever goals remain, then splice and re-verify.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use crate::autosolver::{solve_sorries, SolverConfig};
use crate::goals::{extract_goal, splice_subproof, transform_checked, SpliceMode};
use crate::pp::{check_with_preamble, strip_preamble};
use crate::proof::{parse_script, proof_length, ParseError, ProofScript, TheoremStatement};
use crate::refiner::{default_ruleset, refine, should_refine, strip_comments, RuleSet};
use crate::repl::{CompileResult, CompileStatus, Compiler, Diagnostic, SessionError};
use crate::sorrifier::{sorrify, validate_statement, SorrifyConfig, SorrifyError};
use crate::llm::{Backend, BackendError, Decoding, GenerationMode, GenerationRequest, PriorAttempt};

#[derive(Debug, Clone)]
pub struct RepairConfig {
    pub max_depth: usize,
    pub k_per_goal: usize,
    pub compile_timeout: Duration,
    pub enable_syntax_refiner: bool,
    pub enable_auto_solver: bool,
    pub enable_llm_reinvoker: bool,
    pub rules: RuleSet,
    pub solver: SolverConfig,
    pub splice_mode: SpliceMode,
    /// Samples allowed per theorem, across all depths.
    pub sample_cap: u64,
    /// Re-enter once in feedback mode when depth 0 ends with sorries.
    pub feedback_retry: bool,
    /// Wall-clock ceiling per theorem.
    pub deadline: Option<Duration>,
    pub decoding: Decoding,
}

impl Default for RepairConfig {
    fn default() -> Self {
        RepairConfig {
            max_depth: 1,
            k_per_goal: 32,
            compile_timeout: crate::repl::DEFAULT_TIMEOUT,
            enable_syntax_refiner: true,
            enable_auto_solver: true,
            enable_llm_reinvoker: true,
            rules: default_ruleset(),
            solver: SolverConfig::default(),
            splice_mode: SpliceMode::Inline,
            sample_cap: 1100,
            feedback_retry: true,
            deadline: Some(Duration::from_secs(2 * 3600)),
            decoding: Decoding::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid repair config: {0}")]
pub struct ConfigError(pub String);

impl RepairConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.k_per_goal == 0 {
            return Err(ConfigError("k_per_goal must be at least 1".into()));
        }
        if self.sample_cap == 0 {
            return Err(ConfigError("sample cap must be at least 1".into()));
        }
        if self.compile_timeout.is_zero() {
            return Err(ConfigError("compile timeout must be positive".into()));
        }
        Ok(())
    }

    /// No repair module at all: plain verification of the sampled proofs.
    pub fn is_plain(&self) -> bool {
        !(self.enable_syntax_refiner || self.enable_auto_solver || self.enable_llm_reinvoker)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Module {
    SyntaxRefiner,
    AutoSolver,
    LlmReinvoker,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BudgetLedger {
    pub samples_used: u64,
    pub tokens_generated: u64,
    /// Some token counts were estimated rather than reported.
    pub tokens_estimated: bool,
    pub module_triggers: BTreeMap<Module, u64>,
    pub repl_calls: u64,
    /// Seconds.
    pub wall_time: f64,
}

impl BudgetLedger {
    pub fn triggers(&self, m: Module) -> u64 {
        self.module_triggers.get(&m).copied().unwrap_or(0)
    }

    fn trigger(&mut self, m: Module) {
        *self.module_triggers.entry(m).or_default() += 1;
    }

    pub fn merge(&mut self, other: &BudgetLedger) {
        self.samples_used += other.samples_used;
        self.tokens_generated += other.tokens_generated;
        self.tokens_estimated |= other.tokens_estimated;
        for (m, n) in &other.module_triggers {
            *self.module_triggers.entry(*m).or_default() += n;
        }
        self.repl_calls += other.repl_calls;
        self.wall_time += other.wall_time;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OutcomeStatus {
    Proved,
    PartialWithSorries,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum FailReason {
    StatementMalformed,
    BudgetExhausted,
    AllCandidatesMalformed,
    Nonterminating,
    Backend(String),
    Session(String),
}

/// One audit record. `tick` is a per-theorem logical clock, so logs of
/// deterministic runs compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEvent {
    pub tick: u64,
    pub depth: usize,
    pub module: String,
    pub action: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub name: String,
    pub status: OutcomeStatus,
    pub failure: Option<FailReason>,
    pub final_script: Option<String>,
    pub ledger: BudgetLedger,
    pub audit: Vec<AuditEvent>,
    pub proof_length: Option<usize>,
    /// False when a sampled proof compiled as-is at depth 0.
    pub assisted: bool,
}

impl Outcome {
    /// The outcome with wall-clock figures zeroed, for comparing runs.
    pub fn canonical(&self) -> Outcome {
        let mut o = self.clone();
        o.ledger.wall_time = 0.0;
        o
    }
}

/// Verdict of a final, preamble-free compile.
pub fn verify_final<C: Compiler + ?Sized>(
    script: &ProofScript,
    compiler: &mut C,
    timeout: Duration,
) -> Result<(OutcomeStatus, CompileResult), SessionError> {
    let r = compiler.check(&script.serialize(), timeout)?;
    let status = match r.status {
        CompileStatus::Pass if script.count_sorries() == 0 => OutcomeStatus::Proved,
        CompileStatus::Pass | CompileStatus::PassWithSorries => OutcomeStatus::PartialWithSorries,
        _ => OutcomeStatus::Failed,
    };
    Ok((status, r))
}

/// Graft the proof body of `candidate` onto `statement`. The candidate may
/// be a whole file, a declaration, or a bare tactic body; its own header
/// and statement text are discarded.
pub fn graft(candidate: &str, statement: &TheoremStatement) -> Result<ProofScript, ParseError> {
    let parsed = parse_script(candidate, statement)?;
    let body = parsed.body_lines().join("\n");
    let mut text = statement.render();
    text.push_str(&body);
    if !text.ends_with('\n') {
        text.push('\n');
    }
    ProofScript::parse(&text, statement)
}

/// A candidate after the repair modules ran on it.
#[derive(Debug, Clone)]
struct Repaired {
    script: ProofScript,
    result: CompileResult,
    /// Compiled as sampled, with no module involved.
    untouched: bool,
    /// The grafted candidate and its first compile, for feedback prompts.
    first: (String, Vec<Diagnostic>),
}

#[derive(Debug, Clone)]
struct Frame {
    script: ProofScript,
    proved: bool,
    untouched: bool,
    prior: Option<PriorAttempt>,
}

#[derive(Debug)]
enum Abort {
    Session(SessionError),
    Budget,
}

impl From<SessionError> for Abort {
    fn from(e: SessionError) -> Self {
        Abort::Session(e)
    }
}

struct Counting<'a, C: ?Sized> {
    inner: &'a mut C,
    calls: u64,
}

impl<C: Compiler + ?Sized> Compiler for Counting<'_, C> {
    fn check(&mut self, code: &str, timeout: Duration) -> Result<CompileResult, SessionError> {
        self.calls += 1;
        self.inner.check(code, timeout)
    }
}

struct Run<'a, B: ?Sized, C: ?Sized> {
    config: &'a RepairConfig,
    backend: &'a B,
    compiler: Counting<'a, C>,
    ledger: BudgetLedger,
    audit: Vec<AuditEvent>,
    started: Instant,
    exhausted: bool,
    malformed: Vec<FailReason>,
}

impl<B: Backend + ?Sized, C: Compiler + ?Sized> Run<'_, B, C> {
    fn log(&mut self, depth: usize, module: &str, action: &str, detail: impl Into<String>) {
        let tick = self.audit.len() as u64;
        let detail = detail.into();
        tracing::debug!(depth, module, action, %detail, "audit");
        self.audit.push(AuditEvent { tick, depth, module: module.into(), action: action.into(), detail });
    }

    fn over_deadline(&self) -> bool {
        self.config.deadline.is_some_and(|d| self.started.elapsed() > d)
    }

    fn sorrify_config(&self) -> SorrifyConfig {
        SorrifyConfig { timeout: self.config.compile_timeout }
    }

    /// Samples for one frame, clipped to the remaining budget.
    fn sample(
        &mut self,
        statement: &TheoremStatement,
        depth: usize,
        mode: GenerationMode,
        prior: Option<PriorAttempt>,
    ) -> Result<Vec<String>, Abort> {
        let left = self.config.sample_cap.saturating_sub(self.ledger.samples_used);
        if left == 0 || self.over_deadline() {
            self.exhausted = true;
            self.log(depth, "orchestrator", "budget_exhausted", format!("{} samples used", self.ledger.samples_used));
            return Err(Abort::Budget);
        }
        let k = (self.config.k_per_goal as u64).min(left) as usize;
        let request = GenerationRequest {
            statement: statement.clone(),
            mode,
            k,
            prior_attempt: prior,
            decoding: self.config.decoding,
        };
        match self.backend.generate(&request) {
            Ok(r) => {
                self.ledger.samples_used += r.candidates.len() as u64;
                self.ledger.tokens_generated += r.tokens_generated;
                self.ledger.tokens_estimated |= r.estimated;
                self.log(
                    depth,
                    "llm",
                    "generate",
                    format!("{} {:?} k={} got={} tokens={}", statement.name, mode, k, r.candidates.len(), r.tokens_generated),
                );
                Ok(r.candidates)
            }
            Err(e) => {
                self.log(depth, "llm", "error", format!("{}: {e}", statement.name));
                if depth == 0 && !matches!(e, BackendError::EmptyCompletion) {
                    self.malformed.push(FailReason::Backend(e.to_string()));
                }
                Ok(Vec::new())
            }
        }
    }

    fn try_refine(&mut self, text: &str, depth: usize) -> Option<String> {
        match refine(text, &self.config.rules) {
            Ok(r) if !r.applied.is_empty() => {
                self.ledger.trigger(Module::SyntaxRefiner);
                self.log(depth, "syntax_refiner", "rewrite", r.applied.join(","));
                Some(strip_comments(&r.text))
            }
            Ok(_) => None,
            Err(e) => {
                self.log(depth, "syntax_refiner", "error", e.to_string());
                None
            }
        }
    }

    /// Refine, sorrify and auto-solve one sampled candidate.
    fn repair(&mut self, raw: &str, statement: &TheoremStatement, depth: usize) -> Result<Option<Repaired>, Abort> {
        let cfg = self.config;
        let mut touched = false;
        let mut script = match graft(raw, statement) {
            Ok(s) => s,
            Err(e) => {
                let fixed = if cfg.enable_syntax_refiner { self.try_refine(raw, depth) } else { None };
                match fixed.map(|t| graft(&t, statement)) {
                    Some(Ok(s)) => {
                        touched = true;
                        s
                    }
                    _ => {
                        self.log(depth, "orchestrator", "unparseable", e.to_string());
                        self.malformed.push(FailReason::AllCandidatesMalformed);
                        return Ok(None);
                    }
                }
            }
        };
        let mut result = check_with_preamble(&mut self.compiler, &script, cfg.compile_timeout)?;
        let first = (script.serialize(), result.diagnostics.clone());
        if result.status == CompileStatus::Fail
            && cfg.enable_syntax_refiner
            && should_refine(&script.serialize(), &result, &cfg.rules)
        {
            if let Some(Ok(s)) = self.try_refine(&script.serialize(), depth).map(|t| graft(&t, statement)) {
                script = s;
                touched = true;
                result = check_with_preamble(&mut self.compiler, &script, cfg.compile_timeout)?;
            }
        }
        if result.status == CompileStatus::Pass && script.count_sorries() == 0 {
            return Ok(Some(Repaired { script, result, untouched: !touched, first }));
        }
        if cfg.is_plain() {
            return Ok(None);
        }
        if !matches!(result.status, CompileStatus::Pass | CompileStatus::PassWithSorries) {
            let scfg = self.sorrify_config();
            match sorrify(&script, &mut self.compiler, &scfg) {
                Ok(s) => {
                    self.log(depth, "sorrifier", "sorrify", format!("{} actions, {} sorries", s.actions.len(), s.script.count_sorries()));
                    script = s.script;
                    result = s.compile_result;
                }
                Err(SorrifyError::Session(e)) => return Err(Abort::Session(e)),
                Err(e) => {
                    self.log(depth, "sorrifier", "error", e.to_string());
                    self.malformed.push(match e {
                        SorrifyError::Nonterminating { .. } => FailReason::Nonterminating,
                        _ => FailReason::AllCandidatesMalformed,
                    });
                    return Ok(None);
                }
            }
        }
        if cfg.enable_auto_solver && script.count_sorries() > 0 {
            self.ledger.trigger(Module::AutoSolver);
            let solved = solve_sorries(&script, &result, &mut self.compiler, &cfg.solver)?;
            for c in &solved.commits {
                self.log(depth, "auto_solver", "commit", format!("{}:{} {}", c.site.0, c.site.1, c.tactic.text));
            }
            self.log(depth, "auto_solver", "done", format!("{} closed, {} remain", solved.commits.len(), solved.remaining()));
            script = solved.script;
            result = solved.compile_result;
        }
        Ok(Some(Repaired { script, result, untouched: false, first }))
    }

    /// One invocation of the algorithm on `statement` at `depth`.
    fn frame(
        &mut self,
        statement: &TheoremStatement,
        depth: usize,
        mode: GenerationMode,
        prior: Option<PriorAttempt>,
    ) -> Result<Option<Frame>, Abort> {
        let cfg = self.config;
        let candidates = self.sample(statement, depth, mode, prior)?;
        let mut best: Option<Repaired> = None;
        for (i, raw) in candidates.iter().enumerate() {
            let Some(rep) = self.repair(raw, statement, depth)? else {
                continue;
            };
            if rep.result.status == CompileStatus::Pass && rep.script.count_sorries() == 0 {
                self.log(depth, "orchestrator", "candidate_proved", format!("{} candidate {}", statement.name, i + 1));
                let (status, _) = verify_final(&rep.script, &mut self.compiler, cfg.compile_timeout)?;
                if status == OutcomeStatus::Proved {
                    return Ok(Some(Frame { script: rep.script, proved: true, untouched: rep.untouched, prior: None }));
                }
            }
            let better = match &best {
                None => true,
                Some(b) => {
                    let key = |r: &Repaired| (r.script.count_sorries(), r.script.serialize().len());
                    key(&rep) < key(b)
                }
            };
            if better {
                best = Some(rep);
            }
        }
        let Some(best) = best else {
            self.log(depth, "orchestrator", "no_usable_candidate", statement.name.clone());
            return Ok(None);
        };
        let prior = Some(PriorAttempt { proof: best.first.0.clone(), diagnostics: best.first.1.clone() });
        let n = best.script.count_sorries();
        self.log(depth, "orchestrator", "selected", format!("{} sorries", n));
        if !cfg.enable_llm_reinvoker || depth + 1 > cfg.max_depth {
            if cfg.enable_llm_reinvoker {
                self.log(depth, "orchestrator", "depth_cap", format!("{n} sorries left at depth {depth}"));
            }
            return Ok(Some(Frame { script: best.script, proved: false, untouched: false, prior }));
        }
        // recurse on every remaining sorry
        let sites = best.script.sorry_positions();
        let mut subs: Vec<(crate::goals::GoalContext, ProofScript)> = Vec::new();
        for (ordinal, site) in sites.iter().enumerate() {
            let Some(info) = best.result.sorries.iter().find(|s| (s.pos.line, s.pos.column) == *site) else {
                self.log(depth, "goal_extraction", "no_goal", format!("{}:{}", site.0, site.1));
                continue;
            };
            let ctx = match extract_goal(info, &best.script, ordinal + 1) {
                Ok(c) => c,
                Err(e) => {
                    self.log(depth, "goal_extraction", "error", e.to_string());
                    continue;
                }
            };
            let sub_statement =
                match transform_checked(&ctx, &statement.header, &mut self.compiler, cfg.compile_timeout) {
                    Ok(s) => s,
                    Err(crate::goals::TransformError::Check(SorrifyError::Session(e))) => return Err(Abort::Session(e)),
                    Err(e) => {
                        self.log(depth, "goal_extraction", "rejected", format!("{}: {e}", ctx.fresh_name));
                        continue;
                    }
                };
            self.ledger.trigger(Module::LlmReinvoker);
            self.log(depth, "llm_reinvoker", "recurse", sub_statement.statement_text.clone());
            let sub = match self.frame(&sub_statement, depth + 1, GenerationMode::SubLemma, None) {
                Ok(f) => f,
                Err(Abort::Budget) => None,
                Err(e) => return Err(e),
            };
            match sub {
                Some(f) if f.proved => subs.push((ctx, f.script)),
                _ => self.log(depth, "orchestrator", "sub_unproved", ctx.fresh_name.clone()),
            }
        }
        let assembled = assemble(&best.script, &subs, cfg.splice_mode, |e| {
            tracing::debug!(error = %e, "splice failed");
        });
        self.log(depth, "assembler", "assemble", format!("{} of {} spliced", subs.len(), n));
        let (status, _) = verify_final(&assembled, &mut self.compiler, cfg.compile_timeout)?;
        self.log(depth, "verifier", "verify", format!("{status:?}"));
        match status {
            OutcomeStatus::Proved => Ok(Some(Frame { script: assembled, proved: true, untouched: false, prior: None })),
            OutcomeStatus::PartialWithSorries => Ok(Some(Frame { script: assembled, proved: false, untouched: false, prior })),
            OutcomeStatus::Failed => Ok(Some(Frame { script: best.script, proved: false, untouched: false, prior })),
        }
    }
}

/// Splice proved sub-proofs into `parent`, last site first so earlier
/// positions stay valid. A splice that fails leaves its sorry in place.
pub fn assemble(
    parent: &ProofScript,
    subs: &[(crate::goals::GoalContext, ProofScript)],
    mode: SpliceMode,
    mut on_error: impl FnMut(&crate::goals::SpliceError),
) -> ProofScript {
    let mut ordered: Vec<&(crate::goals::GoalContext, ProofScript)> = subs.iter().collect();
    ordered.sort_by_key(|(c, _)| std::cmp::Reverse(c.site));
    let mut out = parent.clone();
    for (ctx, sub) in ordered {
        match splice_subproof(&out, ctx, sub, mode) {
            Ok(s) => out = s,
            Err(e) => on_error(&e),
        }
    }
    let text = out.serialize();
    let stripped = strip_preamble(&text);
    if stripped == text {
        out
    } else {
        ProofScript::parse(&stripped, &out.statement).unwrap_or(out)
    }
}

/// Run the full algorithm on one theorem.
pub fn apollo<B: Backend + ?Sized, C: Compiler + ?Sized>(
    statement: &TheoremStatement,
    config: &RepairConfig,
    backend: &B,
    compiler: &mut C,
) -> Outcome {
    let started = Instant::now();
    let mut run = Run {
        config,
        backend,
        compiler: Counting { inner: compiler, calls: 0 },
        ledger: BudgetLedger::default(),
        audit: Vec::new(),
        started,
        exhausted: false,
        malformed: Vec::new(),
    };
    let result = drive(&mut run, statement);
    run.ledger.repl_calls = run.compiler.calls;
    run.ledger.wall_time = started.elapsed().as_secs_f64();
    let (status, failure, script, untouched) = match result {
        Ok((Some(f), _)) if f.proved => (OutcomeStatus::Proved, None, Some(f.script), f.untouched),
        Ok((Some(f), _)) if run.exhausted => (OutcomeStatus::Failed, Some(FailReason::BudgetExhausted), Some(f.script), false),
        Ok((Some(f), _)) => (OutcomeStatus::PartialWithSorries, None, Some(f.script), false),
        Ok((None, reason)) => (OutcomeStatus::Failed, Some(reason), None, false),
        Err(Abort::Budget) => (OutcomeStatus::Failed, Some(FailReason::BudgetExhausted), None, false),
        Err(Abort::Session(e)) => (OutcomeStatus::Failed, Some(FailReason::Session(e.to_string())), None, false),
    };
    let proof_length = (status == OutcomeStatus::Proved).then(|| script.as_ref().map(proof_length).unwrap_or(0));
    Outcome {
        name: statement.name.clone(),
        status,
        failure,
        final_script: script.map(|s| s.serialize()),
        ledger: run.ledger,
        audit: run.audit,
        proof_length,
        assisted: !untouched,
    }
}

fn drive<B: Backend + ?Sized, C: Compiler + ?Sized>(
    run: &mut Run<'_, B, C>,
    statement: &TheoremStatement,
) -> Result<(Option<Frame>, FailReason), Abort> {
    let cfg = run.config;
    match validate_statement(statement, &mut run.compiler, cfg.compile_timeout) {
        Ok(_) => {}
        Err(SorrifyError::StatementMalformed(d)) => {
            let first = d.iter().find(|d| d.is_error()).map(|d| d.message.clone()).unwrap_or_default();
            run.log(0, "orchestrator", "statement_malformed", first);
            return Ok((None, FailReason::StatementMalformed));
        }
        Err(SorrifyError::Session(e)) => return Err(Abort::Session(e)),
        Err(e) => {
            run.log(0, "orchestrator", "statement_unchecked", e.to_string());
            return Ok((None, FailReason::StatementMalformed));
        }
    }
    let first = run.frame(statement, 0, GenerationMode::Initial, None)?;
    let reason = |seen: &[FailReason]| -> FailReason {
        if seen.contains(&FailReason::Nonterminating) {
            FailReason::Nonterminating
        } else {
            seen.iter()
                .find(|r| matches!(r, FailReason::Backend(_)))
                .cloned()
                .unwrap_or(FailReason::AllCandidatesMalformed)
        }
    };
    match first {
        Some(f) if f.proved => Ok((Some(f), FailReason::AllCandidatesMalformed)),
        Some(f) if cfg.feedback_retry && cfg.enable_llm_reinvoker && !run.exhausted => {
            let again = match run.frame(statement, 0, GenerationMode::FeedbackRepair, f.prior.clone()) {
                Ok(g) => g,
                Err(Abort::Budget) => None,
                Err(e) => return Err(e),
            };
            let keep = match again {
                Some(g) if g.proved || g.script.count_sorries() < f.script.count_sorries() => g,
                _ => f,
            };
            let r = reason(&run.malformed);
            Ok((Some(keep), r))
        }
        Some(f) => {
            let r = reason(&run.malformed);
            Ok((Some(f), r))
        }
        None => {
            let r = reason(&run.malformed);
            Ok((None, r))
        }
    }
}
