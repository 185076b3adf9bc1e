//! Batch runs over a benchmark file: ingestion, a worker pool with
//! checkpointing and resume, and summary reports.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use thiserror::Error;

use crate::llm::Backend;
use crate::orchestrator::{apollo, FailReason, Module, Outcome, OutcomeStatus, RepairConfig};
use crate::proof::TheoremStatement;
use crate::repl::{Compiler, SessionPool};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkItem {
    pub name: String,
    #[serde(default)]
    pub header: String,
    #[serde(default)]
    pub informal_prefix: Option<String>,
    pub formal_statement: String,
    #[serde(default)]
    pub split: Option<String>,
}

impl BenchmarkItem {
    pub fn statement(&self) -> Result<TheoremStatement, crate::proof::ParseError> {
        TheoremStatement::new(self.header.clone(), self.formal_statement.clone(), self.informal_prefix.clone())
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {reason}")]
    BadRecord { line: usize, reason: String },
    #[error("line {line}: duplicate name `{name}`")]
    DuplicateName { line: usize, name: String },
}

/// Read a JSONL benchmark file. Blank lines are skipped.
pub fn load_dataset(path: &Path) -> Result<Vec<BenchmarkItem>, IngestError> {
    let io = |source| IngestError::Io { path: path.to_path_buf(), source };
    let file = std::fs::File::open(path).map_err(io)?;
    let mut items: Vec<BenchmarkItem> = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io)?;
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let item: BenchmarkItem =
            serde_json::from_str(&line).map_err(|e| IngestError::BadRecord { line: n, reason: e.to_string() })?;
        if item.name.trim().is_empty() {
            return Err(IngestError::BadRecord { line: n, reason: "empty name".into() });
        }
        if item.formal_statement.trim().is_empty() {
            return Err(IngestError::BadRecord { line: n, reason: "empty formal_statement".into() });
        }
        if !seen.insert(item.name.clone()) {
            return Err(IngestError::DuplicateName { line: n, name: item.name });
        }
        items.push(item);
    }
    if items.is_empty() {
        tracing::warn!(path = %path.display(), "dataset is empty");
    }
    Ok(items)
}

/// One line of the results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemRecord {
    pub name: String,
    pub status: OutcomeStatus,
    #[serde(default)]
    pub failure: Option<FailReason>,
    pub samples: u64,
    pub tokens: u64,
    pub proof_length: Option<usize>,
    pub wall_time: f64,
    pub audit_path: Option<String>,
    pub assisted: bool,
    #[serde(default)]
    pub module_triggers: BTreeMap<Module, u64>,
    #[serde(default)]
    pub repl_calls: u64,
    #[serde(default)]
    pub final_script: Option<String>,
}

impl ItemRecord {
    pub fn from_outcome(o: &Outcome, audit_path: Option<String>) -> Self {
        ItemRecord {
            name: o.name.clone(),
            status: o.status,
            failure: o.failure.clone(),
            samples: o.ledger.samples_used,
            tokens: o.ledger.tokens_generated,
            proof_length: o.proof_length,
            wall_time: o.ledger.wall_time,
            audit_path,
            assisted: o.assisted,
            module_triggers: o.ledger.module_triggers.clone(),
            repl_calls: o.ledger.repl_calls,
            final_script: o.final_script.clone(),
        }
    }

    fn settled(&self) -> bool {
        matches!(self.status, OutcomeStatus::Proved | OutcomeStatus::Failed)
    }
}

/// Records from a results file; the last record per name wins.
pub fn read_results(path: &Path) -> Result<Vec<ItemRecord>, IngestError> {
    let io = |source| IngestError::Io { path: path.to_path_buf(), source };
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io(e)),
    };
    let mut order: Vec<String> = Vec::new();
    let mut latest: HashMap<String, ItemRecord> = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: ItemRecord = match serde_json::from_str(line) {
            Ok(r) => r,
            // a torn final line from an interrupted run
            Err(_) if i + 1 == text.lines().count() => break,
            Err(e) => return Err(IngestError::BadRecord { line: i + 1, reason: e.to_string() }),
        };
        if !latest.contains_key(&rec.name) {
            order.push(rec.name.clone());
        }
        latest.insert(rec.name.clone(), rec);
    }
    Ok(order.into_iter().filter_map(|n| latest.remove(&n)).collect())
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub parallelism: usize,
    /// JSONL results file; `None` keeps everything in memory.
    pub output: Option<PathBuf>,
    pub resume: bool,
}

fn audit_dir(output: &Path) -> PathBuf {
    let stem = output.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    output.with_file_name(format!("{stem}.audit"))
}

fn safe_file_name(name: &str) -> String {
    name.chars().map(|c| if c.is_alphanumeric() || c == '_' || c == '-' || c == '.' { c } else { '_' }).collect()
}

fn write_audit(dir: &Path, o: &Outcome) -> std::io::Result<String> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("{}.jsonl", safe_file_name(&o.name)));
    let mut f = std::fs::File::create(&path)?;
    for e in &o.audit {
        serde_json::to_writer(&mut f, e)?;
        f.write_all(b"\n")?;
    }
    Ok(path.display().to_string())
}

fn failed(name: &str, reason: FailReason) -> Outcome {
    Outcome {
        name: name.to_string(),
        status: OutcomeStatus::Failed,
        failure: Some(reason),
        final_script: None,
        ledger: Default::default(),
        audit: Vec::new(),
        proof_length: None,
        assisted: true,
    }
}

fn run_item<B: Backend + ?Sized, C: Compiler>(
    item: &BenchmarkItem,
    config: &RepairConfig,
    backend: &B,
    pool: &SessionPool<C>,
) -> Outcome {
    let statement = match item.statement() {
        Ok(s) => s,
        Err(e) => {
            tracing::warn!(item = %item.name, error = %e, "statement does not parse");
            return failed(&item.name, FailReason::StatementMalformed);
        }
    };
    let mut lease = match pool.lease(&statement.header) {
        Ok(l) => l,
        Err(e) => return failed(&item.name, FailReason::Session(e.to_string())),
    };
    let mut o = apollo(&statement, config, backend, &mut *lease);
    if matches!(o.failure, Some(FailReason::Session(_))) {
        lease.discard();
    }
    o.name = item.name.clone();
    o
}

/// Run every item not already settled in the results file. Each outcome is
/// appended to the results file as soon as it is known. Returns the
/// records of all dataset items, in dataset order.
pub fn run<B: Backend + ?Sized, C: Compiler>(
    items: &[BenchmarkItem],
    config: &RepairConfig,
    backend: &B,
    pool: &SessionPool<C>,
    options: &RunOptions,
) -> Result<Vec<ItemRecord>, IngestError> {
    let mut done: HashMap<String, ItemRecord> = HashMap::new();
    if let (true, Some(out)) = (options.resume, &options.output) {
        for r in read_results(out)? {
            if r.settled() {
                done.insert(r.name.clone(), r);
            }
        }
    }
    let todo: Vec<&BenchmarkItem> = items.iter().filter(|i| !done.contains_key(&i.name)).collect();
    tracing::info!(total = items.len(), skipped = items.len() - todo.len(), "starting batch");

    let mut sink = match &options.output {
        Some(out) => {
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|source| IngestError::Io { path: parent.into(), source })?;
            }
            let f = std::fs::OpenOptions::new()
                .create(true)
                .append(true)
                .truncate(false)
                .open(out)
                .map_err(|source| IngestError::Io { path: out.clone(), source })?;
            if !options.resume {
                f.set_len(0).map_err(|source| IngestError::Io { path: out.clone(), source })?;
            }
            Some((f, audit_dir(out)))
        }
        None => None,
    };

    let next = AtomicUsize::new(0);
    let workers = options.parallelism.max(1).min(todo.len().max(1));
    let (tx, rx) = mpsc::channel::<Outcome>();
    let mut fresh: HashMap<String, ItemRecord> = HashMap::new();
    std::thread::scope(|s| -> Result<(), IngestError> {
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, todo) = (&next, &todo);
            s.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(item) = todo.get(i) else { break };
                let o = run_item(item, config, backend, pool);
                if tx.send(o).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        // single writer
        for o in rx {
            let audit_path = match &sink {
                Some((_, dir)) => match write_audit(dir, &o) {
                    Ok(p) => Some(p),
                    Err(e) => {
                        tracing::warn!(item = %o.name, error = %e, "cannot write audit log");
                        None
                    }
                },
                None => None,
            };
            let rec = ItemRecord::from_outcome(&o, audit_path);
            tracing::info!(item = %rec.name, status = ?rec.status, samples = rec.samples, "item finished");
            if let (Some((f, _)), Some(out)) = (&mut sink, &options.output) {
                let line = serde_json::to_string(&rec).expect("record serializes");
                writeln!(f, "{line}")
                    .and_then(|_| f.flush())
                    .map_err(|source| IngestError::Io { path: out.clone(), source })?;
            }
            fresh.insert(rec.name.clone(), rec);
        }
        Ok(())
    })?;
    Ok(items
        .iter()
        .filter_map(|i| fresh.remove(&i.name).or_else(|| done.remove(&i.name)))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Accounting {
    /// Budgets averaged over every item.
    All,
    /// Budgets averaged over items the pipeline had to repair; items a
    /// sampled proof settled on its own are left out.
    Assisted,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub min: usize,
    pub max: usize,
}

impl LengthStats {
    pub fn of(lengths: &[usize]) -> LengthStats {
        if lengths.is_empty() {
            return LengthStats::default();
        }
        let mut v = lengths.to_vec();
        v.sort_unstable();
        let n = v.len();
        let median = if n % 2 == 1 { v[n / 2] as f64 } else { (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0 };
        LengthStats {
            count: n,
            mean: v.iter().sum::<usize>() as f64 / n as f64,
            median,
            min: v[0],
            max: v[n - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub accounting: Accounting,
    pub items: usize,
    pub proved: usize,
    /// Percent of all items proved.
    pub accuracy: f64,
    /// Items the budget averages are taken over.
    pub population: usize,
    pub avg_samples: f64,
    pub max_samples: u64,
    pub avg_tokens: f64,
    pub max_tokens: u64,
    pub proof_length: LengthStats,
    /// Percent of assisted items on which each module fired.
    pub trigger_rates: BTreeMap<Module, f64>,
    pub failures: BTreeMap<String, usize>,
}

fn mean(xs: impl Iterator<Item = u64>) -> (f64, u64, usize) {
    let v: Vec<u64> = xs.collect();
    if v.is_empty() {
        return (0.0, 0, 0);
    }
    (v.iter().sum::<u64>() as f64 / v.len() as f64, *v.iter().max().unwrap_or(&0), v.len())
}

pub fn report(records: &[ItemRecord], accounting: Accounting) -> RunReport {
    let mut sorted: Vec<&ItemRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.name.cmp(&b.name));
    let proved = sorted.iter().filter(|r| r.status == OutcomeStatus::Proved).count();
    let counted: Vec<&&ItemRecord> = sorted.iter().filter(|r| accounting == Accounting::All || r.assisted).collect();
    let (avg_samples, max_samples, population) = mean(counted.iter().map(|r| r.samples));
    let (avg_tokens, max_tokens, _) = mean(counted.iter().map(|r| r.tokens));
    let lengths: Vec<usize> = sorted.iter().filter_map(|r| r.proof_length).collect();
    let assisted: Vec<&&ItemRecord> = sorted.iter().filter(|r| r.assisted).collect();
    let trigger_rates = [Module::SyntaxRefiner, Module::AutoSolver, Module::LlmReinvoker]
        .into_iter()
        .map(|m| {
            let fired = assisted.iter().filter(|r| r.module_triggers.get(&m).copied().unwrap_or(0) > 0).count();
            let rate = if assisted.is_empty() { 0.0 } else { 100.0 * fired as f64 / assisted.len() as f64 };
            (m, rate)
        })
        .collect();
    let mut failures = BTreeMap::new();
    for r in &sorted {
        if let Some(f) = &r.failure {
            let key = match f {
                FailReason::Backend(_) => "Backend".to_string(),
                FailReason::Session(_) => "Session".to_string(),
                other => format!("{other:?}"),
            };
            *failures.entry(key).or_default() += 1;
        }
    }
    RunReport {
        accounting,
        items: sorted.len(),
        proved,
        accuracy: if sorted.is_empty() { 0.0 } else { 100.0 * proved as f64 / sorted.len() as f64 },
        population,
        avg_samples,
        max_samples,
        avg_tokens,
        max_tokens,
        proof_length: LengthStats::of(&lengths),
        trigger_rates,
        failures,
    }
}

impl RunReport {
    /// Plain-text table: method, sample budget, token budget, accuracy,
    /// followed by proof length and module statistics.
    pub fn render(&self, method: &str) -> String {
        let mut out = String::new();
        let samples = format!("{:.1} (max {})", self.avg_samples, self.max_samples);
        let tokens = format!("{:.0} (max {})", self.avg_tokens, self.max_tokens);
        let acc = format!("{:.1}%", self.accuracy);
        let widths = [method.len().max(6), samples.len().max(13), tokens.len().max(12), acc.len().max(8)];
        let row = |out: &mut String, cells: [&str; 4]| {
            let _ = writeln!(
                out,
                "| {:<w0$} | {:>w1$} | {:>w2$} | {:>w3$} |",
                cells[0],
                cells[1],
                cells[2],
                cells[3],
                w0 = widths[0],
                w1 = widths[1],
                w2 = widths[2],
                w3 = widths[3]
            );
        };
        row(&mut out, ["Method", "Sample budget", "Token budget", "Accuracy"]);
        let _ = writeln!(
            out,
            "|{}|{}|{}|{}|",
            "-".repeat(widths[0] + 2),
            "-".repeat(widths[1] + 2),
            "-".repeat(widths[2] + 2),
            "-".repeat(widths[3] + 2)
        );
        row(&mut out, [method, &samples, &tokens, &acc]);
        let mode = match self.accounting {
            Accounting::All => "all items",
            Accounting::Assisted => "assisted items only",
        };
        let _ = writeln!(out, "\nbudgets over {} of {} items ({mode}); {} proved", self.population, self.items, self.proved);
        let l = &self.proof_length;
        let _ = writeln!(
            out,
            "proof length: n={} mean={:.1} median={:.1} min={} max={}",
            l.count, l.mean, l.median, l.min, l.max
        );
        let rates: Vec<String> = self.trigger_rates.iter().map(|(m, r)| format!("{m:?} {r:.1}%")).collect();
        let _ = writeln!(out, "module triggers: {}", rates.join(", "));
        if !self.failures.is_empty() {
            let f: Vec<String> = self.failures.iter().map(|(k, n)| format!("{k} {n}")).collect();
            let _ = writeln!(out, "failures: {}", f.join(", "));
        }
        out
    }
}

/// `name,proof_length` rows for every proved item, for plotting.
pub fn length_data(records: &[ItemRecord]) -> String {
    let mut rows: Vec<(&str, usize)> =
        records.iter().filter_map(|r| r.proof_length.map(|l| (r.name.as_str(), l))).collect();
    rows.sort();
    let mut out = String::from("name,proof_length\n");
    for (n, l) in rows {
        let _ = writeln!(out, "{n},{l}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(name: &str, status: OutcomeStatus, samples: u64, assisted: bool) -> ItemRecord {
        ItemRecord {
            name: name.into(),
            status,
            failure: None,
            samples,
            tokens: samples * 100,
            proof_length: (status == OutcomeStatus::Proved).then_some(samples as usize),
            wall_time: 0.0,
            audit_path: None,
            assisted,
            module_triggers: BTreeMap::new(),
            repl_calls: 0,
            final_script: None,
        }
    }

    #[test]
    fn accuracy_is_over_all_items() {
        let mut rs: Vec<ItemRecord> = (0..6).map(|i| rec(&format!("p{i}"), OutcomeStatus::Proved, 4, true)).collect();
        rs.extend((0..4).map(|i| rec(&format!("f{i}"), OutcomeStatus::Failed, 8, true)));
        let r = report(&rs, Accounting::All);
        assert_eq!(r.accuracy, 60.0);
        assert_eq!(r.avg_samples, 5.6);
        assert_eq!(r.max_samples, 8);
    }

    #[test]
    fn assisted_mode_drops_base_solved() {
        let rs = vec![
            rec("a", OutcomeStatus::Proved, 1, false),
            rec("b", OutcomeStatus::Proved, 9, true),
            rec("c", OutcomeStatus::Failed, 5, true),
        ];
        let all = report(&rs, Accounting::All);
        let assisted = report(&rs, Accounting::Assisted);
        assert_eq!(all.avg_samples, 5.0);
        assert_eq!(assisted.avg_samples, 7.0);
        assert_eq!(assisted.population, 2);
        assert_eq!(all.accuracy, assisted.accuracy);
    }

    #[test]
    fn report_is_order_independent() {
        let mut rs = vec![rec("a", OutcomeStatus::Proved, 1, true), rec("b", OutcomeStatus::Failed, 9, true)];
        let x = report(&rs, Accounting::All);
        rs.reverse();
        assert_eq!(x, report(&rs, Accounting::All));
    }

    #[test]
    fn length_stats() {
        let s = LengthStats::of(&[4, 1, 3, 10]);
        assert_eq!((s.count, s.min, s.max), (4, 1, 10));
        assert_eq!(s.median, 3.5);
        assert_eq!(s.mean, 4.5);
    }
}
