use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use apollo::autosolver::SolverConfig;
use apollo::harness::{length_data, load_dataset, read_results, report, run, Accounting, RunOptions};
use apollo::llm::{Backend, HttpBackend, HttpConfig, MockBackend};
use apollo::orchestrator::RepairConfig;
use apollo::refiner::{default_ruleset, refine, RuleSet};
use apollo::repl::{ReplSession, SessionPool};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Compiler-guided repair of LLM-generated Lean 4 proofs.
#[derive(Parser)]
#[command(name = "apollo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the repair pipeline over a dataset.
    Run(RunArgs),
    /// Summarize a results file.
    Report(ReportArgs),
    /// Apply the syntax rules to a file and print the result.
    Refine {
        file: PathBuf,
        #[arg(long)]
        rules: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendKind {
    Http,
    Mock,
}

#[derive(Clone, Copy, ValueEnum)]
enum AccountingArg {
    All,
    Assisted,
}

impl From<AccountingArg> for Accounting {
    fn from(a: AccountingArg) -> Self {
        match a {
            AccountingArg::All => Accounting::All,
            AccountingArg::Assisted => Accounting::Assisted,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 1)]
    max_depth: usize,
    #[arg(long, default_value_t = 32)]
    samples_per_goal: usize,
    /// Seconds per compile.
    #[arg(long, default_value_t = 300)]
    compile_timeout: u64,
    #[arg(long, default_value_t = 1)]
    parallelism: usize,
    #[arg(long, value_enum, default_value_t = BackendKind::Http)]
    backend: BackendKind,
    /// Chat-completions base URL for the http backend.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Recorded completions directory for the mock backend.
    #[arg(long)]
    mock_dir: Option<PathBuf>,
    #[arg(long)]
    repl_path: PathBuf,
    #[arg(long)]
    project_root: PathBuf,
    /// Syntax rule table replacing the built-in one.
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Auto-solver tactic suite (JSON).
    #[arg(long)]
    suite: Option<PathBuf>,
    #[arg(long)]
    disable_syntax_refiner: bool,
    #[arg(long)]
    disable_auto_solver: bool,
    #[arg(long)]
    disable_llm_reinvoker: bool,
    #[arg(long, value_enum, default_value_t = AccountingArg::All)]
    accounting: AccountingArg,
    #[arg(long)]
    resume: bool,
    /// Per-item wall-clock ceiling in seconds.
    #[arg(long, default_value_t = 7200)]
    deadline: u64,
    /// Sample ceiling per item.
    #[arg(long, default_value_t = 1100)]
    sample_cap: u64,
}

#[derive(Args)]
struct ReportArgs {
    results: PathBuf,
    #[arg(long, value_enum, default_value_t = AccountingArg::All)]
    accounting: AccountingArg,
    #[arg(long, default_value = "apollo")]
    method: String,
    /// Write per-item proof lengths as CSV.
    #[arg(long)]
    lengths: Option<PathBuf>,
}

/// Bad flags or unreadable inputs.
struct ConfigError(anyhow::Error);

fn config<T>(r: Result<T>) -> Result<T, ConfigError> {
    r.map_err(ConfigError)
}

fn load_rules(path: Option<&Path>) -> Result<RuleSet> {
    match path {
        Some(p) => RuleSet::load(p).with_context(|| format!("rules file {}", p.display())),
        None => Ok(default_ruleset()),
    }
}

fn build_config(a: &RunArgs) -> Result<RepairConfig> {
    let solver = match &a.suite {
        Some(p) => SolverConfig::load(p).with_context(|| format!("suite file {}", p.display()))?,
        None => SolverConfig::default(),
    };
    let c = RepairConfig {
        max_depth: a.max_depth,
        k_per_goal: a.samples_per_goal,
        compile_timeout: Duration::from_secs(a.compile_timeout),
        enable_syntax_refiner: !a.disable_syntax_refiner,
        enable_auto_solver: !a.disable_auto_solver,
        enable_llm_reinvoker: !a.disable_llm_reinvoker,
        rules: load_rules(a.rules.as_deref())?,
        solver,
        sample_cap: a.sample_cap,
        deadline: Some(Duration::from_secs(a.deadline)),
        ..Default::default()
    };
    c.validate()?;
    Ok(c)
}

fn build_backend(a: &RunArgs) -> Result<Box<dyn Backend>> {
    Ok(match a.backend {
        BackendKind::Mock => {
            let Some(dir) = &a.mock_dir else { bail!("--backend mock needs --mock-dir") };
            Box::new(MockBackend::load(dir, false, true)?)
        }
        BackendKind::Http => {
            let (Some(url), Some(model)) = (&a.endpoint, &a.model) else {
                bail!("--backend http needs --endpoint and --model")
            };
            Box::new(HttpBackend::new(HttpConfig::new(url, model))?)
        }
    })
}

fn cmd_run(a: RunArgs) -> Result<(), ConfigError> {
    let cfg = config(build_config(&a))?;
    let backend = config(build_backend(&a))?;
    let items = config(load_dataset(&a.dataset).map_err(Into::into))?;
    if !a.repl_path.exists() {
        return Err(ConfigError(anyhow::anyhow!("REPL executable {} not found", a.repl_path.display())));
    }
    let (repl, root) = (a.repl_path.clone(), a.project_root.clone());
    let pool = SessionPool::new(a.parallelism.max(1), move |header: &str| ReplSession::start(&repl, &root, header));
    let opts = RunOptions { parallelism: a.parallelism, output: Some(a.output.clone()), resume: a.resume };
    let records = config(run(&items, &cfg, backend.as_ref(), &pool, &opts).map_err(Into::into))?;
    print!("{}", report(&records, a.accounting.into()).render(backend.model_id()));
    Ok(())
}

fn cmd_report(a: ReportArgs) -> Result<(), ConfigError> {
    if !a.results.is_file() {
        return Err(ConfigError(anyhow::anyhow!("results file {} not found", a.results.display())));
    }
    let records = config(read_results(&a.results).map_err(Into::into))?;
    print!("{}", report(&records, a.accounting.into()).render(&a.method));
    if let Some(p) = a.lengths {
        config(std::fs::write(&p, length_data(&records)).with_context(|| format!("writing {}", p.display())))?;
    }
    Ok(())
}

fn cmd_refine(file: &Path, rules: Option<&Path>) -> Result<(), ConfigError> {
    let rules = config(load_rules(rules))?;
    let text = config(std::fs::read_to_string(file).with_context(|| format!("reading {}", file.display())))?;
    let out = config(refine(&text, &rules).map_err(Into::into))?;
    print!("{}", out.text);
    if !out.applied.is_empty() {
        eprintln!("applied: {}", out.applied.join(", "));
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let r = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Report(a) => cmd_report(a),
        Command::Refine { file, rules } => cmd_refine(&file, rules.as_deref()),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(ConfigError(e)) => {
            eprintln!("apollo: {e:#}");
            ExitCode::from(2)
        }
    }
}
