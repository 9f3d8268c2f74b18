//! `menter` command line. [`dispatch`] maps argv to an exit code:
//! 0 success, 1 check or task failure, 2 usage error or unreadable input.

use std::ffi::OsString;
use std::io::IsTerminal;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use menter_agent::eval::{self, ReportFormat, SuiteOptions};
use menter_agent::{run_task, Checkpoint, Hooks, RunConfig, Stores, TaskDef, TaskStatus};
use menter_core::{dc_sweep, emit, flatten, parse_netlist, parse_value, run_erc, solve_op, Netlist, SpecRequirement};
use menter_knowledge::{ingest_dir, BackendDescriber, ChunkKind, CorpusIndex, CttEntry, CttStore, DiagramDescriber};
use menter_llm::{open_backend, BackendConfig, BackendKind};

pub mod checkpoint;
pub mod config;

pub use config::CliConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("file not found: {}", .0.display())]
    NotFound(PathBuf),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::NotFound(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

pub(crate) fn read_input(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::NotFound(path.to_path_buf()),
        _ => CliError::Usage(format!("cannot read {}: {e}", path.display())),
    })
}

fn write_output(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Failed(format!("cannot write {}: {e}", path.display())))
}

#[derive(Debug, Parser)]
#[command(name = "menter", version, about = "Analog netlist design loop: parse, check, simulate, design, benchmark")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Think-tank store; overrides `ctt` in the config.
    #[arg(long, global = true, value_name = "FILE")]
    pub ctt: Option<PathBuf>,
    /// Document index; overrides `index` in the config.
    #[arg(long, global = true, value_name = "FILE")]
    pub index: Option<PathBuf>,
    /// Mock script; selects the mock backend.
    #[arg(long, global = true, value_name = "FILE")]
    pub script: Option<PathBuf>,
    /// Machine-readable output on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a deck and print it back in canonical form.
    Parse {
        /// SPICE deck.
        file: PathBuf,
    },
    /// Run the electrical rule check.
    Check {
        /// SPICE deck.
        file: PathBuf,
    },
    /// DC operating point or DC sweep.
    Sim(SimArgs),
    /// Run one design task.
    Run(RunArgs),
    /// Run a task suite several times and report pass@k.
    Bench(BenchArgs),
    /// Think-tank store of solved designs.
    Ctt {
        #[command(subcommand)]
        action: CttAction,
    },
    /// Chunk and index a directory of markdown documents.
    Ingest {
        /// Directory of `.md` files.
        dir: PathBuf,
        /// Index file to write (JSON).
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Ask the backend to describe images instead of using their alt text.
        #[arg(long)]
        describe_diagrams: bool,
    },
    /// Multiple-choice benchmark.
    Mcq {
        /// JSON array of questions.
        #[arg(long, value_name = "FILE")]
        data: PathBuf,
    },
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("mode").required(true).args(["op", "sweep"])))]
pub struct SimArgs {
    /// SPICE deck.
    pub file: PathBuf,
    /// Solve the operating point.
    #[arg(long)]
    pub op: bool,
    /// Sweep a voltage or current source from START to STOP in steps of STEP.
    #[arg(long, num_args = 4, value_names = ["SRC", "START", "STOP", "STEP"], allow_negative_numbers = true)]
    pub sweep: Option<Vec<String>>,
    /// Write the result here instead of stdout (CSV, or JSON with --json).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Task definition (JSON).
    #[arg(long, value_name = "FILE")]
    pub task: PathBuf,
    /// Review artifacts at checkpoints (needs a terminal on stdin).
    #[arg(long)]
    pub interactive: bool,
    /// Override the configured backend kind.
    #[arg(long, value_parser = ["mock", "http"])]
    pub backend: Option<String>,
    /// Write every backend exchange here as JSON lines.
    #[arg(long, value_name = "FILE")]
    pub transcript: Option<PathBuf>,
    /// Session index passed to the backend; selects the mock session.
    #[arg(long, default_value_t = 0)]
    pub attempt: usize,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Suite file listing task paths.
    #[arg(long, value_name = "FILE")]
    pub suite: PathBuf,
    /// Independent attempts per task.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub attempts: u64,
    /// Tasks run in parallel.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub workers: u64,
    /// Markdown report file.
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
    /// CSV report file.
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,
    /// Transcript directory. Defaults to `<report>.transcripts` when --report is set.
    #[arg(long, value_name = "DIR")]
    pub transcripts: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum CttAction {
    /// Store a solved design.
    Add {
        #[arg(long)]
        name: String,
        /// Specification JSON.
        #[arg(long, value_name = "FILE")]
        spec: PathBuf,
        /// SPICE deck of the solution.
        #[arg(long, value_name = "FILE")]
        netlist: PathBuf,
    },
    /// Rank stored designs against a text query.
    Query {
        text: String,
        /// Number of hits.
        #[arg(short, default_value_t = 3)]
        k: usize,
    },
    /// Print the store file.
    Export,
}

/// Parse `argv` (program name first) and run. Returns the exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("menter: {e}");
            e.exit_code()
        }
    }
}

struct Ctx {
    config: CliConfig,
    script: Option<PathBuf>,
    json: bool,
}

impl Ctx {
    fn print<T: Serialize>(&self, value: &T) {
        println!("{}", serde_json::to_string_pretty(value).expect("serializable output"));
    }

    fn store(&self) -> Result<CttStore, CliError> {
        let path = self
            .config
            .ctt
            .as_ref()
            .ok_or_else(|| CliError::Usage("no think-tank path: pass --ctt or set `ctt` in the config".into()))?;
        CttStore::open(path).map_err(|e| CliError::Failed(e.to_string()))
    }

    fn corpus(&self) -> Result<Option<CorpusIndex>, CliError> {
        match &self.config.index {
            None => Ok(None),
            Some(p) if !p.exists() => Err(CliError::NotFound(p.clone())),
            Some(p) => CorpusIndex::load(p).map(Some).map_err(|e| CliError::Failed(format!("{}: {e}", p.display()))),
        }
    }

    fn run_config(&self) -> RunConfig {
        RunConfig { erc: self.config.erc.clone(), solver: self.config.solver, ..RunConfig::default() }
    }

    fn backend(&self, kind: Option<&str>) -> Result<BackendConfig, CliError> {
        let mut b = self.config.backend.clone();
        if let Some(k) = kind {
            b.kind = if k == "http" { BackendKind::Http } else { BackendKind::Mock };
        }
        if let Some(s) = &self.script {
            if !s.exists() {
                return Err(CliError::NotFound(s.to_path_buf()));
            }
            b.kind = BackendKind::Mock;
            b.script = Some(s.to_path_buf());
        }
        b.validate().map_err(|e| CliError::Usage(format!("backend: {e}")))?;
        Ok(b)
    }
}

fn execute(cli: Cli) -> Result<bool, CliError> {
    let mut config = match &cli.config {
        Some(p) => CliConfig::load(p)?,
        None => CliConfig::default(),
    };
    if cli.ctt.is_some() {
        config.ctt = cli.ctt.clone();
    }
    if cli.index.is_some() {
        config.index = cli.index.clone();
    }
    let ctx = Ctx { config, script: cli.script.clone(), json: cli.json };
    match cli.command {
        Command::Parse { file } => cmd_parse(&ctx, &file),
        Command::Check { file } => cmd_check(&ctx, &file),
        Command::Sim(args) => cmd_sim(&ctx, &args),
        Command::Run(args) => cmd_run(&ctx, &args),
        Command::Bench(args) => cmd_bench(&ctx, &args),
        Command::Ctt { action } => cmd_ctt(&ctx, action),
        Command::Ingest { dir, out, describe_diagrams } => cmd_ingest(&ctx, &dir, &out, describe_diagrams),
        Command::Mcq { data } => cmd_mcq(&ctx, &data),
    }
}

fn load_deck(file: &Path) -> Result<Netlist, CliError> {
    let deck = parse_netlist(&read_input(file)?);
    for d in &deck.diagnostics {
        eprintln!("{}: {d}", file.display());
    }
    Ok(deck)
}

fn cmd_parse(ctx: &Ctx, file: &Path) -> Result<bool, CliError> {
    let deck = load_deck(file)?;
    let ok = !deck.has_errors();
    if ctx.json {
        #[derive(Serialize)]
        struct Out<'a> {
            ok: bool,
            diagnostics: &'a [menter_core::Diagnostic],
            netlist: &'a Netlist,
        }
        ctx.print(&Out { ok, diagnostics: &deck.diagnostics, netlist: &deck });
    } else if ok {
        print!("{}", emit(&deck));
    }
    Ok(ok)
}

fn cmd_check(ctx: &Ctx, file: &Path) -> Result<bool, CliError> {
    let deck = load_deck(file)?;
    if deck.has_errors() {
        return Err(CliError::Failed(format!("{}: deck does not parse", file.display())));
    }
    let flat = flatten(&deck).map_err(|e| CliError::Failed(e.to_string()))?;
    let report = run_erc(&flat, &ctx.config.erc);
    if ctx.json {
        ctx.print(&report);
    } else {
        for v in &report.violations {
            println!("{:?} {v}", v.severity);
        }
        println!("{}", if report.passed { "passed" } else { "failed" });
    }
    Ok(report.passed)
}

fn cmd_sim(ctx: &Ctx, args: &SimArgs) -> Result<bool, CliError> {
    let deck = load_deck(&args.file)?;
    if deck.has_errors() {
        return Err(CliError::Failed(format!("{}: deck does not parse", args.file.display())));
    }
    let flat = flatten(&deck).map_err(|e| CliError::Failed(e.to_string()))?;
    let opts = &ctx.config.solver;
    let (text, ok) = if let Some(sweep) = &args.sweep {
        let num = |s: &str| {
            parse_value(s).map(|v| v.magnitude).map_err(|e| CliError::Usage(format!("sweep value `{s}`: {e}")))
        };
        let (start, stop, step) = (num(&sweep[1])?, num(&sweep[2])?, num(&sweep[3])?);
        let r = dc_sweep(&flat, &sweep[0], start, stop, step, opts).map_err(|e| CliError::Failed(e.to_string()))?;
        let ok = r.failures.is_empty();
        if !ok {
            eprintln!("{} sweep point(s) did not converge", r.failures.len());
        }
        let text = if ctx.json { serde_json::to_string_pretty(&r).expect("serializable") + "\n" } else { r.to_csv() };
        (text, ok)
    } else {
        let sol = solve_op(&flat, opts).map_err(|e| CliError::Failed(e.to_string()))?;
        if let Some(why) = &sol.diagnosis {
            eprintln!("{why}");
        }
        let text = if ctx.json {
            serde_json::to_string_pretty(&sol).expect("serializable") + "\n"
        } else {
            let mut t = String::new();
            for (node, v) in &sol.node_voltages {
                t.push_str(&format!("v({node}) = {}\n", menter_core::speccheck::num(*v)));
            }
            for (src, i) in &sol.source_currents {
                t.push_str(&format!("i({src}) = {}\n", menter_core::speccheck::num(*i)));
            }
            t
        };
        (text, sol.converged)
    };
    match &args.out {
        Some(p) => write_output(p, &text)?,
        None => print!("{text}"),
    }
    Ok(ok)
}

#[derive(Serialize)]
struct RunSummary<'a> {
    task_id: &'a str,
    status: TaskStatus,
    iterations: usize,
    final_netlist: Option<&'a str>,
    ctt_entry_id: Option<&'a str>,
    note: Option<&'a str>,
    outcomes: &'a [menter_core::CheckOutcome],
    usage: &'a menter_llm::UsageLedger,
}

fn cmd_run(ctx: &Ctx, args: &RunArgs) -> Result<bool, CliError> {
    let task = TaskDef::from_json(&read_input(&args.task)?).map_err(|e| CliError::Usage(format!("{}: {e}", args.task.display())))?;
    let backend = ctx.backend(args.backend.as_deref())?;
    let store = ctx.config.ctt.as_ref().map(|_| ctx.store()).transpose()?;
    let corpus = ctx.corpus()?;
    let stores = Stores { ctt: store.as_ref(), prior: None, corpus: corpus.as_ref() };

    let mut terminal = None;
    if args.interactive || ctx.config.interactive {
        if std::io::stdin().is_terminal() {
            terminal = Some(checkpoint::TerminalCheckpoint::new(std::io::stdin().lock()));
        } else {
            eprintln!("stdin is not a terminal; checkpoints auto-approve");
        }
    }
    let hooks = Hooks {
        checkpoint: terminal.as_mut().map(|t| t as &mut dyn Checkpoint),
        transcript: args.transcript.clone(),
    };
    let r = run_task(&task, &backend, args.attempt, stores, &ctx.run_config(), hooks);
    if ctx.json {
        ctx.print(&RunSummary {
            task_id: &r.task_id,
            status: r.status,
            iterations: r.iterations,
            final_netlist: r.final_netlist.as_deref(),
            ctt_entry_id: r.ctt_entry_id.as_deref(),
            note: r.note.as_deref(),
            outcomes: &r.outcomes,
            usage: &r.usage,
        });
    } else {
        println!("task: {}\nstatus: {:?}\niterations: {}", r.task_id, r.status, r.iterations);
        println!("tokens: {} prompt, {} completion", r.usage.total.prompt_tokens, r.usage.total.completion_tokens);
        if let Some(id) = &r.ctt_entry_id {
            println!("stored: {id}");
        }
        if let Some(n) = &r.final_netlist {
            print!("{n}");
        }
    }
    if let Some(note) = &r.note {
        eprintln!("{note}");
    }
    Ok(r.status == TaskStatus::Success)
}

fn cmd_bench(ctx: &Ctx, args: &BenchArgs) -> Result<bool, CliError> {
    if !args.suite.exists() {
        return Err(CliError::NotFound(args.suite.clone()));
    }
    let tasks = eval::load_suite(&args.suite).map_err(|e| CliError::Usage(e.to_string()))?;
    let backend = ctx.backend(None)?;
    let store = ctx.config.ctt.as_ref().map(|_| ctx.store()).transpose()?;
    let corpus = ctx.corpus()?;
    let stores = Stores { ctt: store.as_ref(), prior: None, corpus: corpus.as_ref() };
    let transcripts = args.transcripts.clone().or_else(|| {
        args.report.as_ref().map(|r| {
            let mut p = r.clone().into_os_string();
            p.push(".transcripts");
            PathBuf::from(p)
        })
    });
    let options = SuiteOptions { workers: args.workers as usize, transcript_dir: transcripts };
    let result = eval::run_suite(&tasks, args.attempts as usize, &backend, stores, &ctx.run_config(), &options);
    let md = eval::render_report(&result, ReportFormat::Markdown);
    if let Some(p) = &args.report {
        write_output(p, &md)?;
    }
    if let Some(p) = &args.csv {
        write_output(p, &eval::render_report(&result, ReportFormat::Csv))?;
    }
    if ctx.json {
        ctx.print(&result);
    } else {
        print!("{md}");
    }
    Ok(true)
}

fn cmd_ctt(ctx: &Ctx, action: CttAction) -> Result<bool, CliError> {
    let store = ctx.store()?;
    match action {
        CttAction::Add { name, spec, netlist } => {
            let spec = SpecRequirement::from_json(&read_input(&spec)?)
                .map_err(|e| CliError::Usage(format!("{}: {e}", spec.display())))?;
            let deck = read_input(&netlist)?;
            let id = CttEntry::new(&name, spec, Vec::new(), &deck, None)
                .and_then(|e| store.put(&e))
                .map_err(|e| CliError::Failed(e.to_string()))?;
            if ctx.json {
                ctx.print(&serde_json::json!({ "entry_id": id }));
            } else {
                println!("{id}");
            }
        }
        CttAction::Query { text, k } => {
            let hits = store.query(&text, k);
            if ctx.json {
                let out: Vec<_> = hits.iter().map(|(e, s)| serde_json::json!({ "score": s, "entry": e })).collect();
                ctx.print(&out);
            } else {
                for (e, s) in &hits {
                    println!("{s:.4}  {}  {}", &e.entry_id[..12], e.circuit_name);
                }
            }
        }
        CttAction::Export => print!("{}", store.export().map_err(|e| CliError::Failed(e.to_string()))?),
    }
    Ok(true)
}

fn cmd_ingest(ctx: &Ctx, dir: &Path, out: &Path, describe: bool) -> Result<bool, CliError> {
    if !dir.is_dir() {
        return Err(CliError::NotFound(dir.to_path_buf()));
    }
    let mut describer = if describe {
        let cfg = ctx.backend(None)?;
        let b = open_backend(&cfg, None, 0).map_err(|e| CliError::Failed(e.to_string()))?;
        Some(BackendDescriber::new(b))
    } else {
        None
    };
    let hook = describer.as_mut().map(|d| d as &mut dyn DiagramDescriber);
    let index = ingest_dir(dir, hook).map_err(|e| CliError::Failed(e.to_string()))?;
    index.save(out).map_err(|e| CliError::Failed(format!("cannot write {}: {e}", out.display())))?;
    let diagrams = index.chunks.iter().filter(|c| c.kind == ChunkKind::DiagramDescription).count();
    if ctx.json {
        ctx.print(&serde_json::json!({ "chunks": index.len(), "diagrams": diagrams, "out": out }));
    } else {
        println!("{} chunks ({diagrams} diagrams) -> {}", index.len(), out.display());
    }
    Ok(true)
}

fn cmd_mcq(ctx: &Ctx, data: &Path) -> Result<bool, CliError> {
    let items: Vec<eval::McqItem> =
        serde_json::from_str(&read_input(data)?).map_err(|e| CliError::Usage(format!("{}: {e}", data.display())))?;
    if items.is_empty() {
        return Err(CliError::Usage(format!("{}: no items", data.display())));
    }
    for (i, item) in items.iter().enumerate() {
        item.validate().map_err(|e| CliError::Usage(format!("{} item {i}: {e}", data.display())))?;
    }
    let cfg = ctx.backend(None)?;
    let mut backend = open_backend(&cfg, None, 0).map_err(|e| CliError::Failed(e.to_string()))?;
    let result = eval::run_mcq(&items, backend.as_mut());
    if ctx.json {
        ctx.print(&result);
    } else {
        for r in &result.records {
            let got = r.parsed.map_or("-".to_string(), String::from);
            let mark = if r.correct { "ok" } else { r.reason.as_deref().unwrap_or("wrong") };
            println!("{:>4}  expected {}  got {got}  {mark}", r.index + 1, r.expected);
        }
        println!("accuracy: {:.1}%", result.accuracy * 100.0);
    }
    Ok(true)
}
