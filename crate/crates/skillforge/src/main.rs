use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use skillforge::config::{load_cost_model, load_prices, load_scenario, load_sim_config, ConfigError};
use skillforge::ledger_csv::{learning_path, read_ledger, write_learning_events, write_ledger, LedgerIoError};
use skillforge::library_dir::{LibraryDir, LibraryError};
use skillforge::report::{self, CompareError, CostInputs, SimulateSummary};
use skillforge::shared::{run_shared, SharedError};
use skillforge_core::metrics::{CostModel, MetricsError};
use skillforge_core::sim::{generate_stream, run_tasks, seed_library, SimConfig, SimError};
use skillforge_core::{read_tasks, LedgerError, LedgerEvent, SkillLibrary, TaskTrajectoryView};

const LIBRARY_ENV: &str = "SKILLFORGE_LIBRARY_DIR";

#[derive(Parser)]
#[command(name = "skillforge", version, about = "Skill-library lifecycle engine: ledger metrics, simulation, comparison and cost")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Metric report for a ledger, optionally split into blocks.
    Analyze {
        ledger: PathBuf,
        /// Cumulative block ends, e.g. 100,300,600,910.
        #[arg(long)]
        blocks: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Run the mock agent over a generated stream or a scenario file.
    Simulate(SimulateArgs),
    /// Paired bootstrap and McNemar test between two ledgers.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 1000)]
        iters: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        json: bool,
    },
    /// Identity terms, dollar cost, amortization and token efficiency.
    Cost(CostArgs),
    /// Inspect or validate a library directory.
    Library {
        #[command(subcommand)]
        action: LibraryAction,
    },
}

#[derive(Args)]
struct SimulateArgs {
    /// Simulator config (TOML). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output ledger (CSV).
    #[arg(long)]
    out: PathBuf,
    /// Library directory; seeds the run when it holds skills and receives
    /// the final library.
    #[arg(long, env = LIBRARY_ENV)]
    library: Option<PathBuf>,
    /// Scripted task list replacing the generated stream.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Threads sharing one on-disk library; each writes its own ledger.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Cumulative block ends for the summary; quartiles by default.
    #[arg(long)]
    blocks: Option<String>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct CostArgs {
    ledger: Option<PathBuf>,
    #[arg(long)]
    cost_model: Option<PathBuf>,
    #[arg(long)]
    prices: Option<PathBuf>,
    /// Per-task headline cost to amortize.
    #[arg(long)]
    headline: Option<f64>,
    /// One-time budget spread over the stream.
    #[arg(long, default_value_t = 0.0)]
    one_time: f64,
    /// Stream length for amortization.
    #[arg(long)]
    n: Option<u64>,
    /// SR in percent, for token efficiency without a ledger.
    #[arg(long)]
    sr: Option<f64>,
    /// Mean tokens per task in thousands.
    #[arg(long)]
    tokens_k: Option<f64>,
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum LibraryAction {
    Inspect {
        #[arg(env = LIBRARY_ENV)]
        dir: PathBuf,
        #[arg(long)]
        json: bool,
    },
    Validate {
        #[arg(env = LIBRARY_ENV)]
        dir: PathBuf,
    },
}

/// A failure with its exit status: 1 validation, 2 I/O, 3 statistical
/// precondition.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl ToString) -> Self {
        Failure { code, message: message.to_string() }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::new(if e.is_io() { 2 } else { 1 }, e)
    }
}

impl From<LedgerIoError> for Failure {
    fn from(e: LedgerIoError) -> Self {
        Failure::new(if e.is_io() { 2 } else { 1 }, e)
    }
}

impl From<LibraryError> for Failure {
    fn from(e: LibraryError) -> Self {
        Failure::new(if matches!(e, LibraryError::Io { .. }) { 2 } else { 1 }, e)
    }
}

impl From<LedgerError> for Failure {
    fn from(e: LedgerError) -> Self {
        Failure::new(1, e)
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        Failure::new(1, e)
    }
}

impl From<MetricsError> for Failure {
    fn from(e: MetricsError) -> Self {
        let code = match e {
            MetricsError::BadPartition(_) | MetricsError::InvalidArgument(_) | MetricsError::UnknownModel(_) => 1,
            _ => 3,
        };
        Failure::new(code, e)
    }
}

impl From<CompareError> for Failure {
    fn from(e: CompareError) -> Self {
        match e {
            CompareError::Metrics(m) => m.into(),
            CompareError::Duplicate { .. } => Failure::new(1, e),
            CompareError::Mismatch { .. } => Failure::new(3, e),
        }
    }
}

impl From<SharedError> for Failure {
    fn from(e: SharedError) -> Self {
        match e {
            SharedError::Config(e) => e.into(),
            SharedError::Library(e) => e.into(),
            SharedError::Ledger(e) => e.into(),
            e => Failure::new(1, e),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::new(2, format!("{}: {e}", path.display()))
}

fn print_json<T: Serialize>(value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::new(1, e))?;
    println!("{text}");
    Ok(())
}

fn load_tasks(path: &Path) -> Result<Vec<TaskTrajectoryView>, Failure> {
    let rows = read_ledger(path)?;
    read_tasks(&rows).map_err(|e| Failure::new(1, format!("{}: {e}", path.display())))
}

fn blocks_arg(blocks: Option<&str>) -> Result<Option<Vec<usize>>, Failure> {
    blocks.map(report::parse_boundaries).transpose().map_err(|e| Failure::new(1, e))
}

fn analyze(ledger: &Path, blocks: Option<&str>, json: bool) -> Result<(), Failure> {
    let tasks = load_tasks(ledger)?;
    let boundaries = blocks_arg(blocks)?;
    let r = report::analyze(&tasks, boundaries.as_deref())?;
    if json {
        print_json(&r)
    } else {
        print!("{}", report::render_analyze(&r));
        Ok(())
    }
}

fn has_skills(dir: &LibraryDir) -> bool {
    dir.scan_unlocked().map(|s| !s.rules.is_empty() || !s.routines.is_empty() || !s.blacklist.is_empty() || !s.diagnostics.is_empty()).unwrap_or(false)
}

fn simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let scenario = args.scenario.as_deref().map(load_scenario).transpose()?;
    let mut config = match (&scenario, &args.config) {
        (Some(s), _) => s.config.clone(),
        (None, Some(path)) => load_sim_config(path)?,
        (None, None) => SimConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let library_dir = args.library.as_ref().map(LibraryDir::new);
    let seed: SkillLibrary = match (scenario.as_ref().and_then(|s| s.seed_library.as_ref()), &library_dir) {
        (Some(path), _) => LibraryDir::new(path).load()?,
        (None, Some(dir)) if has_skills(dir) => dir.load()?,
        _ => seed_library(),
    };
    let tasks = match scenario {
        Some(s) => s.tasks,
        None => {
            config.validate()?;
            generate_stream(&config)
        }
    };

    let mut worker_ledgers = Vec::new();
    let (rows, stats, events): (Vec<LedgerEvent>, _, Vec<(String, _)>) = if args.workers <= 1 {
        let out = run_tasks(&config, &seed, &tasks)?;
        if let Some(dir) = &library_dir {
            dir.save(&out.library)?;
        }
        let events = out.records.iter().flat_map(|r| r.events.iter().map(|e| (r.task_id.clone(), e.clone()))).collect();
        (out.rows, out.stats, events)
    } else {
        let fallback;
        let dir = match &library_dir {
            Some(d) => d,
            None => {
                let stem = args.out.file_stem().and_then(|s| s.to_str()).unwrap_or("ledger");
                fallback = LibraryDir::new(args.out.with_file_name(format!("{stem}.library")));
                &fallback
            }
        };
        let run = run_shared(&config, &seed, &tasks, dir, &args.out, args.workers)?;
        let mut rows = Vec::new();
        for path in &run.ledgers {
            rows.extend(read_ledger(path)?);
            worker_ledgers.push(path.display().to_string());
        }
        (rows, run.stats, run.events)
    };
    write_ledger(&args.out, &rows)?;
    write_learning_events(&learning_path(&args.out), events.iter().map(|(t, e)| (t.as_str(), e)))?;

    let bytes = fs::read(&args.out).map_err(|e| io_failure(&args.out, e))?;
    let views = read_tasks(&rows)?;
    let boundaries = match blocks_arg(args.blocks.as_deref())? {
        Some(b) => Some(b),
        None => report::quartile_boundaries(views.len()),
    };
    let analysis = report::analyze(&views, boundaries.as_deref())?;
    let summary = SimulateSummary {
        run_id: config.run_id.clone(),
        n_tasks: views.len(),
        ledger: args.out.display().to_string(),
        checksum: report::checksum(&bytes),
        worker_ledgers,
        library: stats.into(),
        analysis,
    };
    if args.json {
        print_json(&summary)
    } else {
        print!("{}", report::render_simulate(&summary));
        Ok(())
    }
}

fn compare(a: &Path, b: &Path, iters: usize, seed: u64, alpha: f64, json: bool) -> Result<(), Failure> {
    let ta = load_tasks(a)?;
    let tb = load_tasks(b)?;
    let r = report::compare(&ta, &tb, iters, seed, alpha)?;
    if json {
        print_json(&r)
    } else {
        print!("{}", report::render_compare(&r));
        Ok(())
    }
}

fn cost(args: &CostArgs) -> Result<(), Failure> {
    let model = match &args.cost_model {
        Some(p) => load_cost_model(p)?,
        None => CostModel::default(),
    };
    let prices = args.prices.as_deref().map(load_prices).transpose()?;
    let tasks = args.ledger.as_deref().map(load_tasks).transpose()?;
    let inputs = CostInputs {
        model,
        prices,
        headline: args.headline,
        one_time: args.one_time,
        n: args.n,
        sr: args.sr,
        tokens_k: args.tokens_k,
    };
    let r = report::cost(tasks.as_deref(), &inputs)?;
    if args.json {
        print_json(&r)
    } else {
        print!("{}", report::render_cost(&r));
        Ok(())
    }
}

fn library(action: &LibraryAction) -> Result<(), Failure> {
    match action {
        LibraryAction::Inspect { dir, json } => {
            let lib = LibraryDir::new(dir).load()?;
            if *json {
                print_json(&lib)
            } else {
                print!("{}", report::render_library(&lib));
                Ok(())
            }
        }
        LibraryAction::Validate { dir } => {
            let scan = LibraryDir::new(dir).scan()?;
            let (rules, routines, demoted) = (scan.rules.len(), scan.routines.len(), scan.blacklist.len());
            match scan.into_library() {
                Ok(_) => {
                    println!("ok: {rules} rules, {routines} routines, {demoted} demoted");
                    Ok(())
                }
                Err(diagnostics) => {
                    let text: Vec<String> = diagnostics.iter().map(ToString::to_string).collect();
                    Err(Failure::new(1, text.join("\n")))
                }
            }
        }
    }
}

fn main() -> ExitCode {
    // Usage errors are validation errors (exit 1); 2 is reserved for I/O.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Analyze { ledger, blocks, json } => analyze(ledger, blocks.as_deref(), *json),
        Command::Simulate(args) => simulate(args),
        Command::Compare { a, b, iters, seed, alpha, json } => compare(a, b, *iters, *seed, *alpha, *json),
        Command::Cost(args) => cost(args),
        Command::Library { action } => library(action),
    };
    let _ = std::io::stdout().flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
