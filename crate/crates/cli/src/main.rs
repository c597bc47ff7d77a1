use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod corpus;
mod eval;
mod grade;
mod io;
mod scan;

/// Static detection of ProGuard-style obfuscation in Android apps.
#[derive(Parser)]
#[command(name = "dexlens", version)]
struct Cli {
    /// Worker threads; 0 uses one per logical CPU.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    Apk,
    Dex,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Detect obfuscation features in APK, DEX or app-model JSON files.
    Scan {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        /// Main package of the scanned app(s); overrides the one in model JSON.
        #[arg(long)]
        main_package: Option<String>,
        /// Input format; guessed from extension and magic bytes when absent.
        #[arg(long, value_enum)]
        format: Option<InputFormat>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for one report per app plus scan_summary.json. Without
        /// it, the summary with embedded reports goes to standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Corpus tables from a directory of reports and store metadata.
    Corpus {
        report_dir: PathBuf,
        /// CSV (app_id,downloads_bucket,account_id,last_update) or JSON sidecar.
        metadata: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Pool apps across accounts instead of averaging per-account rates.
        #[arg(long)]
        micro_accounts: bool,
    },
    /// Write a labeled corpus: each model plus its simulated obfuscated version.
    Simulate {
        /// Directory of app-model JSON files, or a single file.
        models: PathBuf,
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score the detector on a labeled corpus built from models and a plan.
    Eval {
        models_dir: PathBuf,
        plan: PathBuf,
        /// Metrics CSV; a JSON copy is written next to it.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Score the main-package view instead of the whole app.
        #[arg(long)]
        main_view: bool,
    },
    /// Grade a Gradle snippet and ProGuard rules against a rubric.
    Grade {
        build: PathBuf,
        rules: PathBuf,
        rubric: PathBuf,
        /// App model used to resolve members and spot misspelled classes.
        #[arg(long)]
        app: Option<PathBuf>,
        #[arg(long, default_value = "release")]
        build_type: String,
        /// Accept class-level keeps without member specs as covering members.
        #[arg(long)]
        lenient: bool,
        /// Also write the result JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
pub enum Failure {
    /// Bad or unreadable input: exit 1.
    Input(anyhow::Error),
    /// Anything else, e.g. output that cannot be written: exit 2.
    Internal(anyhow::Error),
}

impl Failure {
    pub fn input(msg: impl std::fmt::Display) -> Self {
        Failure::Input(anyhow::anyhow!("{msg}"))
    }
}

pub type CmdResult = Result<(), Failure>;

pub fn input_err<E: Into<anyhow::Error>>(path: &Path) -> impl FnOnce(E) -> Failure + '_ {
    move |e| Failure::Input(e.into().context(path.display().to_string()))
}

pub fn internal_err<E: Into<anyhow::Error>>(path: &Path) -> impl FnOnce(E) -> Failure + '_ {
    move |e| Failure::Internal(e.into().context(path.display().to_string()))
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Scan {
            paths,
            main_package,
            format,
            config,
            out,
        } => scan::run(&paths, main_package.as_deref(), format, config.as_deref(), out.as_deref()),
        Command::Corpus {
            report_dir,
            metadata,
            out,
            config,
            micro_accounts,
        } => corpus::run(&report_dir, &metadata, &out, config.as_deref(), micro_accounts),
        Command::Simulate { models, plan, out } => eval::simulate(&models, &plan, &out),
        Command::Eval {
            models_dir,
            plan,
            out,
            config,
            main_view,
        } => eval::eval(&models_dir, &plan, &out, config.as_deref(), main_view),
        Command::Grade {
            build,
            rules,
            rubric,
            app,
            build_type,
            lenient,
            out,
        } => grade::run(&build, &rules, &rubric, app.as_deref(), &build_type, lenient, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
        eprintln!("error: thread pool: {e}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("internal error: {e:#}");
            ExitCode::from(2)
        }
    }
}
