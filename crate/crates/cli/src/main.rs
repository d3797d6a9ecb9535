//! `sigmahom` experiment runner.
//!
//! Exit status: 0 when every enabled check passes, 1 when a check fails,
//! 2 on parse errors, 3 on validation errors, 4 when a solver or the
//! output stage fails.

mod config;
mod error;
mod experiments;
mod plot;
mod report;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use config::ExperimentConfig;
use error::CliError;
use report::{CheckRecord, RunManifest, Verdict, MANIFEST};

#[derive(Parser)]
#[command(name = "sigmahom", version, about = "Two-scale homogenization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its artifacts and manifest.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output_dir` of the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; the TOOL_THREADS variable takes precedence.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Plot a convergence CSV as a log-log SVG.
    Plot {
        csv: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and validate a config without running it.
    Validate { config: PathBuf },
}

fn thread_count(flag: Option<usize>) -> Result<usize, CliError> {
    let env = match std::env::var("TOOL_THREADS") {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .map_err(|e| CliError::Parse(format!("TOOL_THREADS={v:?}: {e}")))?,
        ),
        Err(_) => None,
    };
    let n = env.or(flag).unwrap_or(0);
    let n = if n == 0 { std::thread::available_parallelism().map_or(1, |n| n.get()) } else { n };
    Ok(n)
}

fn run(config: &Path, out: Option<PathBuf>, threads: Option<usize>) -> Result<bool, CliError> {
    let (cfg, bytes) = ExperimentConfig::load(config)?;
    experiments::validate(&cfg)?;
    let threads = thread_count(threads)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Run(format!("thread pool: {e}")))?;
    let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
    report::prepare_output_dir(&dir)?;

    let start = Instant::now();
    let result = experiments::run(&cfg);
    let mut manifest = RunManifest {
        experiment: cfg.experiment.block_name().replace('_', "-"),
        config_sha256: report::sha256_hex(&bytes),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        threads,
        wall_clock_seconds: 0.0,
        files: Vec::new(),
        verdicts: BTreeMap::new(),
        warnings: Vec::new(),
        error: None,
    };
    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
            manifest.error = Some(e.to_string());
            manifest.files.push(MANIFEST.into());
            write_manifest(&dir, &manifest)?;
            return Err(e);
        }
    };
    for (name, contents) in &outcome.artifacts {
        report::write_file(&dir, name, contents)?;
        manifest.files.push(name.clone());
    }
    manifest.files.push(MANIFEST.into());
    manifest.files.sort();
    for c in &outcome.checks {
        let mark = match c.verdict {
            Verdict::Pass => "pass",
            Verdict::Fail => "FAIL",
            Verdict::Skipped => "skip",
        };
        println!("{mark:>4}  {}: {}", c.name, c.detail);
        manifest.verdicts.insert(c.name.clone(), CheckRecord { verdict: c.verdict, detail: c.detail.clone() });
    }
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    manifest.warnings = outcome.warnings.clone();
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    write_manifest(&dir, &manifest)?;
    Ok(outcome.all_pass())
}

fn write_manifest(dir: &Path, m: &RunManifest) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(m).map_err(|e| CliError::Run(e.to_string()))? + "\n";
    report::write_file(dir, MANIFEST, &text)
}

fn plot_cmd(csv: &Path, out: Option<PathBuf>) -> Result<(), CliError> {
    let text = std::fs::read_to_string(csv).map_err(|e| CliError::Parse(format!("{}: {e}", csv.display())))?;
    let rows = plot::parse_study(&text)?;
    let target = out.unwrap_or_else(|| csv.with_extension("svg"));
    std::fs::write(&target, plot::render_svg(&rows)).map_err(|e| CliError::Run(format!("{}: {e}", target.display())))?;
    println!("slope = {:.6}", plot::loglog_slope(&rows));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, threads } => run(&config, out, threads),
        Command::Plot { csv, out } => plot_cmd(&csv, out).map(|_| true),
        Command::Validate { config } => ExperimentConfig::load(&config)
            .and_then(|(cfg, _)| experiments::validate(&cfg))
            .map(|_| {
                println!("ok");
                true
            }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
