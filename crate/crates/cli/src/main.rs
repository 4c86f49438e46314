mod store;

use anyhow::{anyhow, bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use conelab_core::experiments::{loglog_fit, run_all, ExperimentConfig, ExperimentKind};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use store::Store;

/// Numerical laboratory for cone multiplier operators: runs scripted
/// experiment campaigns from a JSON config and manages their results.
#[derive(Parser)]
#[command(name = "conelab", version, disable_help_subcommand = true)]
struct Cli {
    /// Results directory (default: $CONELAB_OUT or ./results)
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Bound on worker threads used inside experiments
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    /// Overrides the seed in the config file
    #[arg(long, global = true, value_name = "S")]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the experiments described by a JSON config file
    Run {
        /// Path to the config file
        config: PathBuf,
    },
    /// List run ids in the results store
    List,
    /// Print a summary of one run's manifest
    Show {
        /// Run id as printed by `list`
        run_id: String,
    },
    /// Emit plot-ready CSV for one experiment of a run on stdout
    Plotdata {
        /// Run id as printed by `list`
        run_id: String,
        /// Experiment name, e.g. convergence
        experiment: String,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            bail!("--jobs must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring worker pool")?;
    }
    match cli.command {
        Command::Run { config } => cmd_run(&config, cli.out, cli.seed),
        Command::List => cmd_list(&Store::new(resolve_out_dir(cli.out, None))),
        Command::Show { run_id } => cmd_show(&Store::new(resolve_out_dir(cli.out, None)), &run_id),
        Command::Plotdata { run_id, experiment } => {
            cmd_plotdata(&Store::new(resolve_out_dir(cli.out, None)), &run_id, &experiment)
        }
    }
}

/// Precedence: --out flag, then CONELAB_OUT, then the config's out_dir,
/// then ./results.
fn resolve_out_dir(flag: Option<PathBuf>, config_dir: Option<&str>) -> PathBuf {
    flag.or_else(|| std::env::var_os("CONELAB_OUT").map(PathBuf::from))
        .or_else(|| config_dir.map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"))
}

fn cmd_run(config_path: &PathBuf, out: Option<PathBuf>, seed: Option<u64>) -> Result<ExitCode> {
    let bytes = std::fs::read(config_path)
        .with_context(|| format!("reading config {}", config_path.display()))?;
    let mut cfg = ExperimentConfig::from_json(&bytes)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let store = Store::new(resolve_out_dir(out, cfg.out_dir.as_deref()));

    let timestamp = chrono::Utc::now();
    let started = std::time::Instant::now();
    let report = run_all(&cfg)?;
    let wall = started.elapsed().as_secs_f64();

    let manifest = store.persist(&cfg, &report, timestamp, wall)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{}", manifest.run_id)?;
    for exp in &manifest.experiments {
        writeln!(out, "{}\t{}", exp.name, if exp.passed { "pass" } else { "FAIL" })?;
    }
    if manifest.all_passed {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("one or more checks failed; see {}", store.run_dir(&manifest.run_id).display());
        Ok(ExitCode::from(2))
    }
}

fn cmd_list(store: &Store) -> Result<ExitCode> {
    let mut out = std::io::stdout().lock();
    for id in store.list()? {
        writeln!(out, "{id}")?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_show(store: &Store, run_id: &str) -> Result<ExitCode> {
    let manifest = store.load_manifest(run_id)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "run id:        {}", manifest.run_id)?;
    writeln!(out, "timestamp:     {}", manifest.timestamp)?;
    writeln!(out, "seed:          {}", manifest.seed)?;
    writeln!(out, "code version:  {}", manifest.code_version)?;
    writeln!(out, "config sha256: {}", manifest.config_sha256)?;
    writeln!(out, "wall time:     {:.3}s", manifest.wall_time_seconds)?;
    writeln!(out, "experiments:")?;
    for exp in &manifest.experiments {
        writeln!(out, "  {:<16} {}", exp.name, if exp.passed { "pass" } else { "FAIL" })?;
    }
    writeln!(out, "overall:       {}", if manifest.all_passed { "pass" } else { "FAIL" })?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_plotdata(store: &Store, run_id: &str, experiment: &str) -> Result<ExitCode> {
    let kind = ExperimentKind::from_name(experiment)
        .ok_or_else(|| anyhow!("unknown experiment: {experiment}"))?;
    let manifest = store.load_manifest(run_id)?;
    let entry = manifest
        .experiments
        .iter()
        .find(|e| e.name == experiment)
        .ok_or_else(|| anyhow!("experiment {experiment} was not part of run {run_id}"))?;
    let raw = store.load_csv(run_id, &entry.csv)?;
    let projected = match kind {
        ExperimentKind::Convergence => project_convergence(&raw)?,
        ExperimentKind::SquareScaling => project_square_scaling(&raw)?,
        _ => raw,
    };
    std::io::stdout().lock().write_all(&projected)?;
    Ok(ExitCode::SUCCESS)
}

/// Rows of a stored report CSV as (header, records).
fn read_report(raw: &[u8]) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut reader = csv::Reader::from_reader(raw);
    let header: Vec<String> = reader
        .headers()
        .context("reading report header")?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.context("reading report row")?;
        rows.push(record.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}

fn column(header: &[String], name: &str) -> Result<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| anyhow!("stored report is missing column {name}"))
}

fn csv_to_bytes(header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    w.write_record(header).expect("csv header");
    for row in rows {
        w.write_record(row).expect("csv row");
    }
    w.into_inner().expect("csv buffer")
}

/// Error-vs-scale curve keyed by order: (lambda, r, e), ascending in r.
fn project_convergence(raw: &[u8]) -> Result<Vec<u8>> {
    let (header, rows) = read_report(raw)?;
    let (il, ir, ik, iv) = (
        column(&header, "lambda")?,
        column(&header, "r")?,
        column(&header, "kind")?,
        column(&header, "value")?,
    );
    let mut points: Vec<(f64, f64, String, String, String)> = rows
        .iter()
        .filter(|row| row[ik] == "mean_err")
        .map(|row| {
            let lambda: f64 = row[il].parse().context("lambda column")?;
            let r: f64 = row[ir].parse().context("r column")?;
            Ok((lambda, r, row[il].clone(), row[ir].clone(), row[iv].clone()))
        })
        .collect::<Result<_>>()?;
    points.sort_by(|a, b| (a.0, a.1).partial_cmp(&(b.0, b.1)).expect("finite keys"));
    let out: Vec<Vec<String>> = points
        .into_iter()
        .map(|(_, _, l, r, e)| vec![l, r, e])
        .collect();
    Ok(csv_to_bytes(&["lambda", "r", "e"], &out))
}

/// Norm-vs-width curve with the fitted power law: (delta, norm, fit).
fn project_square_scaling(raw: &[u8]) -> Result<Vec<u8>> {
    let (header, rows) = read_report(raw)?;
    let (ic, ip, iv) = (
        column(&header, "check")?,
        column(&header, "param")?,
        column(&header, "value")?,
    );
    let mut points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|row| row[ic] == "gdelta_norm")
        .map(|row| {
            let delta: f64 = row[ip].parse().context("param column")?;
            let norm: f64 = row[iv].parse().context("value column")?;
            Ok((delta, norm))
        })
        .collect::<Result<_>>()?;
    if points.is_empty() {
        bail!("stored report has no norm rows to project");
    }
    points.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite keys"));
    let (slope, intercept) = loglog_fit(&points);
    let out: Vec<Vec<String>> = points
        .into_iter()
        .map(|(delta, norm)| {
            let fit = (intercept + slope * delta.ln()).exp();
            vec![format!("{delta}"), format!("{norm}"), format!("{fit}")]
        })
        .collect();
    Ok(csv_to_bytes(&["delta", "norm", "fit"], &out))
}
