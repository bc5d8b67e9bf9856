use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use offrl::harness::{self, emit_report, load_table, run_check, CheckConfig, ExperimentConfig, Format, ScenarioParams};
use offrl::Exec;

#[derive(Parser)]
#[command(name = "offrl", version, about = "Offline RL workbench: scenarios, sweeps and verification checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a scenario and print its oracle summary.
    Scenario {
        /// Scenario name (loop, tree, divergence, bandit, lowrank, random, two_model).
        name: Option<String>,
        /// JSON file with scenario parameters.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// List the available scenarios.
        #[arg(long)]
        list: bool,
    },
    /// Execute an experiment config or a named check config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output path; overrides the config's output section.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<OutFormat>,
        /// Worker threads; 1 runs sequentially.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Print per-method median absolute error by n from a results file.
    Report {
        #[arg(long)]
        config: PathBuf,
        /// Also write the table in another format.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<OutFormat>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

impl From<OutFormat> for Format {
    fn from(f: OutFormat) -> Self {
        match f {
            OutFormat::Csv => Format::Csv,
            OutFormat::Json => Format::Json,
        }
    }
}

fn exec_for(workers: Option<usize>) -> Exec {
    match workers {
        Some(w) => Exec::with_workers(w),
        None => Exec::default(),
    }
}

fn format_from_path(path: &std::path::Path) -> Format {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => Format::Json,
        _ => Format::Csv,
    }
}

fn scenario(name: Option<String>, config: Option<PathBuf>, seed: Option<u64>, list: bool) -> Result<bool> {
    if list {
        for s in harness::SCENARIOS {
            println!("{s}");
        }
        return Ok(true);
    }
    let Some(name) = name else { bail!("scenario name required (or --list)") };
    let mut params: ScenarioParams = match config {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?)?,
        None => ScenarioParams::default(),
    };
    if seed.is_some() {
        params.seed = seed;
    }
    let sc = harness::build_scenario(&name, &params)?;
    print!("{}", sc.summary());
    Ok(true)
}

fn run(config: PathBuf, seed: Option<u64>, out: Option<PathBuf>, format: Option<OutFormat>, workers: Option<usize>) -> Result<bool> {
    let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
    let exec = exec_for(workers);
    let value: serde_json::Value = serde_json::from_str(&text).context("config is not valid JSON")?;
    if value.get("check").is_some() {
        let cfg: CheckConfig = serde_json::from_value(value)?;
        let outcome = run_check(&cfg.check, seed.unwrap_or(cfg.master_seed), exec)?;
        println!("{} {}: {}", if outcome.passed { "PASS" } else { "FAIL" }, outcome.name, outcome.detail);
        if let Some(path) = out {
            std::fs::write(&path, serde_json::to_string_pretty(&outcome)?)?;
        }
        return Ok(outcome.passed);
    }
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    let table = harness::run_experiment(&cfg, exec)?;
    let failed = table.rows.iter().filter(|r| !r.error_code.is_empty()).count();
    let path = out.or_else(|| cfg.output.as_ref().map(|o| PathBuf::from(&o.path)));
    match path {
        Some(path) => {
            let fmt = format.map(Format::from).or(cfg.output.as_ref().map(|o| o.format)).unwrap_or_else(|| format_from_path(&path));
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            emit_report(&table, fmt, &path)?;
            eprintln!("wrote {} rows to {}", table.rows.len(), path.display());
        }
        None => harness::report::write_csv(&table, std::io::stdout())?,
    }
    if failed > 0 {
        eprintln!("{failed} cells recorded an error code");
    }
    Ok(true)
}

fn report(config: PathBuf, out: Option<PathBuf>, format: Option<OutFormat>) -> Result<bool> {
    let table = load_table(&config).with_context(|| format!("loading {}", config.display()))?;
    println!("{:<16} {:>8} {:>20} {:>6}", "method", "n", "median_abs_error", "count");
    for (m, n, med, count) in harness::experiment::summarize(&table) {
        println!("{m:<16} {n:>8} {:>20} {count:>6}", harness::report::format_float(med));
    }
    for (key, sel) in &table.selections {
        println!("selection {key}: winner {}", sel.winner_index);
    }
    if let Some(path) = out {
        let fmt = format.map(Format::from).unwrap_or_else(|| format_from_path(&path));
        emit_report(&table, fmt, &path)?;
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger_init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Scenario { name, config, seed, list } => scenario(name, config, seed, list),
        Command::Run { config, seed, out, format, workers } => run(config, seed, out, format, workers),
        Command::Report { config, out, format } => report(config, out, format),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn env_logger_init() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
}
