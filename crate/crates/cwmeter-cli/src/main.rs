//! cwmeter: simulator and analytics for the measurement dynamics of a spin
//! coupled to a Curie-Weiss magnet and a phonon bath.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

mod config;
mod table;
mod tasks;

use std::path::PathBuf;
use std::process::ExitCode;

use config::RunConfig;
use tasks::{run_preset, run_task, TaskError, PRESETS};

const SUBCOMMANDS: &[&str] = &[
    "fixed-points",
    "timescales",
    "truncate",
    "bath-damping",
    "register",
    "relax-para",
    "wrong-reg",
    "n2",
    "leakage",
    "double",
    "subensemble",
    "random-spectrum",
    "sweep",
    "figure",
];

fn usage() -> String {
    format!(
        "usage: cwmeter <subcommand> [--config PATH] [--set key=value]... \
         [--seed U64] [--out DIR] [--threads K]\n\
         subcommands: {}\n\
         figure presets: {}\n\
         environment: CWMETER_THREADS (overridden by --threads)",
        SUBCOMMANDS.join(", "),
        PRESETS.join(", ")
    )
}

struct Cli {
    subcommand: String,
    preset: Option<String>,
    cfg: RunConfig,
}

fn parse_args() -> Result<Cli, String> {
    let mut args = std::env::args().skip(1);
    let subcommand = args.next().ok_or_else(usage)?;
    if subcommand == "--help" || subcommand == "-h" || subcommand == "help" {
        return Err(usage());
    }
    if !SUBCOMMANDS.contains(&subcommand.as_str()) {
        return Err(format!("unknown subcommand '{subcommand}'\n{}", usage()));
    }
    let mut cfg = RunConfig::defaults();
    if let Ok(threads) = std::env::var("CWMETER_THREADS") {
        cfg.threads = threads.parse().map_err(|e| format!("CWMETER_THREADS: {e}"))?;
    }
    let mut preset = None;
    let mut pending_file: Option<PathBuf> = None;
    let mut sets: Vec<(String, String)> = Vec::new();
    if subcommand == "figure" {
        preset = Some(args.next().ok_or_else(|| {
            format!("figure preset required; available: {}", PRESETS.join(", "))
        })?);
    }
    while let Some(arg) = args.next() {
        let mut value_of = |name: &str| -> Result<String, String> {
            args.next().ok_or_else(|| format!("{name} requires a value"))
        };
        match arg.as_str() {
            "--config" => pending_file = Some(PathBuf::from(value_of("--config")?)),
            "--set" => {
                let kv = value_of("--set")?;
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| format!("--set expects key=value, got '{kv}'"))?;
                sets.push((k.trim().to_string(), v.trim().to_string()));
            }
            "--seed" => cfg.seed = value_of("--seed")?.parse().map_err(|e| format!("--seed: {e}"))?,
            "--out" => cfg.out_dir = PathBuf::from(value_of("--out")?),
            "--threads" => {
                cfg.threads =
                    value_of("--threads")?.parse().map_err(|e| format!("--threads: {e}"))?
            }
            other => return Err(format!("unknown option '{other}'\n{}", usage())),
        }
    }
    // file first, then flag overrides
    if let Some(path) = pending_file {
        cfg.apply_file(&path)?;
    }
    for (k, v) in sets {
        cfg.set(&k, &v)?;
    }
    Ok(Cli { subcommand, preset, cfg })
}

fn run_sweep(cfg: &RunConfig) -> Result<Vec<PathBuf>, TaskError> {
    let task = cfg.get_str("sweep_task").to_string();
    let param = cfg.get_str("sweep_param").to_string();
    let values: Vec<String> = cfg
        .get_str("sweep_values")
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    if task.is_empty() || param.is_empty() || values.is_empty() {
        return Err(TaskError::Config(
            "sweep needs sweep_task, sweep_param and a non-empty sweep_values list".into(),
        ));
    }
    if !SUBCOMMANDS.contains(&task.as_str()) || task == "sweep" || task == "figure" {
        return Err(TaskError::Config(format!("sweep_task '{task}' is not sweepable")));
    }
    let entries: Vec<(usize, String)> = values.into_iter().enumerate().collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if cfg.threads > 0 {
        builder = builder.num_threads(cfg.threads);
    }
    let pool = builder.build().map_err(|e| TaskError::Config(e.to_string()))?;
    let results: Vec<Result<Vec<PathBuf>, TaskError>> = pool.install(|| {
        use rayon::prelude::*;
        entries
            .par_iter()
            .map(|(idx, value)| {
                let mut sub = cfg.clone();
                sub.set(&param, value)?;
                // per-entry output directory and derived seed stream
                sub.out_dir = cfg.out_dir.join(format!("sweep_{idx:03}_{param}_{value}"));
                sub.seed = cfg.seed.wrapping_add(*idx as u64 + 1);
                run_task(&task, &sub)
            })
            .collect()
    });
    let mut files = Vec::new();
    for r in results {
        files.extend(r?);
    }
    Ok(files)
}

fn main() -> ExitCode {
    let cli = match parse_args() {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("{msg}");
            return ExitCode::from(2);
        }
    };
    let outcome = match cli.subcommand.as_str() {
        "sweep" => run_sweep(&cli.cfg),
        "figure" => run_preset(cli.preset.as_deref().unwrap_or(""), &cli.cfg),
        task => run_task(task, &cli.cfg),
    };
    match outcome {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(TaskError::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(TaskError::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}
