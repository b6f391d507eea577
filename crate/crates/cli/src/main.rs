//! `enflo-lab`: runs experiments described by a JSON config and writes
//! `report.csv`, coefficient JSON files and `run_manifest.json` into the
//! output directory.
//!
//! Exit status: 0 on success, 2 when an asserted invariant fails, 1 on errors.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;

use crate::config::{Command, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(name = "enflo-lab", version, about = "Numerical laboratory for scaled Enflo type inequalities")]
struct Args {
    /// Command to run; taken from the config when omitted.
    #[arg(value_enum)]
    command: Option<Command>,
    /// JSON experiment config; defaults to the built-in config of `command`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: config `output`, else `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; affects speed only.
    #[arg(long)]
    threads: Option<usize>,
    /// Print the resolved, validated config as JSON and exit.
    #[arg(long)]
    print_config: bool,
}

fn resolve(args: &Args) -> Result<ExperimentConfig> {
    let mut cfg = match (&args.config, args.command) {
        (Some(path), cmd) => {
            let mut cfg = ExperimentConfig::load(path)?;
            if let Some(cmd) = cmd {
                cfg.command = cmd;
            }
            cfg
        }
        (None, Some(cmd)) => ExperimentConfig::default_for(cmd),
        (None, None) => anyhow::bail!("give a command or --config"),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn real_main(args: Args) -> Result<bool> {
    if let Some(threads) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let cfg = resolve(&args)?;
    if args.print_config {
        println!("{}", serde_json::to_string_pretty(&cfg)?);
        return Ok(true);
    }
    let out_dir = args.out.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let result = commands::run(&cfg)?;
    output::write_all(&out_dir, &cfg, &result)?;
    for note in &result.notes {
        eprintln!("note: {note}");
    }
    for v in &result.violations {
        eprintln!("violation: {v}");
    }
    eprintln!(
        "{}: wrote {} file(s) to {}, {} violation(s)",
        cfg.command,
        result.files.len() + 1,
        out_dir.display(),
        result.violations.len()
    );
    Ok(result.violations.is_empty())
}

fn main() -> ExitCode {
    match real_main(Args::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
