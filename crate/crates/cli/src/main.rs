use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use bnls::experiments::{sweep, verdict_table};
use bnls::harness::{
    export_ground_state, output_dir, run_config, write_json, write_run, write_atomically, GridSpec, RunConfig,
    SweepConfig,
};
use bnls::verify::{full_suite, quick_suite};
use bnls::{make_params, Error};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bnls", version, about = "Radial fourth-order NLS solver and blowup diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the ground state (or build the bubble when energy-critical) and export it.
    Groundstate {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        sigma: f64,
        #[arg(long, default_value_t = 40.0)]
        rmax: f64,
        #[arg(long, default_value_t = 256)]
        n: usize,
        /// Output directory, relative to the output root.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one configuration: criterion, evolution, fits.
    Evolve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every configuration of a sweep file in parallel.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the certification suite; exits nonzero on any failure.
    Verify {
        /// Include the long evolution checks.
        #[arg(long)]
        full: bool,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = e.chain().any(|c| matches!(c.downcast_ref::<Error>(), Some(Error::Config(_))));
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Groundstate { d, sigma, rmax, n, out } => {
            let params = make_params(d, sigma, 0.0)?;
            let dir = output_dir(out.as_deref(), &format!("groundstate-d{d}-s{sigma}"));
            let export = export_ground_state(&params, GridSpec { rmax, n }, &Default::default(), &dir)?;
            println!("{}", serde_json::to_string_pretty(&export)?);
            eprintln!("wrote {}", dir.display());
        }
        Command::Evolve { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let dir = output_dir(out.as_deref().or(cfg.output.as_deref()), &cfg.id);
            let art = run_config(&cfg).with_context(|| format!("run {}", cfg.id))?;
            write_run(&dir, &art)?;
            let v = &art.summary.verdict;
            println!("{}: {} ({})", cfg.id, serde_json::to_string(&v.outcome)?, v.detail);
            eprintln!("wrote {}", dir.display());
        }
        Command::Sweep { config, out } => {
            let sc = SweepConfig::load(&config)?;
            let dir = output_dir(out.as_deref().or(sc.output.as_deref()), "sweep");
            let entries = sweep(&sc.runs);
            let table = verdict_table(&entries)?;
            write_atomically(&dir, |tmp| {
                for (i, e) in entries.iter().enumerate() {
                    match &e.result {
                        Ok(art) => write_run(&tmp.join(format!("{i:03}-{}", e.config_id)), art)?,
                        Err(msg) => eprintln!("run {i} ({}) failed: {msg}", e.config_id),
                    }
                }
                let summaries: Vec<_> = entries.iter().map(|e| e.result.as_ref().ok().map(|a| &a.summary)).collect();
                write_json(&tmp.join("summaries.json"), &summaries)?;
                std::fs::write(tmp.join("verdicts.csv"), &table)?;
                Ok(())
            })?;
            print!("{table}");
            eprintln!("wrote {}", dir.display());
        }
        Command::Verify { full, seed } => {
            let checks = if full { full_suite(seed) } else { quick_suite(seed) };
            for c in &checks {
                println!("{c}");
            }
            if checks.iter().any(|c| !c.passed) {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
