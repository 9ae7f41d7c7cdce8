//! `modalflow`: scenario runner for modal quantum dynamics.
//!
//! `modalflow run <config.toml> [--set k=v]...` executes one experiment
//! deterministically from its seed and writes CSV/JSON outputs plus a
//! manifest; `modalflow verify [--seed N]` runs the built-in verification
//! suites. Exit codes: 0 success, 1 failed checks, 2 configuration error,
//! 3 numerical failure. `MODALFLOW_THREADS` caps the worker count.

mod config;
mod experiments;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use config::load_config;
use experiments::{run_experiment, RunError};
use manifest::RunManifest;

#[derive(Parser)]
#[command(name = "modalflow", version, about = "Modal-dynamics scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute an experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Override a config entry, e.g. --set params.count=1000.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Run the built-in verification suites.
    Verify {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn init_threads() {
    if let Ok(v) = std::env::var("MODALFLOW_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
}

fn main() -> ExitCode {
    init_threads();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, set } => run(&config, &set),
        Command::Verify { seed } => verify(seed),
    }
}

fn run(path: &std::path::Path, sets: &[String]) -> ExitCode {
    let started = Instant::now();
    let cfg = match load_config(path, sets) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    let config_echo = serde_json::to_value(&cfg).expect("config echoes");

    let result = run_experiment(&cfg);
    let (outputs, checks, status, error) = match result {
        Ok(out) => {
            let status = if out.checks.iter().all(|c| c.passed) {
                "ok"
            } else {
                "check_failed"
            };
            (out.outputs, out.checks, status, None)
        }
        Err(RunError::Config(msg)) => (Vec::new(), Vec::new(), "config_error", Some(msg)),
        Err(RunError::Numeric(e)) => (Vec::new(), Vec::new(), "numeric_error", Some(e.to_string())),
        Err(RunError::Io(e)) => (Vec::new(), Vec::new(), "io_error", Some(e.to_string())),
    };

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        experiment: cfg.experiment.as_str().to_string(),
        seed: cfg.seed,
        config: config_echo,
        wall_time_s: started.elapsed().as_secs_f64(),
        outputs,
        checks,
        status: status.to_string(),
        error: error.clone(),
    };
    if let Err(e) = manifest.write_atomic(&cfg.output_dir) {
        eprintln!("cannot write manifest: {e}");
        return ExitCode::from(2);
    }

    for c in &manifest.checks {
        println!(
            "check {}: {} — {}",
            c.name,
            if c.passed { "PASS" } else { "FAIL" },
            c.detail
        );
    }
    match manifest.status.as_str() {
        "ok" => ExitCode::SUCCESS,
        "check_failed" => ExitCode::from(1),
        "config_error" => {
            eprintln!("config error: {}", error.unwrap_or_default());
            ExitCode::from(2)
        }
        _ => {
            eprintln!("numerical failure: {}", error.unwrap_or_default());
            ExitCode::from(3)
        }
    }
}

fn verify(seed: u64) -> ExitCode {
    let reports = modalflow_core::verify::run_all(seed);
    let mut all_ok = true;
    for r in &reports {
        println!(
            "suite {}: {} — {}",
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.detail
        );
        all_ok &= r.passed;
    }
    if all_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
