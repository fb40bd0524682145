use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use halpern_core::experiment::{
    exit_code_for_error, load_experiment, run_experiment, run_suite, verify_lemmas, Overrides, SuiteReport, SuiteRow,
    EXIT_INVARIANT, EXIT_IO, EXIT_OK,
};

/// Runs Halpern-type iterations on lp spaces from TOML experiment files.
#[derive(Debug, Parser)]
#[command(name = "halpern", version)]
struct Cli {
    /// Output directory for traces and summaries (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// RNG seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment.
    Run { config: PathBuf },
    /// Run every *.toml experiment in a directory.
    Suite {
        dir: PathBuf,
        /// Maximum number of concurrent runs.
        #[arg(long, default_value_t = 1)]
        parallel: usize,
    },
    /// Finite checks of the sequence lemmas.
    VerifyLemmas {
        #[arg(long, default_value_t = 10_000)]
        nmax: usize,
        #[arg(long, default_value_t = 500)]
        fuzz: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let overrides = Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
    };
    let code = match cli.command {
        Command::Run { config } => run(&config, &overrides),
        Command::Suite { dir, parallel } => suite(&dir, parallel, &overrides),
        Command::VerifyLemmas { nmax, fuzz } => lemmas(nmax, fuzz, cli.seed.unwrap_or(0)),
    };
    ExitCode::from(code as u8)
}

fn run(config: &std::path::Path, overrides: &Overrides) -> i32 {
    let result = load_experiment(config, overrides).and_then(|exp| {
        let outcome = run_experiment(&exp)?;
        eprintln!("trace: {}", exp.trace_path().display());
        Ok(outcome)
    });
    match result {
        Ok(outcome) => {
            let report = SuiteReport {
                rows: vec![SuiteRow {
                    id: outcome.summary.id.clone(),
                    path: config.to_path_buf(),
                    exit_code: outcome.exit_code(),
                    summary: Some(outcome.summary.clone()),
                    error: None,
                }],
            };
            print!("{}", report.to_tsv());
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for_error(&e)
        }
    }
}

fn suite(dir: &std::path::Path, parallel: usize, overrides: &Overrides) -> i32 {
    let report = match run_suite(dir, parallel, overrides) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code_for_error(&e);
        }
    };
    for row in &report.rows {
        if let Some(err) = &row.error {
            eprintln!("{}: {err}", row.path.display());
        }
    }
    let table = report.to_tsv();
    print!("{table}");
    if let Some(out) = &overrides.out {
        let path = out.join("suite.tsv");
        if let Err(e) = fs::create_dir_all(out).and_then(|_| fs::write(&path, &table)) {
            eprintln!("error: {}: {e}", path.display());
            return EXIT_IO;
        }
    }
    report.exit_code()
}

fn lemmas(nmax: usize, fuzz: usize, seed: u64) -> i32 {
    match verify_lemmas(nmax, fuzz, seed) {
        Ok(checks) => {
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if checks.iter().all(|c| c.passed) {
                EXIT_OK
            } else {
                EXIT_INVARIANT
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for_error(&e)
        }
    }
}
