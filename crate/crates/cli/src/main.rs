//! `cval-lab`: randomized verification, named demos and Monte Carlo sampling
//! for c-valued physical quantities.
//!
//! Exit codes: 0 pass, 1 assertion failure, 2 usage or configuration error.

mod config;
mod demo;
mod matrix;
mod report;
mod sample;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Format, Overrides, RunConfig, XiChoice};

const THREADS_ENV: &str = "CVAL_LAB_THREADS";

#[derive(Parser)]
#[command(name = "cval-lab", version, about = "Verify and explore c-valued physical quantities")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Flat `key = value` run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    hbar: Option<f64>,
    #[arg(long, global = true, value_enum)]
    xi: Option<XiChoice>,
    /// Random instances per dimension.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Dimensions, e.g. `2-6` or `2,3,8`.
    #[arg(long, global = true)]
    dims: Option<String>,
    /// Monte Carlo sample count.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Output directory for reports and CSV data.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the randomized identity and bound suite.
    Verify {
        /// Push the named check past its threshold (negative control).
        #[arg(long, hide = true)]
        inject_fault: Option<String>,
    },
    /// Run a named worked example.
    Demo {
        #[arg(value_parser = demo::NAMES)]
        name: String,
    },
    /// Monte Carlo estimates with standard errors against exact values.
    Sample {
        /// Operator preset (sigma_x|y|z, spin1_x|y|z) or matrix file.
        #[arg(long)]
        op: String,
        /// Second operator for product, commutator and covariance rows.
        #[arg(long)]
        op_b: Option<String>,
        /// computational | random | eigen:<operator> | basis file.
        #[arg(long, default_value = "computational")]
        basis: String,
        /// random | basis:<k> | state file.
        #[arg(long, default_value = "random")]
        state: String,
    },
}

fn usage_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn load_config(args: &CommonArgs) -> Result<RunConfig, config::ConfigError> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    cfg.apply(&Overrides {
        seed: args.seed,
        hbar: args.hbar,
        xi: args.xi,
        dims: args.dims.clone(),
        trials: args.trials,
        samples: args.samples,
        out: args.out.clone(),
        format: args.format,
    })?;
    Ok(cfg)
}

fn worker_count(cfg: &RunConfig) -> Result<usize, String> {
    let mut n = cfg
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if let Ok(cap) = std::env::var(THREADS_ENV) {
        let cap: usize = cap
            .trim()
            .parse()
            .ok()
            .filter(|c| *c >= 1)
            .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got {cap:?}"))?;
        n = n.min(cap);
    }
    Ok(n)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load_config(&cli.common) {
        Ok(c) => c,
        Err(e) => return usage_error(e),
    };
    let workers = match worker_count(&cfg) {
        Ok(n) => n,
        Err(e) => return usage_error(e),
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global() {
        return usage_error(e);
    }

    match cli.command {
        Command::Verify { inject_fault } => {
            if let Some(name) = &inject_fault {
                if !verify::check_names().any(|c| c == name) {
                    return usage_error(format!("unknown check {name:?}"));
                }
            }
            let report = match verify::run(&cfg, inject_fault.as_deref()) {
                Ok(r) => r,
                Err(e) => return usage_error(e),
            };
            print!("{}", report.table());
            match report::write_report(&cfg, "verify_report", &report, &report.to_csv()) {
                Ok(path) => println!("wrote {}", path.display()),
                Err(e) => return usage_error(e),
            }
            if report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Command::Demo { name } => match demo::run(&name, &cfg) {
            Ok(r) => {
                print!("{}", r.text());
                if r.pass {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(1)
                }
            }
            Err(e) => usage_error(e),
        },
        Command::Sample { op, op_b, basis, state } => {
            let spec = sample::SampleSpec {
                op: &op,
                op_b: op_b.as_deref(),
                basis: &basis,
                state: &state,
            };
            match sample::run(&cfg, &spec) {
                Ok(rows) => {
                    let csv = sample::to_csv(&rows);
                    print!("{csv}");
                    match report::write_report(&cfg, "sample", &rows, &csv) {
                        Ok(_) => ExitCode::SUCCESS,
                        Err(e) => usage_error(e),
                    }
                }
                Err(e) => usage_error(e),
            }
        }
    }
}
