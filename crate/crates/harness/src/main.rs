use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use proxdescent_harness::experiment::write_comparison;
use proxdescent_harness::{
    certify, compare, run_experiment, sweep, CertifyOptions, ExperimentConfig, HarnessError,
};

/// Runs proximal descent experiments from TOML configs.
///
/// Traces go to the config's `output.dir`, or to `$PROXDESCENT_OUT_DIR` when set.
#[derive(Parser)]
#[command(name = "proxdescent", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its trace.
    Run { config: PathBuf },
    /// Run prox descent over a beta x rho grid.
    Sweep {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [0.25, 0.5, 0.75])]
        beta: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.1, 1.0, 10.0])]
        rho: Vec<f64>,
    },
    /// Compare prox descent with PGSG splits `T x J` at the config's budget.
    Compare {
        config: PathBuf,
        /// A split such as `100x1000`; repeat for several.
        #[arg(long = "split", required = true, value_parser = parse_split)]
        splits: Vec<(usize, usize)>,
        /// PGSG proximal parameter; defaults to the config's rho.
        #[arg(long)]
        pgsg_rho: Option<f64>,
    },
    /// Check a prox descent trace against reference envelope gradients.
    Certify {
        trace: PathBuf,
        config: PathBuf,
        #[arg(long, default_value_t = 10)]
        max_checks: usize,
        /// Gap tolerance of the reference solver.
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
}

fn parse_split(s: &str) -> Result<(usize, usize), String> {
    let (t, j) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected TxJ, got {s:?}"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
    Ok((parse(t)?, parse(j)?))
}

fn load(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config } => {
            let config = load(&config)?;
            let out = run_experiment(&config)?;
            let s = &out.data.summary;
            println!(
                "{}: {} after {} evaluations, {} outer steps, final f = {:e}",
                out.trace_path.display(),
                s.termination,
                s.evaluations,
                s.outer_iterations,
                s.final_f
            );
            if s.inner_budget_exhausted() {
                return Err(HarnessError::InnerBudgetExhausted {
                    outer_index: s.outer_iterations + 1,
                    budget: config.prox_descent_config()?.max_inner_per_step,
                }
                .into());
            }
        }
        Command::Sweep { config, beta, rho } => {
            let config = load(&config)?;
            let out = sweep(&config, &beta, &rho)?;
            println!(
                "{:>8} {:>8} {:>14} {:>14} {:>24}",
                "beta", "rho", "final |g~|^2", "final eps", "termination"
            );
            for c in &out.cells {
                println!(
                    "{:>8} {:>8} {:>14.4e} {:>14.4e} {:>24}",
                    c.beta,
                    c.rho,
                    c.final_gtilde_norm_sq.unwrap_or(f64::NAN),
                    c.final_epsilon.unwrap_or(f64::NAN),
                    c.termination
                );
            }
            println!("summary: {}", out.summary_path.display());
            let exhausted: Vec<_> = out
                .cells
                .iter()
                .filter(|c| c.termination == "inner_budget_exhausted")
                .map(|c| c.experiment_id.as_str())
                .collect();
            if !exhausted.is_empty() {
                bail!("inner budget exhausted in {}", exhausted.join(", "));
            }
        }
        Command::Compare {
            config,
            splits,
            pgsg_rho,
        } => {
            let config = load(&config)?;
            let table = compare(&config, &splits, pgsg_rho)?;
            print!("{table}");
            let path = config
                .output_dir()
                .join(format!("{}_compare.csv", config.id));
            write_comparison(&path, &table)?;
            println!("table: {}", path.display());
        }
        Command::Certify {
            trace,
            config,
            max_checks,
            tol,
        } => {
            let config = load(&config)?;
            let mut options = CertifyOptions {
                max_checks,
                ..Default::default()
            };
            options.reference.tol = tol;
            let report = certify(&trace, &config, &options)?;
            print!("{report}");
            if !report.all_satisfied() {
                bail!("some conversion bounds are violated");
            }
        }
    }
    Ok(())
}
