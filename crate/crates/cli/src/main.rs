use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use sle_cli::config::{load_config, Overrides, Resolved};
use sle_cli::experiment::{run_experiment, simulate, write_run, Outcome, Report};
use sle_cli::{CliError, Provenance};

#[derive(Parser)]
#[command(
    name = "sle",
    version,
    about = "Schrödinger–Liouville–Ehrenfest time-splitting solver"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a single configuration and write observables.
    Run(Common),
    /// Run the experiment described in the config's [experiment] table.
    Experiment(Common),
    /// Check a config file and print the resolved settings.
    ValidateConfig(Common),
}

#[derive(Args)]
struct Common {
    /// Path to the TOML configuration.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory for CSV files.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Worker threads (defaults to all cores).
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Fail on any time step exceeding the CFL bound instead of warning.
    #[arg(long)]
    strict_cfl: bool,
    /// Apply the config's [paper_exact] overrides.
    #[arg(long)]
    paper_exact: bool,
}

impl Common {
    fn load(&self) -> Result<Resolved, CliError> {
        if let Some(n) = self.threads {
            if n == 0 {
                return Err(CliError::Config("--threads: must be at least 1".into()));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
        }
        load_config(
            &self.config,
            Overrides {
                strict_cfl: self.strict_cfl,
                paper_exact: self.paper_exact,
            },
        )
    }
}

fn provenance(resolved: &Resolved, config: &Path) -> Result<Provenance, CliError> {
    Ok(
        Provenance::new(resolved.to_toml()?)
            .with_note(format!("config file: {}", config.display())),
    )
}

fn summarize(report: &Report) {
    let t = &report.tally;
    println!(
        "runs: {}  energy-bound violations: {}  h-oscillation violations: {}  CFL warnings: {}",
        t.runs, t.energy_violations, t.oscillation_violations, t.cfl_violations
    );
    match &report.outcome {
        Outcome::Single(out) => {
            if let Some(last) = out.records.last() {
                println!(
                    "t = {:.6}  mass_psi = {:.15e}  mass_mu = {:.15e}  E_d = {:.15e}",
                    last.t, last.mass_psi, last.mass_mu, last.energy_ed
                );
            }
        }
        Outcome::DtIndependence(rows) | Outcome::ErrorVsH(rows) => {
            for r in rows {
                println!(
                    "h = {:.6e}  err_psi = {:.6e}  err_rho = {:.6e}  err_mu = {:.6e}",
                    r.parameter, r.err_psi, r.err_rho, r.err_mu
                );
            }
        }
        Outcome::TimeConvergence { rows, slopes } => {
            for r in rows {
                println!(
                    "dt = {:.6e}  err_psi = {:.6e}  err_rho = {:.6e}  err_mu = {:.6e}",
                    r.parameter, r.err_psi, r.err_rho, r.err_mu
                );
            }
            println!(
                "fitted slopes: psi {:.3}  rho {:.3}  mu {:.3}",
                slopes.psi, slopes.rho, slopes.mu
            );
        }
        Outcome::Ap { rows, projection } => {
            println!(
                "limit initial data: clipped mass {:.3e}",
                projection.clipped_mass
            );
            for r in rows {
                println!(
                    "h = {:.6e}  dist_rho = {:.6e}  dist_mu = {:.6e}",
                    r.h, r.dist_rho, r.dist_mu
                );
            }
        }
        Outcome::Ode(rows) => {
            let worst = rows.iter().map(|r| r.cell_offset).max().unwrap_or(0);
            println!("max cell offset between the μ peak and the trajectory: {worst}");
        }
    }
    for f in &report.files {
        println!("wrote {}", f.display());
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::ValidateConfig(c) => {
            let resolved = c.load()?;
            print!("{}", resolved.to_toml()?);
            println!("# configuration is valid");
            Ok(())
        }
        Command::Run(c) => {
            let resolved = c.load()?;
            let prov = provenance(&resolved, &c.config)?;
            let output = simulate(&resolved.run)?;
            let files = write_run(&c.out, &prov, &resolved.run, &output)?;
            let mut tally = sle_cli::experiment::Tally::default();
            tally.add(&output);
            summarize(&Report {
                outcome: Outcome::Single(Box::new(output)),
                tally,
                files,
            });
            Ok(())
        }
        Command::Experiment(c) => {
            let resolved = c.load()?;
            let spec = resolved.experiment.as_ref().ok_or_else(|| {
                CliError::Config("experiment: the config has no [experiment] table".into())
            })?;
            let prov = provenance(&resolved, &c.config)?;
            info!("experiment {:?} over h = {:?}", spec.kind, spec.h_values);
            let report = run_experiment(spec, &prov, Some(&c.out))?;
            summarize(&report);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
