//! Command-line front end. Exit codes: 0 success, 1 configuration or input
//! error, 2 no convergence, 3 infeasible design.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{InitConfig, RunConfig};
use crate::error::{Error, Result};
use crate::pipeline;

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_NO_CONVERGENCE: u8 = 2;
pub const EXIT_INFEASIBLE: u8 = 3;

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "BEAMSYNTH_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "beamsynth",
    version,
    about = "Constant-modulus broadened-beam synthesis for LEO planar arrays"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Run configuration (JSON). Defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Metric grid step in degrees.
    #[arg(long, value_name = "DEG")]
    pub grid_step: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve both axis subproblems, compose the planar weights and score them.
    Design {
        #[command(flatten)]
        common: Common,
        /// Outer iteration limit.
        #[arg(long, value_name = "N")]
        max_iter: Option<usize>,
        /// Starting point: zero, chirp or file:PATH.
        #[arg(long, value_name = "INIT")]
        init: Option<String>,
    },
    /// Score an existing coefficient matrix file.
    Evaluate {
        /// Coefficient matrix CSV (row,col,re,im).
        coefficients: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Broadened-beam versus narrow-beam capacity table.
    Capacity {
        #[command(flatten)]
        common: Common,
    },
    /// Field of view, masks and footprint areas.
    Geometry {
        #[command(flatten)]
        common: Common,
    },
    /// Print the configuration schema.
    Schema,
}

/// Exit code for a failed run.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::NoConvergence(_) | Error::SolverStall(_) | Error::Numerical(_) => {
            EXIT_NO_CONVERGENCE
        }
        Error::Infeasible(_) => EXIT_INFEASIBLE,
        _ => EXIT_CONFIG,
    }
}

fn load(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(step) = common.grid_step {
        cfg.evaluation.grid_step_deg = Some(step);
    }
    if let Some(out) = &common.out {
        cfg.output_dir = Some(out.clone());
    }
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig) -> PathBuf {
    cfg.output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run_design(common: &Common, max_iter: Option<usize>, init: Option<&str>) -> Result<()> {
    let mut cfg = load(common)?;
    if let Some(n) = max_iter {
        cfg.solver.max_iter = n;
    }
    if let Some(init) = init {
        cfg.solver.init = init.parse::<InitConfig>()?;
    }
    cfg.validate()?;
    let out = out_dir(&cfg);
    let outcome = pipeline::design(&cfg)?;
    pipeline::write_design(&cfg, &outcome, &out)?;
    for (axis, r) in [("x", &outcome.x), ("y", &outcome.y)] {
        eprintln!(
            "{axis}: converged={} iterations={} eig_ratio={:.3e} t*={:.6}",
            r.converged, r.iterations, r.final_eig_ratio, r.t_star
        );
    }
    match &outcome.metrics {
        Some(m) => {
            print_json(m)?;
            Ok(())
        }
        None => Err(Error::NoConvergence(format!(
            "best iterates written to {}",
            out.display()
        ))),
    }
}

fn run_evaluate(coefficients: &Path, common: &Common) -> Result<()> {
    let cfg = load(common)?;
    let metrics = pipeline::evaluate_file(&cfg, coefficients)?;
    if common.out.is_some() || cfg.output_dir.is_some() {
        pipeline::write_metrics(&cfg, &metrics, &out_dir(&cfg))?;
    }
    print_json(&metrics)
}

fn run_capacity(common: &Common) -> Result<()> {
    let cfg = load(common)?;
    let report = pipeline::capacity(&cfg)?;
    if common.out.is_some() || cfg.output_dir.is_some() {
        pipeline::write_capacity(&cfg, &report, &out_dir(&cfg))?;
    }
    print_json(&report)
}

fn run_geometry(common: &Common) -> Result<()> {
    let cfg = load(common)?;
    let report = pipeline::geometry(&cfg)?;
    if common.out.is_some() || cfg.output_dir.is_some() {
        pipeline::write_geometry(&cfg, &report, &out_dir(&cfg))?;
    }
    print_json(&report)
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| {
            Error::Config(format!(
                "{THREADS_ENV} must be a positive integer, got {value:?}"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot size thread pool: {e}")))
}

pub fn dispatch(cli: &Cli) -> Result<()> {
    configure_threads()?;
    match &cli.command {
        Command::Design {
            common,
            max_iter,
            init,
        } => run_design(common, *max_iter, init.as_deref()),
        Command::Evaluate {
            coefficients,
            common,
        } => run_evaluate(coefficients, common),
        Command::Capacity { common } => run_capacity(common),
        Command::Geometry { common } => run_geometry(common),
        Command::Schema => {
            print!("{}", crate::config::SCHEMA);
            Ok(())
        }
    }
}

/// Parses arguments, runs the command and maps the outcome to an exit code.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK });
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::NoConvergence("x".into())), 2);
        assert_eq!(exit_code(&Error::Infeasible("x".into())), 3);
        assert_eq!(exit_code(&Error::Config("x".into())), 1);
        assert_eq!(
            exit_code(&Error::Dimension {
                expected: 1,
                got: 2
            }),
            1
        );
    }

    #[test]
    fn parses_design_flags() {
        let cli = Cli::try_parse_from([
            "beamsynth",
            "design",
            "--config",
            "c.json",
            "--out",
            "o",
            "--grid-step",
            "0.05",
            "--max-iter",
            "10",
            "--init",
            "chirp",
        ])
        .unwrap();
        match cli.command {
            Command::Design {
                common,
                max_iter,
                init,
            } => {
                assert_eq!(common.config, Some(PathBuf::from("c.json")));
                assert_eq!(common.grid_step, Some(0.05));
                assert_eq!(max_iter, Some(10));
                assert_eq!(init.as_deref(), Some("chirp"));
            }
            _ => panic!("wrong subcommand"),
        }
    }
}
