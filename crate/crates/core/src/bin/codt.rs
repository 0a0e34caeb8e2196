use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use codt_transport::commands::{self, Output, Table};
use codt_transport::config::RunConfig;
use codt_transport::report::write_text;
use codt_transport::{Error, Result};

/// Crossed-dipole-trap transport kinetics.
#[derive(Parser)]
#[command(name = "codt", version)]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for Monte Carlo sampling (overrides run.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the JSON result document here ("-" for standard output).
    #[arg(long, global = true)]
    json: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Start {
    /// Initial centre population (default run.n_c0).
    #[arg(long)]
    n_c0: Option<f64>,
    /// Atoms available for loading (default run.n0).
    #[arg(long)]
    n0: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Effective, arm and critical depths.
    Depth,
    /// Equilibrium statistics at T = eta U_eff.
    Equilibrium,
    /// Integrate the rate equation.
    Simulate {
        #[command(flatten)]
        start: Start,
        /// Trajectory CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Regime and critical N_c0.
    Classify {
        #[command(flatten)]
        start: Start,
    },
    /// Fit gamma and beta0 to a t_s,N_c[,sigma_N] table.
    Fit {
        data: PathBuf,
        /// Residual table CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Regime grid over (U_eff, N_c0).
    PhaseDiagram {
        #[arg(long)]
        grid_csv: Option<PathBuf>,
        #[arg(long)]
        boundary_csv: Option<PathBuf>,
        /// T versus U_eff table.
        #[arg(long)]
        temperature_csv: Option<PathBuf>,
    },
    /// Monte Carlo check of the partition quadrature.
    McCheck,
    /// Validate files written by this tool.
    SchemaCheck {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

fn load(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn emit(out: &Output, json: Option<&Path>, tables: &[(Table, Option<&PathBuf>)]) -> Result<()> {
    for (which, path) in tables {
        if let (Some(path), Some(text)) = (path, out.table(*which)) {
            write_text(path, text)?;
        }
    }
    match json {
        Some(p) if p == Path::new("-") => print!("{}", out.document),
        Some(p) => {
            write_text(p, &out.document)?;
            print!("{}", out.summary);
        }
        None => print!("{}", out.summary),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.run.seed = seed;
    }
    let json = cli.json.as_deref();
    match &cli.command {
        Command::Depth => emit(&commands::cmd_depth(&cfg)?, json, &[]),
        Command::Equilibrium => emit(&commands::cmd_equilibrium(&cfg)?, json, &[]),
        Command::Simulate { start, csv } => emit(
            &commands::cmd_simulate(&cfg, start.n_c0, start.n0)?,
            json,
            &[(Table::Trajectory, csv.as_ref())],
        ),
        Command::Classify { start } => emit(&commands::cmd_classify(&cfg, start.n_c0, start.n0)?, json, &[]),
        Command::Fit { data, csv } => {
            let text = std::fs::read_to_string(data)?;
            emit(&commands::cmd_fit(&cfg, &text)?, json, &[(Table::Residuals, csv.as_ref())])
        }
        Command::PhaseDiagram {
            grid_csv,
            boundary_csv,
            temperature_csv,
        } => emit(
            &commands::cmd_phase_diagram(&cfg)?,
            json,
            &[
                (Table::Grid, grid_csv.as_ref()),
                (Table::Boundary, boundary_csv.as_ref()),
                (Table::Temperature, temperature_csv.as_ref()),
            ],
        ),
        Command::McCheck => emit(&commands::cmd_mc_check(&cfg, cfg.run.seed)?, json, &[]),
        Command::SchemaCheck { files } => {
            let contents = files
                .iter()
                .map(|p| Ok((p.display().to_string(), std::fs::read_to_string(p)?)))
                .collect::<Result<Vec<_>>>()?;
            emit(&commands::cmd_schema_check(&contents)?, json, &[])
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numeric() {
        2
    } else {
        1
    }
}
