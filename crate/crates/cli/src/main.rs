//! `fracflow`: run imbibition scenarios, refinement sweeps and the flux and
//! truncation-error analyses from the command line.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fracflow::Error;

/// Overrides the directory under which default output folders are created.
pub const OUTPUT_ROOT_ENV: &str = "FRACFLOW_OUTPUT_ROOT";

#[derive(Debug, Parser)]
#[command(name = "fracflow", version, about = "Two-phase flow in 1D fractured porous media")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and write histories, profiles and a manifest.
    Run {
        config: PathBuf,
        /// Output directory; defaults to `<root>/<config name>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Refinement sweep of a spontaneous scenario against a fine reference.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Wetting numerical flux over a grid of (S_L, S_R) at fixed total flux.
    FluxSurface {
        #[arg(long, default_value = "ppu")]
        scheme: String,
        /// Total flux, nondimensional.
        #[arg(long, default_value_t = 0.5)]
        ut: f64,
        /// Samples per saturation axis.
        #[arg(long, default_value_t = 200)]
        grid: usize,
        /// Face transmissibility, nondimensional.
        #[arg(long, default_value_t = 1.0)]
        trans: f64,
        #[arg(long, value_enum, default_value_t = RelPerm::Quadratic)]
        relperm: RelPerm,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Leading truncation-error terms on the final matrix profile of a run.
    Truncation {
        /// Directory written by `fracflow run`.
        run_dir: PathBuf,
        /// Window in x / L.
        #[arg(long, default_value_t = 0.55)]
        lo: f64,
        #[arg(long, default_value_t = 0.75)]
        hi: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate relative permeability, capillary pressure and diffusion.
    Curves {
        #[arg(long, value_enum, default_value_t = Region::Matrix)]
        region: Region,
        /// Take rock and fluid parameters from a scenario file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        relperm: Option<RelPerm>,
        #[arg(long, default_value_t = 201)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the cell and face table of a scenario's grid.
    GridDump {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RelPerm {
    Quadratic,
    Cubic,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Region {
    Matrix,
    Fracture,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::SaturationDomain(_) | Error::PressureRange { .. } => 2,
        Error::Analysis(_) => 4,
        Error::Io(_) => 1,
        Error::InterfaceSolve { .. }
        | Error::DegenerateDerivative(_)
        | Error::SingularPivot(_)
        | Error::NewtonDivergence { .. }
        | Error::TooManyCuts { .. }
        | Error::RunAborted(_) => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out } => commands::run(&config, out),
        Command::Sweep { config, out } => commands::sweep(&config, out),
        Command::FluxSurface { scheme, ut, grid, trans, relperm, out } => {
            commands::flux_surface(&scheme, ut, grid, trans, relperm, out)
        }
        Command::Truncation { run_dir, lo, hi, out } => commands::truncation(&run_dir, lo, hi, out),
        Command::Curves { region, config, relperm, samples, out } => {
            commands::curves(region, config.as_deref(), relperm, samples, out)
        }
        Command::GridDump { config, out } => commands::grid_dump(&config, out),
    };
    match result {
        Ok(dir) => {
            println!("wrote {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("fracflow: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
