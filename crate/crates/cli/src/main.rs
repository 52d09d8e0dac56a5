#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! `wavesym`: batch front end for spherical transforms, wave kernels, decay
//! sweeps and the Klein-Gordon solver.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] wavesym::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use wavesym::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_inconclusive() => 3,
            CliError::Core(
                E::Unsupported(_)
                | E::TooLarge { .. }
                | E::Domain(_)
                | E::Config(_)
                | E::GammaPole { .. }
                | E::NoCriticalPoint { .. },
            ) => 2,
            CliError::Core(_) | CliError::Io(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "wavesym", version, about = "Harmonic analysis and wave kernels on complex symmetric spaces")]
pub struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Root system tag such as A1, A2 or B2.
    #[arg(long, global = true)]
    pub root_system: Option<String>,
    /// Directory receiving CSV and JSON artifacts.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate phi_lambda(exp H) and the bound phi_0(exp H).
    Phi(PhiArgs),
    /// Forward and inverse spherical transform of a Gaussian.
    Transform(TransformArgs),
    /// Sample a wave kernel piece on a chamber grid.
    Kernel(KernelArgs),
    /// Time sweep of the weighted kernel sup with a fitted decay slope.
    Decay(DecayArgs),
    /// Dispersive bound functionals in the small- and large-time regimes.
    Dispersive(DispersiveArgs),
    /// Small-data semilinear Klein-Gordon run.
    Solve(SolveArgs),
    /// Is (p, q) admissible in dimension d?
    Admissible(AdmissibleArgs),
    /// Regularity threshold of the well-posedness table.
    Gwp(GwpArgs),
}

#[derive(Debug, Args)]
pub struct PhiArgs {
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub lambda: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub h: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    #[arg(long)]
    pub width: Option<f64>,
    #[arg(long)]
    pub radial_radius: Option<f64>,
    #[arg(long)]
    pub radial_spacing: Option<f64>,
    #[arg(long)]
    pub spectral_radius: Option<f64>,
    #[arg(long)]
    pub spectral_spacing: Option<f64>,
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub t: Option<f64>,
    #[arg(long)]
    pub sigma_re: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub sigma_im: Option<f64>,
    /// low, high_reg or total.
    #[arg(long)]
    pub part: Option<String>,
    /// bump_integral or exp_quotient.
    #[arg(long)]
    pub mollifier: Option<String>,
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub panels: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DecayArgs {
    /// small or large.
    #[arg(long)]
    pub regime: Option<String>,
    #[arg(long)]
    pub sigma_re: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub sigma_im: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct DispersiveArgs {
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub sigma_im: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub small_times: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub large_times: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub t_final: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub width: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub amplitude: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Use the amplitude as given instead of rescaling to delta.
    #[arg(long)]
    pub raw_amplitude: bool,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub snapshot_every: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AdmissibleArgs {
    #[arg(long)]
    pub d: Option<usize>,
    /// Time exponent; `inf` allowed.
    #[arg(long)]
    pub p: Option<f64>,
    /// Space exponent.
    #[arg(long)]
    pub q: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GwpArgs {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Value standing in for the threshold `0+`.
    #[arg(long)]
    pub zero_plus: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.exit_code());
            ExitCode::from(e.exit_code())
        }
    }
}
