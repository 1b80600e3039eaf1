//! Command-line pipeline: sample training data, embed it, train the
//! latent-space regressors, and integrate/validate reduced models.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 insufficient
//! data after sampling, 3 partial trajectory (integration stopped early).

mod commands;
mod provenance;

use clap::{Parser, Subcommand};

use commands::{embed, integrate, lift, restrict, sample, train, validate};
use commands::{CliError, CliResult};

#[derive(Parser)]
#[command(
    name = "ddmaps",
    version,
    about = "Latent embeddings and reduced data-driven models for dissipative dynamics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate training data from a built-in problem.
    Sample(sample::SampleArgs),
    /// Fit a diffusion-map embedding from a data CSV.
    Embed(embed::EmbedArgs),
    /// Fit a latent-harmonics regressor (lifting or reduced derivatives).
    Train(train::TrainArgs),
    /// Map ambient CSV rows to latent coordinates.
    Restrict(restrict::RestrictArgs),
    /// Map latent CSV rows back to ambient coordinates.
    Lift(lift::LiftArgs),
    /// Integrate a reduced model from an initial condition.
    Integrate(integrate::IntegrateArgs),
    /// Recompute held-out metrics and trajectory comparisons; write a report.
    Validate(validate::ValidateArgs),
}

fn dispatch(command: &Command) -> CliResult {
    match command {
        Command::Sample(args) => sample::run(args),
        Command::Embed(args) => embed::run(args),
        Command::Train(args) => train::run(args),
        Command::Restrict(args) => restrict::run(args),
        Command::Lift(args) => lift::run(args),
        Command::Integrate(args) => integrate::run(args),
        Command::Validate(args) => validate::run(args),
    }
}

fn exit_code(err: &CliError) -> i32 {
    match err {
        CliError::PartialTrajectory(_) => 3,
        CliError::Core(ddmaps::Error::InsufficientSampling { .. }) => 2,
        CliError::Core(_) => 1,
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(err) = dispatch(&cli.command) {
        match &err {
            CliError::Core(e) => eprintln!("error: {e}"),
            CliError::PartialTrajectory(e) => eprintln!("partial trajectory: {e}"),
        }
        std::process::exit(exit_code(&err));
    }
}
