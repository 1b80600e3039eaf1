use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use clap::Args;
use ddmaps::ode::{Space, Trajectory};
use ddmaps::{io, nystrom};
use ndarray::Array2;

use super::CliResult;

#[derive(Args)]
pub struct RestrictArgs {
    /// Fitted embedding model JSON.
    #[arg(long)]
    pub dmap: PathBuf,
    /// Ambient-space input: data matrix CSV or trajectory CSV.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Latent-space output (same flavor as the input).
    #[arg(long)]
    pub out: PathBuf,
}

/// Trajectory files start with a `t,` header; data matrices are numeric.
pub fn is_trajectory_csv(path: &Path) -> ddmaps::Result<bool> {
    let mut reader = BufReader::new(std::fs::File::open(path)?);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    Ok(first.starts_with("t,"))
}

pub fn run(args: &RestrictArgs) -> CliResult {
    let model = io::load_dmap_model(&args.dmap)?;
    if is_trajectory_csv(&args.input)? {
        let traj = io::read_trajectory_csv(&args.input)?;
        let mut states = Array2::<f64>::zeros((traj.len(), model.latent_dim()));
        for i in 0..traj.len() {
            states
                .row_mut(i)
                .assign(&nystrom::restrict(&model, &traj.state(i))?.phi);
        }
        io::write_trajectory_csv(
            &args.out,
            &Trajectory {
                times: traj.times,
                states,
                space: Space::Latent,
            },
        )?;
    } else {
        let data = io::read_matrix_csv(&args.input)?;
        let mut out = Array2::<f64>::zeros((data.nrows(), model.latent_dim()));
        for i in 0..data.nrows() {
            out.row_mut(i)
                .assign(&nystrom::restrict(&model, &data.row(i))?.phi);
        }
        io::write_matrix_csv(&args.out, &out.view())?;
    }
    println!("wrote latent coordinates to {}", args.out.display());
    Ok(())
}
