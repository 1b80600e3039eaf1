use std::path::PathBuf;

use clap::Args;
use ddmaps::latent_harmonics;
use ddmaps::ode::{Space, Trajectory};
use ddmaps::io;
use ndarray::Array2;

use super::restrict::is_trajectory_csv;
use super::CliResult;

#[derive(Args)]
pub struct LiftArgs {
    /// Fitted embedding model JSON.
    #[arg(long)]
    pub dmap: PathBuf,
    /// Lifting model JSON (latent-harmonics over the ambient coordinates).
    #[arg(long)]
    pub lh: PathBuf,
    /// Latent-space input: data matrix CSV or trajectory CSV.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Ambient-space output (same flavor as the input).
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &LiftArgs) -> CliResult {
    let dmap = io::load_dmap_model(&args.dmap)?;
    let lh = io::load_lh_model(&args.lh)?;
    if is_trajectory_csv(&args.input)? {
        let traj = io::read_trajectory_csv(&args.input)?;
        let mut states = Array2::<f64>::zeros((traj.len(), lh.n_targets()));
        for i in 0..traj.len() {
            states
                .row_mut(i)
                .assign(&latent_harmonics::lift(&dmap, &lh, &traj.state(i))?);
        }
        io::write_trajectory_csv(
            &args.out,
            &Trajectory {
                times: traj.times,
                states,
                space: Space::Ambient,
            },
        )?;
    } else {
        let data = io::read_matrix_csv(&args.input)?;
        let mut out = Array2::<f64>::zeros((data.nrows(), lh.n_targets()));
        for i in 0..data.nrows() {
            out.row_mut(i)
                .assign(&latent_harmonics::lift(&dmap, &lh, &data.row(i))?);
        }
        io::write_matrix_csv(&args.out, &out.view())?;
    }
    println!("wrote ambient coordinates to {}", args.out.display());
    Ok(())
}
