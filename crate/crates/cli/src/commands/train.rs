use std::path::PathBuf;

use clap::Args;
use ddmaps::latent_harmonics::{default_epsilon2, fit_lh};
use ddmaps::stats::mse;
use ddmaps::io;
use serde::Serialize;

use super::{compute_targets, holdout_split, take_rows, CliResult, TrainTargets};
use crate::provenance::write_provenance;

#[derive(Args)]
pub struct TrainArgs {
    /// Fitted embedding model JSON.
    #[arg(long)]
    pub dmap: PathBuf,
    /// What to regress on the latent coordinates.
    #[arg(long, value_enum)]
    pub targets: TrainTargets,
    /// Problem name (required for derivative targets).
    #[arg(long)]
    pub problem: Option<String>,
    /// Squared bandwidth of the latent kernel; defaults to 1e-2 x median
    /// squared pairwise latent distance.
    #[arg(long)]
    pub epsilon2: Option<f64>,
    /// Number of retained kernel eigenpairs.
    #[arg(long, default_value_t = 300)]
    pub d: usize,
    /// Held-out fraction used for the reported test error; the saved model
    /// is trained on the remaining rows.
    #[arg(long, default_value_t = 0.1)]
    pub holdout: f64,
    /// Seed for the holdout split.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output model JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct ResolvedConfig<'a> {
    targets: TrainTargets,
    problem: Option<&'a str>,
    epsilon2: f64,
    d: usize,
    holdout: f64,
    n_train: usize,
    n_test: usize,
}

pub fn run(args: &TrainArgs) -> CliResult {
    let dmap = io::load_dmap_model(&args.dmap)?;
    let (targets, names) = compute_targets(&dmap, args.targets, args.problem.as_deref())?;
    let phi = dmap.latent_coordinates();

    let epsilon2 = match args.epsilon2 {
        Some(e) => e,
        None => {
            let e = default_epsilon2(&phi.view());
            log::info!("using heuristic epsilon2 = {e:.6e}");
            e
        }
    };

    let (train, test) = holdout_split(phi.nrows(), args.holdout, args.seed)?;
    let model = fit_lh(
        take_rows(&phi, &train),
        &take_rows(&targets, &train).view(),
        epsilon2,
        args.d,
    )?;

    if !test.is_empty() {
        let phi_test = take_rows(&phi, &test);
        let scaled_truth = model.scaler.transform(&take_rows(&targets, &test).view());
        println!("held-out MSE ({} rows, min-max scaled targets):", test.len());
        let mut preds = ndarray::Array2::<f64>::zeros((test.len(), targets.ncols()));
        for i in 0..phi_test.nrows() {
            preds.row_mut(i).assign(&model.extend(&phi_test.row(i))?);
        }
        for (c, name) in names.iter().enumerate() {
            let m = mse(&preds.column(c).to_vec(), &scaled_truth.column(c).to_vec());
            println!("{name:>12}  {m:.3e}");
        }
    }

    io::save_lh_model(&args.out, &model)?;
    let resolved = ResolvedConfig {
        targets: args.targets,
        problem: args.problem.as_deref(),
        epsilon2,
        d: args.d,
        holdout: args.holdout,
        n_train: train.len(),
        n_test: test.len(),
    };
    write_provenance(&args.out, "train", args.seed, &resolved)?;
    println!(
        "wrote model ({} modes, {} targets) to {}",
        model.n_modes(),
        model.n_targets(),
        args.out.display()
    );
    Ok(())
}
