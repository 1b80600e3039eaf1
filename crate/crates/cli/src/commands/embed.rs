use std::path::PathBuf;

use clap::Args;
use ddmaps::{dmaps, io, KernelConfig};
use serde::Serialize;

use super::CliResult;
use crate::provenance::write_provenance;

#[derive(Args)]
pub struct EmbedArgs {
    /// Input data CSV (headerless samples).
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output model JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Squared kernel bandwidth; defaults to the median squared pairwise
    /// distance of the data.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Density-normalization exponent (0 or 1).
    #[arg(long, default_value_t = 0)]
    pub alpha: u8,
    /// Number of retained non-trivial eigenpairs.
    #[arg(long = "n-eigs", default_value_t = 9)]
    pub n_eigs: usize,
    /// Non-harmonicity residual threshold for selection.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
}

#[derive(Serialize)]
struct ResolvedConfig {
    epsilon: f64,
    alpha: u8,
    markov: bool,
    n_eigs: usize,
    threshold: f64,
    n_samples: usize,
}

pub fn run(args: &EmbedArgs) -> CliResult {
    let data = io::read_matrix_csv(&args.input)?;
    let epsilon = match args.epsilon {
        Some(e) => e,
        None => {
            let e = dmaps::default_epsilon(&data.view());
            log::info!("using median-heuristic epsilon = {e:.6e}");
            e
        }
    };
    let cfg = KernelConfig::new(epsilon, args.alpha, true);
    let model = dmaps::fit_dmaps(data, cfg, args.n_eigs)?;
    let model = dmaps::select_nonharmonic(model, args.threshold)?;

    println!("non-harmonicity residuals (threshold {}):", args.threshold);
    println!("{:>6} {:>12} {:>10} {:>9}", "index", "eigenvalue", "residual", "selected");
    for (c, (&lambda, &r)) in model
        .eigenvalues
        .iter()
        .zip(model.residuals.iter())
        .enumerate()
    {
        let j = c + 1;
        let mark = if model.selected.contains(&j) { "*" } else { "" };
        println!("{j:>6} {lambda:>12.6} {r:>10.4} {mark:>9}");
    }
    println!("selected {} latent coordinates: {:?}", model.selected.len(), model.selected);

    io::save_dmap_model(&args.out, &model)?;
    let resolved = ResolvedConfig {
        epsilon,
        alpha: args.alpha,
        markov: true,
        n_eigs: args.n_eigs,
        threshold: args.threshold,
        n_samples: model.n_samples(),
    };
    write_provenance(&args.out, "embed", 0, &resolved)?;
    println!("wrote model to {}", args.out.display());
    Ok(())
}
