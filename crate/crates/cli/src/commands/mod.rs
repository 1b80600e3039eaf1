pub mod embed;
pub mod integrate;
pub mod lift;
pub mod restrict;
pub mod sample;
pub mod train;
pub mod validate;

use ddmaps::{DMapModel, Error, Result};
use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Outcome of a command: distinguishes a cleanly aborted (partial)
/// trajectory from configuration/input failures, for exit-code mapping.
pub enum CliError {
    Core(Error),
    /// A reduced trajectory stopped early; partial outputs were written.
    PartialTrajectory(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

pub type CliResult = std::result::Result<(), CliError>;

/// Deterministic holdout split: shuffle 0..n with the seed, take the first
/// `ceil(frac n)` as the test set, return (train, test) sorted ascending.
pub fn holdout_split(n: usize, frac: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&frac) {
        return Err(Error::InvalidConfig(format!(
            "holdout fraction must lie in [0, 1), got {frac}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let n_test = ((n as f64) * frac).ceil() as usize;
    let (test, train) = idx.split_at(n_test);
    let mut test = test.to_vec();
    let mut train = train.to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

pub fn take_rows(m: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    let mut out = Array2::<f64>::zeros((rows.len(), m.ncols()));
    for (dst, &src) in rows.iter().enumerate() {
        out.row_mut(dst).assign(&m.row(src));
    }
    out
}

/// Targets a latent-harmonics model can be trained on.
#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainTargets {
    /// Ambient training coordinates (the lifting map).
    Lift,
    /// Reduced derivatives at the training points (the TaLHI field).
    Derivatives,
}

/// Compute the named targets for every training row of a fitted model.
pub fn compute_targets(
    dmap: &DMapModel,
    targets: TrainTargets,
    problem: Option<&str>,
) -> Result<(Array2<f64>, Vec<String>)> {
    match targets {
        TrainTargets::Lift => {
            let names = (1..=dmap.ambient_dim()).map(|c| format!("x_{c}")).collect();
            Ok((dmap.training_data.clone(), names))
        }
        TrainTargets::Derivatives => {
            let name = problem.ok_or_else(|| {
                Error::InvalidConfig("--problem is required for derivative targets".into())
            })?;
            let system = ddmaps::problems::system_by_name(name)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown problem {name:?}")))?;
            let deriv = ddmaps::reduced::training_derivatives(dmap, system.as_ref())?;
            let names = (1..=dmap.latent_dim())
                .map(|c| format!("dphi_{c}/dt"))
                .collect();
            Ok((deriv, names))
        }
    }
}
