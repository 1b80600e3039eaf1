//! Sampling the long-term dynamics of a dissipative system: integrate many
//! random initial conditions, discard the transient, record at a fixed
//! interval, then greedily thin the cloud so no two kept points are closer
//! than a threshold distance.

use ndarray::{Array2, ArrayView1, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::sq_dist;
use crate::ode::{integrate_at, Method};
use crate::reduced::AmbientSystem;

/// How trajectories are generated and thinned into a training set.
#[derive(Debug, Clone, Copy)]
pub struct SamplingConfig {
    pub n_initial_conditions: usize,
    /// Amplitude scale passed to the system's initial-condition sampler.
    pub ic_amplitude: f64,
    /// Time discarded at the start of every trajectory.
    pub transient_time: f64,
    /// Recording period after the transient.
    pub record_interval: f64,
    /// Length of the recorded window per trajectory.
    pub record_duration: f64,
    /// Greedy thinning threshold d: a recorded point is dropped when an
    /// already-kept point lies within distance d. Use 0 to keep everything.
    pub subsample_distance: f64,
}

impl SamplingConfig {
    fn validate(&self) -> Result<()> {
        if self.n_initial_conditions == 0 {
            return Err(Error::InvalidConfig("need at least one initial condition".into()));
        }
        if !(self.ic_amplitude > 0.0 && self.ic_amplitude.is_finite()) {
            return Err(Error::InvalidConfig("ic_amplitude must be positive".into()));
        }
        if !(self.transient_time >= 0.0 && self.transient_time.is_finite()) {
            return Err(Error::InvalidConfig("transient_time must be non-negative".into()));
        }
        if !(self.record_interval > 0.0 && self.record_interval.is_finite()) {
            return Err(Error::InvalidConfig("record_interval must be positive".into()));
        }
        if !(self.record_duration >= self.record_interval && self.record_duration.is_finite()) {
            return Err(Error::InvalidConfig(
                "record_duration must cover at least one interval".into(),
            ));
        }
        if self.subsample_distance.is_nan() || self.subsample_distance < 0.0 {
            return Err(Error::InvalidConfig(
                "subsample_distance must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Minimum usable training-set size after thinning.
const MIN_KEPT: usize = 100;

/// Sample the attractor of `system`: integrate, cut transients, record, and
/// thin. Deterministic for a fixed seed; initial conditions are drawn
/// sequentially and trajectories are assembled in initial-condition order.
pub fn sample_manifold(
    system: &dyn AmbientSystem,
    cfg: &SamplingConfig,
    seed: u64,
) -> Result<Array2<f64>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ics: Vec<_> = (0..cfg.n_initial_conditions)
        .map(|_| system.random_initial_condition(cfg.ic_amplitude, &mut rng))
        .collect();

    // Record times: the initial condition itself is discarded unless the
    // transient is zero.
    let n_rec = (cfg.record_duration / cfg.record_interval).round() as usize;
    let mut times = Vec::with_capacity(n_rec + 2);
    let skip = if cfg.transient_time > 0.0 {
        times.push(0.0);
        1
    } else {
        0
    };
    for i in 0..=n_rec {
        times.push(cfg.transient_time + i as f64 * cfg.record_interval);
    }

    let method = Method::Rk45 {
        atol: 1e-8,
        rtol: 1e-8,
    };
    let runs: Vec<Result<Array2<f64>>> = ics
        .par_iter()
        .map(|ic| {
            let out = integrate_at(
                |x: &ArrayView1<f64>| Ok(system.rhs(x)),
                &ic.view(),
                &times,
                &method,
            )?;
            if let Some(cause) = out.abort {
                return Err(cause);
            }
            Ok(out
                .trajectory
                .states
                .slice(ndarray::s![skip.., ..])
                .to_owned())
        })
        .collect();

    let m = system.dim();
    let mut recorded: Vec<f64> = Vec::new();
    let mut n_rows = 0usize;
    for run in runs {
        let block = run?;
        n_rows += block.nrows();
        recorded.extend(block.iter());
    }
    let all = Array2::from_shape_vec((n_rows, m), recorded).expect("row-major blocks");

    let kept_rows = greedy_thin(&all, cfg.subsample_distance);
    if kept_rows.len() < MIN_KEPT {
        return Err(Error::InsufficientSampling {
            kept: kept_rows.len(),
            required: MIN_KEPT,
        });
    }

    let mut out = Array2::<f64>::zeros((kept_rows.len(), m));
    for (dst, &src) in kept_rows.iter().enumerate() {
        out.row_mut(dst).assign(&all.row(src));
    }
    Ok(out)
}

/// Greedy thinning in input order: keep a point iff no previously kept point
/// lies strictly within `d`.
fn greedy_thin(points: &Array2<f64>, d: f64) -> Vec<usize> {
    let d2 = d * d;
    let mut kept: Vec<usize> = Vec::new();
    let rows: Vec<&[f64]> = points
        .axis_iter(Axis(0))
        .map(|r| r.to_slice().expect("row-major"))
        .collect();
    'outer: for (i, row) in rows.iter().enumerate() {
        for &k in &kept {
            if sq_dist(row, rows[k]) < d2 {
                continue 'outer;
            }
        }
        kept.push(i);
    }
    kept
}
