//! Built-in benchmark systems and data generators.

pub mod chafee_infante;
pub mod rectangle;
pub mod sampling;
pub mod stiff;

pub use chafee_infante::{fd_pde_solve, reconstruct_field, ChafeeInfante, FdSolution};
pub use rectangle::rectangle_sample;
pub use sampling::{sample_manifold, SamplingConfig};
pub use stiff::StiffSurrogate;

use crate::reduced::AmbientSystem;

impl ChafeeInfante {
    /// Sampling defaults calibrated to produce a training set of roughly
    /// 2800 points covering the inertial manifold.
    pub fn default_sampling(&self) -> SamplingConfig {
        SamplingConfig {
            n_initial_conditions: 700,
            ic_amplitude: 1.5,
            transient_time: 3.0,
            record_interval: 0.05,
            record_duration: 3.0,
            subsample_distance: 0.012,
        }
    }
}

impl StiffSurrogate {
    /// Sampling defaults covering the slow paraboloid with a few thousand
    /// points.
    pub fn default_sampling(&self) -> SamplingConfig {
        SamplingConfig {
            n_initial_conditions: 400,
            ic_amplitude: 1.2,
            transient_time: 0.05,
            record_interval: 0.05,
            record_duration: 1.5,
            subsample_distance: 0.035,
        }
    }
}

/// Look up a built-in system by its CLI name.
pub fn system_by_name(name: &str) -> Option<Box<dyn AmbientSystem>> {
    match name {
        "chafee-infante" => Some(Box::new(ChafeeInfante::standard())),
        "stiff-surrogate" => Some(Box::new(StiffSurrogate::default())),
        _ => None,
    }
}
