//! A three-species stiff surrogate with an analytically known slow
//! manifold: two slowly decaying coordinates and one fast coordinate relaxing
//! onto a paraboloid over them. Plays the role of a reduced-kinetics
//! benchmark where the attracting manifold can be checked in closed form.

use ndarray::{Array1, ArrayView1};
use rand::Rng;

use crate::error::{Error, Result};
use crate::reduced::AmbientSystem;

/// dx/dt = -x, dy/dt = -2y, dz/dt = -(z - x^2 - y^2)/eps_s.
///
/// The exact slow manifold is z = x^2/(1 - 2 eps_s) + y^2/(1 - 4 eps_s)
/// = x^2 + y^2 + eps_s (2 x^2 + 4 y^2) + O(eps_s^2).
#[derive(Debug, Clone, Copy)]
pub struct StiffSurrogate {
    pub eps_s: f64,
}

impl Default for StiffSurrogate {
    fn default() -> Self {
        Self { eps_s: 1e-3 }
    }
}

impl StiffSurrogate {
    pub fn new(eps_s: f64) -> Result<Self> {
        if !(eps_s.is_finite() && eps_s > 0.0 && eps_s < 0.25) {
            return Err(Error::InvalidConfig(format!(
                "eps_s must lie in (0, 0.25), got {eps_s}"
            )));
        }
        Ok(Self { eps_s })
    }

    /// Leading-order slow manifold z = x^2 + y^2.
    pub fn slow_manifold_z(x: f64, y: f64) -> f64 {
        x * x + y * y
    }

    /// Exact invariant slow manifold.
    pub fn exact_slow_manifold_z(&self, x: f64, y: f64) -> f64 {
        x * x / (1.0 - 2.0 * self.eps_s) + y * y / (1.0 - 4.0 * self.eps_s)
    }
}

impl AmbientSystem for StiffSurrogate {
    fn dim(&self) -> usize {
        3
    }

    fn name(&self) -> &str {
        "stiff-surrogate"
    }

    fn rhs(&self, state: &ArrayView1<f64>) -> Array1<f64> {
        let (x, y, z) = (state[0], state[1], state[2]);
        ndarray::array![-x, -2.0 * y, -(z - x * x - y * y) / self.eps_s]
    }

    /// Slow coordinates uniform in [-amplitude, amplitude]; the fast
    /// coordinate starts near (but off) the slow manifold so transients are
    /// in play.
    fn random_initial_condition(
        &self,
        amplitude: f64,
        rng: &mut dyn rand::RngCore,
    ) -> Array1<f64> {
        let x = rng.gen_range(-amplitude..amplitude);
        let y = rng.gen_range(-amplitude..amplitude);
        let off = rng.gen_range(-0.5 * amplitude..0.5 * amplitude);
        ndarray::array![x, y, Self::slow_manifold_z(x, y) + off]
    }
}
