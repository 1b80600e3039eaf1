//! Data-driven reduced modeling of dissipative dynamics.
//!
//! The pipeline has three stages:
//!
//! 1. **Embed** — a Gaussian-kernel Markov matrix on trajectory samples is
//!    eigendecomposed and the non-harmonic eigenvectors are selected as
//!    latent coordinates ([`dmaps`], built on [`kernel`]).
//! 2. **Extend** — new ambient points are restricted into the latent space
//!    through the out-of-sample kernel extension and its closed-form
//!    Jacobian ([`nystrom`]); a second kernel fitted *on the latent
//!    coordinates* extends functions of the data — in particular the
//!    ambient coordinates themselves, which is lifting
//!    ([`latent_harmonics`]).
//! 3. **Reduce** — the latent vector field is obtained by chain-ruling the
//!    known ambient dynamics through the restriction Jacobian, either on
//!    the fly (back-and-forth), pre-tabulated on a grid, or regressed once
//!    over the training set ([`reduced`]); trajectories are produced by the
//!    explicit integrators in [`ode`].
//!
//! [`problems`] ships the built-in benchmark systems and the samplers that
//! generate training data from their long-term dynamics; [`io`] fixes the
//! CSV/JSON file formats shared with the command-line tool.

#[doc(hidden)]
pub mod bench;
pub mod dmaps;
pub mod error;
pub mod io;
pub mod kernel;
pub mod latent_harmonics;
pub mod nystrom;
pub mod ode;
pub mod problems;
pub mod reduced;
pub mod stats;

pub use dmaps::{fit_dmaps, select_nonharmonic, DMapModel};
pub use error::{Error, Result};
pub use kernel::{eigendecompose, kernel_matrix, normalize, EigenSystem, KernelConfig};
pub use latent_harmonics::{fit_lh, fit_lift, lift, LHModel};
pub use nystrom::{jacobian, restrict, LatentPoint, NystromJacobian};
pub use ode::{integrate, integrate_at, Integration, Method, Space, Trajectory};
pub use reduced::{
    bf_rhs, build_grid, chain_rule_rhs, fit_talhi, AmbientSystem, GridTable, ReducedModel,
};
