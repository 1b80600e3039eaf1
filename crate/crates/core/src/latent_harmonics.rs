//! Second-round kernel regression on the latent coordinates: fit a
//! symmetric Gaussian kernel on the embedded training set, project target
//! functions onto its leading eigenvectors, and extend them to new latent
//! points. Used both for lifting (latent -> ambient) and for general
//! regression of latent-space functions such as reduced derivatives.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::dmaps::DMapModel;
use crate::error::{Error, Result};
use crate::kernel::{eigendecompose, kernel_matrix, sq_dist, NormalizedKernel};
use crate::stats::median_sq_pairwise_distance;

const UNDERFLOW_GUARD: f64 = 1e-300;

/// Modes with sigma_j / sigma_0 at or below this ratio are truncated; their
/// 1/sigma amplification would swamp the extension.
const CONDITION_CUTOFF: f64 = 1e-12;

/// Per-column min-max scaling of regression targets to [0, 1].
///
/// Constant columns scale to zero and invert back to their original value.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub span: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(targets: &ArrayView2<f64>) -> Self {
        let q = targets.ncols();
        let mut min = vec![f64::INFINITY; q];
        let mut max = vec![f64::NEG_INFINITY; q];
        for row in targets.axis_iter(Axis(0)) {
            for (c, &v) in row.iter().enumerate() {
                min[c] = min[c].min(v);
                max[c] = max[c].max(v);
            }
        }
        let span = min
            .iter()
            .zip(max.iter())
            .map(|(&lo, &hi)| if hi - lo > 0.0 { hi - lo } else { 1.0 })
            .collect();
        Self { min, span }
    }

    pub fn transform(&self, targets: &ArrayView2<f64>) -> Array2<f64> {
        let mut out = targets.to_owned();
        for mut row in out.axis_iter_mut(Axis(0)) {
            for (c, v) in row.iter_mut().enumerate() {
                *v = (*v - self.min[c]) / self.span[c];
            }
        }
        out
    }

    pub fn inverse_row(&self, scaled: &ArrayView1<f64>) -> Array1<f64> {
        Array1::from_iter(
            scaled
                .iter()
                .enumerate()
                .map(|(c, &v)| v * self.span[c] + self.min[c]),
        )
    }
}

/// A trained latent-harmonics regressor.
///
/// `psi` holds the orthonormal eigenvectors of the (unnormalized) kernel on
/// the latent training points, `sigma` their eigenvalues, and `coeffs` the
/// projections of the scaled targets onto each eigenvector.
#[derive(Debug, Clone)]
pub struct LHModel {
    /// Latent training points, N x k.
    pub latent_train: Array2<f64>,
    /// Squared bandwidth of the latent kernel.
    pub epsilon2: f64,
    /// Kernel eigenvalues, descending, all positive (length d).
    pub sigma: Array1<f64>,
    /// Kernel eigenvectors, N x d, orthonormal columns.
    pub psi: Array2<f64>,
    /// Projection coefficients, d x q.
    pub coeffs: Array2<f64>,
    /// Target scaler applied before projection.
    pub scaler: MinMaxScaler,
}

impl LHModel {
    pub fn n_samples(&self) -> usize {
        self.latent_train.nrows()
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_train.ncols()
    }

    pub fn n_targets(&self) -> usize {
        self.coeffs.ncols()
    }

    pub fn n_modes(&self) -> usize {
        self.sigma.len()
    }

    /// Extend the fitted (scaled) targets to a new latent point.
    ///
    /// Output lives in the scaled [0, 1] space; use [`LHModel::predict`] for
    /// original units.
    pub fn extend(&self, phi_new: &ArrayView1<f64>) -> Result<Array1<f64>> {
        if phi_new.len() != self.latent_dim() {
            return Err(Error::InvalidData(format!(
                "latent query has dimension {}, model expects {}",
                phi_new.len(),
                self.latent_dim()
            )));
        }
        if phi_new.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData(
                "latent query contains non-finite entries".into(),
            ));
        }
        let inv = 1.0 / (2.0 * self.epsilon2);
        let q = phi_new.as_standard_layout();
        let qs = q.as_slice().expect("standard layout");
        let weights = Array1::from_iter(
            self.latent_train
                .axis_iter(Axis(0))
                .map(|row| (-sq_dist(qs, row.to_slice().expect("row-major latent")) * inv).exp()),
        );
        if weights.sum() < UNDERFLOW_GUARD {
            return Err(Error::OutOfSampleTooFar);
        }
        // Psi_j(phi_new) = sigma_j^-1 sum_i K*(phi_new, phi_i) psi_j(phi_i)
        let mut extended = self.psi.t().dot(&weights);
        extended
            .iter_mut()
            .zip(self.sigma.iter())
            .for_each(|(v, &s)| *v /= s);
        // (Ef)(phi_new) = sum_j <f, psi_j> Psi_j(phi_new)
        Ok(self.coeffs.t().dot(&extended))
    }

    /// Extend and map back to the targets' original units.
    pub fn predict(&self, phi_new: &ArrayView1<f64>) -> Result<Array1<f64>> {
        let scaled = self.extend(phi_new)?;
        Ok(self.scaler.inverse_row(&scaled.view()))
    }

    /// The training-point value of the projected targets (scaled space):
    /// P_delta f(phi_i) = sum_j <f, psi_j> psi_j(phi_i).
    pub fn projection_at_training(&self, i: usize) -> Array1<f64> {
        self.coeffs.t().dot(&self.psi.row(i))
    }
}

/// Heuristic bandwidth for the latent kernel: a small fraction of the median
/// squared pairwise latent distance (latent kernels are much narrower than
/// the embedding kernel).
pub fn default_epsilon2(latent: &ArrayView2<f64>) -> f64 {
    1e-2 * median_sq_pairwise_distance(latent)
}

/// Fit a latent-harmonics regressor from latent points to target values.
///
/// The kernel on the latent points is used raw (no density or Markov
/// normalization), so it is symmetric positive definite and its eigenvalues
/// can safely be inverted in the extension. Targets are min-max scaled per
/// column before projection. Requested modes past the conditioning cutoff
/// are truncated with a warning rather than kept.
pub fn fit_lh(
    latent_train: Array2<f64>,
    targets: &ArrayView2<f64>,
    epsilon2: f64,
    d: usize,
) -> Result<LHModel> {
    fit_impl(latent_train, targets, epsilon2, d, true)
}

/// [`fit_lh`] without the min-max target scaling (identity scaler).
///
/// Useful when the targets are already normalized or when the pure
/// projection operator is wanted, e.g. to check its linearity.
pub fn fit_lh_unscaled(
    latent_train: Array2<f64>,
    targets: &ArrayView2<f64>,
    epsilon2: f64,
    d: usize,
) -> Result<LHModel> {
    fit_impl(latent_train, targets, epsilon2, d, false)
}

fn fit_impl(
    latent_train: Array2<f64>,
    targets: &ArrayView2<f64>,
    epsilon2: f64,
    d: usize,
    scale: bool,
) -> Result<LHModel> {
    let n = latent_train.nrows();
    if targets.nrows() != n {
        return Err(Error::InvalidData(format!(
            "targets have {} rows but latent training set has {n}",
            targets.nrows()
        )));
    }
    if d == 0 || d > n {
        return Err(Error::InvalidConfig(format!(
            "d must be in 1..={n}, got {d}"
        )));
    }
    if !(epsilon2.is_finite() && epsilon2 > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "epsilon2 must be positive and finite, got {epsilon2}"
        )));
    }
    if targets.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("targets contain non-finite entries".into()));
    }

    let scaler = if scale {
        MinMaxScaler::fit(targets)
    } else {
        MinMaxScaler {
            min: vec![0.0; targets.ncols()],
            span: vec![1.0; targets.ncols()],
        }
    };
    let scaled = scaler.transform(targets);

    let kstar = kernel_matrix(&latent_train.view(), epsilon2)?;
    let eig = eigendecompose(
        &NormalizedKernel {
            matrix: kstar,
            row_sums: None,
        },
        d,
    )?;

    let sigma0 = eig.values[0];
    if !(sigma0.is_finite() && sigma0 > 0.0) {
        return Err(Error::IllConditioned(format!(
            "leading kernel eigenvalue is {sigma0}"
        )));
    }
    let usable = eig
        .values
        .iter()
        .take_while(|&&s| s > sigma0 * CONDITION_CUTOFF)
        .count();
    if usable < d {
        log::warn!(
            "latent kernel spectrum decays below cutoff: truncating d from {d} to {usable}"
        );
    }
    let sigma = eig.values.slice(ndarray::s![..usable]).to_owned();
    let psi = eig.vectors.slice(ndarray::s![.., ..usable]).to_owned();

    // coeffs[j, c] = sum_i f_c(i) psi_j(i)
    let coeffs = psi.t().dot(&scaled);

    Ok(LHModel {
        latent_train,
        epsilon2,
        sigma,
        psi,
        coeffs,
        scaler,
    })
}

/// Fit the lifting regressor of a diffusion-map model: latent coordinates
/// to ambient training coordinates.
pub fn fit_lift(dmap: &DMapModel, epsilon2: f64, d: usize) -> Result<LHModel> {
    if dmap.selected.is_empty() {
        return Err(Error::InvalidConfig(
            "diffusion-map model has no selected coordinates".into(),
        ));
    }
    fit_lh(
        dmap.latent_coordinates(),
        &dmap.training_data.view(),
        epsilon2,
        d,
    )
}

/// Map a latent point back to ambient coordinates through a lifting model.
pub fn lift(dmap: &DMapModel, lh: &LHModel, phi_new: &ArrayView1<f64>) -> Result<Array1<f64>> {
    if lh.n_targets() != dmap.ambient_dim() {
        return Err(Error::InvalidConfig(format!(
            "lift model predicts {} targets but ambient dimension is {}",
            lh.n_targets(),
            dmap.ambient_dim()
        )));
    }
    if lh.latent_dim() != dmap.latent_dim() {
        return Err(Error::InvalidConfig(format!(
            "lift model was fit on {}-dimensional latent points, model selects {}",
            lh.latent_dim(),
            dmap.latent_dim()
        )));
    }
    lh.predict(phi_new)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn latent_cloud(n: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut phi = Array2::<f64>::zeros((n, 2));
        for i in 0..n {
            phi[[i, 0]] = rng.gen_range(-1.0..1.0);
            phi[[i, 1]] = rng.gen_range(-0.5..0.5);
        }
        phi
    }

    #[test]
    fn eigenvector_target_gives_basis_coefficients() {
        let phi = latent_cloud(60, 1);
        let eps2 = default_epsilon2(&phi.view());
        // First fit anything to get the eigenbasis.
        let probe = fit_lh(phi.clone(), &phi.view(), eps2, 8).unwrap();
        // Now use psi_2 itself as the target. The scaler turns it into
        // (psi_2 - lo)/span, so by orthonormality the coefficients are
        // (delta_2j - lo <1, psi_j>)/span: a standard basis vector plus the
        // projection of the constant shift.
        let psi2 = probe.psi.column(2).to_owned().insert_axis(Axis(1));
        let model = fit_lh(phi, &psi2.view(), eps2, 8).unwrap();
        let lo = psi2.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = psi2.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        for j in 0..8 {
            let ones_proj: f64 = model.psi.column(j).sum();
            let delta = if j == 2 { 1.0 } else { 0.0 };
            let expect = (delta - lo * ones_proj) / span;
            assert_abs_diff_eq!(model.coeffs[[j, 0]], expect, epsilon = 1e-10);
        }
    }

    #[test]
    fn extension_reproduces_projection_at_training_points() {
        let phi = latent_cloud(80, 2);
        let eps2 = default_epsilon2(&phi.view());
        let mut targets = Array2::<f64>::zeros((80, 2));
        for i in 0..80 {
            let (a, b) = (phi[[i, 0]], phi[[i, 1]]);
            targets[[i, 0]] = (2.0 * a).sin() + b;
            targets[[i, 1]] = a * b;
        }
        let model = fit_lh(phi.clone(), &targets.view(), eps2, 30).unwrap();
        for i in [0usize, 17, 79] {
            let ext = model.extend(&phi.row(i)).unwrap();
            let proj = model.projection_at_training(i);
            for c in 0..2 {
                assert_abs_diff_eq!(ext[c], proj[c], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn extension_is_linear_in_the_targets() {
        let phi = latent_cloud(50, 3);
        let eps2 = default_epsilon2(&phi.view());
        let f: Array2<f64> = phi.mapv(|v| v.powi(2));
        let g: Array2<f64> = phi.mapv(|v| (3.0 * v).cos());
        let combo = 2.0 * &f - 0.5 * &g;

        // Same kernel/eigenbasis, different targets. The projection
        // operator itself is linear; the unscaled fit exposes it directly.
        let mf = fit_lh_unscaled(phi.clone(), &f.view(), eps2, 25).unwrap();
        let mg = fit_lh_unscaled(phi.clone(), &g.view(), eps2, 25).unwrap();
        let mc = fit_lh_unscaled(phi.clone(), &combo.view(), eps2, 25).unwrap();

        let q = array![0.12, -0.07];
        let pf = mf.predict(&q.view()).unwrap();
        let pg = mg.predict(&q.view()).unwrap();
        let pc = mc.predict(&q.view()).unwrap();
        for c in 0..2 {
            assert_abs_diff_eq!(pc[c], 2.0 * pf[c] - 0.5 * pg[c], epsilon = 1e-10);
        }
    }

    #[test]
    fn reconstruction_error_non_increasing_in_d() {
        let phi = latent_cloud(70, 4);
        let eps2 = default_epsilon2(&phi.view());
        let ones = Array2::<f64>::ones((70, 1));
        // A constant plus a wiggle so the scaler has a nontrivial span.
        let targets: Array2<f64> =
            &ones + &phi.column(0).mapv(|v| 0.3 * (5.0 * v).sin()).insert_axis(Axis(1));

        let mut prev = f64::INFINITY;
        for d in [5usize, 15, 30, 60] {
            let model = fit_lh(phi.clone(), &targets.view(), eps2, d).unwrap();
            let mut err = 0.0;
            let scaled = model.scaler.transform(&targets.view());
            for i in 0..70 {
                let p = model.projection_at_training(i);
                err += (p[0] - scaled[[i, 0]]).powi(2);
            }
            assert!(
                err <= prev + 1e-12,
                "reconstruction error grew with d: {err} > {prev}"
            );
            prev = err;
        }
    }

    #[test]
    fn sigma_positive_and_descending() {
        let phi = latent_cloud(40, 5);
        let model = fit_lh(
            phi.clone(),
            &phi.view(),
            default_epsilon2(&phi.view()),
            40,
        )
        .unwrap();
        for j in 0..model.n_modes() {
            assert!(model.sigma[j] > 0.0);
            if j > 0 {
                assert!(model.sigma[j] <= model.sigma[j - 1]);
            }
            assert!(model.sigma[j] > model.sigma[0] * 1e-12);
        }
        // Orthonormality of psi.
        let gram = model.psi.t().dot(&model.psi);
        for r in 0..model.n_modes() {
            for c in 0..model.n_modes() {
                let expect = if r == c { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(gram[[r, c]], expect, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn far_latent_query_errors() {
        let phi = latent_cloud(30, 6);
        let eps2 = 1e-4;
        let model = fit_lh(phi.clone(), &phi.view(), eps2, 10).unwrap();
        let far = array![50.0, 50.0];
        assert!(matches!(
            model.extend(&far.view()),
            Err(Error::OutOfSampleTooFar)
        ));
    }

    #[test]
    fn fit_rejects_bad_config() {
        let phi = latent_cloud(30, 7);
        let t = phi.clone();
        assert!(matches!(
            fit_lh(phi.clone(), &t.view(), 0.0, 5),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            fit_lh(phi.clone(), &t.view(), 1e-3, 0),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            fit_lh(phi, &t.view(), 1e-3, 31),
            Err(Error::InvalidConfig(_))
        ));
    }
}
