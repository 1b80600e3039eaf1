//! Diffusion-map embedding: kernel construction, eigendecomposition, and
//! selection of the non-harmonic (independent) eigenvectors.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{eigendecompose, kernel_matrix, normalize, EigenSystem, KernelConfig};
use crate::stats::median_sq_pairwise_distance;

/// A trained diffusion-map embedding.
///
/// The trivial constant eigenvector (eigenvalue 1) is dropped before
/// indexing, so eigenvector `j` (1-based, as in `selected`) lives in column
/// `j - 1` of `eigenvectors`. Latent coordinates are the raw unit-norm
/// eigenvector entries, not eigenvalue-scaled.
///
/// The training data is retained because the out-of-sample extension
/// evaluates the kernel against it.
#[derive(Debug, Clone)]
pub struct DMapModel {
    /// Training data, N x m.
    pub training_data: Array2<f64>,
    pub kernel: KernelConfig,
    /// Non-trivial eigenvalues, descending (length p).
    pub eigenvalues: Array1<f64>,
    /// Non-trivial eigenvectors, N x p; column j-1 holds eigenvector j.
    pub eigenvectors: Array2<f64>,
    /// 1-based indices of the selected non-harmonic eigenvectors.
    pub selected: Vec<usize>,
    /// Non-harmonicity residual per retained eigenvector (empty until
    /// selection has run).
    pub residuals: Vec<f64>,
}

impl DMapModel {
    /// Number of training samples.
    pub fn n_samples(&self) -> usize {
        self.training_data.nrows()
    }

    /// Ambient dimension m.
    pub fn ambient_dim(&self) -> usize {
        self.training_data.ncols()
    }

    /// Latent dimension k (number of selected coordinates).
    pub fn latent_dim(&self) -> usize {
        self.selected.len()
    }

    /// Latent coordinates of the training set: N x k matrix whose columns
    /// are the selected eigenvectors, in selection order.
    pub fn latent_coordinates(&self) -> Array2<f64> {
        let n = self.n_samples();
        let mut phi = Array2::<f64>::zeros((n, self.selected.len()));
        for (c, &j) in self.selected.iter().enumerate() {
            phi.column_mut(c).assign(&self.eigenvectors.column(j - 1));
        }
        phi
    }

    /// Eigenvalues of the selected coordinates, in selection order.
    pub fn selected_eigenvalues(&self) -> Vec<f64> {
        self.selected
            .iter()
            .map(|&j| self.eigenvalues[j - 1])
            .collect()
    }
}

/// Median-of-squared-pairwise-distances bandwidth heuristic.
pub fn default_epsilon(data: &ArrayView2<f64>) -> f64 {
    median_sq_pairwise_distance(data)
}

/// Fit a diffusion-map embedding with `p` retained non-trivial eigenpairs.
///
/// Selection of the non-harmonic coordinates is deferred to
/// [`select_nonharmonic`].
pub fn fit_dmaps(data: Array2<f64>, cfg: KernelConfig, p: usize) -> Result<DMapModel> {
    cfg.validate()?;
    let n = data.nrows();
    if n < 10 {
        return Err(Error::InvalidData(format!(
            "embedding needs at least 10 samples, got {n}"
        )));
    }
    if p == 0 || p > n - 1 {
        return Err(Error::InvalidConfig(format!(
            "p must be in 1..={}, got {p}",
            n - 1
        )));
    }
    if !cfg.markov {
        return Err(Error::InvalidConfig(
            "diffusion-map embedding requires the Markov normalization".into(),
        ));
    }

    let k = kernel_matrix(&data.view(), cfg.epsilon)?;
    let nk = normalize(&k, &cfg)?;
    drop(k);
    let eig = eigendecompose(&nk, p + 1)?;

    // Drop the trivial leading pair (eigenvalue 1, constant eigenvector).
    let EigenSystem { values, vectors } = eig;
    let eigenvalues = values.slice(s![1..]).to_owned();
    let eigenvectors = vectors.slice(s![.., 1..]).to_owned();

    Ok(DMapModel {
        training_data: data,
        kernel: cfg,
        eigenvalues,
        eigenvectors,
        selected: Vec::new(),
        residuals: Vec::new(),
    })
}

/// Leave-one-out kernel-weighted local linear regression residuals.
///
/// For eigenvector j (0-based column index >= 1) the residual measures how
/// poorly it is predicted from all preceding eigenvectors; harmonics of
/// already-seen directions score near zero, new independent directions near
/// one. The first eigenvector is defined to have residual 1.
fn local_linear_residuals(vectors: &ArrayView2<f64>) -> Vec<f64> {
    let n = vectors.nrows();
    let p = vectors.ncols();
    let mut residuals = vec![1.0; p];

    for j in 1..p {
        let predictors = vectors.slice(s![.., ..j]);
        let target: Vec<f64> = vectors.column(j).to_vec();
        // Kernel scale: one third of the median pairwise distance, squared.
        // Wider kernels cannot track the higher harmonics and misreport
        // them as independent directions.
        let bandwidth = median_sq_pairwise_distance(&predictors) / 9.0;
        let bandwidth = bandwidth.max(f64::MIN_POSITIVE);

        let row_buf: Vec<Vec<f64>> = predictors.axis_iter(Axis(0)).map(|r| r.to_vec()).collect();
        let rows: Vec<&[f64]> = row_buf.iter().map(|v| v.as_slice()).collect();

        let sq_err: f64 = (0..n)
            .into_par_iter()
            .map(|i| {
                let pred = loo_local_linear_fit(&rows, &target, i, bandwidth);
                let e = target[i] - pred;
                e * e
            })
            .sum();
        let denom: f64 = target.iter().map(|v| v * v).sum();
        residuals[j] = (sq_err / denom).sqrt();
    }
    residuals
}

/// Weighted local linear fit at point `i` using every other point, returning
/// the prediction at `i` (the local intercept).
fn loo_local_linear_fit(rows: &[&[f64]], target: &[f64], i: usize, bandwidth: f64) -> f64 {
    let dim = rows[0].len();
    let d = dim + 1; // intercept + local offsets
    let mut gram = vec![0.0; d * d];
    let mut rhs = vec![0.0; d];
    let xi = rows[i];
    let mut z = vec![0.0; d];
    for (l, xl) in rows.iter().enumerate() {
        if l == i {
            continue;
        }
        let d2 = crate::kernel::sq_dist(xi, xl);
        let w = (-d2 / bandwidth).exp();
        if w == 0.0 {
            continue;
        }
        z[0] = 1.0;
        for (t, (&a, &b)) in xl.iter().zip(xi.iter()).enumerate() {
            z[t + 1] = a - b;
        }
        for r in 0..d {
            let wz = w * z[r];
            rhs[r] += wz * target[l];
            for c in 0..=r {
                gram[r * d + c] += wz * z[c];
            }
        }
    }
    for r in 0..d {
        for c in (r + 1)..d {
            gram[r * d + c] = gram[c * d + r];
        }
    }
    let coeffs = solve_spd(&mut gram, &mut rhs, d);
    coeffs[0]
}

/// In-place Cholesky solve of a small symmetric positive-definite system,
/// with a diagonal ridge retried on breakdown.
fn solve_spd(gram: &mut [f64], rhs: &mut [f64], d: usize) -> Vec<f64> {
    let max_diag = (0..d).map(|r| gram[r * d + r]).fold(0.0f64, f64::max);
    let mut ridge = max_diag * 1e-12 + f64::MIN_POSITIVE;
    loop {
        let mut chol = gram.to_vec();
        for r in 0..d {
            chol[r * d + r] += ridge;
        }
        if cholesky_in_place(&mut chol, d) {
            let mut x = rhs.to_vec();
            // Forward substitution L y = b.
            for r in 0..d {
                for c in 0..r {
                    x[r] -= chol[r * d + c] * x[c];
                }
                x[r] /= chol[r * d + r];
            }
            // Backward substitution L^T x = y.
            for r in (0..d).rev() {
                for c in (r + 1)..d {
                    x[r] -= chol[c * d + r] * x[c];
                }
                x[r] /= chol[r * d + r];
            }
            return x;
        }
        ridge = (ridge * 1e4).max(1e-300);
        if ridge > max_diag.max(1.0) {
            // Fully degenerate neighborhood: fall back to the weighted mean.
            return vec![rhs[0] / gram[0].max(f64::MIN_POSITIVE); d];
        }
    }
}

fn cholesky_in_place(a: &mut [f64], d: usize) -> bool {
    for r in 0..d {
        for c in 0..=r {
            let mut sum = a[r * d + c];
            for t in 0..c {
                sum -= a[r * d + t] * a[c * d + t];
            }
            if r == c {
                if sum <= 0.0 {
                    return false;
                }
                a[r * d + c] = sum.sqrt();
            } else {
                a[r * d + c] = sum / a[c * d + c];
            }
        }
    }
    true
}

/// Score every retained eigenvector for non-harmonicity and select those
/// above `threshold`; the first non-trivial eigenvector is always selected.
pub fn select_nonharmonic(model: DMapModel, threshold: f64) -> Result<DMapModel> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "selection threshold must lie in (0, 1), got {threshold}"
        )));
    }
    if model.eigenvalues.len() < 2 {
        return Err(Error::InvalidConfig(
            "selection needs at least 2 retained eigenvectors".into(),
        ));
    }
    let mut model = model;
    let residuals = local_linear_residuals(&model.eigenvectors.view());
    let selected: Vec<usize> = residuals
        .iter()
        .enumerate()
        .filter(|(_, &r)| r > threshold)
        .map(|(c, _)| c + 1)
        .collect();
    if selected.len() > model.ambient_dim() {
        log::warn!(
            "selected {} latent coordinates in ambient dimension {}: no reduction achieved",
            selected.len(),
            model.ambient_dim()
        );
    }
    model.residuals = residuals;
    model.selected = selected;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::spearman;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn line_segment(n: usize) -> Array2<f64> {
        // Points on a straight segment in R^2, slightly uneven spacing.
        let mut x = Array2::<f64>::zeros((n, 2));
        for i in 0..n {
            let s = i as f64 / (n - 1) as f64;
            x[[i, 0]] = 2.0 * s;
            x[[i, 1] ] = -1.0 + 2.0 * s;
        }
        x
    }

    #[test]
    fn first_eigenvector_monotone_on_segment() {
        let x = line_segment(10);
        let cfg = KernelConfig::new(0.5, 0, true);
        let model = fit_dmaps(x, cfg, 3).unwrap();
        // The first non-trivial Laplacian eigenfunction on a segment is
        // cos(pi s / L): monotone along arclength.
        let phi1 = model.eigenvectors.column(0).to_vec();
        let s: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let rho = spearman(&phi1, &s);
        assert!(rho.abs() > 0.999, "|rho| = {}", rho.abs());
    }

    #[test]
    fn fit_rejects_small_or_invalid() {
        let x = line_segment(5);
        let cfg = KernelConfig::new(0.5, 0, true);
        assert!(matches!(
            fit_dmaps(x, cfg, 2),
            Err(Error::InvalidData(_))
        ));
        let x = line_segment(12);
        assert!(matches!(
            fit_dmaps(x.clone(), KernelConfig::new(0.5, 0, true), 12),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            fit_dmaps(x, KernelConfig::new(0.5, 0, false), 3),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn selection_on_curve_keeps_only_first() {
        // A gentle helix arc: intrinsically one-dimensional, so every
        // eigenvector past the first must be one of its harmonics.
        let n = 220;
        let mut x = Array2::<f64>::zeros((n, 3));
        for i in 0..n {
            let t = 1.1 * std::f64::consts::PI * (i as f64 / (n - 1) as f64);
            x[[i, 0]] = t.cos();
            x[[i, 1]] = t.sin();
            x[[i, 2]] = 0.25 * t;
        }
        let eps = default_epsilon(&x.view()) * 0.05;
        let model = fit_dmaps(x, KernelConfig::new(eps, 0, true), 6).unwrap();
        let model = select_nonharmonic(model, 0.5).unwrap();
        assert_eq!(model.selected, vec![1]);
        assert_eq!(model.residuals[0], 1.0);
        for &r in &model.residuals[1..] {
            assert!(r < 0.5, "harmonic residual {r} above threshold");
        }
        for &r in &model.residuals {
            assert!((0.0..=1.0 + 1e-9).contains(&r));
        }
    }

    #[test]
    fn selection_invariant_under_rigid_rotation() {
        let n = 300;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut flat = Array2::<f64>::zeros((n, 3));
        for i in 0..n {
            let u: f64 = rng.gen_range(0.0..3.0);
            let v: f64 = rng.gen_range(0.0..1.0);
            flat[[i, 0]] = u;
            flat[[i, 1]] = v;
            // third coordinate constant: a flat strip in R^3
        }
        // Rigid rotation around two axes.
        let (c1, s1) = (0.6f64.cos(), 0.6f64.sin());
        let (c2, s2) = (1.1f64.cos(), 1.1f64.sin());
        let mut rotated = Array2::<f64>::zeros((n, 3));
        for i in 0..n {
            let (x, y, z) = (flat[[i, 0]], flat[[i, 1]], flat[[i, 2]]);
            let (x1, y1, z1) = (c1 * x - s1 * y, s1 * x + c1 * y, z);
            rotated[[i, 0]] = x1;
            rotated[[i, 1]] = c2 * y1 - s2 * z1;
            rotated[[i, 2]] = s2 * y1 + c2 * z1;
        }
        let eps = 0.15;
        let cfg = KernelConfig::new(eps, 0, true);
        let a = select_nonharmonic(fit_dmaps(flat, cfg, 6).unwrap(), 0.5).unwrap();
        let b = select_nonharmonic(fit_dmaps(rotated, cfg, 6).unwrap(), 0.5).unwrap();
        assert_eq!(a.selected, b.selected);
        for (ra, rb) in a.residuals.iter().zip(b.residuals.iter()) {
            assert!((ra - rb).abs() < 1e-6, "residuals differ: {ra} vs {rb}");
        }
    }
}
