//! Gaussian kernel matrices, density/row normalizations, and the symmetric
//! eigendecomposition shared by the embedding and extension modules.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use ndarray_linalg::{Eigh, UPLO};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Configuration of the diffusion kernel and its normalizations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    /// Squared kernel bandwidth (same units as squared ambient distance).
    pub epsilon: f64,
    /// Density-normalization exponent; only 0 and 1 are supported.
    pub alpha: u8,
    /// Apply the row-stochastic (Markov) normalization.
    pub markov: bool,
}

impl KernelConfig {
    pub fn new(epsilon: f64, alpha: u8, markov: bool) -> Self {
        Self {
            epsilon,
            alpha,
            markov,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be positive and finite, got {}",
                self.epsilon
            )));
        }
        if self.alpha > 1 {
            return Err(Error::InvalidConfig(format!(
                "alpha must be 0 or 1, got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Squared Euclidean distance between two rows.
#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_finite(data: &ArrayView2<f64>) -> Result<()> {
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData(
            "data matrix contains non-finite entries".into(),
        ));
    }
    Ok(())
}

/// Dense Gaussian kernel matrix K[i,j] = exp(-||x_i - x_j||^2 / (2 epsilon)).
///
/// The result is exactly symmetric (the lower triangle is mirrored from the
/// upper) with unit diagonal.
pub fn kernel_matrix(data: &ArrayView2<f64>, epsilon: f64) -> Result<Array2<f64>> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "epsilon must be positive and finite, got {epsilon}"
        )));
    }
    let n = data.nrows();
    if n < 2 {
        return Err(Error::InvalidData(format!(
            "kernel matrix needs at least 2 samples, got {n}"
        )));
    }
    check_finite(data)?;

    let data = data.as_standard_layout();
    let rows: Vec<&[f64]> = data
        .axis_iter(Axis(0))
        .map(|r| r.to_slice().expect("standard layout"))
        .collect();

    let inv = 1.0 / (2.0 * epsilon);
    let mut k = Array2::<f64>::zeros((n, n));
    // Upper triangle, parallel over rows.
    k.as_slice_mut()
        .expect("freshly allocated matrix is contiguous")
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(i, row)| {
            row[i] = 1.0;
            for j in (i + 1)..n {
                row[j] = (-sq_dist(rows[i], rows[j]) * inv).exp();
            }
        });
    // Mirror so K is bitwise symmetric.
    for i in 1..n {
        for j in 0..i {
            k[[i, j]] = k[[j, i]];
        }
    }
    Ok(k)
}

/// A kernel matrix after the configured normalizations.
///
/// When `markov` was requested, `matrix` is the row-stochastic transition
/// matrix A and `row_sums` holds the pre-normalization row sums of the
/// (density-normalized) kernel; these are needed to conjugate A into a
/// symmetric matrix for the eigensolve and by the out-of-sample extension.
#[derive(Debug, Clone)]
pub struct NormalizedKernel {
    pub matrix: Array2<f64>,
    pub row_sums: Option<Array1<f64>>,
}

/// Apply density normalization (alpha) and optionally the row-stochastic
/// normalization to a kernel matrix.
pub fn normalize(kernel: &Array2<f64>, cfg: &KernelConfig) -> Result<NormalizedKernel> {
    cfg.validate()?;
    let n = kernel.nrows();
    if n != kernel.ncols() {
        return Err(Error::InvalidData("kernel matrix must be square".into()));
    }

    let mut tilde = kernel.clone();
    if cfg.alpha == 1 {
        let p = kernel.sum_axis(Axis(1));
        if p.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
            return Err(Error::NumericalDegeneracy(
                "non-positive kernel row sum in density normalization".into(),
            ));
        }
        for i in 0..n {
            for j in 0..n {
                tilde[[i, j]] /= p[i] * p[j];
            }
        }
    }

    if cfg.markov {
        let d = tilde.sum_axis(Axis(1));
        if d.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
            return Err(Error::NumericalDegeneracy(
                "non-positive row sum in Markov normalization".into(),
            ));
        }
        for (mut row, &di) in tilde.axis_iter_mut(Axis(0)).zip(d.iter()) {
            row.mapv_inplace(|v| v / di);
        }
        Ok(NormalizedKernel {
            matrix: tilde,
            row_sums: Some(d),
        })
    } else {
        Ok(NormalizedKernel {
            matrix: tilde,
            row_sums: None,
        })
    }
}

/// Eigenpairs sorted by descending eigenvalue.
///
/// Columns of `vectors` have unit Euclidean norm and the sign convention
/// that the entry of largest absolute value is positive, so decompositions
/// are reproducible across runs and platforms.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub values: Array1<f64>,
    pub vectors: Array2<f64>,
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Normalize a column to unit norm with the largest-|entry|-positive sign.
fn fix_column(col: &mut [f64]) {
    let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        let inv = 1.0 / norm;
        for v in col.iter_mut() {
            *v *= inv;
        }
    }
    let mut best = 0usize;
    let mut best_abs = 0.0;
    for (i, &v) in col.iter().enumerate() {
        if v.abs() > best_abs {
            best_abs = v.abs();
            best = i;
        }
    }
    if col[best] < 0.0 {
        for v in col.iter_mut() {
            *v = -*v;
        }
    }
}

/// Top-p eigenpairs of a normalized kernel.
///
/// For a row-stochastic matrix A = D^-1 K the decomposition goes through the
/// symmetric conjugate S = D^1/2 A D^-1/2 (similar to A, so same spectrum);
/// eigenvectors are mapped back by D^-1/2. Without the Markov normalization
/// the matrix is already symmetric and is decomposed directly.
pub fn eigendecompose(kernel: &NormalizedKernel, p: usize) -> Result<EigenSystem> {
    let n = kernel.matrix.nrows();
    if p == 0 || p > n {
        return Err(Error::InvalidConfig(format!(
            "requested {p} eigenpairs from a {n}x{n} matrix"
        )));
    }

    let sym = match &kernel.row_sums {
        Some(d) => {
            let sqrt_d: Vec<f64> = d.iter().map(|&v| v.sqrt()).collect();
            let mut s = Array2::<f64>::zeros((n, n));
            for i in 0..n {
                for j in 0..=i {
                    // S_ij = A_ij * sqrt(d_i) / sqrt(d_j); built from the
                    // lower triangle only so S is bitwise symmetric.
                    let v = kernel.matrix[[i, j]] * sqrt_d[i] / sqrt_d[j];
                    s[[i, j]] = v;
                    s[[j, i]] = v;
                }
            }
            s
        }
        None => kernel.matrix.clone(),
    };

    let (vals, vecs) = sym
        .eigh(UPLO::Lower)
        .map_err(|e| Error::NumericalDegeneracy(format!("eigensolver failed: {e}")))?;

    // LAPACK returns ascending order; take the top p, descending.
    let mut values = Array1::<f64>::zeros(p);
    let mut vectors = Array2::<f64>::zeros((n, p));
    let inv_sqrt_d: Option<Vec<f64>> = kernel
        .row_sums
        .as_ref()
        .map(|d| d.iter().map(|&v| 1.0 / v.sqrt()).collect());
    for j in 0..p {
        let src = n - 1 - j;
        values[j] = vals[src];
        let mut col: Vec<f64> = vecs.column(src).to_vec();
        if let Some(inv) = &inv_sqrt_d {
            for (v, &w) in col.iter_mut().zip(inv.iter()) {
                *v *= w;
            }
        }
        fix_column(&mut col);
        vectors.column_mut(j).assign(&Array1::from(col));
    }

    Ok(EigenSystem { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn three_points() -> Array2<f64> {
        array![[0.3, -1.2], [0.7, 0.1], [-0.4, 0.9]]
    }

    #[test]
    fn kernel_zero_distance_is_one() {
        let x = array![[1.0, 2.0], [1.0, 2.0], [0.0, 0.0]];
        let k = kernel_matrix(&x.view(), 0.5).unwrap();
        assert_eq!(k[[0, 1]], 1.0);
        assert_eq!(k[[0, 0]], 1.0);
    }

    #[test]
    fn kernel_at_sq_dist_two_epsilon_is_inv_e() {
        // ||x0 - x1||^2 = 2 epsilon forces K = e^-1.
        let eps = 0.37f64;
        let d = (2.0 * eps).sqrt();
        let x = array![[0.0], [d]];
        let k = kernel_matrix(&x.view(), eps).unwrap();
        assert_abs_diff_eq!(k[[0, 1]], (-1.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(k[[0, 1]], 0.367_879_441_171_442_3, epsilon = 1e-12);
    }

    #[test]
    fn kernel_matches_entrywise_oracle() {
        let x = three_points();
        let eps = 0.8;
        let k = kernel_matrix(&x.view(), eps).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let d2 = sq_dist(
                    x.row(i).to_slice().unwrap(),
                    x.row(j).to_slice().unwrap(),
                );
                let expect = (-d2 / (2.0 * eps)).exp();
                assert_abs_diff_eq!(k[[i, j]], expect, epsilon = 1e-15);
                assert!(k[[i, j]] > 0.0 && k[[i, j]] <= 1.0);
            }
        }
    }

    #[test]
    fn kernel_rejects_bad_input() {
        let x = array![[0.0, f64::NAN], [1.0, 2.0]];
        assert!(matches!(
            kernel_matrix(&x.view(), 1.0),
            Err(Error::InvalidData(_))
        ));
        let y = array![[0.0], [1.0]];
        assert!(matches!(
            kernel_matrix(&y.view(), 0.0),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            kernel_matrix(&y.view(), -1.0),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn markov_rows_sum_to_one() {
        let x = three_points();
        let k = kernel_matrix(&x.view(), 0.5).unwrap();
        for alpha in [0u8, 1u8] {
            let nk = normalize(&k, &KernelConfig::new(0.5, alpha, true)).unwrap();
            for row in nk.matrix.axis_iter(Axis(0)) {
                assert_abs_diff_eq!(row.sum(), 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn identical_pair_gives_half_half() {
        let x = array![[2.0, 2.0], [2.0, 2.0]];
        let k = kernel_matrix(&x.view(), 1.0).unwrap();
        let nk = normalize(&k, &KernelConfig::new(1.0, 0, true)).unwrap();
        assert_eq!(nk.matrix, array![[0.5, 0.5], [0.5, 0.5]]);
    }

    #[test]
    fn alpha_one_matches_direct_formula() {
        let x = array![
            [0.11, 0.93],
            [-0.42, 0.17],
            [0.87, -0.55],
            [0.01, 0.34],
            [-0.66, -0.08]
        ];
        let eps = 0.6;
        let k = kernel_matrix(&x.view(), eps).unwrap();
        let nk = normalize(&k, &KernelConfig::new(eps, 1, true)).unwrap();

        // Direct evaluation of the density and row normalizations.
        let n = 5;
        let p: Vec<f64> = (0..n).map(|i| k.row(i).sum()).collect();
        let mut tilde = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                tilde[[i, j]] = k[[i, j]] / (p[i] * p[j]);
            }
        }
        for i in 0..n {
            let d: f64 = tilde.row(i).sum();
            for j in 0..n {
                assert_abs_diff_eq!(nk.matrix[[i, j]], tilde[[i, j]] / d, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn leading_eigenpair_is_trivial() {
        let x = three_points();
        let k = kernel_matrix(&x.view(), 0.5).unwrap();
        let nk = normalize(&k, &KernelConfig::new(0.5, 0, true)).unwrap();
        let eig = eigendecompose(&nk, 3).unwrap();
        assert_abs_diff_eq!(eig.values[0], 1.0, epsilon = 1e-10);
        let phi0 = eig.vectors.column(0);
        let mean = phi0.sum() / 3.0;
        for &v in phi0.iter() {
            assert_abs_diff_eq!(v, mean, epsilon = 1e-8 * mean.abs());
        }
    }

    #[test]
    fn eigenpairs_match_dense_oracle_on_square() {
        // Four vertices of a square: a symmetric configuration whose
        // row-stochastic matrix we can decompose by brute force.
        let x = array![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let k = kernel_matrix(&x.view(), 0.7).unwrap();
        let nk = normalize(&k, &KernelConfig::new(0.7, 0, true)).unwrap();
        let eig = eigendecompose(&nk, 4).unwrap();

        // Oracle: eigenvalues of A via the characteristic roots of the
        // symmetric conjugate computed by the generic dense path on a copy.
        let plain = NormalizedKernel {
            matrix: {
                let d = &nk.row_sums.clone().unwrap();
                let n = 4;
                let mut s = Array2::<f64>::zeros((n, n));
                for i in 0..n {
                    for j in 0..n {
                        s[[i, j]] = nk.matrix[[i, j]] * d[i].sqrt() / d[j].sqrt();
                    }
                }
                s
            },
            row_sums: None,
        };
        let oracle = eigendecompose(&plain, 4).unwrap();
        for j in 0..4 {
            assert_abs_diff_eq!(eig.values[j], oracle.values[j], epsilon = 1e-10);
        }

        // Residual check ||A phi - lambda phi||_inf directly against A.
        for j in 0..4 {
            let phi = eig.vectors.column(j);
            let aphi = nk.matrix.dot(&phi);
            for i in 0..4 {
                assert!((aphi[i] - eig.values[j] * phi[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn eigendecompose_rejects_oversized_p() {
        let x = three_points();
        let k = kernel_matrix(&x.view(), 0.5).unwrap();
        let nk = normalize(&k, &KernelConfig::new(0.5, 0, true)).unwrap();
        assert!(matches!(
            eigendecompose(&nk, 4),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn eigenvector_columns_unit_norm_and_sign_fixed() {
        let x = array![
            [0.0, 0.0],
            [0.9, 0.1],
            [0.2, 1.1],
            [1.0, 1.0],
            [0.5, 0.4],
            [0.1, 0.6]
        ];
        let k = kernel_matrix(&x.view(), 0.4).unwrap();
        let nk = normalize(&k, &KernelConfig::new(0.4, 0, true)).unwrap();
        let eig = eigendecompose(&nk, 5).unwrap();
        for j in 0..eig.len() {
            let col = eig.vectors.column(j);
            let norm: f64 = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-12);
            let max = col.iter().cloned().fold(f64::MIN, f64::max);
            let min = col.iter().cloned().fold(f64::MAX, f64::min);
            assert!(max >= min.abs() - 1e-12, "sign convention violated");
        }
        // Sorted descending.
        for j in 1..eig.len() {
            assert!(eig.values[j - 1] >= eig.values[j]);
        }
    }
}
