//! Out-of-sample restriction (ambient -> latent) and its closed-form
//! Jacobian.
//!
//! Restriction evaluates the training kernel against the new point with the
//! same bandwidth and normalizations, then divides each eigenvector average
//! by its eigenvalue. The Jacobian differentiates that expression for the
//! Gaussian kernel; it is only defined for alpha = 0 models.

use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::dmaps::DMapModel;
use crate::error::{Error, Result};
use crate::kernel::sq_dist;

/// Kernel-weight sum below which a query counts as off-manifold.
const UNDERFLOW_GUARD: f64 = 1e-300;

/// Latent coordinates of a single point, ordered like the model's selection.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentPoint {
    pub phi: Array1<f64>,
}

/// Jacobian of the restriction map at one point: entry `[b, l]` is the
/// derivative of selected coordinate `b` with respect to ambient coordinate
/// `l`.
#[derive(Debug, Clone)]
pub struct NystromJacobian {
    pub matrix: Array2<f64>,
}

fn check_query(model: &DMapModel, x_new: &ArrayView1<f64>) -> Result<()> {
    if model.selected.is_empty() {
        return Err(Error::InvalidConfig(
            "model has no selected coordinates; run selection first".into(),
        ));
    }
    if x_new.len() != model.ambient_dim() {
        return Err(Error::InvalidData(format!(
            "query has dimension {}, model expects {}",
            x_new.len(),
            model.ambient_dim()
        )));
    }
    if x_new.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("query contains non-finite entries".into()));
    }
    Ok(())
}

/// Gaussian kernel row between the query and every training point.
fn kernel_row(model: &DMapModel, x_new: &ArrayView1<f64>) -> Vec<f64> {
    let inv = 1.0 / (2.0 * model.kernel.epsilon);
    let x = x_new.as_standard_layout();
    let xs = x.as_slice().expect("standard layout");
    model
        .training_data
        .axis_iter(Axis(0))
        .map(|row| (-sq_dist(xs, row.to_slice().expect("row-major training data")) * inv).exp())
        .collect()
}

/// Restrict one ambient point to the selected latent coordinates.
pub fn restrict(model: &DMapModel, x_new: &ArrayView1<f64>) -> Result<LatentPoint> {
    check_query(model, x_new)?;
    let k = kernel_row(model, x_new);
    let s: f64 = k.iter().sum();
    if s < UNDERFLOW_GUARD {
        return Err(Error::OutOfSampleTooFar);
    }

    // Density normalization for alpha = 1 needs the training-kernel row
    // sums; they are recomputed here because alpha = 1 models are rare and
    // keeping the model identical to its persisted form is worth the cost.
    let weights: Vec<f64> = if model.kernel.alpha == 1 {
        let p_train = training_row_sums(model);
        let tilde: Vec<f64> = k
            .iter()
            .zip(p_train.iter())
            .map(|(&ki, &pi)| ki / (s * pi))
            .collect();
        let ts: f64 = tilde.iter().sum();
        tilde.iter().map(|&v| v / ts).collect()
    } else {
        k.iter().map(|&v| v / s).collect()
    };

    let mut phi = Array1::<f64>::zeros(model.selected.len());
    for (c, &j) in model.selected.iter().enumerate() {
        let col = model.eigenvectors.column(j - 1);
        let acc: f64 = weights.iter().zip(col.iter()).map(|(&w, &v)| w * v).sum();
        phi[c] = acc / model.eigenvalues[j - 1];
    }
    Ok(LatentPoint { phi })
}

fn training_row_sums(model: &DMapModel) -> Vec<f64> {
    let inv = 1.0 / (2.0 * model.kernel.epsilon);
    let n = model.n_samples();
    let rows: Vec<&[f64]> = model
        .training_data
        .axis_iter(Axis(0))
        .map(|r| r.to_slice().expect("row-major training data"))
        .collect();
    (0..n)
        .map(|i| {
            rows.iter()
                .map(|r| (-sq_dist(rows[i], r) * inv).exp())
                .sum()
        })
        .collect()
}

/// Jacobian of [`restrict`] with respect to the query point.
///
/// Only defined for alpha = 0. The Gaussian kernel derivative carries the
/// factor 1/epsilon; the result is validated against central finite
/// differences of the restriction in the test suite.
pub fn jacobian(model: &DMapModel, x_new: &ArrayView1<f64>) -> Result<NystromJacobian> {
    check_query(model, x_new)?;
    if model.kernel.alpha != 0 {
        return Err(Error::UnsupportedNormalization);
    }
    let m = model.ambient_dim();
    let k_sel = model.selected.len();
    let inv_eps = 1.0 / model.kernel.epsilon;

    let k = kernel_row(model, x_new);
    let s: f64 = k.iter().sum();
    if s < UNDERFLOW_GUARD {
        return Err(Error::OutOfSampleTooFar);
    }

    // phi_b(x) = (1/lambda_b) * u_b / s with u_b = sum_i k_i phi_ib.
    // d phi_b / d x_l = (1/lambda_b) * (t_bl * s - u_b * g_l) / s^2,
    // where g_l = sum_i dk_i/dx_l and t_bl = sum_i dk_i/dx_l phi_ib,
    // dk_i/dx_l = k_i (x_il - x_l) / epsilon.
    let x = x_new.as_standard_layout();
    let xs = x.as_slice().expect("standard layout");
    let mut g = vec![0.0; m];
    let mut u = vec![0.0; k_sel];
    let mut t = vec![0.0; k_sel * m];
    let mut dk = vec![0.0; m];
    for (i, row) in model.training_data.axis_iter(Axis(0)).enumerate() {
        let ki = k[i];
        let ri = row.to_slice().expect("row-major training data");
        for l in 0..m {
            dk[l] = ki * (ri[l] - xs[l]) * inv_eps;
            g[l] += dk[l];
        }
        for (c, &j) in model.selected.iter().enumerate() {
            let phi_i = model.eigenvectors[[i, j - 1]];
            u[c] += ki * phi_i;
            for l in 0..m {
                t[c * m + l] += dk[l] * phi_i;
            }
        }
    }

    let inv_s2 = 1.0 / (s * s);
    let mut out = Array2::<f64>::zeros((k_sel, m));
    for (c, &j) in model.selected.iter().enumerate() {
        let inv_lambda = 1.0 / model.eigenvalues[j - 1];
        for l in 0..m {
            out[[c, l]] = inv_lambda * (t[c * m + l] * s - u[c] * g[l]) * inv_s2;
        }
    }
    Ok(NystromJacobian { matrix: out })
}
