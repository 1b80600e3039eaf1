//! Benchmark-harness support: an emulation of the prior-work per-node
//! local-retraining scheme, used only for timing comparisons against the
//! global lifting model. Not part of the public API and not covered by
//! semver; the CLI `validate` command and the acceptance suite are the only
//! intended consumers.

use ndarray::{Array1, Array2, ArrayView1};
use rayon::prelude::*;

use crate::dmaps::DMapModel;
use crate::error::{Error, Result};
use crate::kernel::{eigendecompose, kernel_matrix, sq_dist, NormalizedKernel};
use crate::reduced::{AmbientSystem, GridTable};
use crate::stats::median;

/// Lift a single latent point by retraining a small kernel-harmonics
/// regression on its `k` nearest latent training neighbors, the way the
/// compared per-node scheme does: neighbor search, kernel eigenbasis, and
/// target projection are all redone from scratch for every query.
pub fn local_retrained_lift(
    latent_train: &Array2<f64>,
    ambient_train: &Array2<f64>,
    phi_node: &ArrayView1<f64>,
    k_neighbors: usize,
) -> Result<Array1<f64>> {
    let n = latent_train.nrows();
    let k = k_neighbors.min(n);
    if k < 3 {
        return Err(Error::InvalidConfig("need at least 3 neighbors".into()));
    }

    // Nearest neighbors by squared latent distance.
    let q: Vec<f64> = phi_node.to_vec();
    let mut dists: Vec<(f64, usize)> = (0..n)
        .map(|i| {
            let row = latent_train.row(i);
            let d2: f64 = row
                .iter()
                .zip(q.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            (d2, i)
        })
        .collect();
    dists.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0));
    let neighbors: Vec<usize> = dists[..k].iter().map(|&(_, i)| i).collect();

    let mut phi_local = Array2::<f64>::zeros((k, latent_train.ncols()));
    let mut f_local = Array2::<f64>::zeros((k, ambient_train.ncols()));
    for (dst, &src) in neighbors.iter().enumerate() {
        phi_local.row_mut(dst).assign(&latent_train.row(src));
        f_local.row_mut(dst).assign(&ambient_train.row(src));
    }

    // Per-node bandwidth from the neighborhood itself.
    let mut pair_d2 = Vec::with_capacity(k * (k - 1) / 2);
    for a in 0..k {
        for b in (a + 1)..k {
            pair_d2.push(sq_dist(
                phi_local.row(a).to_slice().unwrap(),
                phi_local.row(b).to_slice().unwrap(),
            ));
        }
    }
    let eps_local = median(&mut pair_d2).max(f64::MIN_POSITIVE);

    let kernel = kernel_matrix(&phi_local.view(), eps_local)?;
    let eig = eigendecompose(
        &NormalizedKernel {
            matrix: kernel,
            row_sums: None,
        },
        k,
    )?;
    let usable = eig
        .values
        .iter()
        .take_while(|&&s| s > eig.values[0] * 1e-12)
        .count()
        .max(1);

    // Project the targets and extend at the query point.
    let inv = 1.0 / (2.0 * eps_local);
    let weights = Array1::from_iter(
        phi_local
            .rows()
            .into_iter()
            .map(|row| (-sq_dist(&q, row.to_slice().unwrap()) * inv).exp()),
    );
    let mut out = Array1::<f64>::zeros(ambient_train.ncols());
    for j in 0..usable {
        let psi_j = eig.vectors.column(j);
        let ext_j: f64 = weights.iter().zip(psi_j.iter()).map(|(&w, &p)| w * p).sum::<f64>()
            / eig.values[j];
        let coeff = f_local.t().dot(&psi_j);
        out = out + coeff * ext_j;
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalDegeneracy("local lift is non-finite".into()));
    }
    Ok(out)
}

/// Grid tabulation with the per-node local-retraining lift, mirroring
/// [`crate::reduced::build_grid`] node for node.
pub fn build_grid_local_baseline(
    dmap: &DMapModel,
    system: &dyn AmbientSystem,
    bounds: &[(f64, f64)],
    nodes_per_dim: usize,
    k_neighbors: usize,
) -> Result<GridTable> {
    if dmap.latent_dim() != 2 || bounds.len() != 2 || nodes_per_dim < 2 {
        return Err(Error::InvalidConfig(
            "local baseline needs a 2-D latent space and a valid grid".into(),
        ));
    }
    let latent = dmap.latent_coordinates();
    let n = nodes_per_dim;
    let total = n * n;
    let step = [
        (bounds[0].1 - bounds[0].0) / (n - 1) as f64,
        (bounds[1].1 - bounds[1].0) / (n - 1) as f64,
    ];
    let results: Vec<Option<[f64; 2]>> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let i = idx / n;
            let j = idx % n;
            let phi = ndarray::array![
                bounds[0].0 + i as f64 * step[0],
                bounds[1].0 + j as f64 * step[1]
            ];
            let x_hat = match local_retrained_lift(
                &latent,
                &dmap.training_data,
                &phi.view(),
                k_neighbors,
            ) {
                Ok(x) => x,
                Err(_) => return None,
            };
            match crate::reduced::chain_rule_rhs(dmap, system, &x_hat.view()) {
                Ok(d) if d.iter().all(|v| v.is_finite()) => Some([d[0], d[1]]),
                _ => None,
            }
        })
        .collect();

    let masked = results.iter().filter(|r| r.is_none()).count();
    if masked * 2 > total {
        return Err(Error::GridCoverage { masked, total });
    }
    Ok(GridTable {
        bounds: [bounds[0], bounds[1]],
        shape: (n, n),
        values: results
            .iter()
            .map(|r| r.unwrap_or([f64::NAN, f64::NAN]))
            .collect(),
        mask: results.iter().map(|r| r.is_some()).collect(),
    })
}
