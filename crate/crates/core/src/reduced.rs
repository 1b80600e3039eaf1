//! Reduced latent-space vector fields and their construction: the
//! back-and-forth closure over the full right-hand side, the tabulated grid
//! with bilinear interpolation, and the globally regressed field.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dmaps::DMapModel;
use crate::error::{Error, Result};
use crate::latent_harmonics::{fit_lh, lift, LHModel};
use crate::nystrom::jacobian;

/// A dynamical system with known right-hand side in the ambient space.
pub trait AmbientSystem: Sync {
    /// Ambient dimension m.
    fn dim(&self) -> usize;

    /// Identifier used in reports and file names.
    fn name(&self) -> &str;

    /// Evaluate dx/dt = f(x).
    fn rhs(&self, x: &ArrayView1<f64>) -> Array1<f64>;

    /// Draw a random initial condition with the given amplitude scale.
    fn random_initial_condition(
        &self,
        amplitude: f64,
        rng: &mut dyn rand::RngCore,
    ) -> Array1<f64>;
}

/// Reduced derivative at an ambient point: the restriction Jacobian applied
/// to the ambient right-hand side (chain rule).
pub fn chain_rule_rhs(
    dmap: &DMapModel,
    system: &dyn AmbientSystem,
    x: &ArrayView1<f64>,
) -> Result<Array1<f64>> {
    let jac = jacobian(dmap, x)?;
    Ok(jac.matrix.dot(&system.rhs(x)))
}

/// Back-and-forth reduced derivative: lift the latent state, evaluate the
/// full right-hand side there, map it back through the chain rule.
pub fn bf_rhs(
    dmap: &DMapModel,
    lift_model: &LHModel,
    system: &dyn AmbientSystem,
    phi: &ArrayView1<f64>,
) -> Result<Array1<f64>> {
    let x_hat = lift(dmap, lift_model, phi)?;
    if x_hat.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalDegeneracy(
            "lifted state is non-finite".into(),
        ));
    }
    chain_rule_rhs(dmap, system, &x_hat.view())
}

/// A tabulated two-dimensional reduced vector field on a Cartesian grid.
///
/// Node (i, j) sits at `bounds[d].0 + index * spacing(d)`; values are stored
/// node-major (`i * shape.1 + j`). Nodes whose lift failed are masked.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridTable {
    pub bounds: [(f64, f64); 2],
    pub shape: (usize, usize),
    pub values: Vec<[f64; 2]>,
    pub mask: Vec<bool>,
}

impl GridTable {
    pub fn spacing(&self, dim: usize) -> f64 {
        let (lo, hi) = self.bounds[dim];
        let n = if dim == 0 { self.shape.0 } else { self.shape.1 };
        (hi - lo) / (n - 1) as f64
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        i * self.shape.1 + j
    }

    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|&&m| !m).count()
    }

    /// Bilinear interpolation of the tabulated field.
    ///
    /// Fails with [`Error::LeftManifold`] outside the bounds or when any
    /// corner of the enclosing cell is masked.
    pub fn rhs(&self, phi: &ArrayView1<f64>) -> Result<Array1<f64>> {
        if phi.len() != 2 {
            return Err(Error::InvalidData(format!(
                "grid table is 2-D, query has dimension {}",
                phi.len()
            )));
        }
        let (nx, ny) = self.shape;
        let mut cell = [0usize; 2];
        let mut frac = [0.0f64; 2];
        for d in 0..2 {
            let (lo, hi) = self.bounds[d];
            let v = phi[d];
            if !v.is_finite() || v < lo || v > hi {
                return Err(Error::LeftManifold);
            }
            let n = if d == 0 { nx } else { ny };
            let step = self.spacing(d);
            let mut c = ((v - lo) / step).floor() as usize;
            if c >= n - 1 {
                c = n - 2;
            }
            cell[d] = c;
            frac[d] = ((v - lo) / step - c as f64).clamp(0.0, 1.0);
        }

        let corners = [
            self.node_index(cell[0], cell[1]),
            self.node_index(cell[0] + 1, cell[1]),
            self.node_index(cell[0], cell[1] + 1),
            self.node_index(cell[0] + 1, cell[1] + 1),
        ];
        if corners.iter().any(|&c| !self.mask[c]) {
            return Err(Error::LeftManifold);
        }

        let (tx, ty) = (frac[0], frac[1]);
        let mut out = Array1::<f64>::zeros(2);
        for c in 0..2 {
            let v00 = self.values[corners[0]][c];
            let v10 = self.values[corners[1]][c];
            let v01 = self.values[corners[2]][c];
            let v11 = self.values[corners[3]][c];
            let lo = v00 + tx * (v10 - v00);
            let hi = v01 + tx * (v11 - v01);
            out[c] = lo + ty * (hi - lo);
        }
        Ok(out)
    }
}

/// Axis-aligned bounding box of the latent training points, expanded by
/// `pad` (fraction of each side) per side.
pub fn default_grid_bounds(latent: &ArrayView2<f64>, pad: f64) -> Vec<(f64, f64)> {
    let k = latent.ncols();
    let mut bounds = Vec::with_capacity(k);
    for d in 0..k {
        let col = latent.column(d);
        let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let margin = pad * (hi - lo);
        bounds.push((lo - margin, hi + margin));
    }
    bounds
}

/// Tabulate the reduced vector field on an `n x n` grid by lifting each node
/// with the global lifting model, evaluating the full right-hand side, and
/// applying the chain rule. Nodes whose lift fails are masked.
pub fn build_grid(
    dmap: &DMapModel,
    lift_model: &LHModel,
    system: &dyn AmbientSystem,
    bounds: &[(f64, f64)],
    nodes_per_dim: usize,
) -> Result<GridTable> {
    if dmap.latent_dim() != 2 {
        return Err(Error::InvalidConfig(format!(
            "grid tabulation supports 2 latent dimensions, model selects {}",
            dmap.latent_dim()
        )));
    }
    if bounds.len() != 2 {
        return Err(Error::InvalidConfig("need bounds for both latent axes".into()));
    }
    if nodes_per_dim < 2 {
        return Err(Error::InvalidConfig(
            "grid needs at least 2 nodes per dimension".into(),
        ));
    }
    for &(lo, hi) in bounds {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::InvalidConfig(format!(
                "invalid grid bounds ({lo}, {hi})"
            )));
        }
    }

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
            match bf_rhs(dmap, lift_model, system, &phi.view()) {
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

/// Reduced derivatives at every training point: the chain rule evaluated at
/// the retained ambient samples (no lifting involved).
pub fn training_derivatives(dmap: &DMapModel, system: &dyn AmbientSystem) -> Result<Array2<f64>> {
    let n = dmap.n_samples();
    let k = dmap.latent_dim();
    let rows: Vec<Result<Array1<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| chain_rule_rhs(dmap, system, &dmap.training_data.row(i)))
        .collect();
    let mut out = Array2::<f64>::zeros((n, k));
    for (i, row) in rows.into_iter().enumerate() {
        out.row_mut(i).assign(&row?);
    }
    Ok(out)
}

/// Fit the reduced vector field as a latent-harmonics regression of the
/// training-point derivatives on the latent coordinates.
pub fn fit_talhi(
    dmap: &DMapModel,
    system: &dyn AmbientSystem,
    epsilon2: f64,
    d: usize,
) -> Result<LHModel> {
    let targets = training_derivatives(dmap, system)?;
    fit_lh(dmap.latent_coordinates(), &targets.view(), epsilon2, d)
}

/// A reduced vector field ready for integration.
pub enum ReducedModel<'a> {
    BackAndForth {
        dmap: &'a DMapModel,
        lift: &'a LHModel,
        system: &'a dyn AmbientSystem,
    },
    GridTabulation {
        table: GridTable,
    },
    Talhi {
        derivatives: &'a LHModel,
    },
}

impl ReducedModel<'_> {
    pub fn variant_name(&self) -> &'static str {
        match self {
            ReducedModel::BackAndForth { .. } => "bf",
            ReducedModel::GridTabulation { .. } => "gt",
            ReducedModel::Talhi { .. } => "talhi",
        }
    }

    /// Evaluate the reduced derivative at a latent point.
    pub fn rhs(&self, phi: &ArrayView1<f64>) -> Result<Array1<f64>> {
        match self {
            ReducedModel::BackAndForth { dmap, lift, system } => {
                bf_rhs(dmap, lift, *system, phi)
            }
            ReducedModel::GridTabulation { table } => table.rhs(phi),
            ReducedModel::Talhi { derivatives } => derivatives.predict(phi),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dmaps::{fit_dmaps, select_nonharmonic};
    use crate::kernel::KernelConfig;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    struct ZeroSystem;
    impl AmbientSystem for ZeroSystem {
        fn dim(&self) -> usize {
            2
        }
        fn name(&self) -> &str {
            "zero"
        }
        fn rhs(&self, x: &ArrayView1<f64>) -> Array1<f64> {
            Array1::zeros(x.len())
        }
        fn random_initial_condition(
            &self,
            _amplitude: f64,
            _rng: &mut dyn rand::RngCore,
        ) -> Array1<f64> {
            Array1::zeros(2)
        }
    }

    fn segment_model() -> DMapModel {
        let n = 40;
        let mut x = Array2::<f64>::zeros((n, 2));
        for i in 0..n {
            let s = i as f64 / (n - 1) as f64;
            x[[i, 0]] = 3.0 * s;
            x[[i, 1]] = 0.2 * s;
        }
        let model = fit_dmaps(x, KernelConfig::new(0.3, 0, true), 4).unwrap();
        select_nonharmonic(model, 0.5).unwrap()
    }

    #[test]
    fn zero_field_gives_zero_reduced_derivative() {
        let dmap = segment_model();
        let sys = ZeroSystem;
        let x = dmap.training_data.row(5).to_owned();
        let d = chain_rule_rhs(&dmap, &sys, &x.view()).unwrap();
        for v in d.iter() {
            assert_eq!(*v, 0.0);
        }
    }

    #[test]
    fn chain_rule_matches_time_differences_on_segment() {
        // Linear drift along the sampled segment: d phi/dt from the chain
        // rule must match finite differences of the restriction along a
        // short trajectory.
        struct Drift;
        impl AmbientSystem for Drift {
            fn dim(&self) -> usize {
                2
            }
            fn name(&self) -> &str {
                "drift"
            }
            fn rhs(&self, _x: &ArrayView1<f64>) -> Array1<f64> {
                array![3.0, 0.2] // along the segment direction
            }
            fn random_initial_condition(
                &self,
                _amplitude: f64,
                _rng: &mut dyn rand::RngCore,
            ) -> Array1<f64> {
                Array1::zeros(2)
            }
        }
        let dmap = segment_model();
        let sys = Drift;
        let x = dmap.training_data.row(20).to_owned();
        let d = chain_rule_rhs(&dmap, &sys, &x.view()).unwrap();

        let dt = 1e-5;
        let xp = &x + &(sys.rhs(&x.view()) * dt);
        let xm = &x - &(sys.rhs(&x.view()) * dt);
        let pp = crate::nystrom::restrict(&dmap, &xp.view()).unwrap().phi;
        let pm = crate::nystrom::restrict(&dmap, &xm.view()).unwrap().phi;
        for c in 0..d.len() {
            let fd = (pp[c] - pm[c]) / (2.0 * dt);
            assert_abs_diff_eq!(d[c], fd, epsilon = 1e-4 * fd.abs().max(1.0));
        }
    }

    fn affine_table() -> GridTable {
        // v(x, y) = (2 + 3x - y, -1 + 0.5x + 2y), tabulated exactly.
        let n = 5;
        let bounds = [(-1.0, 1.0), (0.0, 2.0)];
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let x = bounds[0].0 + i as f64 * 0.5;
                let y = bounds[1].0 + j as f64 * 0.5;
                values.push([2.0 + 3.0 * x - y, -1.0 + 0.5 * x + 2.0 * y]);
            }
        }
        GridTable {
            bounds,
            shape: (n, n),
            values,
            mask: vec![true; n * n],
        }
    }

    #[test]
    fn grid_reproduces_node_values_exactly() {
        let table = affine_table();
        let q = array![-0.5, 1.5]; // node (1, 3)
        let v = table.rhs(&q.view()).unwrap();
        assert_eq!(v[0], 2.0 + 3.0 * (-0.5) - 1.5);
        assert_eq!(v[1], -1.0 + 0.5 * (-0.5) + 2.0 * 1.5);
    }

    #[test]
    fn cell_center_is_mean_of_corners() {
        let table = affine_table();
        let q = array![0.25, 0.75]; // center of cell (2..3, 1..2)
        let v = table.rhs(&q.view()).unwrap();
        let mut mean = [0.0, 0.0];
        for (i, j) in [(2, 1), (3, 1), (2, 2), (3, 2)] {
            let node = table.values[table.node_index(i, j)];
            mean[0] += node[0] / 4.0;
            mean[1] += node[1] / 4.0;
        }
        assert_abs_diff_eq!(v[0], mean[0], epsilon = 1e-14);
        assert_abs_diff_eq!(v[1], mean[1], epsilon = 1e-14);
    }

    #[test]
    fn off_grid_query_leaves_manifold() {
        let table = affine_table();
        assert!(matches!(
            table.rhs(&array![2.0, 1.0].view()),
            Err(Error::LeftManifold)
        ));
        let mut masked = affine_table();
        let node = masked.node_index(1, 1);
        masked.mask[node] = false;
        assert!(matches!(
            masked.rhs(&array![-0.6, 0.6].view()),
            Err(Error::LeftManifold)
        ));
    }

    #[test]
    fn constant_two_by_two_grid() {
        let table = GridTable {
            bounds: [(0.0, 1.0), (0.0, 1.0)],
            shape: (2, 2),
            values: vec![[4.0, -2.0]; 4],
            mask: vec![true; 4],
        };
        for q in [array![0.0, 0.0], array![0.7, 0.3], array![1.0, 1.0]] {
            let v = table.rhs(&q.view()).unwrap();
            assert_eq!(v[0], 4.0);
            assert_eq!(v[1], -2.0);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn bilinear_exact_for_affine_fields(
            x in -1.0f64..1.0,
            y in 0.0f64..2.0,
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
            c in -3.0f64..3.0,
        ) {
            let n = 4;
            let bounds = [(-1.0, 1.0), (0.0, 2.0)];
            let sx = (bounds[0].1 - bounds[0].0) / (n - 1) as f64;
            let sy = (bounds[1].1 - bounds[1].0) / (n - 1) as f64;
            let f = |px: f64, py: f64| [a + b * px + c * py, c + a * px - b * py];
            let mut values = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    values.push(f(bounds[0].0 + i as f64 * sx, bounds[1].0 + j as f64 * sy));
                }
            }
            let table = GridTable { bounds, shape: (n, n), values, mask: vec![true; n * n] };
            let v = table.rhs(&array![x, y].view()).unwrap();
            let expect = f(x, y);
            prop_assert!((v[0] - expect[0]).abs() < 1e-12);
            prop_assert!((v[1] - expect[1]).abs() < 1e-12);
        }
    }
}
