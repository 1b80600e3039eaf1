//! Uniform samples on an axis-aligned rectangle. The classic testbed for
//! telling harmonic from non-harmonic eigenvectors: with side ratio r the
//! first few eigenvectors are higher harmonics of the long side before the
//! short side ever appears.

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Draw `n` i.i.d. uniform points on [0, ratio] x [0, 1].
pub fn rectangle_sample(n: usize, ratio: f64, seed: u64) -> Result<Array2<f64>> {
    if n < 100 {
        return Err(Error::InvalidData(format!(
            "rectangle sample needs n >= 100, got {n}"
        )));
    }
    if !(ratio.is_finite() && ratio > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "side ratio must be positive, got {ratio}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Array2::<f64>::zeros((n, 2));
    for i in 0..n {
        pts[[i, 0]] = rng.gen_range(0.0..ratio);
        pts[[i, 1]] = rng.gen_range(0.0..1.0);
    }
    Ok(pts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_lie_in_bounds() {
        let pts = rectangle_sample(500, 4.0, 1).unwrap();
        for row in pts.rows() {
            assert!(row[0] >= 0.0 && row[0] < 4.0);
            assert!(row[1] >= 0.0 && row[1] < 1.0);
        }
    }

    #[test]
    fn empirical_means_match_uniform_distribution() {
        let n = 10_000;
        let ratio = 4.0;
        let pts = rectangle_sample(n, ratio, 7).unwrap();
        let mx = pts.column(0).sum() / n as f64;
        let my = pts.column(1).sum() / n as f64;
        // 3 sigma of the mean of U(0, L) is 3 L / sqrt(12 n)
        let three_sigma_x = 3.0 * ratio / (12.0 * n as f64).sqrt();
        let three_sigma_y = 3.0 / (12.0 * n as f64).sqrt();
        assert!((mx - ratio / 2.0).abs() < three_sigma_x, "mean x = {mx}");
        assert!((my - 0.5).abs() < three_sigma_y, "mean y = {my}");
    }

    #[test]
    fn small_n_rejected() {
        assert!(rectangle_sample(50, 4.0, 0).is_err());
    }

    #[test]
    fn seeded_sampling_is_deterministic() {
        let a = rectangle_sample(200, 4.0, 99).unwrap();
        let b = rectangle_sample(200, 4.0, 99).unwrap();
        assert_eq!(a, b);
    }
}
