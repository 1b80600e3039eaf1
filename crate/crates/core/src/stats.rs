//! Small statistical helpers used by selection, validation, and tests.

use ndarray::ArrayView2;

/// Median of a list of values (consumes and partially sorts the buffer).
///
/// For even lengths, returns the mean of the two middle values.
pub fn median(values: &mut Vec<f64>) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    let n = values.len();
    let mid = n / 2;
    let (_, m, _) = values.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    let hi = *m;
    if n % 2 == 1 {
        hi
    } else {
        let (_, lo, _) = values.select_nth_unstable_by(mid - 1, |a, b| a.total_cmp(b));
        0.5 * (*lo + hi)
    }
}

/// Median of the squared pairwise Euclidean distances between rows.
///
/// For large inputs the rows are strided down to at most `cap` so the
/// scratch buffer stays bounded; the result is a bandwidth heuristic, not an
/// exact statistic, so this is acceptable.
pub fn median_sq_pairwise_distance(points: &ArrayView2<f64>) -> f64 {
    let n = points.nrows();
    assert!(n >= 2, "need at least two points");
    let cap = 3000usize;
    let stride = n.div_ceil(cap);
    let idx: Vec<usize> = (0..n).step_by(stride).collect();
    let m = idx.len();
    let mut dists = Vec::with_capacity(m * (m - 1) / 2);
    for a in 0..m {
        let pa = points.row(idx[a]);
        for b in (a + 1)..m {
            let pb = points.row(idx[b]);
            let d2: f64 = pa
                .iter()
                .zip(pb.iter())
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            dists.push(d2);
        }
    }
    median(&mut dists)
}

/// Ranks with ties assigned their average rank (1-based).
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank-correlation coefficient between two equal-length samples.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    assert!(a.len() >= 2);
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    pearson(&ra, &rb)
}

/// Pearson correlation coefficient.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&x, &y) in a.iter().zip(b.iter()) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    cov / (va.sqrt() * vb.sqrt())
}

/// Mean squared error between two equal-length samples.
pub fn mse(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    assert!(!a.is_empty());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.len() as f64
}

/// Relative L2 error ||a - b|| / ||b||.
pub fn relative_l2_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let num: f64 = a
        .iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn median_odd_even() {
        assert_eq!(median(&mut vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn spearman_monotone_is_one() {
        let a = [0.1f64, 0.5, 0.9, 2.0, 7.0];
        let b: Vec<f64> = a.iter().map(|x| x.powi(3) + 1.0).collect();
        assert!((spearman(&a, &b) - 1.0).abs() < 1e-12);
        let c: Vec<f64> = a.iter().map(|x| -x.exp()).collect();
        assert!((spearman(&a, &c) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_handles_ties() {
        let a = [1.0, 1.0, 2.0, 3.0];
        let b = [1.0, 1.0, 2.0, 3.0];
        assert!((spearman(&a, &b) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn median_pairwise_matches_direct() {
        let pts = array![[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]];
        // squared distances: 1, 4, 5 -> median 4
        assert_eq!(median_sq_pairwise_distance(&pts.view()), 4.0);
    }
}
