//! Dense symmetric eigen-decompositions through nalgebra in double precision.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};

use crate::scalar::{lit, Real};

/// Eigenvalues in ascending order with matching eigenvector columns.
pub fn symmetric_eigen<T: Real>(m: &Array2<T>) -> (Array1<T>, Array2<T>) {
    let n = m.nrows();
    let dm = DMatrix::from_fn(n, n, |i, j| m[[i, j]].to_f64().unwrap_or(f64::NAN));
    let eig = dm.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| lit::<T>(eig.eigenvalues[k])).collect();
    let vectors = Array2::from_shape_fn((n, n), |(i, c)| lit::<T>(eig.eigenvectors[(i, order[c])]));
    (values, vectors)
}

/// Orthonormal basis of the zero-sum subspace of `R^n` (Helmert contrasts).
pub fn zero_sum_basis<T: Real>(n: usize) -> Array2<T> {
    let mut q = Array2::zeros((n, n.saturating_sub(1)));
    for k in 1..n {
        let kf = k as f64;
        let norm = (kf * (kf + 1.0)).sqrt();
        for i in 0..k {
            q[[i, k - 1]] = lit(1.0 / norm);
        }
        q[[k, k - 1]] = lit(-kf / norm);
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn eigen_of_diagonal() {
        let (vals, vecs) = symmetric_eigen(&array![[3.0_f64, 0.0], [0.0, 1.0]]);
        assert_eq!(vals, array![1.0, 3.0]);
        assert!((vecs[[1, 0]].abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn helmert_is_orthonormal_and_centered() {
        let q = zero_sum_basis::<f64>(5);
        let g = q.t().dot(&q);
        for ((i, j), v) in g.indexed_iter() {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((v - want).abs() < 1e-14);
        }
        for col in q.columns() {
            assert!(col.sum().abs() < 1e-14);
        }
    }
}
