use nalgebra::DVector;

use super::{ensure_square, Matrix};
use crate::error::{Error, Result};

/// Columns whose orthogonalized norm falls below this fraction of the
/// largest retained norm are treated as linearly dependent.
const DEFLATION_TOL: f64 = 1e-10;

/// Orthonormal basis of the Krylov space `range([B, AB, ..., A^{n-1} B])`.
///
/// Block Arnoldi with column-wise deflation. Every candidate is
/// orthogonalized twice (classical Gram-Schmidt with reorthogonalization).
pub fn krylov_range(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = ensure_square(a)?;
    if b.nrows() != n {
        return Err(Error::DimensionMismatch {
            context: "krylov_range starting block",
            expected: format!("{n} rows"),
            found: format!("{} rows", b.nrows()),
        });
    }
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut largest = 0.0f64;
    let mut candidates: Vec<DVector<f64>> = b.column_iter().map(|c| c.into_owned()).collect();

    while !candidates.is_empty() && basis.len() < n {
        let mut accepted = Vec::new();
        for mut w in candidates {
            if basis.len() == n {
                break;
            }
            let raw = w.norm();
            for _ in 0..2 {
                for q in &basis {
                    let c = q.dot(&w);
                    w.axpy(-c, q, 1.0);
                }
            }
            let r = w.norm();
            if r == 0.0 || r <= DEFLATION_TOL * largest.max(raw) {
                continue;
            }
            largest = largest.max(r);
            w /= r;
            basis.push(w.clone());
            accepted.push(w);
        }
        candidates = accepted.iter().map(|q| a * q).collect();
    }

    let mut q = Matrix::zeros(n, basis.len());
    for (j, v) in basis.iter().enumerate() {
        q.set_column(j, v);
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn invariance_defect(a: &Matrix, q: &Matrix) -> f64 {
        let aq = a * q;
        (&aq - q * (q.transpose() * &aq)).norm()
    }

    #[test]
    fn invariant_axis() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let q = krylov_range(&a, &Matrix::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
        assert_eq!(q.ncols(), 1);
        assert!((q[(0, 0)].abs() - 1.0).abs() < 1e-15);
        assert!(invariance_defect(&a, &q) < 1e-14);
    }

    #[test]
    fn shift_matrix_reaches_everything() {
        let a = Matrix::from_fn(3, 3, |i, j| if i == j + 1 { 1.0 } else { 0.0 });
        let q = krylov_range(&a, &Matrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0])).unwrap();
        assert_eq!(q.ncols(), 3);
        assert!((q.transpose() * &q - Matrix::identity(3, 3)).amax() < 1e-14);
        assert!((q.abs() - Matrix::identity(3, 3)).amax() < 1e-14);
    }

    #[test]
    fn rotation_spans_plane() {
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let q = krylov_range(&a, &Matrix::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
        assert_eq!(q.ncols(), 2);
    }

    #[test]
    fn zero_start_gives_empty_basis() {
        let a = Matrix::identity(3, 3);
        assert_eq!(krylov_range(&a, &Matrix::zeros(3, 2)).unwrap().ncols(), 0);
    }

    #[test]
    fn block_start_with_dependent_columns() {
        let n = 8;
        let a = Matrix::from_fn(n, n, |i, j| if i == j { -(i as f64) - 1.0 } else { 0.0 });
        // e_0 and e_1 plus a duplicate: the space is span{e_0, e_1}
        let mut b = Matrix::zeros(n, 3);
        b[(0, 0)] = 1.0;
        b[(1, 1)] = 1.0;
        b[(0, 2)] = 2.0;
        b[(1, 2)] = -1.0;
        let q = krylov_range(&a, &b).unwrap();
        assert_eq!(q.ncols(), 2);
        assert!(invariance_defect(&a, &q) <= 1e-8);
    }
}
