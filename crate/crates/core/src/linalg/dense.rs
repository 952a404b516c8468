use nalgebra::linalg::{Schur, SymmetricEigen, SVD};
use nalgebra::Complex;

use super::{ensure_finite, ensure_square, Matrix, SymMatrix};
use crate::error::{Error, Result};

/// Smallest accepted ratio between the smallest and largest LU pivot.
const PIVOT_RATIO: f64 = 1e-14;

/// Solve `a x = b` by partially pivoted LU. No explicit inverse is formed.
pub fn solve_linear(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = ensure_square(a)?;
    if b.nrows() != n {
        return Err(Error::DimensionMismatch {
            context: "solve_linear right-hand side",
            expected: format!("{n} rows"),
            found: format!("{} rows", b.nrows()),
        });
    }
    ensure_finite(a, "solve_linear matrix")?;
    if n == 0 {
        return Ok(b.clone());
    }
    let lu = a.clone().lu();
    let u = lu.u();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..n {
        let p = u[(i, i)].abs();
        lo = lo.min(p);
        hi = hi.max(p);
    }
    if !(hi > 0.0) || lo <= PIVOT_RATIO * hi {
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        return Err(Error::SingularMatrix { condition });
    }
    lu.solve(b)
        .ok_or(Error::SingularMatrix {
            condition: f64::INFINITY,
        })
}

/// Solve `x a = b`, i.e. `x = b a^{-1}`, through the transposed system.
pub fn solve_right(b: &Matrix, a: &Matrix) -> Result<Matrix> {
    Ok(solve_linear(&a.transpose(), &b.transpose())?.transpose())
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues non-increasing.
#[derive(Debug, Clone)]
pub struct SpectralDecomp {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored column-wise, in the order of `values`.
    pub vectors: Matrix,
}

impl SpectralDecomp {
    pub fn order(&self) -> usize {
        self.values.len()
    }

    /// `Q diag(values) Q^T`.
    pub fn recompose(&self) -> SymMatrix {
        let scaled = scale_columns(&self.vectors, &self.values);
        SymMatrix::from_square(scaled * self.vectors.transpose())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

pub fn sym_eig(s: &SymMatrix) -> Result<SpectralDecomp> {
    let n = s.order();
    if n == 0 {
        return Ok(SpectralDecomp {
            values: Vec::new(),
            vectors: Matrix::zeros(0, 0),
        });
    }
    ensure_finite(s.as_matrix(), "sym_eig input")?;
    let cap = 100 * n * n.max(30);
    let eig = SymmetricEigen::try_new(s.as_matrix().clone(), f64::EPSILON, cap).ok_or(
        Error::ConvergenceFailure {
            what: "symmetric eigensolver",
            iterations: cap,
        },
    )?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(SpectralDecomp { values, vectors })
}

/// Thin SVD `z = q diag(s) v^T` keeping only singular values above `1e-14 * s_1`.
#[derive(Debug, Clone)]
pub struct CompactSvd {
    pub q: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
}

impl CompactSvd {
    pub fn rank(&self) -> usize {
        self.s.len()
    }
}

pub fn compact_svd(z: &Matrix) -> Result<CompactSvd> {
    ensure_finite(z, "compact_svd input")?;
    let (n, q) = z.shape();
    let r = n.min(q);
    if r == 0 || z.iter().all(|v| *v == 0.0) {
        return Ok(CompactSvd {
            q: Matrix::zeros(n, 0),
            s: Vec::new(),
            v: Matrix::zeros(q, 0),
        });
    }
    let cap = 200 * r.max(30);
    let svd = SVD::try_new(z.clone(), true, true, f64::EPSILON, cap).ok_or(
        Error::ConvergenceFailure {
            what: "singular value decomposition",
            iterations: cap,
        },
    )?;
    let u = svd.u.expect("left singular vectors requested");
    let vt = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let s1 = svd.singular_values[order[0]];
    let keep: Vec<usize> = order
        .into_iter()
        .filter(|&i| svd.singular_values[i] > 1e-14 * s1)
        .collect();
    Ok(CompactSvd {
        q: Matrix::from_fn(n, keep.len(), |row, c| u[(row, keep[c])]),
        s: keep.iter().map(|&i| svd.singular_values[i]).collect(),
        v: Matrix::from_fn(q, keep.len(), |row, c| vt[(keep[c], row)]),
    })
}

/// Singular values in non-increasing order.
pub(crate) fn singular_values(m: &Matrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn norm1(m: &Matrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Spectral norm (largest singular value).
pub fn norm2(m: &Matrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// 2-norm condition number of a square matrix; infinite when singular.
pub fn cond2(m: &Matrix) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

pub fn complex_eigenvalues(m: &Matrix) -> Result<Vec<Complex<f64>>> {
    let n = ensure_square(m)?;
    ensure_finite(m, "eigenvalue input")?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let cap = 100 * n.max(30);
    let schur = Schur::try_new(m.clone(), f64::EPSILON, cap).ok_or(Error::ConvergenceFailure {
        what: "real Schur decomposition",
        iterations: cap,
    })?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Orthonormal basis of `range(m)`, cut at singular values `<= rel_tol * s_1`.
pub fn orthonormal_basis(m: &Matrix, rel_tol: f64) -> Result<Matrix> {
    let svd = compact_svd(m)?;
    let s1 = svd.s.first().copied().unwrap_or(0.0);
    let k = svd.s.iter().take_while(|&&s| s > rel_tol * s1).count();
    Ok(svd.q.columns(0, k).into_owned())
}

/// `||P_1 - P_2||_2` for the orthogonal projectors onto the ranges of two
/// orthonormal column sets.
pub fn subspace_gap(q1: &Matrix, q2: &Matrix) -> f64 {
    if q1.ncols() != q2.ncols() {
        // Projectors of different rank are at distance one.
        return 1.0;
    }
    if q1.ncols() == 0 {
        return 0.0;
    }
    let residual = q2 - q1 * (q1.transpose() * q2);
    norm2(&residual).min(1.0)
}

pub(crate) fn scale_columns(m: &Matrix, weights: &[f64]) -> Matrix {
    let mut out = m.clone();
    for (j, w) in weights.iter().enumerate() {
        out.column_mut(j).scale_mut(*w);
    }
    out
}
