//! Dense real matrix kernels shared by every solver in the crate.
//!
//! Matrices are plain [`nalgebra::DMatrix<f64>`]. Symmetric quantities are
//! wrapped in [`SymMatrix`], which symmetrizes on construction so the
//! Riccati solvers never accumulate a skew part.

mod dense;
mod expm;
mod krylov;
mod lyapunov;

pub use dense::{
    compact_svd, complex_eigenvalues, cond2, norm1, norm2, orthonormal_basis, solve_linear,
    solve_right, subspace_gap, sym_eig, CompactSvd, SpectralDecomp,
};
pub(crate) use dense::scale_columns;
pub use expm::{expm, finite_gramian};
pub use krylov::krylov_range;
pub use lyapunov::{lyapunov_kronecker, lyapunov_solve, LYAPUNOV_MAX_ORDER};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

/// Symmetric matrix, kept exactly symmetric by averaging with its transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(Matrix);

impl SymMatrix {
    /// Symmetrizes `m` via `(m + m^T) / 2`.
    pub fn new(m: Matrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::NonSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        Ok(Self::from_square(m))
    }

    pub(crate) fn from_square(mut m: Matrix) -> Self {
        debug_assert!(m.is_square());
        let n = m.nrows();
        for j in 0..n {
            for i in (j + 1)..n {
                let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = avg;
                m[(j, i)] = avg;
            }
        }
        SymMatrix(m)
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix(Matrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(Matrix::identity(n, n))
    }

    /// `f f^T` for a factor `f`.
    pub fn gram(f: &Matrix) -> Self {
        Self::from_square(f * f.transpose())
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl AsRef<Matrix> for SymMatrix {
    fn as_ref(&self) -> &Matrix {
        &self.0
    }
}

impl From<SymMatrix> for Matrix {
    fn from(s: SymMatrix) -> Matrix {
        s.0
    }
}

pub(crate) fn ensure_square(m: &Matrix) -> Result<usize> {
    if m.is_square() {
        Ok(m.nrows())
    } else {
        Err(Error::NonSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        })
    }
}

pub(crate) fn ensure_finite(m: &Matrix, what: &'static str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub(crate) fn ensure_shape(
    m: &Matrix,
    rows: usize,
    cols: usize,
    context: &'static str,
) -> Result<()> {
    if m.nrows() == rows && m.ncols() == cols {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected: format!("{rows}x{cols}"),
            found: format!("{}x{}", m.nrows(), m.ncols()),
        })
    }
}

/// Stack `top` over `bottom`.
pub(crate) fn vstack(top: &Matrix, bottom: &Matrix) -> Matrix {
    assert_eq!(top.ncols(), bottom.ncols());
    let mut out = Matrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.view_mut((0, 0), top.shape()).copy_from(top);
    out.view_mut((top.nrows(), 0), bottom.shape())
        .copy_from(bottom);
    out
}

/// Assemble `[[m11, m12], [m21, m22]]`.
pub(crate) fn block2x2(m11: &Matrix, m12: &Matrix, m21: &Matrix, m22: &Matrix) -> Matrix {
    let (n, m) = (m11.nrows(), m22.nrows());
    let mut out = Matrix::zeros(n + m, n + m);
    out.view_mut((0, 0), (n, n)).copy_from(m11);
    out.view_mut((0, n), (n, m)).copy_from(m12);
    out.view_mut((n, 0), (m, n)).copy_from(m21);
    out.view_mut((n, n), (m, m)).copy_from(m22);
    out
}
