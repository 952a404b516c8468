//! Solvers for the non-symmetric DRE
//! `W' = M22 W - W M11 - W M12 W + M21` and its symmetric special case
//! `X' = A^T X + X A - X B B^T X + C^T C`.

mod davison_maki;
mod formulas;
mod rk;
mod splitting;

pub use davison_maki::{
    davison_maki, modified_davison_maki, range_equivalence_check, range_equivalence_series,
    DmVariant, RangeStep, DEFAULT_TOL_EXP, SINGULAR_U_COND,
};
pub use formulas::{solution_formula_i, solution_formula_ii, FormulaII};
pub use rk::rk_oracle;
pub use splitting::{splitting_step, splitting_trajectory, Splitting, SplittingScheme};

use crate::error::{Error, Result};
use crate::linalg::{block2x2, ensure_shape, ensure_square, Matrix, SymMatrix};

/// Coefficient blocks of the NDRE; `W` is `m x n`.
#[derive(Debug, Clone, PartialEq)]
pub struct NdreCoefficients {
    pub m11: Matrix,
    pub m12: Matrix,
    pub m21: Matrix,
    pub m22: Matrix,
    pub m0: Matrix,
    /// Set by [`embed_dre`]; solvers symmetrize iterates by default then.
    pub symmetric: bool,
}

impl NdreCoefficients {
    pub fn new(m11: Matrix, m12: Matrix, m21: Matrix, m22: Matrix, m0: Matrix) -> Result<Self> {
        let n = ensure_square(&m11)?;
        let m = ensure_square(&m22)?;
        ensure_shape(&m12, n, m, "NDRE block M12")?;
        ensure_shape(&m21, m, n, "NDRE block M21")?;
        ensure_shape(&m0, m, n, "NDRE initial value")?;
        Ok(Self {
            m11,
            m12,
            m21,
            m22,
            m0,
            symmetric: false,
        })
    }

    /// `(n, m)`: `U` is `n x n`, `V` and `W` are `m x n`.
    pub fn dims(&self) -> (usize, usize) {
        (self.m11.nrows(), self.m22.nrows())
    }

    /// `[[M11, M12], [M21, M22]]`.
    pub fn block(&self) -> Matrix {
        block2x2(&self.m11, &self.m12, &self.m21, &self.m22)
    }

    /// Right-hand side of the NDRE at `w`.
    pub fn rhs(&self, w: &Matrix) -> Matrix {
        &self.m22 * w - w * &self.m11 - w * (&self.m12 * w) + &self.m21
    }
}

/// Symmetric DRE as an NDRE: `M11 = -A`, `M12 = B B^T`, `M21 = C^T C`,
/// `M22 = A^T`, `W(0) = X0`.
pub fn embed_dre(a: &Matrix, b: &Matrix, c: &Matrix, x0: &SymMatrix) -> Result<NdreCoefficients> {
    let n = ensure_square(a)?;
    ensure_shape(b, n, b.ncols(), "DRE input matrix B")?;
    ensure_shape(c, c.nrows(), n, "DRE output matrix C")?;
    ensure_shape(x0.as_matrix(), n, n, "DRE initial value")?;
    let mut coeffs = NdreCoefficients::new(
        -a,
        b * b.transpose(),
        c.transpose() * c,
        a.transpose(),
        x0.as_matrix().clone(),
    )?;
    coeffs.symmetric = true;
    Ok(coeffs)
}

/// The Hamiltonian `[[A, -B B^T], [-C^T C, -A^T]]`; the embedding above is `-H`.
pub fn hamiltonian(a: &Matrix, b: &Matrix, c: &Matrix) -> Matrix {
    block2x2(
        a,
        &-(b * b.transpose()),
        &-(c.transpose() * c),
        &-a.transpose(),
    )
}

/// Per-step conditioning of the `U` factor and block norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub cond_u: f64,
    pub norm_u: f64,
    pub norm_v: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryMeta {
    pub solver: String,
    pub h: f64,
    pub tol_exp: Option<f64>,
}

/// States on the grid `times[k] = k h`. `diagnostics[k-1]` belongs to step `k`
/// when the solver records them.
#[derive(Debug, Clone, PartialEq)]
pub struct DreTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Matrix>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub meta: TrajectoryMeta,
}

impl DreTrajectory {
    pub(crate) fn new(solver: &str, h: f64, tol_exp: Option<f64>) -> Self {
        Self {
            times: Vec::new(),
            states: Vec::new(),
            diagnostics: Vec::new(),
            meta: TrajectoryMeta {
                solver: solver.to_string(),
                h,
                tol_exp,
            },
        }
    }

    pub(crate) fn push(&mut self, k: usize, state: Matrix) {
        self.times.push(k as f64 * self.meta.h);
        self.states.push(state);
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// State at step `k` as a symmetric matrix.
    pub fn sym_state(&self, k: usize) -> SymMatrix {
        SymMatrix::from_square(self.states[k].clone())
    }

    /// Index of the grid point closest to `t`, if within `1e-9 h`.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let h = self.meta.h;
        let k = (t / h).round();
        if k < 0.0 || (k * h - t).abs() > 1e-9 * h.max(t.abs()) {
            return None;
        }
        let k = k as usize;
        (k < self.len()).then_some(k)
    }
}

/// Number of steps covering `[0, tf]` with step `h`. When `tf / h` is not an
/// integer (to `1e-9` relative), the grid overshoots to the next multiple.
pub fn step_count(h: f64, tf: f64) -> Result<usize> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("step size must be positive, got {h}")));
    }
    if !(tf > 0.0 && tf.is_finite()) {
        return Err(Error::InvalidArgument(format!("final time must be positive, got {tf}")));
    }
    let ratio = tf / h;
    let rounded = ratio.round();
    let steps = if (ratio - rounded).abs() <= 1e-9 * ratio.max(1.0) {
        rounded
    } else {
        ratio.ceil()
    };
    Ok((steps as usize).max(1))
}
