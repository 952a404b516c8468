//! Algebraic Riccati equation `0 = A^T X M + M^T X A - M^T X B B^T X M + C^T C`.
//!
//! The generalized problem is handled in standardized coordinates
//! `A~ = A M^{-1}`, `B`, `C~ = C M^{-1}`, where the equation reads
//! `A~^T X + X A~ - X B B^T X + C~^T C~ = 0` for the same `X`.

use nalgebra::linalg::QR;

use crate::error::{Error, Result};
use crate::linalg::{
    complex_eigenvalues, ensure_finite, ensure_shape, ensure_square, krylov_range,
    lyapunov_solve, solve_linear, solve_right, subspace_gap, sym_eig, Matrix,
    SymMatrix, LYAPUNOV_MAX_ORDER,
};

/// Default relative residual at which the Newton iteration stops.
pub const DEFAULT_ARE_TOL: f64 = 1e-12;
/// Default cap on Newton steps.
pub const DEFAULT_ARE_MAX_ITERS: usize = 60;

/// Coefficients `(A, B, C, M)`; `M = None` means the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct AreProblem {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub m: Option<Matrix>,
}

/// Standardized coefficients `A M^{-1}`, `B`, `C M^{-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardForm {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
}

impl StandardForm {
    /// `B B^T`.
    pub fn bbt(&self) -> SymMatrix {
        SymMatrix::gram(&self.b)
    }

    /// `C^T C`.
    pub fn ctc(&self) -> SymMatrix {
        SymMatrix::gram(&self.c.transpose())
    }

    /// Closed-loop matrix `A - B B^T X`.
    pub fn closed_loop(&self, x: &SymMatrix) -> Matrix {
        &self.a - &self.b * (self.b.transpose() * x.as_matrix())
    }
}

impl AreProblem {
    pub fn new(a: Matrix, b: Matrix, c: Matrix, m: Option<Matrix>) -> Result<Self> {
        let n = ensure_square(&a)?;
        if b.nrows() != n {
            return Err(Error::DimensionMismatch {
                context: "input matrix B",
                expected: format!("{n} rows"),
                found: format!("{} rows", b.nrows()),
            });
        }
        if c.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "output matrix C",
                expected: format!("{n} columns"),
                found: format!("{} columns", c.ncols()),
            });
        }
        if let Some(m) = &m {
            ensure_shape(m, n, n, "mass matrix M")?;
            ensure_finite(m, "mass matrix M")?;
        }
        ensure_finite(&a, "matrix A")?;
        ensure_finite(&b, "matrix B")?;
        ensure_finite(&c, "matrix C")?;
        Ok(Self { a, b, c, m })
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// Applies `M^{-1}` from the right by LU solves; no inverse is formed.
    pub fn standardize(&self) -> Result<StandardForm> {
        match &self.m {
            None => Ok(StandardForm {
                a: self.a.clone(),
                b: self.b.clone(),
                c: self.c.clone(),
            }),
            Some(m) => Ok(StandardForm {
                a: solve_right(&self.a, m)?,
                b: self.b.clone(),
                c: solve_right(&self.c, m)?,
            }),
        }
    }

    fn mass(&self) -> Matrix {
        self.m
            .clone()
            .unwrap_or_else(|| Matrix::identity(self.order(), self.order()))
    }
}

/// Converged ARE solution with its low-rank factor `X ~ Z Z^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct AreSolution {
    /// `Z = Q diag(S)`.
    pub z: Matrix,
    pub q: Matrix,
    pub s: Vec<f64>,
    /// Dense Newton iterate.
    pub x: SymMatrix,
    pub abs_residual: f64,
    pub rel_residual: f64,
    pub newton_iters: usize,
}

impl AreSolution {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// `Z Z^T`.
    pub fn x_lowrank(&self) -> SymMatrix {
        SymMatrix::gram(&self.z)
    }
}

/// Newton-Kleinman iteration on the standardized equation.
///
/// Starts from zero when `A M^{-1}` is stable, otherwise from a Bass
/// stabilizing feedback. Stops once the relative generalized residual is
/// at most `tol_rel`.
pub fn solve_are_newton(p: &AreProblem, tol_rel: f64, max_iters: usize) -> Result<AreSolution> {
    let n = p.order();
    if n > LYAPUNOV_MAX_ORDER {
        return Err(Error::SizeExceeded {
            n,
            max: LYAPUNOV_MAX_ORDER,
        });
    }
    if !(tol_rel > 0.0 && tol_rel <= 1e-2) {
        return Err(Error::InvalidArgument(format!(
            "ARE tolerance must lie in (0, 1e-2], got {tol_rel}"
        )));
    }
    let sf = p.standardize()?;
    let bbt = sf.bbt();
    let ctc = sf.ctc();

    let mut x = initial_stabilizing(&sf)?;
    let mut rel = f64::INFINITY;
    let mut abs;
    for iter in 1..=max_iters {
        let closed = sf.closed_loop(&x);
        let xbbtx = x.as_matrix() * bbt.as_matrix() * x.as_matrix();
        let g = SymMatrix::from_square(ctc.as_matrix() + xbbtx);
        x = lyapunov_solve(&closed.transpose(), &g)?;
        (abs, rel) = dense_residual(p, &x)?;
        if rel <= tol_rel {
            return finish(x, abs, rel, iter);
        }
    }
    Err(Error::MaxItersExceeded {
        iterations: max_iters,
        residual: rel,
    })
}

fn finish(x: SymMatrix, abs: f64, rel: f64, iters: usize) -> Result<AreSolution> {
    let eig = sym_eig(&x)?;
    let lmax = eig.values.first().copied().unwrap_or(0.0);
    let keep: Vec<usize> = if lmax > 0.0 {
        (0..eig.order())
            .filter(|&i| eig.values[i] >= f64::EPSILON * lmax)
            .collect()
    } else {
        Vec::new()
    };
    let n = x.order();
    let mut q = Matrix::zeros(n, keep.len());
    let mut s = Vec::with_capacity(keep.len());
    for (j, &i) in keep.iter().enumerate() {
        q.set_column(j, &eig.vectors.column(i));
        s.push(eig.values[i].sqrt());
    }
    let mut z = q.clone();
    for (j, sj) in s.iter().enumerate() {
        z.column_mut(j).scale_mut(*sj);
    }
    Ok(AreSolution {
        z,
        q,
        s,
        x,
        abs_residual: abs,
        rel_residual: rel,
        newton_iters: iters,
    })
}

/// `X_0 = 0` for stable `A~`, otherwise `X_0 = Z^{-1}` with
/// `-(A~ + bI) Z - Z (A~ + bI)^T + 2 B B^T = 0`, `b = 1.1 max |Re l(A~)|`.
fn initial_stabilizing(sf: &StandardForm) -> Result<SymMatrix> {
    let n = sf.a.nrows();
    let eigs = complex_eigenvalues(&sf.a)?;
    let max_re = eigs.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    if max_re < 0.0 {
        return Ok(SymMatrix::zeros(n));
    }
    let spread = eigs.iter().map(|l| l.re.abs()).fold(0.0, f64::max);
    let beta = if spread > f64::EPSILON * crate::linalg::norm1(&sf.a) && spread > 0.0 {
        1.1 * spread
    } else {
        1.0
    };
    let shifted = -(&sf.a + Matrix::identity(n, n) * beta);
    let rhs = SymMatrix::from_square(sf.bbt().into_matrix() * 2.0);
    let z = lyapunov_solve(&shifted, &rhs).map_err(|_| Error::NoStabilizingStart)?;
    let x0 = solve_linear(z.as_matrix(), &Matrix::identity(n, n))
        .map_err(|_| Error::NoStabilizingStart)?;
    let x0 = SymMatrix::from_square(x0);
    let closed = complex_eigenvalues(&sf.closed_loop(&x0))?;
    if closed.iter().all(|l| l.re < 0.0) {
        Ok(x0)
    } else {
        Err(Error::NoStabilizingStart)
    }
}

/// Generalized residual of a dense `X`, as (absolute, relative) 2-norms.
pub fn dense_residual(p: &AreProblem, x: &SymMatrix) -> Result<(f64, f64)> {
    let m = p.mass();
    let xm = x.as_matrix() * &m;
    let atxm = p.a.transpose() * &xm;
    let btxm = p.b.transpose() * &xm;
    let r = &atxm + atxm.transpose() - btxm.transpose() * &btxm
        + p.c.transpose() * &p.c;
    let abs = sym_eig(&SymMatrix::from_square(r))?.max_abs();
    Ok((abs, relative(abs, &p.c)?))
}

fn relative(abs: f64, c: &Matrix) -> Result<f64> {
    let ctc_norm = crate::linalg::norm2(c).powi(2);
    Ok(if ctc_norm > 0.0 { abs / ctc_norm } else { abs })
}

/// Generalized residual of `X = Z Z^T` evaluated in factored form.
///
/// The residual equals `L K L^T` with `L = [A^T Z, M^T Z, C^T]` and a small
/// symmetric `K`, so only a thin QR of `L` and an eigenproblem of its
/// column count are needed.
pub fn are_residual(p: &AreProblem, z: &Matrix) -> Result<(f64, f64)> {
    let n = p.order();
    if z.nrows() != n {
        return Err(Error::DimensionMismatch {
            context: "are_residual factor",
            expected: format!("{n} rows"),
            found: format!("{} rows", z.nrows()),
        });
    }
    let r = z.ncols();
    let nc = p.c.nrows();
    let width = 2 * r + nc;
    let mz = match &p.m {
        Some(m) => m.transpose() * z,
        None => z.clone(),
    };
    let mut l = Matrix::zeros(n, width);
    l.columns_mut(0, r).copy_from(&(p.a.transpose() * z));
    l.columns_mut(r, r).copy_from(&mz);
    l.columns_mut(2 * r, nc).copy_from(&p.c.transpose());

    let btz = p.b.transpose() * z;
    let mut k = Matrix::zeros(width, width);
    for i in 0..r {
        k[(i, r + i)] = 1.0;
        k[(r + i, i)] = 1.0;
    }
    k.view_mut((r, r), (r, r)).copy_from(&-(btz.transpose() * &btz));
    for i in 0..nc {
        k[(2 * r + i, 2 * r + i)] = 1.0;
    }

    let small = if width >= n {
        &l * k * l.transpose()
    } else {
        let rf = QR::new(l).r();
        &rf * k * rf.transpose()
    };
    let abs = sym_eig(&SymMatrix::from_square(small))?.max_abs();
    Ok((abs, relative(abs, &p.c)?))
}

/// Comparison of `range(X_inf)` with the Krylov space `K(A~^T, C~^T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeReport {
    pub krylov_rank: usize,
    pub solution_rank: usize,
    /// Projector distance when the ranks agree, otherwise the inclusion
    /// defect `||(I - Q Q^T) Q_K||_2`.
    pub gap: f64,
    pub ranks_match: bool,
}

pub fn verify_range(p: &AreProblem, sol: &AreSolution) -> Result<RangeReport> {
    let sf = p.standardize()?;
    let qk = krylov_range(&sf.a.transpose(), &sf.c.transpose())?;
    let qx = &sol.q;
    let (kr, sr) = (qk.ncols(), qx.ncols());
    let gap = if kr == sr {
        subspace_gap(&qk, qx)
    } else if kr == 0 {
        0.0
    } else {
        crate::linalg::norm2(&(&qk - qx * (qx.transpose() * &qk)))
    };
    Ok(RangeReport {
        krylov_rank: kr,
        solution_rank: sr,
        gap,
        ranks_match: kr == sr,
    })
}

/// `||(I - Q Q^T) (A~ - B B^T X)^T Q||_F`, zero when `range(Q)` is invariant.
pub fn closed_loop_invariance_defect(sf: &StandardForm, sol: &AreSolution) -> f64 {
    let closed_t = sf.closed_loop(&sol.x).transpose();
    let aq = closed_t * &sol.q;
    (&aq - &sol.q * (sol.q.transpose() * &aq)).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::lyapunov_kronecker;

    fn scalar(a: f64, b: f64, c: f64) -> AreProblem {
        AreProblem::new(
            Matrix::from_element(1, 1, a),
            Matrix::from_element(1, 1, b),
            Matrix::from_element(1, 1, c),
            None,
        )
        .unwrap()
    }

    fn tridiag(n: usize) -> AreProblem {
        let a = Matrix::from_fn(n, n, |i, j| match i as isize - j as isize {
            0 => -1.0,
            1 => 5.0,
            -1 => -5.0,
            _ => 0.0,
        });
        AreProblem::new(
            a,
            Matrix::from_element(n, 1, 1.0),
            Matrix::from_element(1, n, 1.0),
            None,
        )
        .unwrap()
    }

    #[test]
    fn scalar_with_zero_drift_needs_stabilization() {
        let sol = solve_are_newton(&scalar(0.0, 1.0, 1.0), 1e-12, 50).unwrap();
        assert!((sol.x.as_matrix()[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((sol.s[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scalar_stable_root() {
        let sol = solve_are_newton(&scalar(-1.0, 1.0, 1.0), 1e-14, 50).unwrap();
        // -x^2 - 2x + 1 = 0, positive root
        let exact = 2f64.sqrt() - 1.0;
        assert!((sol.x.as_matrix()[(0, 0)] - exact).abs() < 1e-14);
    }

    #[test]
    fn unstable_scalar_converges() {
        // 2 a x - x^2 + 1 = 0 with a = 3: x = a + sqrt(a^2 + 1)
        let sol = solve_are_newton(&scalar(3.0, 1.0, 1.0), 1e-12, 50).unwrap();
        let exact = 3.0 + 10f64.sqrt();
        assert!((sol.x.as_matrix()[(0, 0)] - exact).abs() < 1e-10 * exact);
    }

    #[test]
    fn zero_input_reduces_to_lyapunov() {
        let p = AreProblem::new(
            Matrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -3.0]),
            Matrix::zeros(2, 1),
            Matrix::from_row_slice(1, 2, &[1.0, 2.0]),
            None,
        )
        .unwrap();
        let sol = solve_are_newton(&p, 1e-12, 50).unwrap();
        let ale = lyapunov_kronecker(&p.a.transpose(), &SymMatrix::gram(&p.c.transpose())).unwrap();
        assert!((sol.x.as_matrix() - ale.as_matrix()).amax() < 1e-13);
        assert_eq!(sol.newton_iters, 1);
    }

    #[test]
    fn zero_output_gives_zero_solution() {
        let mut p = tridiag(4);
        p.c = Matrix::zeros(1, 4);
        let sol = solve_are_newton(&p, 1e-12, 10).unwrap();
        assert_eq!(sol.rank(), 0);
        assert_eq!(sol.x.as_matrix().amax(), 0.0);
        let report = verify_range(&p, &sol).unwrap();
        assert_eq!((report.krylov_rank, report.solution_rank, report.gap), (0, 0, 0.0));
    }

    #[test]
    fn factored_residual_cases() {
        let p = scalar(-1.0, 1.0, 1.0);
        let z = Matrix::from_element(1, 1, (2f64.sqrt() - 1.0).sqrt());
        assert!(are_residual(&p, &z).unwrap().0 <= 1e-12);
        let p = tridiag(6);
        let (_, rel) = are_residual(&p, &Matrix::zeros(6, 0)).unwrap();
        assert!((rel - 1.0).abs() < 1e-14);
    }

    #[test]
    fn factored_matches_dense_residual() {
        let mut p = tridiag(7);
        p.m = Some(Matrix::from_fn(7, 7, |i, j| match i.abs_diff(j) {
            0 => 4.0 / 6.0,
            1 => 1.0 / 6.0,
            _ => 0.0,
        }));
        let z = Matrix::from_fn(7, 2, |i, j| ((i + 1) * (j + 2)) as f64 * 0.05);
        let (abs_f, _) = are_residual(&p, &z).unwrap();
        let (abs_d, _) = dense_residual(&p, &SymMatrix::gram(&z)).unwrap();
        assert!((abs_f - abs_d).abs() <= 1e-12 * abs_d);
        // wide factor takes the dense branch
        let z = Matrix::from_fn(7, 4, |i, j| ((i * 3 + j) % 5) as f64 * 0.1);
        let (abs_f, _) = are_residual(&p, &z).unwrap();
        let (abs_d, _) = dense_residual(&p, &SymMatrix::gram(&z)).unwrap();
        assert!((abs_f - abs_d).abs() <= 1e-12 * abs_d);
    }

    #[test]
    fn tridiag_solution_is_stabilizing_and_semidefinite() {
        let p = tridiag(20);
        let sol = solve_are_newton(&p, 1e-10, 50).unwrap();
        assert!(sol.rel_residual <= 1e-10);
        let (_, rel) = are_residual(&p, &sol.z).unwrap();
        assert!(rel <= 1e-10);
        let sf = p.standardize().unwrap();
        let closed = complex_eigenvalues(&sf.closed_loop(&sol.x)).unwrap();
        assert!(closed.iter().all(|l| l.re < 0.0));
        let eig = sym_eig(&sol.x).unwrap();
        assert!(*eig.values.last().unwrap() >= -1e-10 * eig.values[0]);
        assert!(closed_loop_invariance_defect(&sf, &sol) <= 1e-8 * p.a.norm());
        let report = verify_range(&p, &sol).unwrap();
        assert_eq!(report.krylov_rank, 20);
        assert!(report.ranks_match && report.gap <= 1e-6);
    }

    #[test]
    fn diagonal_range_is_one_dimensional() {
        let p = AreProblem::new(
            Matrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]),
            Matrix::from_element(2, 1, 1.0),
            Matrix::from_row_slice(1, 2, &[1.0, 0.0]),
            None,
        )
        .unwrap();
        let sol = solve_are_newton(&p, 1e-12, 50).unwrap();
        let report = verify_range(&p, &sol).unwrap();
        assert_eq!(report.krylov_rank, 1);
        assert!(report.gap <= 1e-10);
    }

    #[test]
    fn mass_matrix_problem_converges() {
        let mut p = tridiag(10);
        p.m = Some(Matrix::from_fn(10, 10, |i, j| match i.abs_diff(j) {
            0 => 4.0 / 6.0,
            1 => 1.0 / 6.0,
            _ => 0.0,
        }));
        let sol = solve_are_newton(&p, 1e-10, 50).unwrap();
        assert!(sol.rel_residual <= 1e-10);
        let (_, rel) = are_residual(&p, &sol.z).unwrap();
        assert!(rel <= 1e-9);
    }
}
