//! Deterministic test problems and error measures.

use crate::are::{AreProblem, AreSolution, StandardForm};
use crate::dre::{embed_dre, NdreCoefficients};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, SymMatrix};

/// A generalized DRE `M^T X' M = A^T X M + M^T X A - M^T X B B^T X M + C^T C`
/// with initial value `X0` on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub name: String,
    pub are: AreProblem,
    pub x0: SymMatrix,
    pub horizon: f64,
}

impl ProblemInstance {
    pub fn order(&self) -> usize {
        self.are.order()
    }

    pub fn standard_form(&self) -> Result<StandardForm> {
        self.are.standardize()
    }

    /// NDRE embedding of the standardized equation.
    pub fn embedding(&self) -> Result<NdreCoefficients> {
        let sf = self.standard_form()?;
        embed_dre(&sf.a, &sf.b, &sf.c, &self.x0)
    }
}

/// Experiment grid attached to a benchmark family.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSpec {
    pub name: &'static str,
    pub size: usize,
    pub horizon: f64,
    pub step_sizes: Vec<f64>,
    pub truncation_tols: Vec<f64>,
}

/// Names accepted by [`generate`].
pub const BENCHMARK_NAMES: [&str; 6] = [
    "tridiag",
    "tridiag-mass",
    "conv-diff",
    "scalar-tanh",
    "scalar-stable",
    "diag-rank1",
];

pub fn benchmark_spec(name: &str, size: usize) -> Result<BenchmarkSpec> {
    let (name, horizon, step_sizes): (&'static str, f64, Vec<f64>) = match name {
        "tridiag" => ("tridiag", 15.0, (3..=8).map(|e| 2f64.powi(-e)).collect()),
        "tridiag-mass" => ("tridiag-mass", 15.0, (3..=8).map(|e| 2f64.powi(-e)).collect()),
        "conv-diff" => ("conv-diff", 0.125, (6..=10).map(|e| 2f64.powi(-e)).collect()),
        "scalar-tanh" => ("scalar-tanh", 1.0, vec![0.1, 0.05, 0.025]),
        "scalar-stable" => ("scalar-stable", 2.0, vec![0.5, 0.25, 0.125]),
        "diag-rank1" => ("diag-rank1", 5.0, vec![0.125, 0.0625]),
        other => {
            return Err(Error::InvalidArgument(format!("unknown benchmark '{other}'")));
        }
    };
    Ok(BenchmarkSpec {
        name,
        size,
        horizon,
        step_sizes,
        truncation_tols: vec![f64::EPSILON, 1e-12, 1e-8],
    })
}

/// Dispatch by benchmark name. `size` is `n`, or the grid width for `conv-diff`;
/// scalar problems ignore it.
pub fn generate(name: &str, size: usize) -> Result<ProblemInstance> {
    match name {
        "tridiag" => gen_tridiag(size),
        "tridiag-mass" => gen_tridiag_mass(size),
        "conv-diff" => gen_conv_diff(size),
        "scalar-tanh" => Ok(gen_scalar(0.0, 1.0, 1.0, 1.0)),
        "scalar-stable" => Ok(gen_scalar(-1.0, 1.0, 1.0, 2.0)),
        "diag-rank1" => gen_diag_rank1(size),
        other => Err(Error::InvalidArgument(format!("unknown benchmark '{other}'"))),
    }
}

fn tridiagonal(n: usize, sub: f64, diag: f64, sup: f64) -> Matrix {
    Matrix::from_fn(n, n, |i, j| {
        if i == j {
            diag
        } else if i == j + 1 {
            sub
        } else if j == i + 1 {
            sup
        } else {
            0.0
        }
    })
}

fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidArgument(msg()))
    }
}

/// Tridiagonal `A` with 5, -1, -5 on the sub-, main and superdiagonal,
/// `B = C^T = ones`, `X0 = 0`, horizon 15.
pub fn gen_tridiag(n: usize) -> Result<ProblemInstance> {
    require(n >= 2, || format!("tridiag needs n >= 2, got {n}"))?;
    Ok(ProblemInstance {
        name: format!("tridiag-{n}"),
        are: AreProblem::new(
            tridiagonal(n, 5.0, -1.0, -5.0),
            Matrix::from_element(n, 1, 1.0),
            Matrix::from_element(1, n, 1.0),
            None,
        )?,
        x0: SymMatrix::zeros(n),
        horizon: 15.0,
    })
}

/// [`gen_tridiag`] with the mass matrix `tridiag(1/6, 4/6, 1/6)`.
pub fn gen_tridiag_mass(n: usize) -> Result<ProblemInstance> {
    let mut p = gen_tridiag(n)?;
    p.are.m = Some(tridiagonal(n, 1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0));
    p.name = format!("tridiag-mass-{n}");
    Ok(p)
}

/// Finite-difference `Δu + v . ∇u` on the unit square with homogeneous
/// Dirichlet data; unknown `(x_j, y_i)` sits at index `i * grid_n + j`.
pub fn conv_diff_operator(grid_n: usize, v: [f64; 2]) -> Matrix {
    let n = grid_n * grid_n;
    let hm = 1.0 / (grid_n as f64 + 1.0);
    let diff = 1.0 / (hm * hm);
    let (cx, cy) = (v[0] / (2.0 * hm), v[1] / (2.0 * hm));
    let mut a = Matrix::zeros(n, n);
    for i in 0..grid_n {
        for j in 0..grid_n {
            let k = i * grid_n + j;
            a[(k, k)] = -4.0 * diff;
            if j + 1 < grid_n {
                a[(k, k + 1)] = diff + cx;
            }
            if j > 0 {
                a[(k, k - 1)] = diff - cx;
            }
            if i + 1 < grid_n {
                a[(k, k + grid_n)] = diff + cy;
            }
            if i > 0 {
                a[(k, k - grid_n)] = diff - cy;
            }
        }
    }
    a
}

/// Convection-diffusion with `v = [10, 100]`, `B` the normalized indicator of
/// `[0.1, 0.3]^2`, `C = ones / n`, horizon 0.125.
pub fn gen_conv_diff(grid_n: usize) -> Result<ProblemInstance> {
    require(grid_n >= 4, || format!("conv-diff needs a grid of at least 4, got {grid_n}"))?;
    let n = grid_n * grid_n;
    let hm = 1.0 / (grid_n as f64 + 1.0);
    let inside = |idx: usize| {
        let s = (idx as f64 + 1.0) * hm;
        (0.1..=0.3).contains(&s)
    };
    let mut b = Matrix::zeros(n, 1);
    for i in 0..grid_n {
        for j in 0..grid_n {
            if inside(i) && inside(j) {
                b[(i * grid_n + j, 0)] = 1.0;
            }
        }
    }
    let norm = b.norm();
    b /= norm;
    Ok(ProblemInstance {
        name: format!("conv-diff-{grid_n}"),
        are: AreProblem::new(
            conv_diff_operator(grid_n, [10.0, 100.0]),
            b,
            Matrix::from_element(1, n, 1.0 / n as f64),
            None,
        )?,
        x0: SymMatrix::zeros(n),
        horizon: 0.125,
    })
}

/// Scalar `x' = 2 a x - b^2 x^2 + c^2`, `x(0) = 0`.
pub fn gen_scalar(a: f64, b: f64, c: f64, horizon: f64) -> ProblemInstance {
    let m = |v| Matrix::from_element(1, 1, v);
    ProblemInstance {
        name: format!("scalar({a},{b},{c})"),
        are: AreProblem {
            a: m(a),
            b: m(b),
            c: m(c),
            m: None,
        },
        x0: SymMatrix::zeros(1),
        horizon,
    }
}

/// `A = diag(-1, ..., -n)`, `B = ones`, `C = e_1^T`; `X_inf` has rank one.
pub fn gen_diag_rank1(n: usize) -> Result<ProblemInstance> {
    require(n >= 1, || "diag-rank1 needs n >= 1".to_string())?;
    let a = Matrix::from_fn(n, n, |i, j| if i == j { -(i as f64) - 1.0 } else { 0.0 });
    let mut c = Matrix::zeros(1, n);
    c[(0, 0)] = 1.0;
    Ok(ProblemInstance {
        name: format!("diag-rank1-{n}"),
        are: AreProblem::new(a, Matrix::from_element(n, 1, 1.0), c, None)?,
        x0: SymMatrix::zeros(n),
        horizon: 5.0,
    })
}

/// Absolute and relative errors in the spectral and Frobenius norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorMetrics {
    pub abs2: f64,
    pub rel2: f64,
    pub abs_f: f64,
    pub rel_f: f64,
}

const POWER_TOL: f64 = 1e-8;
const POWER_MAX_ITERS: usize = 500;

/// Spectral norm of a symmetric matrix by power iteration from a fixed
/// start vector. The estimate `||D v||` never decreases between sweeps.
pub fn power_norm2(d: &SymMatrix) -> f64 {
    let n = d.order();
    if n == 0 {
        return 0.0;
    }
    let d = d.as_matrix();
    let mut v = nalgebra::DVector::from_fn(n, |i, _| 1.0 + 0.5 * ((i + 1) as f64).sin());
    v /= v.norm();
    let mut est = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let w = d * &v;
        let next = w.norm();
        if next == 0.0 {
            return est;
        }
        let done = (next - est).abs() <= POWER_TOL * next;
        est = next;
        if done {
            break;
        }
        v = w / next;
    }
    est
}

/// `(||X - Xref||_2, ||X - Xref||_F)`.
pub fn absolute_errors(x: &SymMatrix, xref: &SymMatrix) -> (f64, f64) {
    let d = SymMatrix::from_square(x.as_matrix() - xref.as_matrix());
    (power_norm2(&d), d.as_matrix().norm())
}

pub fn error_metrics(x: &SymMatrix, xref: &SymMatrix) -> Result<ErrorMetrics> {
    if x.order() != xref.order() {
        return Err(Error::DimensionMismatch {
            context: "error_metrics",
            expected: format!("order {}", xref.order()),
            found: format!("order {}", x.order()),
        });
    }
    let (abs2, abs_f) = absolute_errors(x, xref);
    let (ref2, ref_f) = (power_norm2(xref), xref.as_matrix().norm());
    if ref_f == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok(ErrorMetrics {
        abs2,
        rel2: abs2 / ref2,
        abs_f,
        rel_f: abs_f / ref_f,
    })
}

/// `||X - Z Z^T||_2` for the low-rank ARE factor.
pub fn stationary_gap(x: &SymMatrix, are: &AreSolution) -> f64 {
    absolute_errors(x, &are.x_lowrank()).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::are::solve_are_newton;
    use crate::linalg::{complex_eigenvalues, sym_eig};

    #[test]
    fn tridiag_matches_published_pattern() {
        let p = gen_tridiag(3).unwrap();
        let expected = Matrix::from_row_slice(3, 3, &[-1.0, -5.0, 0.0, 5.0, -1.0, -5.0, 0.0, 5.0, -1.0]);
        assert_eq!(p.are.a, expected);
        assert_eq!(p.horizon, 15.0);
        let eig = complex_eigenvalues(&gen_tridiag(2).unwrap().are.a).unwrap();
        for l in eig {
            assert!((l.re + 1.0).abs() < 1e-14 && (l.im.abs() - 5.0).abs() < 1e-14);
        }
    }

    #[test]
    fn tridiag_symmetric_part_is_negative_identity() {
        for n in [2, 7, 20] {
            let a = gen_tridiag(n).unwrap().are.a;
            let sym = (&a + a.transpose()) * 0.5;
            assert_eq!(sym, -Matrix::identity(n, n));
        }
    }

    #[test]
    fn five_point_stencil_without_convection() {
        let a = conv_diff_operator(2, [0.0, 0.0]);
        let expected = Matrix::from_row_slice(
            4,
            4,
            &[-4.0, 1.0, 1.0, 0.0, 1.0, -4.0, 0.0, 1.0, 1.0, 0.0, -4.0, 1.0, 0.0, 1.0, 1.0, -4.0],
        ) * 9.0;
        assert!((a - expected).amax() < 1e-12);
    }

    #[test]
    fn conv_diff_is_stable() {
        for grid in [4, 8, 16, 20] {
            let p = gen_conv_diff(grid).unwrap();
            assert_eq!(p.order(), grid * grid);
            assert!((p.are.b.norm() - 1.0).abs() < 1e-15);
            let max_re = complex_eigenvalues(&p.are.a)
                .unwrap()
                .iter()
                .map(|l| l.re)
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(max_re < 0.0, "grid {grid}: {max_re}");
            let a = &p.are.a;
            let sym = SymMatrix::new(a + a.transpose()).unwrap();
            assert!(sym_eig(&sym).unwrap().values[0] < 0.0);
        }
        assert!(gen_conv_diff(3).is_err());
    }

    #[test]
    fn generators_are_deterministic() {
        for name in BENCHMARK_NAMES {
            let size = if name == "conv-diff" { 5 } else { 6 };
            assert_eq!(generate(name, size).unwrap(), generate(name, size).unwrap());
        }
        assert!(generate("rail", 10).is_err());
    }

    #[test]
    fn metric_cases() {
        let r = SymMatrix::identity(3);
        let m = error_metrics(&r, &r).unwrap();
        assert_eq!((m.abs2, m.rel2, m.abs_f, m.rel_f), (0.0, 0.0, 0.0, 0.0));

        let two = SymMatrix::new(Matrix::identity(3, 3) * 2.0).unwrap();
        let m = error_metrics(&two, &r).unwrap();
        assert!((m.rel2 - 1.0).abs() < 1e-12 && (m.rel_f - 1.0).abs() < 1e-15);

        let mut x = Matrix::identity(3, 3);
        x[(0, 0)] = 2.0;
        let m = error_metrics(&SymMatrix::new(x).unwrap(), &r).unwrap();
        assert!((m.abs2 - 1.0).abs() < 1e-8);
        assert!((m.abs_f - 1.0).abs() < 1e-15);
        assert!((m.rel2 - 1.0).abs() < 1e-8);
        assert!((m.rel_f - 1.0 / 3f64.sqrt()).abs() < 1e-15);

        assert_eq!(error_metrics(&r, &SymMatrix::zeros(3)), Err(Error::ZeroReference));
    }

    #[test]
    fn power_iteration_matches_eigen_norm() {
        let s = SymMatrix::new(Matrix::from_fn(6, 6, |i, j| ((i * 5 + j * 3) % 7) as f64 - 3.0)).unwrap();
        let exact = sym_eig(&s).unwrap().max_abs();
        assert!((power_norm2(&s) - exact).abs() <= 1e-6 * exact);
    }

    #[test]
    fn stationary_gap_cases() {
        let p = gen_tridiag(6).unwrap();
        let sol = solve_are_newton(&p.are, 1e-12, 50).unwrap();
        assert!(stationary_gap(&sol.x_lowrank(), &sol) <= 1e-12);
        let gap0 = stationary_gap(&SymMatrix::zeros(6), &sol);
        let norm = sym_eig(&sol.x).unwrap().max_abs();
        assert!((gap0 - norm).abs() <= 1e-8 * norm);
    }
}
