use nalgebra::linalg::Schur;
use nalgebra::Complex;

use super::dense::norm1;
use super::{ensure_finite, ensure_square, Matrix, SymMatrix};
use crate::error::{Error, Result};

/// Largest order accepted by the dense Lyapunov solvers.
pub const LYAPUNOV_MAX_ORDER: usize = 400;

/// Largest order for the Kronecker reference solver (`n^2 x n^2` system).
const KRONECKER_MAX_ORDER: usize = 40;

/// Solve `F X + X F^T + G = 0` for symmetric `X`.
///
/// Bartels-Stewart: reduce `F` to real Schur form `U T U^T`, solve the
/// quasi-triangular equation block by block, transform back.
pub fn lyapunov_solve(f: &Matrix, g: &SymMatrix) -> Result<SymMatrix> {
    let n = ensure_square(f)?;
    if g.order() != n {
        return Err(Error::DimensionMismatch {
            context: "lyapunov_solve right-hand side",
            expected: format!("{n}x{n}"),
            found: format!("{0}x{0}", g.order()),
        });
    }
    if n > LYAPUNOV_MAX_ORDER {
        return Err(Error::SizeExceeded {
            n,
            max: LYAPUNOV_MAX_ORDER,
        });
    }
    ensure_finite(f, "lyapunov_solve coefficient")?;
    ensure_finite(g.as_matrix(), "lyapunov_solve right-hand side")?;
    if n == 0 {
        return Ok(SymMatrix::zeros(0));
    }

    let cap = 100 * n.max(30);
    let (u, t) = Schur::try_new(f.clone(), f64::EPSILON, cap)
        .ok_or(Error::ConvergenceFailure {
            what: "real Schur decomposition",
            iterations: cap,
        })?
        .unpack();
    let blocks = diagonal_blocks(&t);
    check_spectrum(&t, &blocks, norm1(f))?;

    let rhs = -(u.transpose() * g.as_matrix() * &u);
    let y = solve_quasi_triangular(&t, &blocks, &rhs)?;
    let x = &u * y * u.transpose();
    ensure_finite(&x, "lyapunov_solve result")?;
    Ok(SymMatrix::from_square(x))
}

/// Reference solver through the `n^2 x n^2` Kronecker form
/// `(I (x) F + F (x) I) vec(X) = -vec(G)`. Only for small `n`.
pub fn lyapunov_kronecker(f: &Matrix, g: &SymMatrix) -> Result<SymMatrix> {
    let n = ensure_square(f)?;
    if n > KRONECKER_MAX_ORDER {
        return Err(Error::SizeExceeded {
            n,
            max: KRONECKER_MAX_ORDER,
        });
    }
    let ident = Matrix::identity(n, n);
    let op = ident.kronecker(f) + f.kronecker(&ident);
    let rhs = Matrix::from_column_slice(n * n, 1, (-g.as_matrix()).as_slice());
    let lu = op.lu();
    let vec_x = lu.solve(&rhs).ok_or(Error::SpectrumOverlap { min_gap: 0.0 })?;
    Ok(SymMatrix::from_square(Matrix::from_column_slice(
        n,
        n,
        vec_x.as_slice(),
    )))
}

/// `(start, size)` of the 1x1 and 2x2 diagonal blocks of a real Schur form.
fn diagonal_blocks(t: &Matrix) -> Vec<(usize, usize)> {
    let n = t.nrows();
    let mut blocks = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            blocks.push((i, 2));
            i += 2;
        } else {
            blocks.push((i, 1));
            i += 1;
        }
    }
    blocks
}

fn block_eigenvalues(t: &Matrix, (start, size): (usize, usize)) -> Vec<Complex<f64>> {
    if size == 1 {
        return vec![Complex::new(t[(start, start)], 0.0)];
    }
    let (a, b, c, d) = (
        t[(start, start)],
        t[(start, start + 1)],
        t[(start + 1, start)],
        t[(start + 1, start + 1)],
    );
    let half_trace = 0.5 * (a + d);
    let disc = 0.25 * (a - d) * (a - d) + b * c;
    if disc >= 0.0 {
        let r = disc.sqrt();
        vec![
            Complex::new(half_trace + r, 0.0),
            Complex::new(half_trace - r, 0.0),
        ]
    } else {
        let r = (-disc).sqrt();
        vec![
            Complex::new(half_trace, r),
            Complex::new(half_trace, -r),
        ]
    }
}

/// The Lyapunov operator has eigenvalues `l_i + l_j`; reject near-zero ones.
fn check_spectrum(t: &Matrix, blocks: &[(usize, usize)], fnorm: f64) -> Result<()> {
    let eigs: Vec<Complex<f64>> = blocks
        .iter()
        .flat_map(|&b| block_eigenvalues(t, b))
        .collect();
    let mut min_gap = f64::INFINITY;
    for (i, li) in eigs.iter().enumerate() {
        for lj in &eigs[i..] {
            min_gap = min_gap.min((li + lj).norm());
        }
    }
    if min_gap <= 1e-12 * fnorm.max(f64::MIN_POSITIVE) {
        return Err(Error::SpectrumOverlap { min_gap });
    }
    Ok(())
}

/// Solve `T Y + Y T^T = R` with `T` quasi upper triangular.
fn solve_quasi_triangular(t: &Matrix, blocks: &[(usize, usize)], r: &Matrix) -> Result<Matrix> {
    let n = t.nrows();
    let mut y = Matrix::zeros(n, n);
    for &(j0, q) in blocks.iter().rev() {
        let tail = n - (j0 + q);
        // Column block of R minus the contribution of already solved columns.
        let mut col = r.columns(j0, q).into_owned();
        if tail > 0 {
            let y_tail = y.columns(j0 + q, tail);
            let t_row = t.view((j0, j0 + q), (q, tail));
            col -= y_tail * t_row.transpose();
        }
        let s = t.view((j0, j0), (q, q)).into_owned();
        for &(i0, p) in blocks.iter().rev() {
            let below = n - (i0 + p);
            let mut rhs = col.rows(i0, p).into_owned();
            if below > 0 {
                let t_row = t.view((i0, i0 + p), (p, below));
                let y_below = y.view((i0 + p, j0), (below, q));
                rhs -= t_row * y_below;
            }
            let diag = t.view((i0, i0), (p, p)).into_owned();
            let block = small_sylvester(&diag, &s, &rhs)?;
            y.view_mut((i0, j0), (p, q)).copy_from(&block);
        }
    }
    Ok(y)
}

/// `P Y + Y S^T = C` for blocks of order at most two.
fn small_sylvester(p: &Matrix, s: &Matrix, c: &Matrix) -> Result<Matrix> {
    let (pn, qn) = (p.nrows(), s.nrows());
    if pn == 1 && qn == 1 {
        let d = p[(0, 0)] + s[(0, 0)];
        if d == 0.0 {
            return Err(Error::SpectrumOverlap { min_gap: 0.0 });
        }
        return Ok(Matrix::from_element(1, 1, c[(0, 0)] / d));
    }
    let op = Matrix::identity(qn, qn).kronecker(p) + s.kronecker(&Matrix::identity(pn, pn));
    let rhs = Matrix::from_column_slice(pn * qn, 1, c.as_slice());
    let sol = op
        .lu()
        .solve(&rhs)
        .ok_or(Error::SpectrumOverlap { min_gap: 0.0 })?;
    Ok(Matrix::from_column_slice(pn, qn, sol.as_slice()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::expm;
    use proptest::prelude::*;

    fn sym(n: usize, v: &[f64]) -> SymMatrix {
        SymMatrix::new(Matrix::from_row_slice(n, n, v)).unwrap()
    }

    fn residual(f: &Matrix, x: &SymMatrix, g: &SymMatrix) -> f64 {
        (f * x.as_matrix() + x.as_matrix() * f.transpose() + g.as_matrix()).norm()
    }

    #[test]
    fn scalar_equation() {
        let x = lyapunov_solve(&Matrix::from_element(1, 1, -1.0), &sym(1, &[2.0])).unwrap();
        assert!((x.as_matrix()[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_right_hand_side() {
        let x = lyapunov_solve(&-Matrix::identity(2, 2), &SymMatrix::zeros(2)).unwrap();
        assert_eq!(x.as_matrix().amax(), 0.0);
    }

    #[test]
    fn diagonal_coefficient_entrywise() {
        // x_ij = g_ij / (-f_ii - f_jj)
        let f = Matrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]);
        let x = lyapunov_solve(&f, &sym(2, &[1.0, 1.0, 1.0, 1.0])).unwrap();
        let expected = Matrix::from_row_slice(2, 2, &[0.5, 1.0 / 3.0, 1.0 / 3.0, 0.25]);
        assert!((x.as_matrix() - expected).amax() < 1e-15);
    }

    #[test]
    fn overlapping_spectrum_is_rejected() {
        let f = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(
            lyapunov_solve(&f, &SymMatrix::identity(2)),
            Err(Error::SpectrumOverlap { .. })
        ));
        assert!(matches!(
            lyapunov_solve(&Matrix::zeros(1, 1), &SymMatrix::identity(1)),
            Err(Error::SpectrumOverlap { .. })
        ));
    }

    #[test]
    fn oversized_problem_is_rejected() {
        let n = LYAPUNOV_MAX_ORDER + 1;
        assert!(matches!(
            lyapunov_solve(&Matrix::zeros(n, n), &SymMatrix::zeros(n)),
            Err(Error::SizeExceeded { .. })
        ));
    }

    #[test]
    fn complex_pair_blocks_match_kronecker_oracle() {
        // Rotation-dominated coefficient: the Schur form has 2x2 blocks.
        let n = 9;
        let f = Matrix::from_fn(n, n, |i, j| {
            if i == j {
                -1.0 - 0.1 * i as f64
            } else if i + 1 == j {
                -5.0
            } else if j + 1 == i {
                5.0
            } else {
                0.02 * ((i * 7 + j * 3) % 5) as f64
            }
        });
        let g = SymMatrix::gram(&Matrix::from_fn(n, 2, |i, j| (i + j) as f64 / n as f64));
        let x = lyapunov_solve(&f, &g).unwrap();
        let oracle = lyapunov_kronecker(&f, &g).unwrap();
        assert!((x.as_matrix() - oracle.as_matrix()).amax() <= 1e-11 * oracle.as_matrix().amax());
        assert!(residual(&f, &x, &g) <= 1e-9 * g.as_matrix().norm().max(1.0));
    }

    #[test]
    fn integral_identity_for_stable_coefficient() {
        let f = Matrix::from_row_slice(3, 3, &[-1.0, 2.0, 0.0, -2.0, -1.5, 0.5, 0.0, 0.3, -2.0]);
        let g = sym(3, &[1.0, 0.2, 0.0, 0.2, 1.0, 0.1, 0.0, 0.1, 0.5]);
        let x = lyapunov_solve(&f, &g).unwrap();

        // trapezoid rule for \int_0^T e^{tF} G e^{tF^T} dt with ||e^{TF}|| <= 1e-6
        let horizon = 16.0;
        assert!(expm::expm(&(&f * horizon), None).unwrap().norm() <= 1e-6);
        let steps = 16000;
        let dt = horizon / steps as f64;
        let step = expm::expm(&(&f * dt), None).unwrap();
        let mut e = Matrix::identity(3, 3);
        let mut integral = Matrix::zeros(3, 3);
        for k in 0..=steps {
            let w = if k == 0 || k == steps { 0.5 } else { 1.0 };
            integral += &e * g.as_matrix() * e.transpose() * (w * dt);
            e = &e * &step;
        }
        assert!((x.as_matrix() - &integral).norm() <= 1e-5 * integral.norm());
        // stable F, G >= 0  =>  X >= 0
        let eig = crate::linalg::sym_eig(&x).unwrap();
        assert!(eig.values.iter().all(|&v| v >= -1e-14));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn residual_is_small_for_stable_shifts(
            entries in proptest::collection::vec(-1.0f64..1.0, 36),
            weights in proptest::collection::vec(-1.0f64..1.0, 12),
        ) {
            let n = 6;
            let f = Matrix::from_vec(n, n, entries) - Matrix::identity(n, n) * 4.0;
            let g = SymMatrix::gram(&Matrix::from_vec(n, 2, weights));
            let x = lyapunov_solve(&f, &g).unwrap();
            prop_assert!(residual(&f, &x, &g) <= 1e-9 * g.as_matrix().norm().max(1.0));
            let oracle = lyapunov_kronecker(&f, &g).unwrap();
            prop_assert!((x.as_matrix() - oracle.as_matrix()).amax() <= 1e-10 * oracle.as_matrix().amax().max(1.0));
        }
    }
}
