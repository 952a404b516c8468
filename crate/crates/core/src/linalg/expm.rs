use super::dense::norm1;
use super::{ensure_finite, ensure_square, solve_linear, Matrix, SymMatrix};
use crate::error::{Error, Result};

/// Numerator coefficients of the degree-13 diagonal Padé approximant to `exp`.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Largest 1-norm for which the unscaled degree-13 approximant is accurate to
/// unit roundoff.
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring around a degree-13 Padé core.
///
/// With `norm_guard = Some(g)` the call fails with
/// [`Error::NormGuardExceeded`] when `||e^A||_1 > g`.
pub fn expm(a: &Matrix, norm_guard: Option<f64>) -> Result<Matrix> {
    let n = ensure_square(a)?;
    ensure_finite(a, "expm input")?;
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let anorm = norm1(a);
    let squarings = if anorm > THETA13 {
        (anorm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a * 2f64.powi(-squarings);

    let ident = Matrix::identity(n, n);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &PADE13;

    let inner_u = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]);
    let u = &scaled * (inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &ident * b[1]);
    let inner_v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]);
    let v = inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &ident * b[0];

    let mut r = solve_linear(&(&v - &u), &(&v + &u))?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    ensure_finite(&r, "expm result")?;

    if let Some(guard) = norm_guard {
        let norm = norm1(&r);
        if norm > guard {
            return Err(Error::NormGuardExceeded { norm, guard });
        }
    }
    Ok(r)
}

/// Finite-horizon Gramian `G(t) = \int_0^t e^{sF} Q e^{sF^T} ds` together with `e^{tF}`.
///
/// The Gramian for a short interval `tau = t / 2^k` comes from the (1,2) block
/// of the exponential of the block triangular matrix `[[-F, Q], [0, F^T]]`;
/// `k` is chosen so `||tau F||_1 <= 1`, which keeps the growing block
/// harmless. The interval is then doubled `k` times with
/// `G(2s) = G(s) + e^{sF} G(s) e^{sF^T}`, which only adds positive terms.
pub fn finite_gramian(f: &Matrix, q: &SymMatrix, t: f64) -> Result<(SymMatrix, Matrix)> {
    let n = ensure_square(f)?;
    if q.order() != n {
        return Err(Error::DimensionMismatch {
            context: "finite_gramian weight",
            expected: format!("{n}x{n}"),
            found: format!("{0}x{0}", q.order()),
        });
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "Gramian horizon must be finite and non-negative, got {t}"
        )));
    }
    if t == 0.0 {
        return Ok((SymMatrix::zeros(n), Matrix::identity(n, n)));
    }
    let fnorm = norm1(f) * t;
    let doublings = if fnorm > 1.0 {
        fnorm.log2().ceil() as i32
    } else {
        0
    };
    let tau = t * 2f64.powi(-doublings);

    let block = super::block2x2(
        &(-f * tau),
        &(q.as_matrix() * tau),
        &Matrix::zeros(n, n),
        &(f.transpose() * tau),
    );
    let e = expm(&block, None)?;
    let f12 = e.view((0, n), (n, n)).into_owned();
    let mut exp_f = e.view((n, n), (n, n)).transpose();
    let mut gram = SymMatrix::from_square(&exp_f * f12);

    for _ in 0..doublings {
        let next = gram.as_matrix() + &exp_f * gram.as_matrix() * exp_f.transpose();
        gram = SymMatrix::from_square(next);
        exp_f = &exp_f * &exp_f;
    }
    ensure_finite(gram.as_matrix(), "finite_gramian result")?;
    Ok((gram, exp_f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Truncated Taylor series, accurate for small-norm arguments only.
    fn taylor_expm(a: &Matrix, terms: usize) -> Matrix {
        let n = a.nrows();
        let mut sum = Matrix::identity(n, n);
        let mut term = Matrix::identity(n, n);
        for k in 1..terms {
            term = &term * a / k as f64;
            sum += &term;
        }
        sum
    }

    #[test]
    fn exponential_of_zero_is_identity() {
        let e = expm(&Matrix::zeros(2, 2), None).unwrap();
        assert_eq!(e, Matrix::identity(2, 2));
    }

    #[test]
    fn nilpotent_series_terminates() {
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let e = expm(&a, None).unwrap();
        let expected = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!((e - expected).amax() < 1e-15);
    }

    #[test]
    fn involution_gives_hyperbolic_functions() {
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let oracle = taylor_expm(&a, 30);
        let (c, s) = (1f64.cosh(), 1f64.sinh());
        let expected = Matrix::from_row_slice(2, 2, &[c, s, s, c]);
        assert!((&oracle - &expected).amax() < 1e-15);
        let e = expm(&a, None).unwrap();
        assert!((e - expected).amax() < 1e-14);
    }

    #[test]
    fn norm_guard_trips() {
        let a = Matrix::from_row_slice(1, 1, &[5.0]);
        match expm(&a, Some(100.0)) {
            Err(Error::NormGuardExceeded { norm, guard }) => {
                assert!((norm - 5f64.exp()).abs() < 1e-10);
                assert_eq!(guard, 100.0);
            }
            other => panic!("expected NormGuardExceeded, got {other:?}"),
        }
        assert!(expm(&a, Some(1000.0)).is_ok());
    }

    #[test]
    fn large_norm_diagonal_is_accurate() {
        let a = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-30.0, 2.5, 10.0]));
        let e = expm(&a, None).unwrap();
        for (i, x) in [-30.0f64, 2.5, 10.0].iter().enumerate() {
            assert!((e[(i, i)] - x.exp()).abs() <= 1e-13 * x.exp());
        }
    }

    #[test]
    fn gramian_matches_scalar_integral() {
        // \int_0^t e^{2 s f} q ds = q (e^{2 f t} - 1) / (2 f)
        for &(f, q, t) in &[(-1.5, 2.0, 0.7), (-20.0, 1.0, 3.0), (0.8, 0.5, 2.0)] {
            let (g, e) = finite_gramian(
                &Matrix::from_element(1, 1, f),
                &SymMatrix::new(Matrix::from_element(1, 1, q)).unwrap(),
                t,
            )
            .unwrap();
            let exact = q * ((2.0 * f * t).exp() - 1.0) / (2.0 * f);
            assert!((g.as_matrix()[(0, 0)] - exact).abs() <= 1e-13 * exact.abs());
            assert!((e[(0, 0)] - (f * t).exp()).abs() <= 1e-13 * (f * t).exp());
        }
    }

    #[test]
    fn gramian_matches_trapezoid_quadrature() {
        let f = Matrix::from_row_slice(2, 2, &[-1.0, 3.0, -2.0, -0.5]);
        let q = SymMatrix::new(Matrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 2.0])).unwrap();
        let t = 2.0;
        let (g, _) = finite_gramian(&f, &q, t).unwrap();
        let steps = 4000;
        let dt = t / steps as f64;
        let step = expm(&(&f * dt), None).unwrap();
        let mut e = Matrix::identity(2, 2);
        let mut integral = Matrix::zeros(2, 2);
        for k in 0..=steps {
            let w = if k == 0 || k == steps { 0.5 } else { 1.0 };
            integral += &e * q.as_matrix() * e.transpose() * (w * dt);
            e = &e * &step;
        }
        assert!((g.as_matrix() - integral).amax() < 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn semigroup_property(entries in proptest::collection::vec(-1.0f64..1.0, 16), scale in 0.1f64..2.5) {
            let a = Matrix::from_vec(4, 4, entries) * scale;
            prop_assume!(norm1(&a) <= 10.0);
            let e1 = expm(&a, None).unwrap();
            let e2 = expm(&(&a * 2.0), None).unwrap();
            let err = (&e1 * &e1 - &e2).norm();
            prop_assert!(err <= 1e-8 * e2.norm());
            // the exponential is always invertible
            prop_assert!(solve_linear(&e1, &e1).is_ok());
        }
    }
}
