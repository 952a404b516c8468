//! Galerkin projection of the DRE onto the dominant range of `X_inf`.
//!
//! With `X_inf ~ Q S^2 Q^T` the solution from `X(0) = 0` is sought as
//! `X(t) = Q (S^2 - X~(t)) Q^T`, where the small `X~` solves
//! `X~' = A_F^T X~ + X~ A_F + X~ B_F B_F^T X~`, `X~(0) = S^2`, with
//! `A_F = Q^T (A~ - B B^T Z Z^T) Q` and `B_F = Q^T B`.

use crate::are::{AreProblem, AreSolution, StandardForm};
use crate::dre::{modified_davison_maki, DreTrajectory, NdreCoefficients};
use crate::error::{Error, Result};
use crate::linalg::{compact_svd, expm, norm2, scale_columns, sym_eig, Matrix, SymMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinModel {
    /// Orthonormal trial basis, `n x k`.
    pub q: Matrix,
    /// Retained squared singular values, `X~(0)`.
    pub s2: Vec<f64>,
    /// Truncated factor `Z_N = Q diag(S)`.
    pub z: Matrix,
    pub a_f: Matrix,
    pub b_f: Matrix,
    pub truncation_tol: f64,
    /// `(||Q^T R(Z Z^T) Q||_2, ||R(Z Z^T)||_2)` for the standardized residual.
    pub projected_residual: (f64, f64),
}

impl GalerkinModel {
    pub fn dim(&self) -> usize {
        self.s2.len()
    }

    pub fn order(&self) -> usize {
        self.q.nrows()
    }

    /// True when the trial space is empty and the solution is identically zero.
    pub fn is_degenerate(&self) -> bool {
        self.s2.is_empty()
    }
}

/// Standardized residual `A~^T X + X A~ - X B B^T X + C~^T C~`.
pub fn standard_residual(sf: &StandardForm, x: &SymMatrix) -> SymMatrix {
    let ax = sf.a.transpose() * x.as_matrix();
    let btx = sf.b.transpose() * x.as_matrix();
    SymMatrix::from_square(
        &ax + ax.transpose() - btx.transpose() * &btx + sf.c.transpose() * &sf.c,
    )
}

/// Builds the trial space from the ARE factor, dropping singular values below
/// `truncation_tol * S_1` (machine epsilon when `None`).
pub fn build_model(
    p: &AreProblem,
    are: &AreSolution,
    truncation_tol: Option<f64>,
) -> Result<GalerkinModel> {
    let tol = truncation_tol.unwrap_or(f64::EPSILON);
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "truncation tolerance must lie in (0, 1), got {tol}"
        )));
    }
    let sf = p.standardize()?;
    let n = p.order();
    let svd = compact_svd(&are.z)?;
    let s1 = svd.s.first().copied().unwrap_or(0.0);
    let k = svd.s.iter().take_while(|&&s| s >= tol * s1).count();
    let q = svd.q.columns(0, k).into_owned();
    let s = &svd.s[..k];
    let z = scale_columns(&q, s);

    let bt_z = sf.b.transpose() * &z;
    let b_f = q.transpose() * &sf.b;
    let a_f = q.transpose() * &sf.a * &q - &b_f * (&bt_z * (z.transpose() * &q));

    let residual = standard_residual(&sf, &SymMatrix::gram(&z));
    let full = sym_eig(&residual)?.max_abs();
    let projected = if k == 0 {
        0.0
    } else {
        let r = q.transpose() * residual.as_matrix() * &q;
        sym_eig(&SymMatrix::from_square(r))?.max_abs()
    };
    debug_assert_eq!(q.nrows(), n);

    Ok(GalerkinModel {
        q,
        s2: s.iter().map(|v| v * v).collect(),
        z,
        a_f,
        b_f,
        truncation_tol: tol,
        projected_residual: (projected, full),
    })
}

/// Reduced NDRE: `M11 = -A_F`, `M12 = -B_F B_F^T`, `M21 = 0`, `M22 = A_F^T`,
/// `W(0) = diag(S^2)`.
pub fn reduced_coefficients(m: &GalerkinModel) -> Result<NdreCoefficients> {
    let k = m.dim();
    let mut c = NdreCoefficients::new(
        -&m.a_f,
        -(&m.b_f * m.b_f.transpose()),
        Matrix::zeros(k, k),
        m.a_f.transpose(),
        Matrix::from_diagonal(&nalgebra::DVector::from_column_slice(&m.s2)),
    )?;
    c.symmetric = true;
    Ok(c)
}

/// Integrates the reduced equation with modified Davison-Maki.
/// For a degenerate model the trajectory holds `0 x 0` states.
pub fn solve_reduced(m: &GalerkinModel, h: f64, tf: f64, tol_exp: f64) -> Result<DreTrajectory> {
    if m.is_degenerate() {
        let steps = crate::dre::step_count(h, tf)?;
        let mut traj = DreTrajectory {
            times: Vec::with_capacity(steps + 1),
            states: Vec::with_capacity(steps + 1),
            diagnostics: Vec::new(),
            meta: crate::dre::TrajectoryMeta {
                solver: "galerkin".into(),
                h,
                tol_exp: Some(tol_exp),
            },
        };
        for k in 0..=steps {
            traj.times.push(k as f64 * h);
            traj.states.push(Matrix::zeros(0, 0));
        }
        return Ok(traj);
    }
    let mut traj = modified_davison_maki(&reduced_coefficients(m)?, h, tf, tol_exp, true)?;
    traj.meta.solver = "galerkin".into();
    Ok(traj)
}

/// `X(t_k) = Q (S^2 - X~(t_k)) Q^T`.
pub fn reconstruct(m: &GalerkinModel, r: &DreTrajectory, k: usize) -> SymMatrix {
    let n = m.order();
    if m.is_degenerate() {
        return SymMatrix::zeros(n);
    }
    let mut inner = -r.states[k].clone();
    for (i, s2) in m.s2.iter().enumerate() {
        inner[(i, i)] += s2;
    }
    SymMatrix::from_square(&m.q * inner * m.q.transpose())
}

/// Relative defect of `e^{t Â^T} Z Z^T = Q e^{t Q^T Â^T Q} S^2 Q^T` at
/// `t in {0.1, 1, 10} / ||Â||_2`, maximized over the three times.
pub fn exp_invariance_gap(p: &AreProblem, are: &AreSolution, m: &GalerkinModel) -> Result<f64> {
    if m.is_degenerate() {
        return Ok(0.0);
    }
    let sf = p.standardize()?;
    let a_hat_t = sf.closed_loop(&are.x).transpose();
    let scale = norm2(&a_hat_t);
    if scale == 0.0 {
        return Ok(0.0);
    }
    let zzt = m.z.clone() * m.z.transpose();
    let denom = zzt.norm();
    let reduced = m.q.transpose() * &a_hat_t * &m.q;
    let qs2 = scale_columns(&m.q, &m.s2);
    let mut worst = 0.0f64;
    for factor in [0.1, 1.0, 10.0] {
        let t = factor / scale;
        let lhs = expm(&(&a_hat_t * t), None)? * &zzt;
        let rhs = &m.q * expm(&(&reduced * t), None)? * qs2.transpose();
        worst = worst.max((lhs - rhs).norm() / denom);
    }
    Ok(worst)
}

/// Outcome of checking `|q_i^T X q_j| <= sqrt(l_i l_j) + 1e-10 l_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct EntryDecayReport {
    pub checked: usize,
    pub violations: usize,
    /// Largest `|q_i^T X q_j| - sqrt(l_i l_j)` seen; non-positive when the
    /// inequality holds without slack.
    pub max_excess: f64,
}

/// Entry bound in the eigenbasis of `X_inf`; negative eigenvalues count as zero.
pub fn entry_decay_check(snapshots: &[SymMatrix], x_inf: &SymMatrix) -> Result<EntryDecayReport> {
    let eig = sym_eig(x_inf)?;
    let lam: Vec<f64> = eig.values.iter().map(|v| v.max(0.0)).collect();
    let slack = 1e-10 * lam.first().copied().unwrap_or(0.0);
    let mut report = EntryDecayReport {
        checked: 0,
        violations: 0,
        max_excess: f64::NEG_INFINITY,
    };
    for x in snapshots {
        let y = eig.vectors.transpose() * x.as_matrix() * &eig.vectors;
        for j in 0..lam.len() {
            for i in 0..lam.len() {
                let excess = y[(i, j)].abs() - (lam[i] * lam[j]).sqrt();
                report.checked += 1;
                report.max_excess = report.max_excess.max(excess);
                if excess > slack {
                    report.violations += 1;
                }
            }
        }
    }
    Ok(report)
}

/// `sqrt(sum over i > k or j > k of l_i l_j)` for eigenvalues sorted
/// non-increasingly; negative values are clamped to zero.
pub fn projection_error_bound(eigenvalues: &[f64], k: usize) -> f64 {
    let k = k.min(eigenvalues.len());
    let head: f64 = eigenvalues[..k].iter().map(|v| v.max(0.0)).sum();
    let tail: f64 = eigenvalues[k..].iter().map(|v| v.max(0.0)).sum();
    (tail * (tail + 2.0 * head)).sqrt()
}

/// `Q Q^T X Q Q^T`, the Frobenius-best approximation with range in `range(Q)`.
pub fn best_approximation(x: &SymMatrix, q: &Matrix) -> SymMatrix {
    let inner = q.transpose() * x.as_matrix() * q;
    SymMatrix::from_square(q * inner * q.transpose())
}

/// `||X - Q Q^T X Q Q^T||_F`.
pub fn projection_error(x: &SymMatrix, q: &Matrix) -> f64 {
    (x.as_matrix() - best_approximation(x, q).as_matrix()).norm()
}
