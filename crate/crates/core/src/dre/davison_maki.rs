use nalgebra::linalg::QR;

use super::{step_count, DreTrajectory, NdreCoefficients, StepDiagnostics};
use crate::error::{Error, Result};
use crate::linalg::{cond2, expm, norm2, solve_right, subspace_gap, vstack, Matrix, SymMatrix};

/// Default guard on `||e^{hM}||_1`.
pub const DEFAULT_TOL_EXP: f64 = 1e10;
/// Steps whose `U` factor is worse conditioned than this abort.
pub const SINGULAR_U_COND: f64 = 1e12;

/// How the Davison-Maki iterates are propagated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DmVariant {
    /// `Theta_k = Theta_{k-1} Theta_h`, then `[U; V] = Theta_k [I; M0]`.
    ExpUpdate,
    /// `[U; V] <- Theta_h [U; V]`.
    UvUpdate,
}

struct Blocks {
    t11: Matrix,
    t12: Matrix,
    t21: Matrix,
    t22: Matrix,
}

fn split(theta: &Matrix, n: usize) -> Blocks {
    let m = theta.nrows() - n;
    Blocks {
        t11: theta.view((0, 0), (n, n)).into_owned(),
        t12: theta.view((0, n), (n, m)).into_owned(),
        t21: theta.view((n, 0), (m, n)).into_owned(),
        t22: theta.view((n, n), (m, m)).into_owned(),
    }
}

/// `W = V U^{-1}` with the conditioning check shared by all variants.
fn quotient(u: &Matrix, v: &Matrix, step: usize) -> Result<(Matrix, StepDiagnostics)> {
    if !u.iter().chain(v.iter()).all(|x| x.is_finite()) {
        return Err(Error::NormOverflow { step });
    }
    let cond_u = cond2(u);
    if !(cond_u <= SINGULAR_U_COND) {
        return Err(Error::SingularU {
            step,
            condition: cond_u,
        });
    }
    let w = solve_right(v, u).map_err(|_| Error::SingularU {
        step,
        condition: cond_u,
    })?;
    let diag = StepDiagnostics {
        cond_u,
        norm_u: norm2(u),
        norm_v: norm2(v),
    };
    Ok((w, diag))
}

fn maybe_symmetrize(w: Matrix, symmetrize: bool) -> Matrix {
    if symmetrize {
        SymMatrix::from_square(w).into_matrix()
    } else {
        w
    }
}

/// Classical Davison-Maki: `W_k = V_k U_k^{-1}` with `[U_k; V_k] = e^{k h M} [I; M0]`.
pub fn davison_maki(
    c: &NdreCoefficients,
    h: f64,
    tf: f64,
    variant: DmVariant,
) -> Result<DreTrajectory> {
    let steps = step_count(h, tf)?;
    let (n, _) = c.dims();
    let theta_h = expm(&(c.block() * h), None)?;
    let tag = match variant {
        DmVariant::ExpUpdate => "dm-exp",
        DmVariant::UvUpdate => "dm",
    };
    let mut traj = DreTrajectory::new(tag, h, None);
    traj.push(0, c.m0.clone());

    let start = vstack(&Matrix::identity(n, n), &c.m0);
    let mut theta = theta_h.clone();
    let mut uv = start.clone();
    for k in 1..=steps {
        match variant {
            DmVariant::ExpUpdate => {
                if k > 1 {
                    theta = &theta * &theta_h;
                }
                uv = &theta * &start;
            }
            DmVariant::UvUpdate => uv = &theta_h * &uv,
        }
        let u = uv.rows(0, n).into_owned();
        let v = uv.rows(n, uv.nrows() - n).into_owned();
        let (w, diag) = quotient(&u, &v, k)?;
        traj.push(k, maybe_symmetrize(w, c.symmetric));
        traj.diagnostics.push(diag);
    }
    Ok(traj)
}

/// Modified Davison-Maki: every step restarts from `[I; W_{k-1}]`, so only
/// the single exponential `e^{hM}` is ever needed and the iterates stay bounded.
pub fn modified_davison_maki(
    c: &NdreCoefficients,
    h: f64,
    tf: f64,
    tol_exp: f64,
    symmetrize: bool,
) -> Result<DreTrajectory> {
    if !(tol_exp > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tol_exp must be positive, got {tol_exp}"
        )));
    }
    let steps = step_count(h, tf)?;
    let (n, _) = c.dims();
    let theta = expm(&(c.block() * h), Some(tol_exp))?;
    let b = split(&theta, n);

    let mut traj = DreTrajectory::new("moddm", h, Some(tol_exp));
    let mut w = c.m0.clone();
    traj.push(0, w.clone());
    for k in 1..=steps {
        let u = &b.t11 + &b.t12 * &w;
        let v = &b.t21 + &b.t22 * &w;
        let (next, diag) = quotient(&u, &v, k)?;
        w = maybe_symmetrize(next, symmetrize);
        traj.push(k, w.clone());
        traj.diagnostics.push(diag);
    }
    Ok(traj)
}

/// One step of the subspace comparison between the two Davison-Maki forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeStep {
    pub step: usize,
    /// Distance between `range([U_dm; V_dm])` and `range([I; W_mod])`.
    pub gap: f64,
    pub cond_u_dm: f64,
}

fn orthonormal_columns(m: &Matrix) -> Matrix {
    QR::new(m.clone()).q()
}

/// Runs classical (`[U; V] <- Theta_h [U; V]`) and modified Davison-Maki side
/// by side for `k` steps and compares the spanned subspaces after each step.
/// Stops early, without error, once either method hits a singular `U`.
pub fn range_equivalence_series(c: &NdreCoefficients, h: f64, k: usize) -> Result<Vec<RangeStep>> {
    let (n, _) = c.dims();
    let theta = expm(&(c.block() * h), None)?;
    let b = split(&theta, n);
    let mut uv = vstack(&Matrix::identity(n, n), &c.m0);
    let mut w = c.m0.clone();
    let mut out = Vec::with_capacity(k);
    for step in 1..=k {
        uv = &theta * &uv;
        let u_dm = uv.rows(0, n).into_owned();
        let cond_u_dm = cond2(&u_dm);
        if !uv.iter().all(|x| x.is_finite()) {
            break;
        }
        let u = &b.t11 + &b.t12 * &w;
        let v = &b.t21 + &b.t22 * &w;
        let Ok((next, _)) = quotient(&u, &v, step) else {
            break;
        };
        w = next;
        let mod_basis = vstack(&Matrix::identity(n, n), &w);
        let gap = subspace_gap(&orthonormal_columns(&uv), &orthonormal_columns(&mod_basis));
        out.push(RangeStep {
            step,
            gap,
            cond_u_dm,
        });
    }
    Ok(out)
}

/// Subspace gap after `k` steps; see [`range_equivalence_series`].
pub fn range_equivalence_check(c: &NdreCoefficients, h: f64, k: usize) -> Result<f64> {
    let series = range_equivalence_series(c, h, k)?;
    match series.last() {
        Some(last) if last.step == k => Ok(last.gap),
        _ => Err(Error::SingularU {
            step: series.len() + 1,
            condition: f64::INFINITY,
        }),
    }
}
