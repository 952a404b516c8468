use crate::are::{AreSolution, StandardForm};
use crate::error::{Error, Result};
use crate::linalg::{cond2, expm, finite_gramian, lyapunov_solve, solve_linear, Matrix, SymMatrix};

const BRACKET_COND: f64 = 1e12;

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("time must be non-negative, got {t}")))
    }
}

/// `X* - E^T D (I - K D)^{-1} E` with the bracket solved, not inverted.
fn assemble(xstar: &SymMatrix, d: &Matrix, k: &Matrix, e: &Matrix) -> Result<SymMatrix> {
    let n = d.nrows();
    let bracket = Matrix::identity(n, n) - k * d;
    let condition = cond2(&bracket);
    if !(condition <= BRACKET_COND) {
        return Err(Error::SingularBracket { condition });
    }
    let inner = solve_linear(&bracket, e).map_err(|_| Error::SingularBracket { condition })?;
    let x = xstar.as_matrix() - e.transpose() * d * inner;
    Ok(SymMatrix::from_square(x))
}

/// `X(t)` from any symmetric ARE solution `X*`, using the finite-horizon
/// Gramian `G(t) = \int_0^t e^{s Â} B B^T e^{s Â^T} ds` of `Â = A - B B^T X*`.
pub fn solution_formula_i(
    sf: &StandardForm,
    x0: &SymMatrix,
    xstar: &SymMatrix,
    t: f64,
) -> Result<SymMatrix> {
    check_time(t)?;
    let a_hat = sf.closed_loop(xstar);
    let (g, e) = finite_gramian(&a_hat, &sf.bbt(), t)?;
    let d = xstar.as_matrix() - x0.as_matrix();
    assemble(xstar, &d, g.as_matrix(), &e)
}

/// `X(t)` from the stabilizing solution, with the Gramian written as
/// `X_L - e^{tÂ} X_L e^{tÂ^T}` where `Â X_L + X_L Â^T + B B^T = 0`.
#[derive(Debug, Clone)]
pub struct FormulaII {
    a_hat: Matrix,
    x_inf: SymMatrix,
    x_l: SymMatrix,
    d: Matrix,
}

impl FormulaII {
    pub fn new(sf: &StandardForm, x0: &SymMatrix, are: &AreSolution) -> Result<Self> {
        let a_hat = sf.closed_loop(&are.x);
        let x_l = lyapunov_solve(&a_hat, &sf.bbt())?;
        Ok(Self {
            d: are.x.as_matrix() - x0.as_matrix(),
            x_inf: are.x.clone(),
            a_hat,
            x_l,
        })
    }

    pub fn closed_loop(&self) -> &Matrix {
        &self.a_hat
    }

    pub fn eval(&self, t: f64) -> Result<SymMatrix> {
        check_time(t)?;
        let e = expm(&(&self.a_hat * t), None)?;
        let xl = self.x_l.as_matrix();
        let k = xl - &e * xl * e.transpose();
        assemble(&self.x_inf, &self.d, &k, &e)
    }
}

pub fn solution_formula_ii(
    sf: &StandardForm,
    x0: &SymMatrix,
    are: &AreSolution,
    t: f64,
) -> Result<SymMatrix> {
    FormulaII::new(sf, x0, are)?.eval(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::are::{solve_are_newton, AreProblem};
    use crate::dre::{embed_dre, modified_davison_maki, DEFAULT_TOL_EXP};

    fn scalar_problem() -> (AreProblem, StandardForm, AreSolution) {
        let one = Matrix::from_element(1, 1, 1.0);
        let p = AreProblem::new(-one.clone(), one.clone(), one, None).unwrap();
        let sf = p.standardize().unwrap();
        let sol = solve_are_newton(&p, 1e-14, 50).unwrap();
        (p, sf, sol)
    }

    #[test]
    fn initial_value_is_reproduced() {
        let (_, sf, sol) = scalar_problem();
        let x0 = SymMatrix::new(Matrix::from_element(1, 1, 0.3)).unwrap();
        assert!((solution_formula_i(&sf, &x0, &sol.x, 0.0).unwrap().as_matrix()[(0, 0)] - 0.3).abs() < 1e-15);
        assert!((solution_formula_ii(&sf, &x0, &sol, 0.0).unwrap().as_matrix()[(0, 0)] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn stationary_start_stays_put() {
        let (_, sf, sol) = scalar_problem();
        for t in [0.5, 3.0] {
            let x = solution_formula_i(&sf, &sol.x, &sol.x, t).unwrap();
            assert!((x.as_matrix() - sol.x.as_matrix()).amax() < 1e-15);
        }
    }

    #[test]
    fn scalar_formulas_agree_with_time_stepping() {
        let (_, sf, sol) = scalar_problem();
        let x0 = SymMatrix::zeros(1);
        let f2 = FormulaII::new(&sf, &x0, &sol).unwrap();
        let x_l = 1.0 / (2.0 * 2f64.sqrt());
        assert!((f2.x_l.as_matrix()[(0, 0)] - x_l).abs() < 1e-15);

        let emb = embed_dre(&sf.a, &sf.b, &sf.c, &x0).unwrap();
        let traj = modified_davison_maki(&emb, 0.5, 2.0, DEFAULT_TOL_EXP, true).unwrap();
        let mut last = -1.0;
        for (t, w) in traj.times.iter().zip(&traj.states) {
            let x1 = solution_formula_i(&sf, &x0, &sol.x, *t).unwrap().as_matrix()[(0, 0)];
            let x2 = f2.eval(*t).unwrap().as_matrix()[(0, 0)];
            assert!((x1 - x2).abs() <= 1e-10);
            assert!((x1 - w[(0, 0)]).abs() <= 1e-10);
            assert!(x1 > last);
            last = x1;
        }
        let far = f2.eval(40.0).unwrap().as_matrix()[(0, 0)];
        assert!((far - (2f64.sqrt() - 1.0)).abs() <= 1e-14);
    }
}
