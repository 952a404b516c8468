use super::{step_count, DreTrajectory};
use crate::are::StandardForm;
use crate::error::{Error, Result};
use crate::linalg::{finite_gramian, solve_linear, Matrix, SymMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplittingScheme {
    /// `F_nl(h) o F_aff(h)`.
    Lie,
    /// `F_aff(h/2) o F_nl(h) o F_aff(h/2)`.
    Strang,
}

/// Exact affine flow `X' = A^T X + X A + C^T C` over one interval.
#[derive(Debug, Clone)]
struct AffineFlow {
    e: Matrix,
    gram: SymMatrix,
}

impl AffineFlow {
    fn new(sf: &StandardForm, tau: f64) -> Result<Self> {
        let (gram, e_t) = finite_gramian(&sf.a.transpose(), &sf.ctc(), tau)?;
        Ok(Self {
            e: e_t.transpose(),
            gram,
        })
    }

    fn apply(&self, x: &SymMatrix) -> SymMatrix {
        let next = self.e.transpose() * x.as_matrix() * &self.e + self.gram.as_matrix();
        SymMatrix::from_square(next)
    }
}

/// Exact flow of `X' = -X B B^T X`: `X <- (I + h X B B^T)^{-1} X`.
fn nonlinear_flow(bbt: &SymMatrix, x: &SymMatrix, h: f64) -> Result<SymMatrix> {
    let n = x.order();
    let lhs = Matrix::identity(n, n) + x.as_matrix() * bbt.as_matrix() * h;
    let next = solve_linear(&lhs, x.as_matrix()).map_err(|_| Error::SingularNonlinearFlow)?;
    Ok(SymMatrix::from_square(next))
}

/// Splitting integrator with the affine sub-flows precomputed for one step size.
#[derive(Debug, Clone)]
pub struct Splitting {
    scheme: SplittingScheme,
    h: f64,
    bbt: SymMatrix,
    affine: AffineFlow,
}

impl Splitting {
    pub fn new(sf: &StandardForm, h: f64, scheme: SplittingScheme) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidArgument(format!("step size must be positive, got {h}")));
        }
        let tau = match scheme {
            SplittingScheme::Lie => h,
            SplittingScheme::Strang => 0.5 * h,
        };
        Ok(Self {
            scheme,
            h,
            bbt: sf.bbt(),
            affine: AffineFlow::new(sf, tau)?,
        })
    }

    pub fn step(&self, x: &SymMatrix) -> Result<SymMatrix> {
        match self.scheme {
            SplittingScheme::Lie => nonlinear_flow(&self.bbt, &self.affine.apply(x), self.h),
            SplittingScheme::Strang => {
                let half = self.affine.apply(x);
                let mid = nonlinear_flow(&self.bbt, &half, self.h)?;
                Ok(self.affine.apply(&mid))
            }
        }
    }
}

/// One splitting step of the symmetric DRE in standardized coordinates.
pub fn splitting_step(
    sf: &StandardForm,
    x: &SymMatrix,
    h: f64,
    scheme: SplittingScheme,
) -> Result<SymMatrix> {
    Splitting::new(sf, h, scheme)?.step(x)
}

pub fn splitting_trajectory(
    sf: &StandardForm,
    x0: &SymMatrix,
    h: f64,
    tf: f64,
    scheme: SplittingScheme,
) -> Result<DreTrajectory> {
    let steps = step_count(h, tf)?;
    let integrator = Splitting::new(sf, h, scheme)?;
    let tag = match scheme {
        SplittingScheme::Lie => "lie",
        SplittingScheme::Strang => "strang",
    };
    let mut traj = DreTrajectory::new(tag, h, None);
    let mut x = x0.clone();
    traj.push(0, x.as_matrix().clone());
    for k in 1..=steps {
        x = integrator.step(&x)?;
        traj.push(k, x.as_matrix().clone());
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_form(a: f64, b: f64, c: f64) -> StandardForm {
        StandardForm {
            a: Matrix::from_element(1, 1, a),
            b: Matrix::from_element(1, 1, b),
            c: Matrix::from_element(1, 1, c),
        }
    }

    fn sym(v: f64) -> SymMatrix {
        SymMatrix::new(Matrix::from_element(1, 1, v)).unwrap()
    }

    #[test]
    fn without_input_lie_is_the_affine_flow() {
        let sf = StandardForm {
            a: Matrix::from_row_slice(2, 2, &[-1.0, 2.0, 0.0, -3.0]),
            b: Matrix::zeros(2, 1),
            c: Matrix::from_row_slice(1, 2, &[1.0, 1.0]),
        };
        let x = SymMatrix::identity(2);
        let lie = splitting_step(&sf, &x, 0.3, SplittingScheme::Lie).unwrap();
        let exact = AffineFlow::new(&sf, 0.3).unwrap().apply(&x);
        assert!((lie.as_matrix() - exact.as_matrix()).amax() < 1e-15);
    }

    #[test]
    fn nonlinear_flow_scalar() {
        let sf = scalar_form(0.0, 1.0, 0.0);
        let x = splitting_step(&sf, &sym(1.0), 1.0, SplittingScheme::Lie).unwrap();
        assert!((x.as_matrix()[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn nonlinear_flow_solves_its_ode() {
        // central difference in h of the flow against -X B B^T X
        let bbt = SymMatrix::gram(&Matrix::from_row_slice(3, 1, &[1.0, -0.5, 0.25]));
        let x0 = SymMatrix::new(Matrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, 0.0, 0.1, 0.0, 0.5])).unwrap();
        let h = 0.4;
        let d = 1e-5;
        let plus = nonlinear_flow(&bbt, &x0, h + d).unwrap();
        let minus = nonlinear_flow(&bbt, &x0, h - d).unwrap();
        let deriv = (plus.as_matrix() - minus.as_matrix()) / (2.0 * d);
        let x = nonlinear_flow(&bbt, &x0, h).unwrap();
        let rhs = -(x.as_matrix() * bbt.as_matrix() * x.as_matrix());
        assert!((deriv - rhs).amax() <= 1e-6);
    }

    #[test]
    fn strang_is_second_order_on_tanh() {
        let sf = scalar_form(0.0, 1.0, 1.0);
        let err = |h: f64| {
            let traj = splitting_trajectory(&sf, &SymMatrix::zeros(1), h, 1.0, SplittingScheme::Strang).unwrap();
            (traj.states.last().unwrap()[(0, 0)] - 1f64.tanh()).abs()
        };
        let (e1, e2) = (err(1e-2), err(5e-3));
        assert!(e1 <= 1e-4);
        assert!((e1 / e2 - 4.0).abs() < 0.2);
    }
}
