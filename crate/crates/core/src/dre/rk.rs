use super::{step_count, DreTrajectory, NdreCoefficients};
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

/// Classical RK4 on the NDRE in `W` space.
///
/// Integrates with step `h` and stores every `stride`-th state, so the
/// recorded grid has spacing `stride * h`.
pub fn rk_oracle(c: &NdreCoefficients, h: f64, tf: f64, stride: usize) -> Result<DreTrajectory> {
    if stride == 0 {
        return Err(Error::InvalidArgument("stride must be positive".into()));
    }
    let steps = step_count(h, tf)?;
    let mut traj = DreTrajectory::new("rk-oracle", h * stride as f64, None);
    let mut w = c.m0.clone();
    traj.push(0, w.clone());
    for k in 1..=steps {
        let k1 = c.rhs(&w);
        let k2 = c.rhs(&(&w + &k1 * (0.5 * h)));
        let k3 = c.rhs(&(&w + &k2 * (0.5 * h)));
        let k4 = c.rhs(&(&w + &k3 * h));
        w += (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
        if !w.iter().all(|x| x.is_finite()) {
            return Err(Error::BlowUp { step: k });
        }
        if c.symmetric {
            w = SymMatrix::from_square(w).into_matrix();
        }
        if k % stride == 0 {
            traj.push(k / stride, w.clone());
        }
    }
    Ok(traj)
}
