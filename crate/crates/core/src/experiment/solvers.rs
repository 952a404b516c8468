use std::time::Instant;

use super::config::SolverId;
use crate::are::AreSolution;
use crate::benchmarks::ProblemInstance;
use crate::dre::{
    davison_maki, modified_davison_maki, rk_oracle, solution_formula_i, splitting_trajectory,
    step_count, DmVariant, DreTrajectory, FormulaII, SplittingScheme, StepDiagnostics,
};
use crate::error::Result;
use crate::galerkin::{build_model, reconstruct, solve_reduced};
use crate::linalg::SymMatrix;

/// RK4 takes this many internal steps per output step.
pub const RK_SUBSTEPS: usize = 64;

/// Dense trajectory on `times[k] = k h` produced by any solver.
#[derive(Debug, Clone)]
pub struct SolverRun {
    pub times: Vec<f64>,
    pub states: Vec<SymMatrix>,
    pub diagnostics: Vec<StepDiagnostics>,
    /// Trial space dimension for the Galerkin solver.
    pub reduced_dim: Option<usize>,
    pub projected_residual: Option<(f64, f64)>,
    pub phases: Vec<(&'static str, f64)>,
}

fn from_trajectory(t: DreTrajectory) -> (Vec<f64>, Vec<SymMatrix>, Vec<StepDiagnostics>) {
    let states = t.states.into_iter().map(SymMatrix::from_square).collect();
    (t.times, states, t.diagnostics)
}

fn grid(h: f64, tf: f64) -> Result<Vec<f64>> {
    Ok((0..=step_count(h, tf)?).map(|k| k as f64 * h).collect())
}

pub struct SolverSettings {
    pub h: f64,
    pub tf: f64,
    pub tol_exp: f64,
    pub truncation_tol: f64,
}

pub fn run_solver(
    solver: SolverId,
    p: &ProblemInstance,
    are: &AreSolution,
    s: &SolverSettings,
) -> Result<SolverRun> {
    let sf = p.standard_form()?;
    let setup = Instant::now();
    let mut phases = Vec::new();
    let mut reduced_dim = None;
    let mut projected_residual = None;
    let (times, states, diagnostics) = match solver {
        SolverId::Galerkin => {
            let model = build_model(&p.are, are, Some(s.truncation_tol))?;
            reduced_dim = Some(model.dim());
            projected_residual = Some(model.projected_residual);
            phases.push(("setup", setup.elapsed().as_secs_f64()));
            let solve = Instant::now();
            let traj = solve_reduced(&model, s.h, s.tf, s.tol_exp)?;
            phases.push(("solve", solve.elapsed().as_secs_f64()));
            let rec = Instant::now();
            let states = (0..traj.len()).map(|k| reconstruct(&model, &traj, k)).collect();
            phases.push(("reconstruct", rec.elapsed().as_secs_f64()));
            (traj.times, states, traj.diagnostics)
        }
        SolverId::ModDmFull | SolverId::Dm | SolverId::RkOracle => {
            let emb = p.embedding()?;
            phases.push(("setup", setup.elapsed().as_secs_f64()));
            let solve = Instant::now();
            let traj = match solver {
                SolverId::ModDmFull => modified_davison_maki(&emb, s.h, s.tf, s.tol_exp, true)?,
                SolverId::Dm => davison_maki(&emb, s.h, s.tf, DmVariant::UvUpdate)?,
                _ => rk_oracle(&emb, s.h / RK_SUBSTEPS as f64, s.tf, RK_SUBSTEPS)?,
            };
            phases.push(("solve", solve.elapsed().as_secs_f64()));
            from_trajectory(traj)
        }
        SolverId::Lie | SolverId::Strang => {
            let scheme = if solver == SolverId::Lie {
                SplittingScheme::Lie
            } else {
                SplittingScheme::Strang
            };
            let solve = Instant::now();
            let traj = splitting_trajectory(&sf, &p.x0, s.h, s.tf, scheme)?;
            phases.push(("solve", solve.elapsed().as_secs_f64()));
            from_trajectory(traj)
        }
        SolverId::Formula1 => {
            let times = grid(s.h, s.tf)?;
            let solve = Instant::now();
            let states = times
                .iter()
                .map(|&t| solution_formula_i(&sf, &p.x0, &are.x, t))
                .collect::<Result<Vec<_>>>()?;
            phases.push(("solve", solve.elapsed().as_secs_f64()));
            (times, states, Vec::new())
        }
        SolverId::Formula2 => {
            let times = grid(s.h, s.tf)?;
            let f2 = FormulaII::new(&sf, &p.x0, are)?;
            phases.push(("setup", setup.elapsed().as_secs_f64()));
            let solve = Instant::now();
            let states = times.iter().map(|&t| f2.eval(t)).collect::<Result<Vec<_>>>()?;
            phases.push(("solve", solve.elapsed().as_secs_f64()));
            (times, states, Vec::new())
        }
    };
    Ok(SolverRun {
        times,
        states,
        diagnostics,
        reduced_dim,
        projected_residual,
        phases,
    })
}
