//! C interface to the riccati solvers.
//!
//! Objects are opaque heap handles released with the matching `*_free`.
//! Every fallible call returns a [`RiccatiStatus`]; the message of the most
//! recent failure on the calling thread is available through
//! [`riccati_last_error`]. Dense matrices cross the boundary row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use riccati::are::{solve_are_newton, AreProblem, AreSolution};
use riccati::benchmarks::{generate, ProblemInstance};
use riccati::experiment::{run_solver, SolverId, SolverRun, SolverSettings};
use riccati::linalg::{Matrix, SymMatrix};
use riccati::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiccatiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NonFinite = 4,
    Singular = 5,
    NotConverged = 6,
    StepTooLarge = 7,
    SolverFailure = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// Problem data `(A, B, C, M, X0)` and a default horizon.
pub struct RiccatiProblem(ProblemInstance);

/// Stabilizing ARE solution.
pub struct RiccatiAreSolution(AreSolution);

/// Solution samples on a uniform time grid.
pub struct RiccatiTrajectory(SolverRun);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> RiccatiStatus {
    match e {
        Error::NonSquare { .. } | Error::DimensionMismatch { .. } => RiccatiStatus::DimensionMismatch,
        Error::InvalidArgument(_) | Error::SizeExceeded { .. } => RiccatiStatus::InvalidArgument,
        Error::NonFinite(_) | Error::NormOverflow { .. } | Error::BlowUp { .. } => RiccatiStatus::NonFinite,
        Error::SingularMatrix { .. }
        | Error::SingularU { .. }
        | Error::SingularBracket { .. }
        | Error::SingularNonlinearFlow
        | Error::SpectrumOverlap { .. } => RiccatiStatus::Singular,
        Error::ConvergenceFailure { .. } | Error::MaxItersExceeded { .. } | Error::NoStabilizingStart => {
            RiccatiStatus::NotConverged
        }
        Error::NormGuardExceeded { .. } => RiccatiStatus::StepTooLarge,
        Error::ZeroReference => RiccatiStatus::SolverFailure,
    }
}

struct Fail(RiccatiStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(RiccatiStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RiccatiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            RiccatiStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            RiccatiStatus::Panic
        }
    }
}

unsafe fn read_matrix(data: *const f64, rows: usize, cols: usize, what: &str) -> Result<Matrix, Fail> {
    if rows * cols == 0 {
        return Ok(Matrix::zeros(rows, cols));
    }
    if data.is_null() {
        return Err(null(what));
    }
    let s = std::slice::from_raw_parts(data, rows * cols);
    Ok(Matrix::from_row_slice(rows, cols, s))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn copy_matrix(m: &Matrix, buf: *mut f64, len: usize) -> Result<(), Fail> {
    if buf.is_null() {
        return Err(null("buffer"));
    }
    let need = m.nrows() * m.ncols();
    if len < need {
        return Err(Fail(
            RiccatiStatus::BufferTooSmall,
            format!("buffer holds {len} values, {need} needed"),
        ));
    }
    let out = std::slice::from_raw_parts_mut(buf, need);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out[i * m.ncols() + j] = m[(i, j)];
        }
    }
    Ok(())
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`) and returns the full message length.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn riccati_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Builds `M^T X' M = A^T X M + M^T X A - M^T X B B^T X M + C^T C` with
/// `A, M` of order `n`, `B` of size `n x m` and `C` of size `p x n`.
/// `mass` and `x0` may be null for `M = I` and `X0 = 0`; `x0` is
/// symmetrized.
///
/// # Safety
/// Non-null arrays must hold the stated number of doubles.
#[no_mangle]
pub unsafe extern "C" fn riccati_problem_new(
    n: usize,
    m: usize,
    p: usize,
    a: *const f64,
    b: *const f64,
    c: *const f64,
    mass: *const f64,
    x0: *const f64,
    horizon: f64,
    out: *mut *mut RiccatiProblem,
) -> RiccatiStatus {
    guard(|| {
        if n == 0 {
            return Err(Fail(RiccatiStatus::InvalidArgument, "order must be positive".into()));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Fail(RiccatiStatus::InvalidArgument, format!("horizon must be positive, got {horizon}")));
        }
        let a = read_matrix(a, n, n, "A")?;
        let b = read_matrix(b, n, m, "B")?;
        let c = read_matrix(c, p, n, "C")?;
        let mass = if mass.is_null() { None } else { Some(read_matrix(mass, n, n, "M")?) };
        let x0 = if x0.is_null() {
            SymMatrix::zeros(n)
        } else {
            SymMatrix::new(read_matrix(x0, n, n, "X0")?)?
        };
        let problem = ProblemInstance {
            name: "custom".into(),
            are: AreProblem::new(a, b, c, mass)?,
            x0,
            horizon,
        };
        write_out(out, RiccatiProblem(problem))
    })
}

/// Generates a named benchmark (`tridiag`, `tridiag-mass`, `conv-diff`,
/// `scalar-tanh`, `scalar-stable`, `diag-rank1`).
///
/// # Safety
/// `name` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn riccati_problem_benchmark(
    name: *const c_char,
    size: usize,
    out: *mut *mut RiccatiProblem,
) -> RiccatiStatus {
    guard(|| {
        if name.is_null() {
            return Err(null("name"));
        }
        let name = CStr::from_ptr(name)
            .to_str()
            .map_err(|_| Fail(RiccatiStatus::InvalidArgument, "name is not UTF-8".into()))?;
        write_out(out, RiccatiProblem(generate(name, size)?))
    })
}

/// State dimension, or 0 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn riccati_problem_order(problem: *const RiccatiProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.0.order())
}

/// Default final time, or 0 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn riccati_problem_horizon(problem: *const RiccatiProblem) -> f64 {
    problem.as_ref().map_or(0.0, |p| p.0.horizon)
}

/// # Safety
/// `problem` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn riccati_problem_free(problem: *mut RiccatiProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Solves the algebraic Riccati equation by Newton-Kleinman iteration.
///
/// # Safety
/// `problem` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn riccati_are_solve(
    problem: *const RiccatiProblem,
    tol: f64,
    max_iters: usize,
    out: *mut *mut RiccatiAreSolution,
) -> RiccatiStatus {
    guard(|| {
        let p = handle(problem, "problem")?;
        write_out(out, RiccatiAreSolution(solve_are_newton(&p.0.are, tol, max_iters)?))
    })
}

/// Absolute and relative residual of the computed ARE solution.
///
/// # Safety
/// `sol` must be a live handle; `abs` and `rel` may be null.
#[no_mangle]
pub unsafe extern "C" fn riccati_are_residual(
    sol: *const RiccatiAreSolution,
    abs: *mut f64,
    rel: *mut f64,
) -> RiccatiStatus {
    guard(|| {
        let s = handle(sol, "solution")?;
        if !abs.is_null() {
            *abs = s.0.abs_residual;
        }
        if !rel.is_null() {
            *rel = s.0.rel_residual;
        }
        Ok(())
    })
}

/// Numerical rank of the solution, or 0 for a null handle.
///
/// # Safety
/// `sol` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn riccati_are_rank(sol: *const RiccatiAreSolution) -> usize {
    sol.as_ref().map_or(0, |s| s.0.rank())
}

/// Copies `X_inf` (order `n`, row-major) into `buf`.
///
/// # Safety
/// `buf` must be valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn riccati_are_copy_x(
    sol: *const RiccatiAreSolution,
    buf: *mut f64,
    len: usize,
) -> RiccatiStatus {
    guard(|| copy_matrix(handle(sol, "solution")?.0.x.as_matrix(), buf, len))
}

/// # Safety
/// `sol` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn riccati_are_free(sol: *mut RiccatiAreSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

unsafe fn solve(
    id: SolverId,
    problem: *const RiccatiProblem,
    are: *const RiccatiAreSolution,
    settings: SolverSettings,
    out: *mut *mut RiccatiTrajectory,
) -> RiccatiStatus {
    guard(|| {
        let p = handle(problem, "problem")?;
        let owned;
        let sol = match are.as_ref() {
            Some(s) => &s.0,
            None => {
                owned = solve_are_newton(&p.0.are, 1e-12, 60)?;
                &owned
            }
        };
        if sol.x.order() != p.0.order() {
            return Err(Fail(RiccatiStatus::DimensionMismatch, "ARE solution belongs to another problem".into()));
        }
        write_out(out, RiccatiTrajectory(run_solver(id, &p.0, sol, &settings)?))
    })
}

/// Galerkin solution from `X(0) = 0` on `[0, tf]` with step `h`, using the
/// trial space of `are` truncated at `truncation_tol`.
///
/// # Safety
/// `problem` and `are` must be live handles.
#[no_mangle]
pub unsafe extern "C" fn riccati_galerkin_solve(
    problem: *const RiccatiProblem,
    are: *const RiccatiAreSolution,
    h: f64,
    tf: f64,
    truncation_tol: f64,
    tol_exp: f64,
    out: *mut *mut RiccatiTrajectory,
) -> RiccatiStatus {
    if are.is_null() {
        set_error("ARE solution is null".into());
        return RiccatiStatus::NullPointer;
    }
    let settings = SolverSettings { h, tf, tol_exp, truncation_tol };
    solve(SolverId::Galerkin, problem, are, settings, out)
}

/// Full-order modified Davison-Maki solution on `[0, tf]` with step `h`.
///
/// # Safety
/// `problem` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn riccati_moddm_solve(
    problem: *const RiccatiProblem,
    h: f64,
    tf: f64,
    tol_exp: f64,
    out: *mut *mut RiccatiTrajectory,
) -> RiccatiStatus {
    let settings = SolverSettings { h, tf, tol_exp, truncation_tol: f64::EPSILON };
    solve(SolverId::ModDmFull, problem, ptr::null(), settings, out)
}

/// Number of stored time points, or 0 for a null handle.
///
/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn riccati_trajectory_len(traj: *const RiccatiTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.0.times.len())
}

/// State dimension, or 0 for a null handle.
///
/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn riccati_trajectory_order(traj: *const RiccatiTrajectory) -> usize {
    traj.as_ref()
        .and_then(|t| t.0.states.first())
        .map_or(0, |x| x.order())
}

/// # Safety
/// `traj` must be a live handle and `t` writable.
#[no_mangle]
pub unsafe extern "C" fn riccati_trajectory_time(
    traj: *const RiccatiTrajectory,
    k: usize,
    t: *mut f64,
) -> RiccatiStatus {
    guard(|| {
        let tr = handle(traj, "trajectory")?;
        if t.is_null() {
            return Err(null("t"));
        }
        *t = *tr.0.times.get(k).ok_or_else(|| out_of_range(k, tr.0.times.len()))?;
        Ok(())
    })
}

fn out_of_range(k: usize, len: usize) -> Fail {
    Fail(RiccatiStatus::InvalidArgument, format!("index {k} out of range for {len} samples"))
}

/// Copies `X(t_k)` row-major into `buf`.
///
/// # Safety
/// `traj` must be a live handle and `buf` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn riccati_trajectory_copy_state(
    traj: *const RiccatiTrajectory,
    k: usize,
    buf: *mut f64,
    len: usize,
) -> RiccatiStatus {
    guard(|| {
        let tr = handle(traj, "trajectory")?;
        let x = tr.0.states.get(k).ok_or_else(|| out_of_range(k, tr.0.states.len()))?;
        copy_matrix(x.as_matrix(), buf, len)
    })
}

/// # Safety
/// `traj` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn riccati_trajectory_free(traj: *mut RiccatiTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}
