//! Experiment driver behind the `riccati` binary: runs a configured solver
//! against a reference and writes CSV tables.

mod config;
mod solvers;

pub use config::{RunConfig, SolverId, CONFIG_KEYS};
pub use solvers::{run_solver, SolverRun, SolverSettings, RK_SUBSTEPS};

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::are::{solve_are_newton, AreSolution, DEFAULT_ARE_MAX_ITERS};
use crate::benchmarks::{absolute_errors, generate, power_norm2, ProblemInstance};
use crate::galerkin::{best_approximation, build_model};
use crate::linalg::{sym_eig, Matrix, SymMatrix};

/// Environment variable that overrides the configured output root.
pub const OUT_ENV: &str = "RICCATI_OUT";

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("{0}")]
    Config(String),
    #[error("all configurations must share benchmark, size and reference: {0}")]
    MixedBenchmark(String),
    #[error(transparent)]
    Solver(#[from] crate::Error),
    #[error("{0}")]
    Io(String),
}

impl ExperimentError {
    /// Process exit code.
    pub fn code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) | ExperimentError::MixedBenchmark(_) => 2,
            ExperimentError::Solver(_) => 3,
            ExperimentError::Io(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentError::Config(_) => "config",
            ExperimentError::MixedBenchmark(_) => "mixed-benchmark",
            ExperimentError::Solver(e) => solver_kind(e),
            ExperimentError::Io(_) => "io",
        }
    }
}

fn solver_kind(e: &crate::Error) -> &'static str {
    use crate::Error::*;
    match e {
        NonSquare { .. } => "non-square",
        DimensionMismatch { .. } => "dimension-mismatch",
        InvalidArgument(_) => "invalid-argument",
        NonFinite(_) => "non-finite",
        NormGuardExceeded { .. } => "norm-guard-exceeded",
        SingularMatrix { .. } => "singular-matrix",
        ConvergenceFailure { .. } => "convergence-failure",
        SpectrumOverlap { .. } => "spectrum-overlap",
        SizeExceeded { .. } => "size-exceeded",
        NoStabilizingStart => "no-stabilizing-start",
        MaxItersExceeded { .. } => "max-iters-exceeded",
        SingularU { .. } => "singular-u",
        NormOverflow { .. } => "norm-overflow",
        SingularBracket { .. } => "singular-bracket",
        BlowUp { .. } => "blow-up",
        SingularNonlinearFlow => "singular-nonlinear-flow",
        ZeroReference => "zero-reference",
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Io(format!("{}: {e}", path.display()))
}

/// Fixed 17-significant-digit scientific format.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:.16e}")
    }
}

struct Table {
    path: PathBuf,
    writer: csv::Writer<fs::File>,
}

impl Table {
    fn create(dir: &Path, name: &str, header: &[&str]) -> Result<Self, ExperimentError> {
        let path = dir.join(name);
        let mut writer = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
        writer.write_record(header).map_err(|e| io_err(&path, e))?;
        Ok(Self { path, writer })
    }

    fn row<I, S>(&mut self, fields: I) -> Result<(), ExperimentError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).map_err(|e| io_err(&self.path, e))
    }

    fn finish(mut self) -> Result<(), ExperimentError> {
        self.writer.flush().map_err(|e| io_err(&self.path, e))
    }
}

/// Output root: explicit argument, then `RICCATI_OUT`, then the config, then `.`.
pub fn output_root(cfg: &RunConfig, explicit: Option<&Path>) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    if let Some(env) = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(env);
    }
    cfg.out.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn setup_problem(cfg: &RunConfig) -> Result<(ProblemInstance, f64), ExperimentError> {
    let problem = generate(&cfg.benchmark, cfg.size).map_err(|e| ExperimentError::Config(e.to_string()))?;
    let tf = cfg.final_time(problem.horizon)?;
    Ok((problem, tf))
}

fn solve_are(cfg: &RunConfig, p: &ProblemInstance) -> Result<AreSolution, ExperimentError> {
    Ok(solve_are_newton(&p.are, cfg.are_tol, DEFAULT_ARE_MAX_ITERS)?)
}

fn settings(cfg: &RunConfig, h: f64, tf: f64) -> SolverSettings {
    SolverSettings {
        h,
        tf,
        tol_exp: cfg.tol_exp,
        truncation_tol: cfg.truncation_tol,
    }
}

/// Errors against a reference; relative entries are NaN when the reference vanishes.
struct Row {
    rel2: f64,
    rel_f: f64,
    abs2: f64,
    abs_f: f64,
}

fn compare(x: &SymMatrix, reference: &SymMatrix) -> Row {
    let (abs2, abs_f) = absolute_errors(x, reference);
    let ref_f = reference.as_matrix().norm();
    let (rel2, rel_f) = if ref_f == 0.0 {
        (f64::NAN, f64::NAN)
    } else {
        (abs2 / power_norm2(reference), abs_f / ref_f)
    };
    Row {
        rel2,
        rel_f,
        abs2,
        abs_f,
    }
}

/// Reference states on the run grid.
fn reference_states(
    cfg: &RunConfig,
    p: &ProblemInstance,
    are: &AreSolution,
    run_times: &[f64],
    tf: f64,
) -> Result<(Vec<SymMatrix>, f64), ExperimentError> {
    let rh = cfg.reference_h.unwrap_or(cfg.h);
    let start = Instant::now();
    let reference = run_solver(cfg.reference, p, are, &settings(cfg, rh, tf))?;
    let stride = (cfg.h / rh).round() as usize;
    let states = run_times
        .iter()
        .enumerate()
        .map(|(k, _)| reference.states[k * stride].clone())
        .collect();
    Ok((states, start.elapsed().as_secs_f64()))
}

/// Runs one configuration and writes its tables into `<root>/<name>`.
/// Returns the run directory.
pub fn run_experiment(cfg: &RunConfig, out_root: Option<&Path>) -> Result<PathBuf, ExperimentError> {
    cfg.validate()?;
    let (problem, tf) = setup_problem(cfg)?;
    let dir = output_root(cfg, out_root).join(&cfg.name);
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;

    let total = Instant::now();
    let mut timing = Table::create(&dir, "timing.csv", &["solver", "h", "phase", "seconds"])?;
    let mut summary: Vec<(&str, String)> = vec![
        ("benchmark", cfg.benchmark.clone()),
        ("size", cfg.size.to_string()),
        ("n", problem.order().to_string()),
        ("solver", cfg.solver.to_string()),
        ("reference", cfg.reference.to_string()),
        ("h", fmt_f64(cfg.h)),
        ("reference_h", fmt_f64(cfg.reference_h.unwrap_or(cfg.h))),
        ("tf", fmt_f64(tf)),
        ("tol_exp", fmt_f64(cfg.tol_exp)),
        ("truncation_tol", fmt_f64(cfg.truncation_tol)),
    ];

    let result = execute(cfg, &problem, tf, &dir, &mut timing, &mut summary);
    let h = fmt_f64(cfg.h);
    timing.row([cfg.solver.as_str(), &h, "total", &fmt_f64(total.elapsed().as_secs_f64())])?;
    timing.finish()?;
    match &result {
        Ok(()) => summary.push(("status", "ok".into())),
        Err(e) => {
            summary.push(("status", "failed".into()));
            summary.push(("error", e.to_string()));
        }
    }
    let mut table = Table::create(&dir, "summary.csv", &["key", "value"])?;
    for (k, v) in &summary {
        table.row([*k, v.as_str()])?;
    }
    table.finish()?;
    result.map(|_| dir)
}

fn execute(
    cfg: &RunConfig,
    problem: &ProblemInstance,
    tf: f64,
    dir: &Path,
    timing: &mut Table,
    summary: &mut Vec<(&'static str, String)>,
) -> Result<(), ExperimentError> {
    let h = fmt_f64(cfg.h);
    let start = Instant::now();
    let are = solve_are(cfg, problem)?;
    timing.row([cfg.solver.as_str(), &h, "are", &fmt_f64(start.elapsed().as_secs_f64())])?;
    summary.push(("are_abs_residual", fmt_f64(are.abs_residual)));
    summary.push(("are_rel_residual", fmt_f64(are.rel_residual)));
    summary.push(("are_newton_iters", are.newton_iters.to_string()));
    summary.push(("are_rank", are.rank().to_string()));

    let run = run_solver(cfg.solver, problem, &are, &settings(cfg, cfg.h, tf))?;
    for (phase, secs) in &run.phases {
        timing.row([cfg.solver.as_str(), &h, phase, &fmt_f64(*secs)])?;
    }
    summary.push(("steps", (run.times.len() - 1).to_string()));
    if let Some(k) = run.reduced_dim {
        summary.push(("galerkin_k", k.to_string()));
    }
    if let Some((proj, full)) = run.projected_residual {
        summary.push(("projected_residual", fmt_f64(proj)));
        summary.push(("full_residual", fmt_f64(full)));
    }

    write_diagnostics(dir, &run)?;
    write_decay(dir, &run, cfg.decay_stride)?;

    let (reference, ref_secs) = reference_states(cfg, problem, &are, &run.times, tf)?;
    timing.row([cfg.reference.as_str(), &fmt_f64(cfg.reference_h.unwrap_or(cfg.h)), "reference", &fmt_f64(ref_secs)])?;

    let mut table = Table::create(dir, "trajectory.csv", &["t", "rel2", "relF", "abs2", "absF"])?;
    let mut max_rel2 = 0.0f64;
    let mut last = None;
    for ((t, x), xr) in run.times.iter().zip(&run.states).zip(&reference) {
        let r = compare(x, xr);
        if !r.rel2.is_nan() {
            max_rel2 = max_rel2.max(r.rel2);
        }
        table.row([fmt_f64(*t), fmt_f64(r.rel2), fmt_f64(r.rel_f), fmt_f64(r.abs2), fmt_f64(r.abs_f)])?;
        last = Some(r);
    }
    table.finish()?;
    if let Some(r) = last {
        summary.push(("final_rel2", fmt_f64(r.rel2)));
        summary.push(("final_relF", fmt_f64(r.rel_f)));
    }
    summary.push(("max_rel2", fmt_f64(max_rel2)));
    if let Some(x) = run.states.last() {
        summary.push((
            "final_stationary_gap",
            fmt_f64(crate::benchmarks::stationary_gap(x, &are)),
        ));
    }
    Ok(())
}

fn write_diagnostics(dir: &Path, run: &SolverRun) -> Result<(), ExperimentError> {
    let mut table = Table::create(dir, "diagnostics.csv", &["k", "t", "cond_u", "norm_u", "norm_v"])?;
    for (i, d) in run.diagnostics.iter().enumerate() {
        let k = i + 1;
        table.row([
            k.to_string(),
            fmt_f64(run.times[k]),
            fmt_f64(d.cond_u),
            fmt_f64(d.norm_u),
            fmt_f64(d.norm_v),
        ])?;
    }
    table.finish()
}

fn write_decay(dir: &Path, run: &SolverRun, stride: usize) -> Result<(), ExperimentError> {
    let mut table = Table::create(dir, "decay.csv", &["t", "k", "lambda"])?;
    for (t, x) in run.times.iter().zip(&run.states).step_by(stride) {
        let eig = sym_eig(x)?;
        for (k, l) in eig.values.iter().enumerate() {
            table.row([fmt_f64(*t), (k + 1).to_string(), fmt_f64(*l)])?;
        }
    }
    table.finish()
}

/// Runs several configurations on one benchmark and writes `compare.csv`
/// into `<root>/compare`. The `best_*` columns hold the error of the
/// orthogonal projection of the reference onto the Galerkin trial space.
pub fn compare_solvers(cfgs: &[RunConfig], out_root: Option<&Path>) -> Result<PathBuf, ExperimentError> {
    let first = cfgs
        .first()
        .ok_or_else(|| ExperimentError::Config("no configurations given".into()))?;
    for cfg in cfgs {
        cfg.validate()?;
        if cfg.benchmark != first.benchmark || cfg.size != first.size || cfg.reference != first.reference {
            return Err(ExperimentError::MixedBenchmark(format!(
                "'{}' uses {}/{}/{} but '{}' uses {}/{}/{}",
                cfg.name, cfg.benchmark, cfg.size, cfg.reference, first.name, first.benchmark, first.size, first.reference
            )));
        }
    }
    let problem = generate(&first.benchmark, first.size).map_err(|e| ExperimentError::Config(e.to_string()))?;
    let are = solve_are(first, &problem)?;
    let model = build_model(&problem.are, &are, Some(first.truncation_tol))?;

    let dir = output_root(first, out_root).join("compare");
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    let mut table = Table::create(
        &dir,
        "compare.csv",
        &["solver", "h", "t", "rel2", "relF", "abs2", "absF", "best_rel2", "best_relF"],
    )?;
    for cfg in cfgs {
        let tf = cfg.final_time(problem.horizon)?;
        let run = run_solver(cfg.solver, &problem, &are, &settings(cfg, cfg.h, tf))?;
        let (reference, _) = reference_states(cfg, &problem, &are, &run.times, tf)?;
        for ((t, x), xr) in run.times.iter().zip(&run.states).zip(&reference) {
            let r = compare(x, xr);
            let best = compare(&best_approximation(xr, &model.q), xr);
            table.row([
                cfg.solver.to_string(),
                fmt_f64(cfg.h),
                fmt_f64(*t),
                fmt_f64(r.rel2),
                fmt_f64(r.rel_f),
                fmt_f64(r.abs2),
                fmt_f64(r.abs_f),
                fmt_f64(best.rel2),
                fmt_f64(best.rel_f),
            ])?;
        }
    }
    table.finish()?;
    Ok(dir)
}

fn write_matrix(dir: &Path, name: &str, m: &Matrix) -> Result<(), ExperimentError> {
    let path = dir.join(name);
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(&path)
        .map_err(|e| io_err(&path, e))?;
    for i in 0..m.nrows() {
        w.write_record((0..m.ncols()).map(|j| fmt_f64(m[(i, j)])))
            .map_err(|e| io_err(&path, e))?;
    }
    w.flush().map_err(|e| io_err(&path, e))
}

/// Writes `A.csv`, `B.csv`, `C.csv`, `X0.csv`, `M.csv` (when present) and
/// `info.csv` for a benchmark instance.
pub fn dump_benchmark(name: &str, size: usize, dir: &Path) -> Result<(), ExperimentError> {
    let p = generate(name, size).map_err(|e| ExperimentError::Config(e.to_string()))?;
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    write_matrix(dir, "A.csv", &p.are.a)?;
    write_matrix(dir, "B.csv", &p.are.b)?;
    write_matrix(dir, "C.csv", &p.are.c)?;
    write_matrix(dir, "X0.csv", p.x0.as_matrix())?;
    if let Some(m) = &p.are.m {
        write_matrix(dir, "M.csv", m)?;
    }
    let mut info = Table::create(dir, "info.csv", &["key", "value"])?;
    info.row(["name", p.name.as_str()])?;
    info.row(["n", &p.order().to_string()])?;
    info.row(["horizon", &fmt_f64(p.horizon)])?;
    info.row(["mass_matrix", if p.are.m.is_some() { "yes" } else { "no" }])?;
    info.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg(solver: &str) -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.name = solver.into();
        cfg.size = 6;
        cfg.set("solver", solver).unwrap();
        cfg.tf = Some(1.0);
        cfg.h = 0.125;
        cfg
    }

    fn read(path: &Path) -> String {
        fs::read_to_string(path).unwrap()
    }

    #[test]
    fn every_solver_writes_all_tables() {
        let out = tempfile::tempdir().unwrap();
        for id in SolverId::ALL {
            let dir = run_experiment(&small_cfg(id.as_str()), Some(out.path())).unwrap();
            for f in ["trajectory.csv", "decay.csv", "diagnostics.csv", "timing.csv", "summary.csv"] {
                assert!(dir.join(f).exists(), "{id}: {f}");
            }
            let traj = read(&dir.join("trajectory.csv"));
            assert!(traj.starts_with("t,rel2,relF,abs2,absF\n"));
            assert_eq!(traj.lines().count(), 1 + 9);
            let decay = read(&dir.join("decay.csv"));
            assert_eq!(decay.lines().count(), 1 + 9 * 6);
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let out = tempfile::tempdir().unwrap();
        let mut cfg = small_cfg("galerkin");
        let a = run_experiment(&cfg, Some(out.path())).unwrap();
        let first: Vec<String> = ["trajectory.csv", "decay.csv", "summary.csv"].iter().map(|f| read(&a.join(f))).collect();
        cfg.name = "again".into();
        let b = run_experiment(&cfg, Some(out.path())).unwrap();
        let second: Vec<String> = ["trajectory.csv", "decay.csv", "summary.csv"].iter().map(|f| read(&b.join(f))).collect();
        assert_eq!(first, second);
    }

    #[test]
    fn scalar_dm_matches_tanh() {
        let out = tempfile::tempdir().unwrap();
        let cfg = RunConfig::parse("name = tanh\nbenchmark = scalar-tanh\nsolver = dm\nh = 0.1\ntf = 1\n").unwrap();
        let dir = run_experiment(&cfg, Some(out.path())).unwrap();
        let text = read(&dir.join("trajectory.csv"));
        for line in text.lines().skip(2) {
            let abs2: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
            assert!(abs2 <= 1e-9);
        }
        assert_eq!(read(&dir.join("diagnostics.csv")).lines().count(), 11);
    }

    #[test]
    fn zero_reference_gives_nan_relative_errors() {
        let out = tempfile::tempdir().unwrap();
        let dir = run_experiment(&small_cfg("moddm-full"), Some(out.path())).unwrap();
        let text = read(&dir.join("trajectory.csv"));
        let first = text.lines().nth(1).unwrap();
        assert!(first.starts_with("0.0000000000000000e0,NaN,NaN,"));
    }

    #[test]
    fn solver_failure_keeps_partial_summary() {
        let out = tempfile::tempdir().unwrap();
        let mut cfg = small_cfg("moddm-full");
        cfg.tol_exp = 1.0;
        let err = run_experiment(&cfg, Some(out.path())).unwrap_err();
        assert_eq!(err.code(), 3);
        assert_eq!(err.kind(), "norm-guard-exceeded");
        let summary = read(&out.path().join("moddm-full").join("summary.csv"));
        assert!(summary.contains("status,failed"));
    }

    #[test]
    fn compare_rejects_mixed_benchmarks() {
        let a = small_cfg("galerkin");
        let mut b = small_cfg("lie");
        b.size = 7;
        let err = compare_solvers(&[a, b], Some(Path::new("/nonexistent"))).unwrap_err();
        assert!(matches!(err, ExperimentError::MixedBenchmark(_)));
        assert_eq!(err.code(), 2);
    }

    #[test]
    fn compare_row_count_and_best_ordering() {
        let out = tempfile::tempdir().unwrap();
        let mut a = small_cfg("galerkin");
        a.truncation_tol = 1e-3;
        let mut b = small_cfg("lie");
        b.truncation_tol = 1e-3;
        b.h = 0.0625;
        let dir = compare_solvers(&[a, b], Some(out.path())).unwrap();
        let text = read(&dir.join("compare.csv"));
        assert_eq!(text.lines().count(), 1 + 9 + 17);
        for line in text.lines().skip(2).filter(|l| l.starts_with("galerkin")) {
            let f: Vec<&str> = line.split(',').collect();
            let rel_f: f64 = f[4].parse().unwrap();
            let best: f64 = f[8].parse().unwrap();
            assert!(rel_f >= best * (1.0 - 1e-12) - 1e-13, "{line}");
        }
    }

    #[test]
    fn dump_writes_matrices() {
        let out = tempfile::tempdir().unwrap();
        dump_benchmark("tridiag-mass", 4, out.path()).unwrap();
        let a = read(&out.path().join("A.csv"));
        assert_eq!(a.lines().count(), 4);
        assert!(out.path().join("M.csv").exists());
        assert!(matches!(dump_benchmark("rail", 4, out.path()), Err(ExperimentError::Config(_))));
    }
}
