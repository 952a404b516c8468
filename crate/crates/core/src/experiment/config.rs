use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::ExperimentError;
use crate::benchmarks::BENCHMARK_NAMES;

/// Solver identifiers accepted in configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverId {
    Galerkin,
    ModDmFull,
    Dm,
    Formula1,
    Formula2,
    Lie,
    Strang,
    RkOracle,
}

impl SolverId {
    pub const ALL: [SolverId; 8] = [
        SolverId::Galerkin,
        SolverId::ModDmFull,
        SolverId::Dm,
        SolverId::Formula1,
        SolverId::Formula2,
        SolverId::Lie,
        SolverId::Strang,
        SolverId::RkOracle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SolverId::Galerkin => "galerkin",
            SolverId::ModDmFull => "moddm-full",
            SolverId::Dm => "dm",
            SolverId::Formula1 => "formula1",
            SolverId::Formula2 => "formula2",
            SolverId::Lie => "lie",
            SolverId::Strang => "strang",
            SolverId::RkOracle => "rk-oracle",
        }
    }
}

impl fmt::Display for SolverId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolverId {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SolverId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| ExperimentError::Config(format!("unknown solver '{s}'")))
    }
}

/// One experiment: benchmark, solver, grid and tolerances.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub name: String,
    pub benchmark: String,
    /// `n`, or the grid width for `conv-diff`.
    pub size: usize,
    pub solver: SolverId,
    pub h: f64,
    /// Final time; the benchmark horizon when unset.
    pub tf: Option<f64>,
    pub tol_exp: f64,
    pub truncation_tol: f64,
    pub reference: SolverId,
    /// Step of the reference run; `h` when unset.
    pub reference_h: Option<f64>,
    pub out: Option<PathBuf>,
    pub are_tol: f64,
    /// Eigenvalues are written for every `decay_stride`-th step.
    pub decay_stride: usize,
}

pub const CONFIG_KEYS: [&str; 13] = [
    "name",
    "benchmark",
    "size",
    "solver",
    "h",
    "tf",
    "tol_exp",
    "truncation_tol",
    "reference",
    "reference_h",
    "out",
    "are_tol",
    "decay_stride",
];

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            name: "run".into(),
            benchmark: "tridiag".into(),
            size: 20,
            solver: SolverId::Galerkin,
            h: 2f64.powi(-5),
            tf: None,
            tol_exp: crate::dre::DEFAULT_TOL_EXP,
            truncation_tol: f64::EPSILON,
            reference: SolverId::Formula2,
            reference_h: None,
            out: None,
            are_tol: crate::are::DEFAULT_ARE_TOL,
            decay_stride: 1,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T, ExperimentError> {
    value
        .parse()
        .map_err(|_| ExperimentError::Config(format!("invalid value for {key}: '{value}'")))
}

/// Accepts plain decimals as well as powers of two written `2^-5`.
fn parse_real(key: &str, value: &str) -> Result<f64, ExperimentError> {
    if let Some(exp) = value.strip_prefix("2^") {
        let e: i32 = parse_num(key, exp)?;
        return Ok(2f64.powi(e));
    }
    parse_num(key, value)
}

impl RunConfig {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        let mut cfg = RunConfig::default();
        let mut seen = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ExperimentError::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim();
            if seen.contains(&key.to_string()) {
                return Err(ExperimentError::Config(format!("duplicate key '{key}'")));
            }
            seen.push(key.to_string());
            cfg.set(key, value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Overrides a single key; call [`RunConfig::validate`] afterwards.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ExperimentError> {
        match key {
            "name" => self.name = value.to_string(),
            "benchmark" => self.benchmark = value.to_string(),
            "size" => self.size = parse_num(key, value)?,
            "solver" => self.solver = value.parse()?,
            "h" => self.h = parse_real(key, value)?,
            "tf" => self.tf = Some(parse_real(key, value)?),
            "tol_exp" => self.tol_exp = parse_real(key, value)?,
            "truncation_tol" => self.truncation_tol = parse_real(key, value)?,
            "reference" => self.reference = value.parse()?,
            "reference_h" => self.reference_h = Some(parse_real(key, value)?),
            "out" => self.out = Some(PathBuf::from(value)),
            "are_tol" => self.are_tol = parse_real(key, value)?,
            "decay_stride" => self.decay_stride = parse_num(key, value)?,
            other => {
                return Err(ExperimentError::Config(format!(
                    "unknown key '{other}' (expected one of {})",
                    CONFIG_KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |msg: String| Err(ExperimentError::Config(msg));
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return bad(format!("name must be a plain directory name, got '{}'", self.name));
        }
        if !BENCHMARK_NAMES.contains(&self.benchmark.as_str()) {
            return bad(format!(
                "unknown benchmark '{}' (expected one of {})",
                self.benchmark,
                BENCHMARK_NAMES.join(", ")
            ));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return bad(format!("h must be positive, got {}", self.h));
        }
        if let Some(tf) = self.tf {
            if !(tf > 0.0 && tf.is_finite()) {
                return bad(format!("tf must be positive, got {tf}"));
            }
            check_divides(self.h, tf, "h", "tf")?;
        }
        if let Some(rh) = self.reference_h {
            if !(rh > 0.0 && rh <= self.h) {
                return bad(format!("reference_h must lie in (0, h], got {rh}"));
            }
            check_divides(rh, self.h, "reference_h", "h")?;
        }
        if !(self.tol_exp > 0.0) {
            return bad(format!("tol_exp must be positive, got {}", self.tol_exp));
        }
        if !(self.truncation_tol >= 1e-16 && self.truncation_tol < 1.0) {
            return bad(format!(
                "truncation_tol must lie in [1e-16, 1), got {}",
                self.truncation_tol
            ));
        }
        if !(self.are_tol > 0.0 && self.are_tol <= 1e-2) {
            return bad(format!("are_tol must lie in (0, 1e-2], got {}", self.are_tol));
        }
        if self.decay_stride == 0 {
            return bad("decay_stride must be positive".into());
        }
        Ok(())
    }

    /// Final time, falling back to the benchmark horizon.
    pub fn final_time(&self, horizon: f64) -> Result<f64, ExperimentError> {
        let tf = self.tf.unwrap_or(horizon);
        check_divides(self.h, tf, "h", "tf")?;
        Ok(tf)
    }
}

/// `big` must be an integer multiple of `small` to `1e-12` relative.
pub(crate) fn check_divides(small: f64, big: f64, s: &str, b: &str) -> Result<(), ExperimentError> {
    let ratio = (big / small).round();
    if ratio >= 1.0 && (ratio * small - big).abs() <= 1e-12 * big {
        Ok(())
    } else {
        Err(ExperimentError::Config(format!(
            "{s} = {small} does not divide {b} = {big}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let cfg = RunConfig::parse(
            "# comment\nname = demo\nbenchmark = tridiag\nsize = 8\nsolver = moddm-full\n\
             h = 2^-4\ntf = 2\nreference = formula1\nreference_h = 2^-6\ndecay_stride = 4\n",
        )
        .unwrap();
        assert_eq!(cfg.name, "demo");
        assert_eq!(cfg.size, 8);
        assert_eq!(cfg.solver, SolverId::ModDmFull);
        assert_eq!(cfg.h, 0.0625);
        assert_eq!(cfg.tf, Some(2.0));
        assert_eq!(cfg.reference, SolverId::Formula1);
        assert_eq!(cfg.reference_h, Some(2f64.powi(-6)));
        assert_eq!(cfg.decay_stride, 4);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(RunConfig::parse("h = 0.3\ntf = 1"), Err(ExperimentError::Config(_))));
        assert!(matches!(RunConfig::parse("solver = euler"), Err(ExperimentError::Config(_))));
        assert!(matches!(RunConfig::parse("colour = red"), Err(ExperimentError::Config(_))));
        assert!(matches!(RunConfig::parse("size = 3\nsize = 4"), Err(ExperimentError::Config(_))));
        assert!(matches!(RunConfig::parse("benchmark = rail"), Err(ExperimentError::Config(_))));
        assert!(matches!(RunConfig::parse("just text"), Err(ExperimentError::Config(_))));
    }

    #[test]
    fn solver_ids_round_trip() {
        for id in SolverId::ALL {
            assert_eq!(id.as_str().parse::<SolverId>().unwrap(), id);
        }
    }
}
