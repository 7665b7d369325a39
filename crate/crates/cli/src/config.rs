//! JSON run configuration.
//!
//! Expressions are plain strings; names from the `constants` table are
//! replaced by their values before the strings reach the parser.

use scl_core::expr::is_reserved;
use scl_core::game::SolverParams;
use scl_core::grid::Grid;
use scl_core::model::{ProblemSpec, Sources, TerminalMode};
use scl_core::simulate::{McParams, Policy};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub constants: BTreeMap<String, f64>,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub c: f64,
    pub d: f64,
    pub horizon: f64,
    pub band: [f64; 2],
    pub sigma: String,
    pub f1: String,
    pub f2: String,
    pub h: String,
    pub g: String,
    #[serde(default = "default_sigma_min")]
    pub sigma_min: f64,
    /// Bound `M` on the data; unchecked when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    /// Solve with the terminal envelope instead of `g`.
    #[serde(default)]
    pub general_terminal: bool,
}

fn default_sigma_min() -> f64 {
    1e-8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nt: usize,
    pub ny: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { nt: 201, ny: 201 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub theta: f64,
    pub omega: f64,
    pub sweep_tol: f64,
    pub max_sweeps: usize,
    pub implicit_start_steps: usize,
    pub residual_tol: f64,
    /// Defaults to the grid-scaled tolerance.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hjb_tol: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let p = SolverParams::default();
        SolverConfig {
            theta: p.theta,
            omega: p.omega,
            sweep_tol: p.sweep_tol,
            max_sweeps: p.max_sweeps,
            implicit_start_steps: p.implicit_start_steps,
            residual_tol: scl_core::game::RESIDUAL_TOL,
            hjb_tol: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum Perturbation {
    Shift(f64),
    Widen(f64),
    Narrow(f64),
    Frozen,
}

impl From<Perturbation> for Policy {
    fn from(p: Perturbation) -> Policy {
        match p {
            Perturbation::Shift(d) => Policy::Shift(d),
            Perturbation::Widen(d) => Policy::Widen(d),
            Perturbation::Narrow(d) => Policy::Narrow(d),
            Perturbation::Frozen => Policy::Frozen,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
    /// Start point `(s, x)` of the estimators.
    pub start: [f64; 2],
    pub perturbations: Vec<Perturbation>,
    /// Defaults to the calibrated `C (sqrt(dt) + dy)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme_bias: Option<f64>,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            n_paths: 100_000,
            dt: 1e-3,
            seed: 1,
            start: [0.0, 0.0],
            perturbations: vec![
                Perturbation::Shift(0.2),
                Perturbation::Shift(-0.2),
                Perturbation::Widen(0.3),
                Perturbation::Narrow(0.3),
                Perturbation::Frozen,
            ],
            scheme_bias: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    /// Surface, boundaries and residual tables.
    Csv,
    /// Binary surface cache reused by `verify` and `plotdata`.
    Cache,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            formats: vec![Format::Csv, Format::Cache],
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Input(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Input(m));
        for (name, value) in &self.constants {
            if !is_identifier(name) || is_reserved(name) {
                return bad(format!("constant name `{name}` is not a free identifier"));
            }
            if !value.is_finite() {
                return bad(format!("constant `{name}` = {value} is not finite"));
            }
        }
        if self.grid.nt < 2 || self.grid.ny < 3 {
            return bad(format!("grid {} x {} too small", self.grid.nt, self.grid.ny));
        }
        if self.mc.n_paths == 0 {
            return bad("mc.n_paths must be positive".into());
        }
        if !(self.mc.dt > 0.0 && self.mc.dt.is_finite()) {
            return bad(format!("mc.dt = {} must be positive", self.mc.dt));
        }
        Ok(())
    }

    pub fn mode(&self) -> TerminalMode {
        if self.problem.general_terminal {
            TerminalMode::Envelope
        } else {
            TerminalMode::Given
        }
    }

    /// Expression text after constant substitution.
    pub fn expand(&self, src: &str) -> String {
        substitute(src, &self.constants)
    }

    pub fn spec(&self) -> Result<ProblemSpec, CliError> {
        let p = &self.problem;
        let (sigma, f1, f2, h, g) = (
            self.expand(&p.sigma),
            self.expand(&p.f1),
            self.expand(&p.f2),
            self.expand(&p.h),
            self.expand(&p.g),
        );
        let spec = ProblemSpec::parse(
            p.c,
            p.d,
            p.horizon,
            (p.band[0], p.band[1]),
            Sources {
                sigma: &sigma,
                f1: &f1,
                f2: &f2,
                h: &h,
                g: &g,
            },
        )
        .map_err(|e| CliError::Input(e.to_string()))?;
        Ok(spec.with_sigma_min(p.sigma_min).with_bound(p.bound))
    }

    pub fn grid(&self, spec: &ProblemSpec) -> Result<Grid, CliError> {
        spec.grid(self.grid.nt, self.grid.ny).map_err(|e| CliError::Input(e.to_string()))
    }

    pub fn solver_params(&self) -> SolverParams {
        let s = &self.solver;
        SolverParams {
            theta: s.theta,
            omega: s.omega,
            sweep_tol: s.sweep_tol,
            max_sweeps: s.max_sweeps,
            implicit_start_steps: s.implicit_start_steps,
        }
    }

    pub fn mc_params(&self) -> McParams {
        McParams {
            n_paths: self.mc.n_paths,
            dt: self.mc.dt,
            seed: self.mc.seed,
        }
    }

    /// Everything the solved surface depends on, used to key the cache.
    pub fn solve_key(&self) -> String {
        let key = serde_json::json!({
            "constants": self.constants,
            "problem": self.problem,
            "grid": self.grid,
            "solver": self.solver,
        });
        serde_json::to_string(&key).expect("key serializes")
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Replaces whole identifiers found in `constants` by their parenthesized
/// values, printed so they re-parse to the same double.
pub fn substitute(src: &str, constants: &BTreeMap<String, f64>) -> String {
    let mut out = String::with_capacity(src.len());
    let bytes = src.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let starts_ident = (c.is_ascii_alphabetic() || c == '_')
            // the exponent of a number such as 1e5 is not an identifier
            && !(i > 0 && (bytes[i - 1] as char).is_ascii_alphanumeric() || i > 0 && bytes[i - 1] == b'.');
        if starts_ident {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let word = &src[start..i];
            match constants.get(word) {
                Some(v) => out.push_str(&format!("({v:?})")),
                None => out.push_str(word),
            }
        } else {
            out.push(c);
            i += 1;
        }
    }
    out
}
