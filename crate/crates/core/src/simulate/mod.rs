//! Monte Carlo: the auxiliary diffusion with saddle-point stopping, the
//! reflected controlled diffusion under the boundary policy and its
//! perturbations, and the verification report comparing both with the
//! PDE.

mod cone;
mod control;
mod game_mc;
pub mod rng;
mod verify;

pub use cone::{cone_monotonicity_probe, contact_samples, ConeReport, ConeSample};
pub use control::{
    evaluate_cost, path_cost, simulate_reflected, ControlledPath, CostBreakdown, CostModel, CostSample, Jump, Policy,
    TerminalPolicy,
};
pub use game_mc::{game_payoffs, saddle_game_estimate, simulate_uncontrolled, GameRules, Path, StopKind, StopRule};
pub use verify::{
    calibrated_scheme_bias, ci_check, verify_optimality, CheckLine, Outcome, PolicyResult, TerminalComparison, VerificationReport,
    VerifyConfig, SCHEME_BIAS_C,
};

use crate::model::ModelError;
use crate::numerics::mean_and_se;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid Monte Carlo parameter: {0}")]
    Params(String),
    #[error("dt = {dt} does not divide the remaining horizon {span}")]
    Steps { dt: f64, span: f64 },
    #[error("start ({s}, {x}) outside the domain")]
    Start { s: f64, x: f64 },
    #[error(transparent)]
    Singular(#[from] crate::singular::SingularError),
    #[error(transparent)]
    Game(#[from] crate::game::GameError),
}

/// Path count, time step and seed of one estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McParams {
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
}

impl McParams {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_paths == 0 {
            return Err(SimError::Params("n_paths must be positive".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimError::Params(format!("dt = {} must be positive", self.dt)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n_paths: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Estimate {
        let (mean, se) = mean_and_se(xs);
        Estimate {
            mean,
            se,
            n_paths: xs.len(),
        }
    }
}

/// Number of steps of size `dt` from `s` to `horizon`; `dt` must divide
/// the span up to rounding.
pub(crate) fn step_count(s: f64, horizon: f64, dt: f64) -> Result<usize, SimError> {
    let span = horizon - s;
    if span < 0.0 {
        return Err(SimError::Steps { dt, span });
    }
    let n = (span / dt).round();
    if (n * dt - span).abs() > 1e-9 * span.max(1.0) {
        return Err(SimError::Steps { dt, span });
    }
    Ok(n as usize)
}

/// Runs `f` for every path index and returns the results in path order,
/// whatever the thread count.
pub(crate) fn per_path<R: Send>(
    n: usize,
    f: impl Fn(u64) -> Result<R, SimError> + Sync + Send,
) -> Result<Vec<R>, SimError> {
    (0..n as u64).into_par_iter().map(f).collect()
}

/// `sigma` and `sigma'`, cached when the expression is constant.
pub(crate) struct Vol<'a> {
    spec: &'a crate::model::ProblemSpec,
    constant: Option<f64>,
}

impl<'a> Vol<'a> {
    pub fn new(spec: &'a crate::model::ProblemSpec) -> Vol<'a> {
        let constant = spec.sigma.is_constant().then(|| spec.sigma(0.0).ok()).flatten();
        Vol { spec, constant }
    }

    pub fn at(&self, y: f64) -> Result<(f64, f64), ModelError> {
        match self.constant {
            Some(s) => Ok((s, 0.0)),
            None => Ok((self.spec.sigma(y)?, self.spec.sigma_prime(y)?)),
        }
    }
}
