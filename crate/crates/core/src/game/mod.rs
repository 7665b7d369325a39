//! Double-obstacle parabolic problem: backward theta-scheme with projected
//! relaxation per time level, region labels, free boundary extraction and
//! the diagnostics built on them.

mod boundaries;
mod cache;
mod diagnostics;
mod residual;
mod solver;

pub use boundaries::{extract_free_boundaries, FreeBoundaries, KINK_TOL};
pub use cache::{read_cache, write_cache, Cache, CacheError};
pub use diagnostics::{
    boundary_time_derivative_check, region_structure_check, richardson_ratios, smooth_fit_check, RegionStructureReport,
    SmoothFitReport, TimeDerivativeReport,
};
pub use residual::{pde_residual, ResidualField, RESIDUAL_TOL};
pub use solver::{solve_dynkin_game, terminal_values, SolverParams};

use crate::grid::Grid;
use crate::model::{ModelError, TerminalMode};
use crate::numerics::NumericsError;
use crate::scalar::Real;
use thiserror::Error;

/// Node label: on the lower obstacle, strictly between, or on the upper one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Region {
    LowerContact = 0,
    Continuation = 1,
    UpperContact = 2,
}

impl Region {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(c: u8) -> Option<Region> {
        match c {
            0 => Some(Region::LowerContact),
            1 => Some(Region::Continuation),
            2 => Some(Region::UpperContact),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Region::LowerContact => "LOWER_CONTACT",
            Region::Continuation => "CONTINUATION",
            Region::UpperContact => "UPPER_CONTACT",
        }
    }

    /// Exact comparison with the obstacles; the lower one wins a tie.
    pub fn classify<T: Real>(v: T, lower: T, upper: T) -> Region {
        if v == lower {
            Region::LowerContact
        } else if v == upper {
            Region::UpperContact
        } else {
            Region::Continuation
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid solver parameter: {0}")]
    Params(String),
    #[error("obstacles cross at t = {t}, y = {y}: -f1 = {lower} > f2 = {upper}")]
    ObstaclesCross { t: f64, y: f64, lower: f64, upper: f64 },
    #[error("terminal payoff outside the obstacles at y = {y} (value {value}, interval [{lower}, {upper}])")]
    TerminalOutside {
        y: f64,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("time level {level} (t = {t}): {source}")]
    Sweep {
        level: usize,
        t: f64,
        source: NumericsError,
    },
    #[error("time level {level} (t = {t}) has no continuation node; refine the grid or check the problem")]
    EmptyContinuation { level: usize, t: f64 },
    #[error("surface and problem disagree: {0}")]
    Mismatch(String),
}

/// Discrete value function with its node labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSurface<T> {
    pub grid: Grid,
    pub mode: TerminalMode,
    pub params: SolverParams,
    /// `V`, row-major `(time, space)`.
    pub v: Vec<T>,
    /// `-f1` on the nodes.
    pub lower: Vec<T>,
    /// `f2` on the nodes.
    pub upper: Vec<T>,
    pub region: Vec<Region>,
    /// Discrete `L V + e^{ct} h` from the solver's stencil; NaN on the
    /// terminal level and the two Dirichlet columns.
    pub residual: Vec<T>,
    /// Relaxation sweeps used per level (0 on the terminal level).
    pub sweeps: Vec<usize>,
}

impl<T: Real> ValueSurface<T> {
    pub fn at(&self, n: usize, i: usize) -> T {
        self.v[self.grid.idx(n, i)]
    }

    pub fn row(&self, n: usize) -> &[T] {
        let ny = self.grid.ny;
        &self.v[n * ny..(n + 1) * ny]
    }

    pub fn region_at(&self, n: usize, i: usize) -> Region {
        self.region[self.grid.idx(n, i)]
    }

    /// Linear interpolation of `V(t_n, y)` within a level.
    pub fn interp_row(&self, n: usize, y: f64) -> f64 {
        let row: Vec<f64> = self.row(n).iter().map(|v| v.to_f64_lossy()).collect();
        crate::numerics::interp_linear(self.grid.y(0), self.grid.dy, &row, y)
    }

    /// Bilinear interpolation of `V(t, y)`.
    pub fn interp(&self, t: f64, y: f64) -> f64 {
        let g = &self.grid;
        let (n, w) = crate::numerics::locate(0.0, g.dt, g.nt, t);
        let lo = self.interp_row(n, y);
        if w == 0.0 {
            return lo;
        }
        lo + w * (self.interp_row(n + 1, y) - lo)
    }
}
