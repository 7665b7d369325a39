//! Problem definition: coefficients, obstacles, payoffs and the checks and
//! derived curves that the solvers rely on.

mod curves;
mod terminal;
mod validate;

pub use curves::{compute_ab_curves, CurvePair, Side};
pub use terminal::{terminal_transform, TransformedTerminal};
pub use validate::{validate_problem, Check, ValidationReport, Violation};
pub use validate::{
    BOUNDED, CROSSOVER, F1_NONDECREASING, F2_NONINCREASING, G_ZERO, H_INCREASING, H_ZERO, SANDWICH, SIGMA, SIGNS,
};

use crate::expr::{parse, EvalError, Expr, ParseError, Var};
use crate::grid::Grid;
use std::fmt;
use thiserror::Error;

/// Which terminal payoff the game uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TerminalMode {
    /// The supplied `g`, which must lie between the obstacles.
    #[default]
    Given,
    /// The envelope `g_tilde` built by [`terminal_transform`].
    Envelope,
}

/// Named input function of a problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Function {
    Sigma,
    F1,
    F2,
    H,
    G,
}

impl fmt::Display for Function {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Function::Sigma => "sigma",
            Function::F1 => "f1",
            Function::F2 => "f2",
            Function::H => "h",
            Function::G => "g",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("failed to parse {function}: {source}")]
    Parse {
        function: Function,
        source: ParseError,
    },
    #[error("{function} cannot be evaluated at t = {t}, y = {y}: {source}")]
    Eval {
        function: Function,
        t: f64,
        y: f64,
        source: EvalError,
    },
    #[error("{function} must be a function of y only")]
    DependsOnTime { function: Function },
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error(transparent)]
    Grid(#[from] crate::grid::GridError),
    #[error("curve {curve}: defining function has no sign change on the band at t = {t}")]
    NoRoot { curve: Side, t: f64 },
    #[error("curve {curve}: defining function is not strictly increasing in y at t = {t}, near y = {y}")]
    NotIncreasing { curve: Side, t: f64, y: f64 },
    #[error("curve {curve} at t = {t} is {value}, outside the band interior (10% margin required: [{lo}, {hi}])")]
    BandTooNarrow {
        curve: Side,
        t: f64,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("curve {curve} at t = {t} is {value}; expected a(t) < 0 < b(t)")]
    CurveSign { curve: Side, t: f64, value: f64 },
    #[error("terminal crossover not found: g violates the {side} obstacle on the whole band")]
    CrossoverNotFound { side: Side },
    #[error("terminal payoff leaves the obstacle interval inside [A, B] at y = {y} (g = {g}, -f1 = {lower}, f2 = {upper})")]
    SandwichViolated {
        y: f64,
        g: f64,
        lower: f64,
        upper: f64,
    },
}

/// One problem instance: drift `mu(y) = c y + d`, discount rate `c`,
/// volatility `sigma(y)`, obstacle costs `f1`, `f2`, running payoff `h` and
/// terminal payoff `g`, on horizon `[0, T]` and band `[band_lo, band_hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub c: f64,
    pub d: f64,
    pub horizon: f64,
    pub band_lo: f64,
    pub band_hi: f64,
    /// Lower bound `sigma >= sigma_min` checked on the grid.
    pub sigma_min: f64,
    /// Bound `M` on `|f1|, |f2|, |h|, |g|`; `None` reports the sampled maximum.
    pub bound: Option<f64>,
    pub sigma: Expr,
    pub f1: Expr,
    pub f2: Expr,
    pub h: Expr,
    pub g: Expr,
    d_sigma: Expr,
    f1_t: Expr,
    f1_y: Expr,
    f1_yy: Expr,
    f2_t: Expr,
    f2_y: Expr,
    f2_yy: Expr,
}

/// Expression sources for [`ProblemSpec::parse`].
#[derive(Debug, Clone, Copy)]
pub struct Sources<'a> {
    pub sigma: &'a str,
    pub f1: &'a str,
    pub f2: &'a str,
    pub h: &'a str,
    pub g: &'a str,
}

impl ProblemSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        c: f64,
        d: f64,
        horizon: f64,
        band: (f64, f64),
        sigma: Expr,
        f1: Expr,
        f2: Expr,
        h: Expr,
        g: Expr,
    ) -> Result<ProblemSpec, ModelError> {
        if sigma.depends_on(Var::T) {
            return Err(ModelError::DependsOnTime {
                function: Function::Sigma,
            });
        }
        if g.depends_on(Var::T) {
            return Err(ModelError::DependsOnTime {
                function: Function::G,
            });
        }
        for (name, v) in [("c", c), ("d", d), ("T", horizon)] {
            if !v.is_finite() {
                return Err(ModelError::Invalid(format!("{name} must be finite")));
            }
        }
        if horizon <= 0.0 {
            return Err(ModelError::Invalid("T must be positive".into()));
        }
        if !(band.0 < 0.0 && 0.0 < band.1) {
            return Err(ModelError::Invalid(format!(
                "band [{}, {}] must contain 0 in its interior",
                band.0, band.1
            )));
        }
        let f1_y = f1.diff(Var::Y);
        let f2_y = f2.diff(Var::Y);
        Ok(ProblemSpec {
            c,
            d,
            horizon,
            band_lo: band.0,
            band_hi: band.1,
            sigma_min: 1e-8,
            bound: None,
            d_sigma: sigma.diff(Var::Y),
            f1_t: f1.diff(Var::T),
            f1_yy: f1_y.diff(Var::Y),
            f1_y,
            f2_t: f2.diff(Var::T),
            f2_yy: f2_y.diff(Var::Y),
            f2_y,
            sigma,
            f1,
            f2,
            h,
            g,
        })
    }

    /// Parses the five function expressions.
    pub fn parse(c: f64, d: f64, horizon: f64, band: (f64, f64), src: Sources<'_>) -> Result<ProblemSpec, ModelError> {
        let p = |function, s: &str| parse(s).map_err(|source| ModelError::Parse { function, source });
        ProblemSpec::new(
            c,
            d,
            horizon,
            band,
            p(Function::Sigma, src.sigma)?,
            p(Function::F1, src.f1)?,
            p(Function::F2, src.f2)?,
            p(Function::H, src.h)?,
            p(Function::G, src.g)?,
        )
    }

    pub fn with_sigma_min(mut self, eps: f64) -> Self {
        self.sigma_min = eps;
        self
    }

    pub fn with_bound(mut self, m: Option<f64>) -> Self {
        self.bound = m;
        self
    }

    /// Same problem with a different terminal payoff.
    pub fn with_terminal(mut self, g: Expr) -> Result<Self, ModelError> {
        if g.depends_on(Var::T) {
            return Err(ModelError::DependsOnTime {
                function: Function::G,
            });
        }
        self.g = g;
        Ok(self)
    }

    pub fn expr(&self, f: Function) -> &Expr {
        match f {
            Function::Sigma => &self.sigma,
            Function::F1 => &self.f1,
            Function::F2 => &self.f2,
            Function::H => &self.h,
            Function::G => &self.g,
        }
    }

    fn eval_expr(&self, function: Function, e: &Expr, t: f64, y: f64) -> Result<f64, ModelError> {
        e.eval(t, y).map_err(|source| ModelError::Eval {
            function,
            t,
            y,
            source,
        })
    }

    pub fn eval(&self, f: Function, t: f64, y: f64) -> Result<f64, ModelError> {
        self.eval_expr(f, self.expr(f), t, y)
    }

    pub fn sigma(&self, y: f64) -> Result<f64, ModelError> {
        self.eval(Function::Sigma, 0.0, y)
    }

    pub fn sigma_prime(&self, y: f64) -> Result<f64, ModelError> {
        self.eval_expr(Function::Sigma, &self.d_sigma, 0.0, y)
    }

    pub fn f1(&self, t: f64, y: f64) -> Result<f64, ModelError> {
        self.eval(Function::F1, t, y)
    }

    pub fn f2(&self, t: f64, y: f64) -> Result<f64, ModelError> {
        self.eval(Function::F2, t, y)
    }

    pub fn h(&self, t: f64, y: f64) -> Result<f64, ModelError> {
        self.eval(Function::H, t, y)
    }

    pub fn g(&self, y: f64) -> Result<f64, ModelError> {
        self.eval(Function::G, self.horizon, y)
    }

    pub fn f1_y(&self, t: f64, y: f64) -> Result<f64, ModelError> {
        self.eval_expr(Function::F1, &self.f1_y, t, y)
    }

    pub fn f2_y(&self, t: f64, y: f64) -> Result<f64, ModelError> {
        self.eval_expr(Function::F2, &self.f2_y, t, y)
    }

    pub fn f1_t(&self, t: f64, y: f64) -> Result<f64, ModelError> {
        self.eval_expr(Function::F1, &self.f1_t, t, y)
    }

    pub fn f2_t(&self, t: f64, y: f64) -> Result<f64, ModelError> {
        self.eval_expr(Function::F2, &self.f2_t, t, y)
    }

    /// Drift of the controlled state, `mu(y) = c y + d`.
    pub fn mu(&self, y: f64) -> f64 {
        self.c * y + self.d
    }

    /// Drift of the game diffusion, `sigma sigma' + mu`.
    pub fn game_drift(&self, y: f64) -> Result<f64, ModelError> {
        Ok(self.sigma(y)? * self.sigma_prime(y)? + self.mu(y))
    }

    /// `e^{ct}`.
    pub fn growth(&self, t: f64) -> f64 {
        (self.c * t).exp()
    }

    /// Generator applied to the lower obstacle plus the running payoff:
    /// `L(-f1) + e^{ct} h`.
    pub fn lower_defining(&self, t: f64, y: f64) -> Result<f64, ModelError> {
        let s = self.sigma(y)?;
        let l = 0.5 * s * s * self.eval_expr(Function::F1, &self.f1_yy, t, y)?
            + self.game_drift(y)? * self.f1_y(t, y)?
            + self.f1_t(t, y)?;
        Ok(-l + self.growth(t) * self.h(t, y)?)
    }

    /// `L f2 + e^{ct} h`.
    pub fn upper_defining(&self, t: f64, y: f64) -> Result<f64, ModelError> {
        let s = self.sigma(y)?;
        let l = 0.5 * s * s * self.eval_expr(Function::F2, &self.f2_yy, t, y)?
            + self.game_drift(y)? * self.f2_y(t, y)?
            + self.f2_t(t, y)?;
        Ok(l + self.growth(t) * self.h(t, y)?)
    }

    /// Grid over this problem's horizon and band.
    pub fn grid(&self, nt: usize, ny: usize) -> Result<Grid, ModelError> {
        Ok(Grid::new(self.horizon, self.band_lo, self.band_hi, nt, ny)?)
    }
}

/// Inputs sampled on every grid node, in row-major `(time, space)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub f1: Vec<f64>,
    pub f2: Vec<f64>,
    pub h: Vec<f64>,
    pub g: Vec<f64>,
    pub sigma: Vec<f64>,
    pub sigma_prime: Vec<f64>,
}

impl ProblemSpec {
    pub fn sample(&self, grid: &Grid) -> Result<Samples, ModelError> {
        let n = grid.nt * grid.ny;
        let mut s = Samples {
            f1: Vec::with_capacity(n),
            f2: Vec::with_capacity(n),
            h: Vec::with_capacity(n),
            g: Vec::with_capacity(grid.ny),
            sigma: Vec::with_capacity(grid.ny),
            sigma_prime: Vec::with_capacity(grid.ny),
        };
        for k in 0..grid.nt {
            let t = grid.t(k);
            for i in 0..grid.ny {
                let y = grid.y(i);
                s.f1.push(self.f1(t, y)?);
                s.f2.push(self.f2(t, y)?);
                s.h.push(self.h(t, y)?);
            }
        }
        for i in 0..grid.ny {
            let y = grid.y(i);
            s.g.push(self.g(y)?);
            s.sigma.push(self.sigma(y)?);
            s.sigma_prime.push(self.sigma_prime(y)?);
        }
        Ok(s)
    }
}

/// Canonical test problems.
pub mod fixtures {
    use super::{ProblemSpec, Sources};

    pub const P0_F1: &str = "2 + tanh(y + 1)";
    pub const P0_F2: &str = "2 - tanh(y - 1)";
    pub const P0_G: &str = "max(-(2 + tanh(y + 1)), min(2 - tanh(y - 1), y))";

    /// Zero drift, unit volatility, `h = y`, tanh-shaped obstacles and the
    /// identity payoff clipped to the obstacles, on `[0, 1] x [-6, 6]`.
    /// Antisymmetric under `y -> -y`.
    pub fn p0() -> ProblemSpec {
        ProblemSpec::parse(
            0.0,
            0.0,
            1.0,
            (-6.0, 6.0),
            Sources {
                sigma: "1",
                f1: P0_F1,
                f2: P0_F2,
                h: "y",
                g: P0_G,
            },
        )
        .expect("P0 parses")
        .with_sigma_min(0.5)
        .with_bound(Some(8.0))
    }

    /// `p0` with the terminal payoff `g = 2y`, which leaves the obstacle
    /// interval outside `[-1, 1]`.
    pub fn p0_jump() -> ProblemSpec {
        p0().with_terminal(crate::expr::parse("2*y").unwrap())
            .expect("y-only payoff")
            .with_bound(Some(13.0))
    }
}
