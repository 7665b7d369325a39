use super::curves::{Side, ROOT_TOL};
use super::{ModelError, ProblemSpec};
use crate::grid::Grid;
use crate::numerics::{bisect, cumulative_trapezoid};

/// Terminal payoff replaced by its envelope: `g_tilde` equals `-f1(T,.)`
/// left of `A`, `f2(T,.)` right of `B` and `g` on `[A, B]`. `G` and
/// `G_tilde` are the antiderivatives of `e^{-cT} g` and `e^{-cT} g_tilde`
/// from 0, sampled on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedTerminal {
    pub y: Vec<f64>,
    pub g: Vec<f64>,
    pub g_tilde: Vec<f64>,
    pub big_g: Vec<f64>,
    pub big_g_tilde: Vec<f64>,
    /// Lower crossover; the band's lower edge when `g` never drops below `-f1`.
    pub a: f64,
    /// Upper crossover; the band's upper edge when `g` never exceeds `f2`.
    pub b: f64,
}

/// Builds the terminal envelope. `g + f1(T,.)` must be negative left of
/// some `A < 0` and nonnegative after it, `g - f2(T,.)` positive right of
/// some `B > 0` and nonpositive before it.
pub fn terminal_transform(spec: &ProblemSpec, grid: &Grid) -> Result<TransformedTerminal, ModelError> {
    let t = grid.horizon;
    let lower = |y: f64| -> Result<f64, ModelError> { Ok(spec.g(y)? + spec.f1(t, y)?) };
    let upper = |y: f64| -> Result<f64, ModelError> { Ok(spec.g(y)? - spec.f2(t, y)?) };
    let (lo, hi) = (grid.y(0), grid.y(grid.ny - 1));

    let crossover = |side: Side| -> Result<f64, ModelError> {
        let (f, end): (&dyn Fn(f64) -> Result<f64, ModelError>, f64) = match side {
            Side::Lower => (&lower, lo),
            Side::Upper => (&upper, hi),
        };
        let at_zero = f(0.0)?;
        let violated_at_zero = match side {
            Side::Lower => at_zero < 0.0,
            Side::Upper => at_zero > 0.0,
        };
        if violated_at_zero {
            return Err(ModelError::CrossoverNotFound { side });
        }
        let at_end = f(end)?;
        let violated_at_end = match side {
            Side::Lower => at_end < 0.0,
            Side::Upper => at_end > 0.0,
        };
        if !violated_at_end {
            return Ok(end);
        }
        let mut err = None;
        let (x0, x1) = if end < 0.0 { (end, 0.0) } else { (0.0, end) };
        let root = bisect(
            |y| {
                f(y).unwrap_or_else(|e| {
                    err.get_or_insert(e);
                    f64::NAN
                })
            },
            x0,
            x1,
            ROOT_TOL,
        );
        if let Some(e) = err {
            return Err(e);
        }
        root.map_err(|_| ModelError::CrossoverNotFound { side })
    };
    let a = crossover(Side::Lower)?;
    let b = crossover(Side::Upper)?;

    let ys = grid.ys();
    let mut g = Vec::with_capacity(grid.ny);
    let mut g_tilde = Vec::with_capacity(grid.ny);
    for &y in &ys {
        let gy = spec.g(y)?;
        let low = -spec.f1(t, y)?;
        let up = spec.f2(t, y)?;
        let gt = if y < a {
            low
        } else if y > b {
            up
        } else {
            // Nodes within bisection tolerance of A or B may carry a
            // violation of that order; anything larger is an input error.
            let slack = 1e-8;
            if gy < low - slack || gy > up + slack {
                return Err(ModelError::SandwichViolated {
                    y,
                    g: gy,
                    lower: low,
                    upper: up,
                });
            }
            gy
        };
        g.push(gy);
        g_tilde.push(gt);
    }
    let disc = (-spec.c * t).exp();
    let scaled = |v: &[f64]| v.iter().map(|x| disc * x).collect::<Vec<_>>();
    let big_g = cumulative_trapezoid(&scaled(&g), grid.dy, grid.zero_index);
    let big_g_tilde = cumulative_trapezoid(&scaled(&g_tilde), grid.dy, grid.zero_index);
    Ok(TransformedTerminal {
        y: ys,
        g,
        g_tilde,
        big_g,
        big_g_tilde,
        a,
        b,
    })
}

impl TransformedTerminal {
    /// Clamp of a terminal state onto `[A, B]`.
    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.a, self.b)
    }
}
