use super::{GameError, Region, ValueSurface};
use crate::grid::Grid;
use crate::model::{terminal_transform, ProblemSpec, Samples, TerminalMode};
use crate::numerics::{psor, Tridiagonal};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    /// Time weighting in `[1/2, 1]`; 1/2 is Crank-Nicolson, 1 fully implicit.
    pub theta: f64,
    /// Relaxation factor in `(1, 2)`.
    pub omega: f64,
    /// Sweeps stop when the largest node update is below this.
    pub sweep_tol: f64,
    pub max_sweeps: usize,
    /// Number of fully implicit steps taken first from the terminal level,
    /// which damps the kinks of the terminal payoff.
    pub implicit_start_steps: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            theta: 0.5,
            omega: 1.2,
            sweep_tol: 1e-10,
            max_sweeps: 10_000,
            implicit_start_steps: 2,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<(), GameError> {
        if !(0.5..=1.0).contains(&self.theta) {
            return Err(GameError::Params(format!("theta = {} not in [1/2, 1]", self.theta)));
        }
        if !(self.omega > 1.0 && self.omega < 2.0) {
            return Err(GameError::Params(format!("omega = {} not in (1, 2)", self.omega)));
        }
        if !(self.sweep_tol > 0.0) {
            return Err(GameError::Params("sweep_tol must be positive".into()));
        }
        if self.max_sweeps == 0 {
            return Err(GameError::Params("max_sweeps must be positive".into()));
        }
        Ok(())
    }

    /// Weight used for the step from level `n + 1` to level `n`.
    pub fn theta_at(&self, n: usize, nt: usize) -> f64 {
        if n + 1 + self.implicit_start_steps >= nt {
            1.0
        } else {
            self.theta
        }
    }
}

/// Spatial part of the generator, `alpha y'' + beta y'`, with
/// `alpha = sigma^2 / 2` and `beta = sigma sigma' + mu`, discretized by
/// central differences.
#[derive(Debug, Clone)]
pub(crate) struct Stencil<T> {
    pub lo: Vec<T>,
    pub mid: Vec<T>,
    pub hi: Vec<T>,
}

impl<T: Real> Stencil<T> {
    pub fn new(spec: &ProblemSpec, grid: &Grid, s: &Samples) -> Stencil<T> {
        let (inv_dy2, inv_2dy) = (1.0 / (grid.dy * grid.dy), 0.5 / grid.dy);
        let mut st = Stencil {
            lo: Vec::with_capacity(grid.ny),
            mid: Vec::with_capacity(grid.ny),
            hi: Vec::with_capacity(grid.ny),
        };
        for i in 0..grid.ny {
            let alpha = 0.5 * s.sigma[i] * s.sigma[i];
            let beta = s.sigma[i] * s.sigma_prime[i] + spec.mu(grid.y(i));
            st.lo.push(T::lit(alpha * inv_dy2 - beta * inv_2dy));
            st.mid.push(T::lit(-2.0 * alpha * inv_dy2));
            st.hi.push(T::lit(alpha * inv_dy2 + beta * inv_2dy));
        }
        st
    }

    /// `(L v)_i` at an interior node.
    pub fn apply(&self, v: &[T], i: usize) -> T {
        self.lo[i] * v[i - 1] + self.mid[i] * v[i] + self.hi[i] * v[i + 1]
    }
}

/// One backward step `n + 1 -> n`: the interior system `M x = rhs`,
/// with the Dirichlet values folded into `rhs`.
pub(crate) struct Level<T> {
    pub matrix: Tridiagonal<T>,
    pub rhs: Vec<T>,
}

/// Assembles level `n` given `V^{n+1}` and the Dirichlet values at level
/// `n`. `source_n` and `source_next` are `e^{ct} h` on the two levels.
pub(crate) fn assemble<T: Real>(
    st: &Stencil<T>,
    dt: f64,
    theta: f64,
    next: &[T],
    source_n: &[T],
    source_next: &[T],
    left: T,
    right: T,
) -> Level<T> {
    let ny = next.len();
    let m = ny - 2;
    let (th, one_th) = (T::lit(theta), T::lit(1.0 - theta));
    let inv_dt = T::lit(1.0 / dt);
    let mut matrix = Tridiagonal {
        sub: Vec::with_capacity(m),
        diag: Vec::with_capacity(m),
        sup: Vec::with_capacity(m),
    };
    let mut rhs = Vec::with_capacity(m);
    for i in 1..ny - 1 {
        matrix.sub.push(-th * st.lo[i]);
        matrix.diag.push(inv_dt - th * st.mid[i]);
        matrix.sup.push(-th * st.hi[i]);
        let mut r = next[i] * inv_dt
            + one_th * st.apply(next, i)
            + th * source_n[i]
            + one_th * source_next[i];
        if i == 1 {
            r = r + th * st.lo[i] * left;
        }
        if i == ny - 2 {
            r = r + th * st.hi[i] * right;
        }
        rhs.push(r);
    }
    Level { matrix, rhs }
}

/// Terminal values for the chosen mode, checked against the obstacles.
pub fn terminal_values(spec: &ProblemSpec, grid: &Grid, mode: TerminalMode) -> Result<Vec<f64>, GameError> {
    let values = match mode {
        TerminalMode::Given => (0..grid.ny).map(|i| spec.g(grid.y(i))).collect::<Result<Vec<_>, _>>()?,
        TerminalMode::Envelope => terminal_transform(spec, grid)?.g_tilde,
    };
    let t = grid.horizon;
    for (i, &v) in values.iter().enumerate() {
        let y = grid.y(i);
        let (lower, upper) = (-spec.f1(t, y)?, spec.f2(t, y)?);
        if v < lower || v > upper {
            return Err(GameError::TerminalOutside {
                y,
                value: v,
                lower,
                upper,
            });
        }
    }
    Ok(values)
}

pub(crate) fn sources<T: Real>(spec: &ProblemSpec, grid: &Grid, s: &Samples) -> Vec<T> {
    let mut out = Vec::with_capacity(s.h.len());
    for n in 0..grid.nt {
        let growth = spec.growth(grid.t(n));
        out.extend(s.h[n * grid.ny..(n + 1) * grid.ny].iter().map(|&h| T::lit(growth * h)));
    }
    out
}

/// Solves the game backward from the terminal level. Each level is a box
/// constrained complementarity problem between `-f1` and `f2`, solved by
/// projected relaxation started from the previous level; the band edges
/// are held on the obstacles (`-f1` at the lower edge, `f2` at the upper).
pub fn solve_dynkin_game<T: Real>(
    spec: &ProblemSpec,
    grid: &Grid,
    mode: TerminalMode,
    params: &SolverParams,
) -> Result<ValueSurface<T>, GameError> {
    params.validate()?;
    let s = spec.sample(grid)?;
    let (nt, ny) = (grid.nt, grid.ny);
    for n in 0..nt {
        for i in 0..ny {
            let k = grid.idx(n, i);
            if -s.f1[k] > s.f2[k] {
                return Err(GameError::ObstaclesCross {
                    t: grid.t(n),
                    y: grid.y(i),
                    lower: -s.f1[k],
                    upper: s.f2[k],
                });
            }
        }
    }
    let terminal = terminal_values(spec, grid, mode)?;
    let stencil = Stencil::<T>::new(spec, grid, &s);
    let source = sources::<T>(spec, grid, &s);
    let lower: Vec<T> = s.f1.iter().map(|&v| T::lit(-v)).collect();
    let upper: Vec<T> = s.f2.iter().map(|&v| T::lit(v)).collect();

    let mut v = vec![T::zero(); nt * ny];
    let mut residual = vec![T::nan(); nt * ny];
    let mut sweeps = vec![0; nt];
    let last = nt - 1;
    for i in 0..ny {
        v[grid.idx(last, i)] = T::lit(terminal[i]);
    }

    let omega = T::lit(params.omega);
    let tol = T::lit(params.sweep_tol);
    for n in (0..last).rev() {
        let row = n * ny;
        let next_row = (n + 1) * ny;
        let (head, tail) = v.split_at_mut(next_row);
        let next = &tail[..ny];
        let cur = &mut head[row..row + ny];
        let left = lower[row];
        let right = upper[row + ny - 1];
        let theta = params.theta_at(n, nt);
        let level = assemble(
            &stencil,
            grid.dt,
            theta,
            next,
            &source[row..row + ny],
            &source[next_row..next_row + ny],
            left,
            right,
        );
        let lo = &lower[row + 1..row + ny - 1];
        let hi = &upper[row + 1..row + ny - 1];
        let mut x: Vec<T> = (1..ny - 1)
            .map(|i| next[i].max(lower[row + i]).min(upper[row + i]))
            .collect();
        let stats = psor(&level.matrix, &level.rhs, lo, hi, &mut x, omega, tol, params.max_sweeps)
            .map_err(|source| GameError::Sweep {
                level: n,
                t: grid.t(n),
                source,
            })?;
        sweeps[n] = stats.sweeps;
        cur[0] = left;
        cur[ny - 1] = right;
        cur[1..ny - 1].copy_from_slice(&x);
        for j in 0..ny - 2 {
            residual[row + j + 1] = level.rhs[j] - level.matrix.apply_row(&x, j);
        }
    }

    let region = (0..nt * ny)
        .map(|k| Region::classify(v[k], lower[k], upper[k]))
        .collect();
    Ok(ValueSurface {
        grid: *grid,
        mode,
        params: *params,
        v,
        lower,
        upper,
        region,
        residual,
        sweeps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures;

    #[test]
    fn params_are_validated() {
        let bad = [
            SolverParams { theta: 0.4, ..Default::default() },
            SolverParams { omega: 1.0, ..Default::default() },
            SolverParams { omega: 2.0, ..Default::default() },
            SolverParams { sweep_tol: 0.0, ..Default::default() },
        ];
        for p in bad {
            assert!(matches!(p.validate(), Err(GameError::Params(_))));
        }
    }

    #[test]
    fn terminal_level_is_assigned_exactly() {
        let p = fixtures::p0();
        let g = p.grid(11, 61).unwrap();
        let s = solve_dynkin_game::<f64>(&p, &g, TerminalMode::Given, &SolverParams::default()).unwrap();
        for i in 0..g.ny {
            assert_eq!(s.at(g.nt - 1, i), p.g(g.y(i)).unwrap());
        }
    }

    #[test]
    fn crossing_obstacles_are_rejected() {
        let p = fixtures::p0();
        let mut q = p.clone();
        q.f2 = crate::expr::parse("-3").unwrap();
        let g = q.grid(3, 21).unwrap();
        assert!(matches!(
            solve_dynkin_game::<f64>(&q, &g, TerminalMode::Given, &SolverParams::default()),
            Err(GameError::ObstaclesCross { .. })
        ));
    }

    #[test]
    fn payoff_outside_obstacles_needs_envelope_mode() {
        let p = fixtures::p0_jump();
        let g = p.grid(11, 61).unwrap();
        assert!(matches!(
            solve_dynkin_game::<f64>(&p, &g, TerminalMode::Given, &SolverParams::default()),
            Err(GameError::TerminalOutside { .. })
        ));
        assert!(solve_dynkin_game::<f64>(&p, &g, TerminalMode::Envelope, &SolverParams::default()).is_ok());
    }

    #[test]
    fn sweep_budget_exhaustion_names_the_level() {
        let p = fixtures::p0();
        let g = p.grid(11, 61).unwrap();
        let params = SolverParams { max_sweeps: 1, ..Default::default() };
        match solve_dynkin_game::<f64>(&p, &g, TerminalMode::Given, &params) {
            Err(GameError::Sweep { level, .. }) => assert_eq!(level, 9),
            other => panic!("unexpected {other:?}"),
        }
    }
}
