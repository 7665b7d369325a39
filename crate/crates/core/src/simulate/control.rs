use super::rng::PathRng;
use super::{per_path, step_count, Estimate, McParams, SimError, Vol};
use crate::game::FreeBoundaries;
use crate::grid::Grid;
use crate::model::{ProblemSpec, Side};
use crate::numerics::{cumulative_trapezoid, hermite, locate};
use crate::singular::HoldingCost;

/// Reflecting barriers: the free boundaries or a perturbation of them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Policy {
    Optimal,
    /// Both barriers moved by `delta`.
    Shift(f64),
    /// Lower barrier down and upper barrier up by `delta`.
    Widen(f64),
    /// Lower barrier up and upper barrier down by `delta`.
    Narrow(f64),
    /// Barriers held at their values at the horizon.
    Frozen,
}

impl Policy {
    pub fn label(&self) -> String {
        match *self {
            Policy::Optimal => "optimal".into(),
            Policy::Shift(d) => format!("shift({d})"),
            Policy::Widen(d) => format!("widen({d})"),
            Policy::Narrow(d) => format!("narrow({d})"),
            Policy::Frozen => "frozen".into(),
        }
    }

    /// Barriers at time `t`; a narrowed pair that would cross collapses to
    /// its midpoint.
    pub fn barriers(&self, fb: &FreeBoundaries, t: f64) -> (f64, f64) {
        let (a, b) = match *self {
            Policy::Frozen => fb.at(*fb.t.last().unwrap()),
            _ => fb.at(t),
        };
        let (lo, hi) = match *self {
            Policy::Optimal | Policy::Frozen => (a, b),
            Policy::Shift(d) => (a + d, b + d),
            Policy::Widen(d) => (a - d, b + d),
            Policy::Narrow(d) => (a + d, b - d),
        };
        if lo > hi {
            let m = 0.5 * (lo + hi);
            (m, m)
        } else {
            (lo, hi)
        }
    }
}

/// What happens to the state at the horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TerminalPolicy {
    None,
    /// Jump to the nearest point of `[a, b]`.
    Clamp { a: f64, b: f64 },
}

/// A jump of the control at `time`: `A1` pushes the state up by `size`
/// (side `Lower`), `A2` pushes it down (side `Upper`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub time: f64,
    pub side: Side,
    pub from: f64,
    pub size: f64,
}

/// Reflected trajectory. `a1[k]` and `a2[k]` are cumulative and include
/// the initial jump; `x` ends at `X_{T-}`, before any terminal jump.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlledPath {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
    pub initial_jump: Option<Jump>,
    pub terminal_jump: Option<Jump>,
    /// State at the horizon after the terminal jump.
    pub x_terminal: f64,
}

struct Track {
    times: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

fn track(spec: &ProblemSpec, fb: &FreeBoundaries, policy: Policy, s: f64, dt: f64) -> Result<Track, SimError> {
    let n = step_count(s, spec.horizon, dt)?;
    let mut tr = Track {
        times: Vec::with_capacity(n + 1),
        lo: Vec::with_capacity(n + 1),
        hi: Vec::with_capacity(n + 1),
    };
    for k in 0..=n {
        let t = if k == n { spec.horizon } else { s + k as f64 * dt };
        let (lo, hi) = policy.barriers(fb, t);
        tr.times.push(t);
        tr.lo.push(lo);
        tr.hi.push(hi);
    }
    Ok(tr)
}

fn reflect(spec: &ProblemSpec, vol: &Vol, tr: &Track, x: f64, seed: u64, path: u64, terminal: TerminalPolicy) -> Result<ControlledPath, SimError> {
    let n = tr.times.len() - 1;
    let s = tr.times[0];
    let mut rng = PathRng::new(seed, path);
    let mut p = ControlledPath {
        times: tr.times.clone(),
        x: Vec::with_capacity(n + 1),
        a1: Vec::with_capacity(n + 1),
        a2: Vec::with_capacity(n + 1),
        initial_jump: None,
        terminal_jump: None,
        x_terminal: 0.0,
    };
    let (mut a1, mut a2) = (0.0, 0.0);
    let mut state = x;
    if x < tr.lo[0] {
        a1 = tr.lo[0] - x;
        p.initial_jump = Some(Jump { time: s, side: Side::Lower, from: x, size: a1 });
        state = tr.lo[0];
    } else if x > tr.hi[0] {
        a2 = x - tr.hi[0];
        p.initial_jump = Some(Jump { time: s, side: Side::Upper, from: x, size: a2 });
        state = tr.hi[0];
    }
    p.x.push(state);
    p.a1.push(a1);
    p.a2.push(a2);
    for k in 1..=n {
        let dt = tr.times[k] - tr.times[k - 1];
        let (sig, _) = vol.at(state)?;
        state += spec.mu(state) * dt + sig * dt.sqrt() * rng.normal();
        if state < tr.lo[k] {
            a1 += tr.lo[k] - state;
            state = tr.lo[k];
        } else if state > tr.hi[k] {
            a2 += state - tr.hi[k];
            state = tr.hi[k];
        }
        p.x.push(state);
        p.a1.push(a1);
        p.a2.push(a2);
    }
    p.x_terminal = state;
    if let TerminalPolicy::Clamp { a, b } = terminal {
        let t = tr.times[n];
        if state < a {
            p.terminal_jump = Some(Jump { time: t, side: Side::Lower, from: state, size: a - state });
            p.x_terminal = a;
        } else if state > b {
            p.terminal_jump = Some(Jump { time: t, side: Side::Upper, from: state, size: state - b });
            p.x_terminal = b;
        }
    }
    Ok(p)
}

/// Reflected path of `dX = mu dt + sigma dB + dA1 - dA2` from `(s, x)`:
/// an initial jump onto the barriers if needed, then Euler steps each
/// projected back onto `[lo(t), hi(t)]`, the overshoot being added to the
/// control on that side.
#[allow(clippy::too_many_arguments)]
pub fn simulate_reflected(
    spec: &ProblemSpec,
    boundaries: &FreeBoundaries,
    policy: Policy,
    s: f64,
    x: f64,
    dt: f64,
    seed: u64,
    path: u64,
    terminal: TerminalPolicy,
) -> Result<ControlledPath, SimError> {
    let tr = track(spec, boundaries, policy, s, dt)?;
    reflect(spec, &Vol::new(spec), &tr, x, seed, path, terminal)
}

/// Holding cost and terminal cost tables for pricing paths.
#[derive(Debug, Clone)]
pub struct CostModel {
    grid: Grid,
    h: Vec<f64>,
    /// `G(x) = int_0^x e^{-cT} g` on the grid and its derivative.
    big_g: Vec<f64>,
    g_disc: Vec<f64>,
    jump_panels: usize,
}

impl CostModel {
    pub fn new(spec: &ProblemSpec, grid: &Grid, holding: &HoldingCost) -> Result<CostModel, SimError> {
        if holding.h.len() != grid.nt * grid.ny {
            return Err(SimError::Params(format!(
                "holding cost has {} nodes, grid has {}",
                holding.h.len(),
                grid.nt * grid.ny
            )));
        }
        let disc = (-spec.c * spec.horizon).exp();
        let g_disc = (0..grid.ny)
            .map(|i| Ok(disc * spec.g(grid.y(i))?))
            .collect::<Result<Vec<_>, SimError>>()?;
        let big_g = cumulative_trapezoid(&g_disc, grid.dy, grid.zero_index);
        Ok(CostModel {
            grid: *grid,
            h: holding.h.clone(),
            big_g,
            g_disc,
            jump_panels: 256,
        })
    }

    /// `H(t, x)` by bilinear interpolation, clamped to the grid.
    pub fn holding(&self, t: f64, x: f64) -> f64 {
        let g = &self.grid;
        let (n, wt) = locate(0.0, g.dt, g.nt, t);
        let (i, wy) = locate(g.y(0), g.dy, g.ny, x);
        let at = |n: usize, i: usize| self.h[n * g.ny + i];
        let row = |n: usize| at(n, i) + wy * (at(n, i + 1) - at(n, i));
        row(n) + wt * (row(n + 1) - row(n))
    }

    /// Terminal cost `G(x)`, Hermite interpolation with `G' = e^{-cT} g`.
    pub fn terminal(&self, x: f64) -> f64 {
        let g = &self.grid;
        let (i, w) = locate(g.y(0), g.dy, g.ny, x);
        let (x0, x1) = (g.y(i), g.y(i + 1));
        let xc = x0 + w * (x1 - x0);
        hermite(x0, x1, self.big_g[i], self.big_g[i + 1], self.g_disc[i], self.g_disc[i + 1], xc)
    }
}

/// Realized cost of one path.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CostBreakdown {
    pub holding: f64,
    pub control_continuous: f64,
    pub control_jump: f64,
    pub terminal: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.holding + self.control_continuous + self.control_jump + self.terminal
    }
}

fn jump_cost(spec: &ProblemSpec, j: &Jump, panels: usize) -> Result<f64, SimError> {
    let disc = (-spec.c * j.time).exp();
    let (lo, hi) = match j.side {
        Side::Lower => (j.from, j.from + j.size),
        Side::Upper => (j.from - j.size, j.from),
    };
    let f = |u: f64| match j.side {
        Side::Lower => spec.f1(j.time, u),
        Side::Upper => spec.f2(j.time, u),
    };
    let h = (hi - lo) / panels as f64;
    let mut acc = 0.5 * (f(lo)? + f(hi)?);
    for k in 1..panels {
        acc += f(lo + k as f64 * h)?;
    }
    Ok(disc * acc * h)
}

/// Prices a path: trapezoid of `H` along it, reflection increments at the
/// barrier, jump integrals of the control costs and `G` at the final state.
pub fn path_cost(path: &ControlledPath, spec: &ProblemSpec, model: &CostModel) -> Result<CostBreakdown, SimError> {
    let mut c = CostBreakdown::default();
    let n = path.times.len() - 1;
    let mut prev = model.holding(path.times[0], path.x[0]);
    for k in 1..=n {
        let (t, x) = (path.times[k], path.x[k]);
        let cur = model.holding(t, x);
        c.holding += 0.5 * (t - path.times[k - 1]) * (prev + cur);
        prev = cur;
        let d1 = path.a1[k] - path.a1[k - 1];
        let d2 = path.a2[k] - path.a2[k - 1];
        if d1 > 0.0 {
            c.control_continuous += (-spec.c * t).exp() * spec.f1(t, x)? * d1;
        }
        if d2 > 0.0 {
            c.control_continuous += (-spec.c * t).exp() * spec.f2(t, x)? * d2;
        }
    }
    for j in path.initial_jump.iter().chain(path.terminal_jump.iter()) {
        c.control_jump += jump_cost(spec, j, model.jump_panels)?;
    }
    c.terminal = model.terminal(path.x_terminal);
    Ok(c)
}

/// Per-path costs in path order, with their estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSample {
    pub costs: Vec<f64>,
    pub estimate: Estimate,
}

/// Monte Carlo estimate of the cost of `policy` from `(s, x)`.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_cost(
    spec: &ProblemSpec,
    boundaries: &FreeBoundaries,
    model: &CostModel,
    policy: Policy,
    s: f64,
    x: f64,
    mc: &McParams,
    terminal: TerminalPolicy,
) -> Result<CostSample, SimError> {
    mc.validate()?;
    if boundaries.len() != model.grid.nt {
        return Err(SimError::Params(format!(
            "boundaries have {} levels, cost grid has {}",
            boundaries.len(),
            model.grid.nt
        )));
    }
    let tr = track(spec, boundaries, policy, s, mc.dt)?;
    let vol = Vol::new(spec);
    let costs = per_path(mc.n_paths, |p| {
        let path = reflect(spec, &vol, &tr, x, mc.seed, p, terminal)?;
        Ok(path_cost(&path, spec, model)?.total())
    })?;
    let estimate = Estimate::from_samples(&costs);
    Ok(CostSample { costs, estimate })
}
