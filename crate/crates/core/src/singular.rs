//! Singular-control value `W(s, x) = int_0^x e^{-cs} V(s, y) dy`, the
//! function `C(s)` and holding cost `H`, and the HJB residual check.

use crate::game::{FreeBoundaries, Region, ValueSurface};
use crate::grid::Grid;
use crate::model::{ModelError, ProblemSpec, Side};
use crate::numerics::{cumulative_trapezoid, locate};
use crate::scalar::Real;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SingularError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{side} free boundary {value} at t = {t} leaves the band")]
    OutsideBand { side: Side, t: f64, value: f64 },
    #[error("free boundaries have {got} levels, surface has {expected}")]
    Mismatch { expected: usize, got: usize },
}

/// `W` and its discrete partials on the game grid, row-major `(s, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WSurface {
    pub grid: Grid,
    pub w: Vec<f64>,
    /// `e^{-cs} V`: the exact x-derivative of the piecewise quadratic
    /// primitive that the trapezoid rule integrates.
    pub wx: Vec<f64>,
    /// Central second difference of `W`, one-sided at the band edges.
    pub wxx: Vec<f64>,
    /// Forward time quotient; backward on the terminal level.
    pub ws: Vec<f64>,
    /// Node labels carried over from the game surface.
    pub region: Vec<Region>,
    /// Time weight of the step leaving each level, as used by the solver.
    pub theta: Vec<f64>,
}

impl WSurface {
    pub fn at(&self, n: usize, i: usize) -> f64 {
        self.w[self.grid.idx(n, i)]
    }

    /// Bilinear interpolation of `W(s, x)`, clamped to the grid.
    pub fn interp(&self, s: f64, x: f64) -> f64 {
        let g = &self.grid;
        let (n, wt) = locate(0.0, g.dt, g.nt, s);
        let (i, wy) = locate(g.y(0), g.dy, g.ny, x);
        let row = |n: usize| self.at(n, i) + wy * (self.at(n, i + 1) - self.at(n, i));
        row(n) + wt * (row(n + 1) - row(n))
    }
}

pub fn integrate_value<T: Real>(surface: &ValueSurface<T>, spec: &ProblemSpec) -> WSurface {
    let g = surface.grid;
    let (nt, ny, dy) = (g.nt, g.ny, g.dy);
    let mut w = Vec::with_capacity(nt * ny);
    let mut wx = Vec::with_capacity(nt * ny);
    for n in 0..nt {
        let disc = (-spec.c * g.t(n)).exp();
        let row: Vec<f64> = surface.row(n).iter().map(|v| disc * v.to_f64_lossy()).collect();
        w.extend(cumulative_trapezoid(&row, dy, g.zero_index));
        wx.extend(row);
    }
    let mut wxx = vec![0.0; nt * ny];
    for n in 0..nt {
        let r = &w[n * ny..(n + 1) * ny];
        let out = &mut wxx[n * ny..(n + 1) * ny];
        for i in 1..ny - 1 {
            out[i] = (r[i + 1] - 2.0 * r[i] + r[i - 1]) / (dy * dy);
        }
        out[0] = out[1];
        out[ny - 1] = out[ny - 2];
    }
    let mut ws = vec![0.0; nt * ny];
    for n in 0..nt {
        let (a, b) = if n + 1 < nt { (n, n + 1) } else { (n - 1, n) };
        for i in 0..ny {
            ws[n * ny + i] = (w[b * ny + i] - w[a * ny + i]) / g.dt;
        }
    }
    let theta = (0..nt).map(|n| surface.params.theta_at(n, nt)).collect();
    WSurface {
        grid: g,
        w,
        wx,
        wxx,
        ws,
        region: surface.region.clone(),
        theta,
    }
}

/// `C(s)` on both free boundaries and `H(s, x) = int_0^x h(s, y) dy + C(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HoldingCost {
    /// `C` fixed on the lower boundary.
    pub c: Vec<f64>,
    /// `C` recomputed on the upper boundary.
    pub c_upper: Vec<f64>,
    pub h: Vec<f64>,
    /// `max_s |C(s) - C_upper(s)|` over levels before the terminal one.
    pub max_mismatch: f64,
    /// `max_s |C(s + dt) - C(s)|` over levels before the terminal one.
    pub max_step: f64,
}

/// `int_0^x h(t, y) dy` per level.
fn integrated_source(spec: &ProblemSpec, g: &Grid) -> Result<Vec<f64>, ModelError> {
    let mut out = Vec::with_capacity(g.nt * g.ny);
    for n in 0..g.nt {
        let t = g.t(n);
        let row = (0..g.ny).map(|i| spec.h(t, g.y(i))).collect::<Result<Vec<_>, _>>()?;
        out.extend(cumulative_trapezoid(&row, g.dy, g.zero_index));
    }
    Ok(out)
}

/// HJB residual without `C`: the generator terms blended in time with the
/// solver's weights, plus `W_s`. On the terminal level only that level's
/// terms are used.
fn residual_without_c(ws: &WSurface, spec: &ProblemSpec, ih: &[f64]) -> Result<Vec<f64>, ModelError> {
    let g = &ws.grid;
    let (nt, ny) = (g.nt, g.ny);
    let mut alpha = Vec::with_capacity(ny);
    let mut mu = Vec::with_capacity(ny);
    for i in 0..ny {
        let y = g.y(i);
        alpha.push(0.5 * spec.sigma(y)?.powi(2));
        mu.push(spec.mu(y));
    }
    let space = |k: usize| alpha[k % ny] * ws.wxx[k] + mu[k % ny] * ws.wx[k] + ih[k];
    let mut r = vec![0.0; nt * ny];
    for n in 0..nt {
        let th = ws.theta[n];
        for i in 0..ny {
            let k = n * ny + i;
            let blended = if n + 1 < nt {
                th * space(k) + (1.0 - th) * space(k + ny)
            } else {
                space(k)
            };
            r[k] = blended + ws.ws[k];
        }
    }
    Ok(r)
}

/// Linear extrapolation of the row from nodes `j` and `j + step` to `x`.
fn extrapolate(g: &Grid, row: &[f64], j: usize, step: isize, x: f64) -> f64 {
    let j2 = (j as isize + step) as usize;
    let slope = (row[j2] - row[j]) / (g.y(j2) - g.y(j));
    row[j] + slope * (x - g.y(j))
}

fn check_levels(ws: &WSurface, fb: &FreeBoundaries) -> Result<(), SingularError> {
    if fb.len() != ws.grid.nt {
        return Err(SingularError::Mismatch {
            expected: ws.grid.nt,
            got: fb.len(),
        });
    }
    let g = &ws.grid;
    for n in 0..g.nt {
        for (side, value) in [(Side::Lower, fb.a_tilde[n]), (Side::Upper, fb.b_tilde[n])] {
            if !(value >= g.y(0) && value <= g.y(g.ny - 1)) {
                return Err(SingularError::OutsideBand { side, t: g.t(n), value });
            }
        }
    }
    Ok(())
}

/// `C(s)` makes the HJB residual vanish at `a_tilde(s)`. The residual is
/// extrapolated to the boundary from the first two continuation nodes, so
/// the kink of `W_xx` at the boundary does not leak into `C`.
pub fn compute_holding_cost(ws: &WSurface, fb: &FreeBoundaries, spec: &ProblemSpec) -> Result<HoldingCost, SingularError> {
    check_levels(ws, fb)?;
    let g = &ws.grid;
    let (nt, ny) = (g.nt, g.ny);
    let ih = integrated_source(spec, g)?;
    let r0 = residual_without_c(ws, spec, &ih)?;
    let mut c = Vec::with_capacity(nt);
    let mut c_upper = Vec::with_capacity(nt);
    for n in 0..nt {
        let row = &r0[n * ny..(n + 1) * ny];
        let j = (fb.lower_node[n] + 1).min(ny - 2);
        let m = fb.upper_node[n].saturating_sub(1).max(1);
        c.push(-extrapolate(g, row, j, 1, fb.a_tilde[n]));
        c_upper.push(-extrapolate(g, row, m, -1, fb.b_tilde[n]));
    }
    let mut h = ih;
    for n in 0..nt {
        for v in &mut h[n * ny..(n + 1) * ny] {
            *v += c[n];
        }
    }
    let interior = nt.saturating_sub(1);
    let max_mismatch = (0..interior).fold(0.0f64, |acc, n| acc.max((c[n] - c_upper[n]).abs()));
    let max_step = (0..interior.saturating_sub(1)).fold(0.0f64, |acc, n| acc.max((c[n + 1] - c[n]).abs()));
    Ok(HoldingCost {
        c,
        c_upper,
        h,
        max_mismatch,
        max_step,
    })
}

/// Default HJB tolerance: `1e-4` on the 201 x 201 P0 grid, scaled linearly
/// with `dy + dt`.
pub fn default_hjb_tol(g: &Grid) -> f64 {
    1e-4 * (g.dy + g.dt) / 0.065
}

#[derive(Debug, Clone, PartialEq)]
pub struct HjbReport {
    pub hjb_tol: f64,
    /// `R = sigma^2 W_xx / 2 + mu W_x + W_s + H`, NaN on the band edges.
    pub residual: Vec<f64>,
    /// Largest `|R|` on continuation nodes before the terminal level.
    pub max_continuation: f64,
    /// Nodes more than two cells outside `[a_tilde, b_tilde]` (interior
    /// columns, levels before the terminal one) and how many have `R > 0`.
    pub outside_nodes: usize,
    pub outside_positive: usize,
    pub min_outside: f64,
    /// Nodes where `W_x` leaves `[-e^{-cs} f1, e^{-cs} f2]`.
    pub sandwich_violations: usize,
    /// Nodes strictly inside `(a_tilde, b_tilde)` where `W_x` touches an
    /// obstacle.
    pub between_violations: usize,
    /// Largest `|W_x + e^{-cs} f1|` left of `a_tilde` and
    /// `|W_x - e^{-cs} f2|` right of `b_tilde`.
    pub max_gradient_gap: f64,
    /// At deep contact: largest `|W_xx + e^{-cs} f1_y|` (lower side) or
    /// `|W_xx - e^{-cs} f2_y|` (upper side).
    pub max_curvature_gap: f64,
    /// Largest jump of `W_s` between the nodes on either side of a free
    /// boundary.
    pub max_time_quotient_jump: f64,
    /// Largest `|R|` on terminal-level continuation nodes (reported only).
    pub terminal_max: f64,
}

impl HjbReport {
    pub fn passed(&self) -> bool {
        self.max_continuation < self.hjb_tol
            && self.outside_positive == self.outside_nodes
            && self.sandwich_violations == 0
            && self.between_violations == 0
    }
}

pub fn hjb_residual(
    ws: &WSurface,
    hc: &HoldingCost,
    fb: &FreeBoundaries,
    spec: &ProblemSpec,
    hjb_tol: f64,
) -> Result<HjbReport, SingularError> {
    check_levels(ws, fb)?;
    let g = &ws.grid;
    let (nt, ny, dy) = (g.nt, g.ny, g.dy);
    let ih = integrated_source(spec, g)?;
    let mut residual = residual_without_c(ws, spec, &ih)?;
    let mut rep = HjbReport {
        hjb_tol,
        residual: Vec::new(),
        max_continuation: 0.0,
        outside_nodes: 0,
        outside_positive: 0,
        min_outside: f64::INFINITY,
        sandwich_violations: 0,
        between_violations: 0,
        max_gradient_gap: 0.0,
        max_curvature_gap: 0.0,
        max_time_quotient_jump: 0.0,
        terminal_max: 0.0,
    };
    for n in 0..nt {
        let t = g.t(n);
        let disc = (-spec.c * t).exp();
        let (a, b) = (fb.a_tilde[n], fb.b_tilde[n]);
        for i in 0..ny {
            let k = n * ny + i;
            let y = g.y(i);
            let lower = -disc * spec.f1(t, y)?;
            let upper = disc * spec.f2(t, y)?;
            let wx = ws.wx[k];
            if wx < lower || wx > upper {
                rep.sandwich_violations += 1;
            }
            if y > a && y < b && (wx == lower || wx == upper) {
                rep.between_violations += 1;
            }
            if y < a {
                rep.max_gradient_gap = rep.max_gradient_gap.max((wx - lower).abs());
            } else if y > b {
                rep.max_gradient_gap = rep.max_gradient_gap.max((wx - upper).abs());
            }
            if i == 0 || i == ny - 1 {
                residual[k] = f64::NAN;
                continue;
            }
            let r = residual[k] + hc.c[n];
            residual[k] = r;
            if n + 1 == nt {
                if ws.region[k] == Region::Continuation {
                    rep.terminal_max = rep.terminal_max.max(r.abs());
                }
                continue;
            }
            if ws.region[k] == Region::Continuation {
                rep.max_continuation = rep.max_continuation.max(r.abs());
            }
            let deep_lower = y < a - 2.0 * dy;
            let deep_upper = y > b + 2.0 * dy;
            if deep_lower || deep_upper {
                rep.outside_nodes += 1;
                if r > 0.0 {
                    rep.outside_positive += 1;
                }
                rep.min_outside = rep.min_outside.min(r);
                let gap = if deep_lower {
                    (ws.wxx[k] + disc * spec.f1_y(t, y)?).abs()
                } else {
                    (ws.wxx[k] - disc * spec.f2_y(t, y)?).abs()
                };
                rep.max_curvature_gap = rep.max_curvature_gap.max(gap);
            }
        }
        if n + 1 < nt {
            let (lo, up) = (fb.lower_node[n], fb.upper_node[n]);
            let row = &ws.ws[n * ny..(n + 1) * ny];
            let jump = (row[(lo + 1).min(ny - 1)] - row[lo]).abs().max((row[up] - row[up.saturating_sub(1)]).abs());
            rep.max_time_quotient_jump = rep.max_time_quotient_jump.max(jump);
        }
    }
    rep.residual = residual;
    Ok(rep)
}
