use super::{FreeBoundaries, GameError, Region, ValueSurface};
use crate::model::{CurvePair, ProblemSpec};
use crate::scalar::Real;

/// Quadratic through `(x0, f0), (x0 + h, f1), (x0 + 2h, f2)` at `x`.
fn quadratic(x0: f64, h: f64, f: [f64; 3], x: f64) -> f64 {
    let s = (x - x0) / h;
    f[0] * (s - 1.0) * (s - 2.0) / 2.0 - f[1] * s * (s - 2.0) + f[2] * s * (s - 1.0) / 2.0
}

/// One-sided derivative gaps at the free boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothFitReport {
    /// Levels inspected (the middle part of the horizon).
    pub levels: Vec<usize>,
    /// `|dV/dy(a_tilde+) + df1/dy(a_tilde)|` per inspected level.
    pub gap_lower: Vec<f64>,
    /// `|dV/dy(b_tilde-) - df2/dy(b_tilde)|` per inspected level.
    pub gap_upper: Vec<f64>,
    pub max_gap_lower: f64,
    pub max_gap_upper: f64,
    pub dy: f64,
}

impl SmoothFitReport {
    pub fn max_gap(&self) -> f64 {
        self.max_gap_lower.max(self.max_gap_upper)
    }
}

/// Forward difference of `V` over one cell from the boundary into the
/// continuation set, with `V` at the boundary taken from the obstacle and
/// `V` one cell in from a quadratic through the next three continuation
/// nodes, compared with the obstacle's own slope. The gap is first order
/// in `dy`. Levels with `t` in `[window.0 T, window.1 T]` are inspected.
pub fn smooth_fit_check<T: Real>(
    surface: &ValueSurface<T>,
    boundaries: &FreeBoundaries,
    spec: &ProblemSpec,
    window: (f64, f64),
) -> Result<SmoothFitReport, GameError> {
    let g = &surface.grid;
    let dy = g.dy;
    let mut rep = SmoothFitReport {
        levels: Vec::new(),
        gap_lower: Vec::new(),
        gap_upper: Vec::new(),
        max_gap_lower: 0.0,
        max_gap_upper: 0.0,
        dy,
    };
    let v = |n: usize, i: usize| surface.at(n, i).to_f64_lossy();
    for n in 0..g.nt - 1 {
        let t = g.t(n);
        if t < window.0 * g.horizon || t > window.1 * g.horizon {
            continue;
        }
        let a = boundaries.a_tilde[n];
        let j = boundaries.lower_node[n] + 1;
        if j + 2 >= g.ny {
            continue;
        }
        let inside = quadratic(g.y(j), dy, [v(n, j), v(n, j + 1), v(n, j + 2)], a + dy);
        let slope = (inside + spec.f1(t, a)?) / dy;
        let gap_lo = (slope + spec.f1_y(t, a)?).abs();

        let b = boundaries.b_tilde[n];
        let m = boundaries.upper_node[n] - 1;
        if m < 2 {
            continue;
        }
        let inside = quadratic(g.y(m), -dy, [v(n, m), v(n, m - 1), v(n, m - 2)], b - dy);
        let slope = (spec.f2(t, b)? - inside) / dy;
        let gap_up = (slope - spec.f2_y(t, b)?).abs();

        rep.levels.push(n);
        rep.gap_lower.push(gap_lo);
        rep.gap_upper.push(gap_up);
        rep.max_gap_lower = rep.max_gap_lower.max(gap_lo);
        rep.max_gap_upper = rep.max_gap_upper.max(gap_up);
    }
    Ok(rep)
}

/// Successive ratios `gap(h) / gap(h/2)`.
pub fn richardson_ratios(gaps: &[f64]) -> Vec<f64> {
    gaps.windows(2).map(|w| w[0] / w[1]).collect()
}

/// One-sided time quotients of `V` at the contact nodes adjacent to the
/// free boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeDerivativeReport {
    /// `(V(t_{n+1}, y_k) - V(t_n, y_k)) / dt` at the lower contact node `k`.
    pub quotient_lower: Vec<f64>,
    /// Same at the upper contact node.
    pub quotient_upper: Vec<f64>,
    /// Levels where the lower quotient falls below `-df1/dt - tol`.
    pub violations_lower: usize,
    /// Levels where the upper quotient exceeds `df2/dt + tol`.
    pub violations_upper: usize,
    /// Largest absolute quotient.
    pub k_hat: f64,
    pub tol: f64,
}

impl TimeDerivativeReport {
    pub fn passed(&self) -> bool {
        self.violations_lower == 0 && self.violations_upper == 0 && self.k_hat.is_finite()
    }
}

/// Levels whose forward quotient would reach the terminal level are
/// skipped. The bound used is the weaker of the continuous one
/// (`-df1/dt`) and its exact discrete counterpart
/// (`(-f1(t_{n+1}) + f1(t_n)) / dt`), which holds by projection.
pub fn boundary_time_derivative_check<T: Real>(
    surface: &ValueSurface<T>,
    boundaries: &FreeBoundaries,
    spec: &ProblemSpec,
    tol: f64,
) -> Result<TimeDerivativeReport, GameError> {
    let g = &surface.grid;
    let mut rep = TimeDerivativeReport {
        quotient_lower: Vec::new(),
        quotient_upper: Vec::new(),
        violations_lower: 0,
        violations_upper: 0,
        k_hat: 0.0,
        tol,
    };
    let v = |n: usize, i: usize| surface.at(n, i).to_f64_lossy();
    for n in 0..g.nt.saturating_sub(2) {
        let (t, t1) = (g.t(n), g.t(n + 1));
        let k = boundaries.lower_node[n];
        let y = g.y(k);
        let q = (v(n + 1, k) - v(n, k)) / g.dt;
        let bound = (-spec.f1_t(t, y)?).min((spec.f1(t, y)? - spec.f1(t1, y)?) / g.dt);
        if q < bound - tol {
            rep.violations_lower += 1;
        }
        rep.quotient_lower.push(q);

        let m = boundaries.upper_node[n];
        let y = g.y(m);
        let q = (v(n + 1, m) - v(n, m)) / g.dt;
        let bound = spec.f2_t(t, y)?.max((spec.f2(t1, y)? - spec.f2(t, y)?) / g.dt);
        if q > bound + tol {
            rep.violations_upper += 1;
        }
        rep.quotient_upper.push(q);
    }
    rep.k_hat = rep
        .quotient_lower
        .iter()
        .chain(&rep.quotient_upper)
        .fold(0.0f64, |acc, q| acc.max(q.abs()));
    Ok(rep)
}


/// Region labels against the reference curves `a(t)`, `b(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RegionStructureReport {
    /// Nodes strictly between `a` and `b` not labelled continuation.
    pub interior_contact: usize,
    /// Lower-contact nodes above `a + dy`.
    pub lower_misplaced: usize,
    /// Upper-contact nodes below `b - dy`.
    pub upper_misplaced: usize,
}

impl RegionStructureReport {
    pub fn passed(&self) -> bool {
        self.interior_contact == 0 && self.lower_misplaced == 0 && self.upper_misplaced == 0
    }
}

pub fn region_structure_check<T: Real>(surface: &ValueSurface<T>, curves: &CurvePair) -> RegionStructureReport {
    let g = &surface.grid;
    let mut rep = RegionStructureReport::default();
    for n in 0..g.nt {
        let (a, b) = (curves.a[n], curves.b[n]);
        for i in 0..g.ny {
            let y = g.y(i);
            match surface.region_at(n, i) {
                Region::LowerContact if y > a + g.dy => rep.lower_misplaced += 1,
                Region::UpperContact if y < b - g.dy => rep.upper_misplaced += 1,
                _ => {}
            }
            if y > a && y < b && surface.region_at(n, i) != Region::Continuation {
                rep.interior_contact += 1;
            }
        }
    }
    rep
}
