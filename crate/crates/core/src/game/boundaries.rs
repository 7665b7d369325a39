use super::{GameError, Region, ValueSurface};
use crate::model::{CurvePair, ProblemSpec, Side};
use crate::numerics::interp_linear;
use crate::scalar::Real;

pub const KINK_TOL: f64 = 10.0;

/// Free boundaries per time level with their slopes and kink flags.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeBoundaries {
    pub t: Vec<f64>,
    pub a_tilde: Vec<f64>,
    pub b_tilde: Vec<f64>,
    /// Last lower-contact node below the continuation set, per level.
    pub lower_node: Vec<usize>,
    /// First upper-contact node above the continuation set, per level.
    pub upper_node: Vec<usize>,
    pub slope_a: Vec<f64>,
    pub slope_b: Vec<f64>,
    /// Levels where the slope changes by more than `kink_tol` per step.
    pub kinks: Vec<(usize, Side)>,
    pub kink_tol: f64,
    /// `max_t (a_tilde - a)`; at most one cell when the continuation set
    /// contains the strip between the reference curves.
    pub max_a_excess: f64,
    /// `max_t (b - b_tilde)`.
    pub max_b_deficit: f64,
}

impl FreeBoundaries {
    /// Boundaries at time `t`, linearly interpolated between levels.
    pub fn at(&self, t: f64) -> (f64, f64) {
        let dt = self.t[1] - self.t[0];
        (
            interp_linear(self.t[0], dt, &self.a_tilde, t),
            interp_linear(self.t[0], dt, &self.b_tilde, t),
        )
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Sub-cell location of the boundary between contact node `k` and
/// continuation node `j`. Near the boundary the gap to the obstacle grows
/// like `kappa (y - edge)^2 / 2` with `kappa = 2 |r_k| / sigma^2`, `r_k`
/// being the stencil residual at the contact node; the edge follows from
/// the gap at `j`. Without a usable residual the cell midpoint is used.
fn edge(y_k: f64, y_j: f64, gap_j: f64, r_k: f64, sigma: f64) -> f64 {
    let mid = 0.5 * (y_k + y_j);
    if !(r_k.is_finite() && r_k.abs() > 0.0 && gap_j >= 0.0) {
        return mid;
    }
    let dist = (sigma * sigma * gap_j / r_k.abs()).sqrt();
    let e = if y_j > y_k { y_j - dist } else { y_j + dist };
    e.clamp(y_k.min(y_j), y_k.max(y_j))
}

fn centered_slopes(t: &[f64], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            let (a, b) = (k.saturating_sub(1), (k + 1).min(n - 1));
            (x[b] - x[a]) / (t[b] - t[a])
        })
        .collect()
}

pub fn extract_free_boundaries<T: Real>(
    surface: &ValueSurface<T>,
    spec: &ProblemSpec,
    curves: &CurvePair,
) -> Result<FreeBoundaries, GameError> {
    let grid = &surface.grid;
    if curves.a.len() != grid.nt {
        return Err(GameError::Mismatch(format!(
            "{} curve levels for {} time levels",
            curves.a.len(),
            grid.nt
        )));
    }
    let mut fb = FreeBoundaries {
        t: grid.ts(),
        a_tilde: Vec::with_capacity(grid.nt),
        b_tilde: Vec::with_capacity(grid.nt),
        lower_node: Vec::with_capacity(grid.nt),
        upper_node: Vec::with_capacity(grid.nt),
        slope_a: Vec::new(),
        slope_b: Vec::new(),
        kinks: Vec::new(),
        kink_tol: KINK_TOL,
        max_a_excess: f64::NEG_INFINITY,
        max_b_deficit: f64::NEG_INFINITY,
    };
    for n in 0..grid.nt {
        let t = grid.t(n);
        let cont: Vec<usize> = (0..grid.ny)
            .filter(|&i| surface.region_at(n, i) == Region::Continuation)
            .collect();
        let (Some(&first), Some(&last)) = (cont.first(), cont.last()) else {
            return Err(GameError::EmptyContinuation { level: n, t });
        };
        // The Dirichlet columns guarantee contact nodes at both band edges.
        let k = first.saturating_sub(1);
        let m = (last + 1).min(grid.ny - 1);
        let val = |i: usize| surface.at(n, i).to_f64_lossy();
        let res = |i: usize| surface.residual[grid.idx(n, i)].to_f64_lossy();
        let lower_gap = val(first) - surface.lower[grid.idx(n, first)].to_f64_lossy();
        let upper_gap = surface.upper[grid.idx(n, last)].to_f64_lossy() - val(last);
        let a = edge(grid.y(k), grid.y(first), lower_gap, res(k), spec.sigma(grid.y(first))?);
        let b = edge(grid.y(m), grid.y(last), upper_gap, res(m), spec.sigma(grid.y(last))?);
        fb.lower_node.push(k);
        fb.upper_node.push(m);
        fb.a_tilde.push(a);
        fb.b_tilde.push(b);
        fb.max_a_excess = fb.max_a_excess.max(a - curves.a[n]);
        fb.max_b_deficit = fb.max_b_deficit.max(curves.b[n] - b);
    }
    fb.slope_a = centered_slopes(&fb.t, &fb.a_tilde);
    fb.slope_b = centered_slopes(&fb.t, &fb.b_tilde);
    let dt = grid.dt;
    for n in 1..grid.nt.saturating_sub(1) {
        for (side, x) in [(Side::Lower, &fb.a_tilde), (Side::Upper, &fb.b_tilde)] {
            let second = x[n + 1] - 2.0 * x[n] + x[n - 1];
            if second.abs() > KINK_TOL * dt {
                fb.kinks.push((n, side));
            }
        }
    }
    Ok(fb)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_recovers_a_quadratic_contact() {
        // gap = (kappa/2) (y - e)^2 with kappa = 2 |r| / sigma^2
        let (e, r, sigma): (f64, f64, f64) = (-0.37, -0.8, 1.3);
        let kappa = 2.0 * r.abs() / (sigma * sigma);
        let (yk, yj) = (-0.4, -0.34);
        let gap = 0.5 * kappa * (yj - e) * (yj - e);
        assert!((edge(yk, yj, gap, r, sigma) - e).abs() < 1e-14);
        // mirrored upper side
        let gap = 0.5 * kappa * (e + 0.34f64).powi(2);
        assert!((edge(0.4, 0.34, gap, r.abs(), sigma) - 0.37).abs() < 1e-14);
    }

    #[test]
    fn edge_falls_back_to_midpoint() {
        assert_eq!(edge(0.0, 1.0, 0.2, f64::NAN, 1.0), 0.5);
        assert_eq!(edge(0.0, 1.0, 0.2, 0.0, 1.0), 0.5);
        // a huge gap clamps to the contact node
        assert_eq!(edge(0.0, 1.0, 100.0, -1.0, 1.0), 0.0);
    }
}
