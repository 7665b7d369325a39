use super::solver::{assemble, sources, Stencil};
use super::{GameError, Region, ValueSurface};
use crate::model::ProblemSpec;
use crate::scalar::Real;

/// Stencil residual `L V + e^{ct} h` recomputed from a surface, with the
/// sign checks per region. The terminal level and the band edges carry no
/// residual (NaN) and are excluded from every statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualField {
    pub values: Vec<f64>,
    pub residual_tol: f64,
    /// Largest `|r|` on continuation nodes.
    pub max_continuation: f64,
    /// Largest `r` on lower-contact nodes (should be `<= residual_tol`).
    pub max_lower: f64,
    /// Smallest `r` on upper-contact nodes (should be `>= -residual_tol`).
    pub min_upper: f64,
    /// Largest `min(|r|, V + f1, f2 - V)` over all nodes with a residual.
    pub max_complementarity: f64,
    /// Nodes failing their region's sign condition.
    pub misclassified: usize,
}

impl ResidualField {
    pub fn passed(&self) -> bool {
        self.misclassified == 0 && self.max_complementarity < self.residual_tol
    }
}

pub const RESIDUAL_TOL: f64 = 1e-6;

pub fn pde_residual<T: Real>(surface: &ValueSurface<T>, spec: &ProblemSpec, residual_tol: f64) -> Result<ResidualField, GameError> {
    let grid = &surface.grid;
    let (nt, ny) = (grid.nt, grid.ny);
    let s = spec.sample(grid)?;
    let stencil = Stencil::<T>::new(spec, grid, &s);
    let source = sources::<T>(spec, grid, &s);
    let mut values = vec![f64::NAN; nt * ny];
    let mut out = ResidualField {
        values: Vec::new(),
        residual_tol,
        max_continuation: 0.0,
        max_lower: f64::NEG_INFINITY,
        min_upper: f64::INFINITY,
        max_complementarity: 0.0,
        misclassified: 0,
    };
    for n in 0..nt - 1 {
        let row = n * ny;
        let next_row = row + ny;
        let cur = &surface.v[row..row + ny];
        let level = assemble(
            &stencil,
            grid.dt,
            surface.params.theta_at(n, nt),
            &surface.v[next_row..next_row + ny],
            &source[row..row + ny],
            &source[next_row..next_row + ny],
            cur[0],
            cur[ny - 1],
        );
        let x = &cur[1..ny - 1];
        for j in 0..ny - 2 {
            let k = row + j + 1;
            let r = (level.rhs[j] - level.matrix.apply_row(x, j)).to_f64_lossy();
            values[k] = r;
            let v = surface.v[k].to_f64_lossy();
            let dist = (v - surface.lower[k].to_f64_lossy()).min(surface.upper[k].to_f64_lossy() - v);
            out.max_complementarity = out.max_complementarity.max(r.abs().min(dist));
            let ok = match surface.region[k] {
                Region::Continuation => {
                    out.max_continuation = out.max_continuation.max(r.abs());
                    r.abs() < residual_tol
                }
                Region::LowerContact => {
                    out.max_lower = out.max_lower.max(r);
                    r <= residual_tol
                }
                Region::UpperContact => {
                    out.min_upper = out.min_upper.min(r);
                    r >= -residual_tol
                }
            };
            if !ok {
                out.misclassified += 1;
            }
        }
    }
    out.values = values;
    Ok(out)
}
