//! Uniform time-space grid on `[0, T] x [band_lo, band_hi]`.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("grid needs nt >= 2 and ny >= 3 (got nt = {nt}, ny = {ny})")]
    TooSmall { nt: usize, ny: usize },
    #[error("horizon must be positive and finite (got {0})")]
    Horizon(f64),
    #[error("band [{lo}, {hi}] must satisfy lo < 0 < hi")]
    Band { lo: f64, hi: f64 },
    #[error("y = 0 is not a grid node: band_lo / dy = {ratio} is not an integer")]
    ZeroNotANode { ratio: f64 },
}

/// Node coordinates are `t_n = n dt` and `y_i = (i - zero_index) dy`, so
/// `y = 0` is exact and a symmetric band gives exactly mirrored nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nt: usize,
    pub ny: usize,
    pub horizon: f64,
    pub band_lo: f64,
    pub band_hi: f64,
    pub dt: f64,
    pub dy: f64,
    pub zero_index: usize,
}

impl Grid {
    pub fn new(horizon: f64, band_lo: f64, band_hi: f64, nt: usize, ny: usize) -> Result<Grid, GridError> {
        if nt < 2 || ny < 3 {
            return Err(GridError::TooSmall { nt, ny });
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(GridError::Horizon(horizon));
        }
        if !(band_lo < 0.0 && band_hi > 0.0 && band_lo.is_finite() && band_hi.is_finite()) {
            return Err(GridError::Band { lo: band_lo, hi: band_hi });
        }
        let dy = (band_hi - band_lo) / (ny - 1) as f64;
        let ratio = -band_lo / dy;
        if (ratio - ratio.round()).abs() > 1e-8 * ratio.max(1.0) {
            return Err(GridError::ZeroNotANode { ratio });
        }
        Ok(Grid {
            nt,
            ny,
            horizon,
            band_lo,
            band_hi,
            dt: horizon / (nt - 1) as f64,
            dy,
            zero_index: ratio.round() as usize,
        })
    }

    pub fn t(&self, n: usize) -> f64 {
        if n + 1 == self.nt {
            self.horizon
        } else {
            n as f64 * self.dt
        }
    }

    pub fn y(&self, i: usize) -> f64 {
        (i as f64 - self.zero_index as f64) * self.dy
    }

    pub fn ys(&self) -> Vec<f64> {
        (0..self.ny).map(|i| self.y(i)).collect()
    }

    pub fn ts(&self) -> Vec<f64> {
        (0..self.nt).map(|n| self.t(n)).collect()
    }

    /// Flat row-major index of node `(n, i)`.
    pub fn idx(&self, n: usize, i: usize) -> usize {
        n * self.ny + i
    }

    /// Index of the node mirrored through `y = 0`, if it is on the grid.
    pub fn mirror(&self, i: usize) -> Option<usize> {
        (2 * self.zero_index).checked_sub(i).filter(|&j| j < self.ny)
    }

    /// Nearest time level to `t`.
    pub fn level_of(&self, t: f64) -> usize {
        ((t / self.dt).round().max(0.0) as usize).min(self.nt - 1)
    }

    /// Same band, nodes halved in spacing: `(2 nt - 1, 2 ny - 1)`.
    pub fn refined(&self) -> Grid {
        Grid::new(self.horizon, self.band_lo, self.band_hi, 2 * self.nt - 1, 2 * self.ny - 1)
            .expect("refinement of a valid grid is valid")
    }
}
