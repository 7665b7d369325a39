use super::{ModelError, ProblemSpec};
use crate::grid::Grid;
use crate::numerics::bisect;
use std::fmt;

/// Lower (`a`) or upper (`b`) side of the problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Lower,
    Upper,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Lower => "a (lower)",
            Side::Upper => "b (upper)",
        })
    }
}

/// Reference curves: zeros in `y` of `L(-f1) + e^{ct} h` (curve `a`) and of
/// `L f2 + e^{ct} h` (curve `b`) at every time level.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePair {
    pub t: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// Defining function value at the returned root.
    pub residual_a: Vec<f64>,
    pub residual_b: Vec<f64>,
    pub root_tol: f64,
}

pub const ROOT_TOL: f64 = 1e-10;

/// Locates both curves by bisection on the band. Each defining function
/// must be strictly increasing on the sampled nodes, and the curves must
/// stay at least 10% of the band width inside the band.
pub fn compute_ab_curves(spec: &ProblemSpec, grid: &Grid) -> Result<CurvePair, ModelError> {
    let mut out = CurvePair {
        t: grid.ts(),
        a: Vec::with_capacity(grid.nt),
        b: Vec::with_capacity(grid.nt),
        residual_a: Vec::with_capacity(grid.nt),
        residual_b: Vec::with_capacity(grid.nt),
        root_tol: ROOT_TOL,
    };
    let width = grid.band_hi - grid.band_lo;
    let (inner_lo, inner_hi) = (grid.band_lo + 0.1 * width, grid.band_hi - 0.1 * width);
    for &t in &out.t {
        for side in [Side::Lower, Side::Upper] {
            let f = |y: f64| match side {
                Side::Lower => spec.lower_defining(t, y),
                Side::Upper => spec.upper_defining(t, y),
            };
            let mut prev = f(grid.y(0))?;
            for i in 1..grid.ny {
                let y = grid.y(i);
                let v = f(y)?;
                if v <= prev {
                    return Err(ModelError::NotIncreasing { curve: side, t, y });
                }
                prev = v;
            }
            // `f` already evaluated cleanly on the grid; bisection points in
            // between are treated the same way.
            let mut eval_err = None;
            let root = bisect(
                |y| {
                    f(y).unwrap_or_else(|e| {
                        eval_err.get_or_insert(e);
                        f64::NAN
                    })
                },
                grid.y(0),
                grid.y(grid.ny - 1),
                ROOT_TOL,
            );
            if let Some(e) = eval_err {
                return Err(e);
            }
            let root = root.map_err(|_| ModelError::NoRoot { curve: side, t })?;
            if root < inner_lo || root > inner_hi {
                return Err(ModelError::BandTooNarrow {
                    curve: side,
                    t,
                    value: root,
                    lo: inner_lo,
                    hi: inner_hi,
                });
            }
            let residual = f(root)?;
            let (curve, res, wrong_sign) = match side {
                Side::Lower => (&mut out.a, &mut out.residual_a, root >= 0.0),
                Side::Upper => (&mut out.b, &mut out.residual_b, root <= 0.0),
            };
            if wrong_sign {
                return Err(ModelError::CurveSign {
                    curve: side,
                    t,
                    value: root,
                });
            }
            curve.push(root);
            res.push(residual);
        }
    }
    Ok(out)
}

impl CurvePair {
    /// Linear interpolation of `(a(t), b(t))`.
    pub fn at(&self, t: f64) -> (f64, f64) {
        let n = self.t.len();
        let dt = if n > 1 { self.t[1] - self.t[0] } else { 1.0 };
        (
            crate::numerics::interp_linear(self.t[0], dt, &self.a, t),
            crate::numerics::interp_linear(self.t[0], dt, &self.b, t),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{fixtures, Sources};

    #[test]
    fn p0_curves_are_mirror_images() {
        let p = fixtures::p0();
        let g = p.grid(11, 201).unwrap();
        let c = compute_ab_curves(&p, &g).unwrap();
        for n in 0..g.nt {
            assert!(c.a[n] < 0.0 && c.b[n] > 0.0);
            assert!((c.a[n] + c.b[n]).abs() < 2.0 * ROOT_TOL + 1e-12, "{} {}", c.a[n], c.b[n]);
            assert!(c.residual_a[n].abs() < ROOT_TOL);
            assert!(c.residual_b[n].abs() < ROOT_TOL);
        }
    }

    #[test]
    fn p0_sign_pattern_around_curves() {
        let p = fixtures::p0();
        let g = p.grid(5, 121).unwrap();
        let c = compute_ab_curves(&p, &g).unwrap();
        for n in 0..g.nt {
            let t = g.t(n);
            for y in g.ys() {
                let lo = p.lower_defining(t, y).unwrap();
                let hi = p.upper_defining(t, y).unwrap();
                if y < c.a[n] - 1e-9 {
                    assert!(lo < 0.0);
                } else if y > c.a[n] + 1e-9 {
                    assert!(lo > 0.0);
                }
                if y < c.b[n] - 1e-9 {
                    assert!(hi < 0.0);
                } else if y > c.b[n] + 1e-9 {
                    assert!(hi > 0.0);
                }
            }
        }
    }

    #[test]
    fn refinement_moves_roots_by_less_than_a_cell() {
        let p = fixtures::p0();
        let g = p.grid(3, 61).unwrap();
        let fine = p.grid(3, 121).unwrap();
        let (c, cf) = (compute_ab_curves(&p, &g).unwrap(), compute_ab_curves(&p, &fine).unwrap());
        for n in 0..3 {
            assert!((c.a[n] - cf.a[n]).abs() < 2.0 * ROOT_TOL + fine.dy);
        }
    }

    fn spec_with(h: &str, band: (f64, f64)) -> ProblemSpec {
        ProblemSpec::parse(
            0.0,
            0.0,
            1.0,
            band,
            Sources {
                sigma: "1",
                f1: fixtures::P0_F1,
                f2: fixtures::P0_F2,
                h,
                g: "0",
            },
        )
        .unwrap()
    }

    #[test]
    fn narrow_band_is_rejected() {
        let p = spec_with("y", (-0.45, 0.45));
        let g = p.grid(3, 19).unwrap();
        assert!(matches!(compute_ab_curves(&p, &g), Err(ModelError::BandTooNarrow { .. })));
    }

    #[test]
    fn non_monotone_defining_function_is_rejected() {
        let p = spec_with("sin(3*y)", (-6.0, 6.0));
        let g = p.grid(3, 61).unwrap();
        assert!(matches!(compute_ab_curves(&p, &g), Err(ModelError::NotIncreasing { .. })));
    }

    #[test]
    fn missing_root_is_reported() {
        let p = spec_with("y + 100", (-6.0, 6.0));
        let g = p.grid(3, 61).unwrap();
        assert!(matches!(
            compute_ab_curves(&p, &g),
            Err(ModelError::NoRoot { curve: Side::Lower, .. })
        ));
    }
}
