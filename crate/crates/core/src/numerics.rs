//! Grid kernels: quadrature, root bracketing, tridiagonal solves and the
//! projected relaxation sweep, interpolation and ordered reductions.

use crate::scalar::Real;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("no sign change on [{lo}, {hi}] (f(lo) = {f_lo}, f(hi) = {f_hi})")]
    NoSignChange {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },
    #[error("projected relaxation did not converge after {sweeps} sweeps (last max update {last_update:e})")]
    NoConvergence { sweeps: usize, last_update: f64 },
}

/// Composite trapezoid rule over uniformly spaced samples.
pub fn trapezoid<T: Real>(f: &[T], dx: T) -> T {
    match f.len() {
        0 | 1 => T::zero(),
        n => {
            let half = T::lit(0.5);
            let inner = f[1..n - 1].iter().fold(T::zero(), |acc, &v| acc + v);
            dx * (half * (f[0] + f[n - 1]) + inner)
        }
    }
}

/// Cumulative trapezoid integral from node `origin` outward in both
/// directions; the entry at `origin` is exactly zero and entries left of it
/// are negative integrals of positive integrands.
pub fn cumulative_trapezoid<T: Real>(f: &[T], dx: T, origin: usize) -> Vec<T> {
    let half = T::lit(0.5) * dx;
    let mut out = vec![T::zero(); f.len()];
    for i in origin + 1..f.len() {
        out[i] = out[i - 1] + half * (f[i - 1] + f[i]);
    }
    for i in (0..origin).rev() {
        out[i] = out[i + 1] - half * (f[i] + f[i + 1]);
    }
    out
}

/// Trapezoid rule for a function on `[a, b]` with a fixed panel count.
/// Returns a signed integral, so `b < a` flips the sign.
pub fn trapezoid_fn(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    if a == b {
        return 0.0;
    }
    if b < a {
        return -trapezoid_fn(f, b, a, panels);
    }
    let n = panels.max(1);
    let h = (b - a) / n as f64;
    let mut acc = 0.5 * (f(a) + f(b));
    for k in 1..n {
        acc += f(a + k as f64 * h);
    }
    acc * h
}

/// Bisection for a root of a continuous function with a sign change on
/// `[lo, hi]`. Stops when `|f| < tol` or the bracket cannot shrink.
pub fn bisect<T: Real>(mut f: impl FnMut(T) -> T, lo: T, hi: T, tol: T) -> Result<T, NumericsError> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, fb) = (f(a), f(b));
    if fa.abs() < tol || fb.abs() < tol {
        // Prefer the end nearer zero when both qualify.
        return Ok(match (fa.abs() < tol, fb.abs() < tol) {
            (true, true) if b.abs() < a.abs() => b,
            (true, _) => a,
            _ => b,
        });
    }
    if (fa < T::zero()) == (fb < T::zero()) {
        return Err(NumericsError::NoSignChange {
            lo: lo.to_f64_lossy(),
            hi: hi.to_f64_lossy(),
            f_lo: fa.to_f64_lossy(),
            f_hi: fb.to_f64_lossy(),
        });
    }
    let half = T::lit(0.5);
    loop {
        let mid = a + half * (b - a);
        if mid <= a || mid >= b {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm.abs() < tol {
            return Ok(mid);
        }
        if (fm < T::zero()) == (fa < T::zero()) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
}

/// Tridiagonal matrix in diagonal storage. `sub[0]` and `sup[n-1]` are unused.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal<T> {
    pub sub: Vec<T>,
    pub diag: Vec<T>,
    pub sup: Vec<T>,
}

impl<T: Real> Tridiagonal<T> {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `(A x)_i`.
    pub fn apply_row(&self, x: &[T], i: usize) -> T {
        let mut v = self.diag[i] * x[i];
        if i > 0 {
            v = v + self.sub[i] * x[i - 1];
        }
        if i + 1 < x.len() {
            v = v + self.sup[i] * x[i + 1];
        }
        v
    }

    /// Thomas algorithm. The matrix must be diagonally dominant.
    pub fn solve(&self, rhs: &[T]) -> Vec<T> {
        let n = self.len();
        let mut c = vec![T::zero(); n];
        let mut d = vec![T::zero(); n];
        for i in 0..n {
            let denom = if i == 0 {
                self.diag[0]
            } else {
                self.diag[i] - self.sub[i] * c[i - 1]
            };
            c[i] = if i + 1 < n { self.sup[i] / denom } else { T::zero() };
            d[i] = if i == 0 {
                rhs[0] / denom
            } else {
                (rhs[i] - self.sub[i] * d[i - 1]) / denom
            };
        }
        let mut x = d;
        for i in (0..n.saturating_sub(1)).rev() {
            x[i] = x[i] - c[i] * x[i + 1];
        }
        x
    }
}

/// Outcome of a converged projected sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsorStats {
    pub sweeps: usize,
    pub last_update: f64,
}

/// Projected successive over-relaxation for the box-constrained linear
/// complementarity problem `lo <= x <= hi` with `A x - rhs` complementary
/// to the active bounds. Nodes are swept in increasing index order and each
/// update is clamped into `[lo_i, hi_i]` immediately.
pub fn psor<T: Real>(
    a: &Tridiagonal<T>,
    rhs: &[T],
    lo: &[T],
    hi: &[T],
    x: &mut [T],
    omega: T,
    tol: T,
    max_sweeps: usize,
) -> Result<PsorStats, NumericsError> {
    let n = a.len();
    let mut last = T::infinity();
    for sweep in 1..=max_sweeps {
        let mut max_update = T::zero();
        for i in 0..n {
            let r = rhs[i] - a.apply_row(x, i);
            let trial = x[i] + omega * r / a.diag[i];
            let next = trial.max(lo[i]).min(hi[i]);
            max_update = max_update.max((next - x[i]).abs());
            x[i] = next;
        }
        last = max_update;
        if max_update < tol {
            return Ok(PsorStats {
                sweeps: sweep,
                last_update: max_update.to_f64_lossy(),
            });
        }
    }
    Err(NumericsError::NoConvergence {
        sweeps: max_sweeps,
        last_update: last.to_f64_lossy(),
    })
}

/// Cubic Hermite interpolation on `[x0, x1]` from values and slopes.
pub fn hermite<T: Real>(x0: T, x1: T, f0: T, f1: T, d0: T, d1: T, x: T) -> T {
    let h = x1 - x0;
    let s = (x - x0) / h;
    let (one, two, three) = (T::one(), T::lit(2.0), T::lit(3.0));
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = two * s3 - three * s2 + one;
    let h10 = s3 - two * s2 + s;
    let h01 = -two * s3 + three * s2;
    let h11 = s3 - s2;
    h00 * f0 + h10 * h * d0 + h01 * f1 + h11 * h * d1
}

/// Locates `x` on the uniform grid `x0 + i dx` (`n` nodes): returns the left
/// cell index and the fractional offset in `[0, 1]`, clamping outside.
pub fn locate<T: Real>(x0: T, dx: T, n: usize, x: T) -> (usize, T) {
    let pos = (x - x0) / dx;
    if pos <= T::zero() || n < 2 {
        return (0, T::zero());
    }
    let last = n - 2;
    let i = pos.floor().to_usize().unwrap_or(last).min(last);
    let frac = (pos - T::from_usize(i).unwrap()).min(T::one());
    (i, frac)
}

/// Piecewise linear interpolation on a uniform grid, clamped at the ends.
pub fn interp_linear<T: Real>(x0: T, dx: T, ys: &[T], x: T) -> T {
    if ys.len() == 1 {
        return ys[0];
    }
    let (i, w) = locate(x0, dx, ys.len(), x);
    ys[i] + w * (ys[i + 1] - ys[i])
}

/// Sum in a fixed pairwise tree order, independent of how the inputs were
/// produced.
pub fn pairwise_sum<T: Real>(xs: &[T]) -> T {
    const LEAF: usize = 8;
    if xs.len() <= LEAF {
        return xs.iter().fold(T::zero(), |acc, &v| acc + v);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sample mean and standard error of the mean.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(xs) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn trapezoid_is_exact_for_linear() {
        let f: Vec<f64> = (0..11).map(|i| 2.0 + 0.3 * i as f64).collect();
        // integral of 2 + 3x over [0, 1]
        assert_relative_eq!(trapezoid(&f, 0.1), 3.5, epsilon = 1e-14);
    }

    #[test]
    fn cumulative_from_middle() {
        let dx = 0.25;
        let f: Vec<f64> = (-4..=4).map(|i| i as f64 * dx).collect();
        let c = cumulative_trapezoid(&f, dx, 4);
        assert_eq!(c[4], 0.0);
        for (i, v) in c.iter().enumerate() {
            let x = (i as f64 - 4.0) * dx;
            assert_relative_eq!(*v, 0.5 * x * x, epsilon = 1e-14);
        }
    }

    #[test]
    fn trapezoid_fn_signed() {
        let fwd = trapezoid_fn(|x| x * x, 0.0, 1.0, 1000);
        let back = trapezoid_fn(|x| x * x, 1.0, 0.0, 1000);
        assert!((fwd - 1.0 / 3.0).abs() < 1e-6);
        assert_eq!(fwd, -back);
    }

    #[test]
    fn bisect_finds_cos_root() {
        let r = bisect(|x: f64| x.cos(), 0.0, 3.0, 1e-12).unwrap();
        assert!((r - std::f64::consts::FRAC_PI_2).abs() < 1e-11);
        assert!(matches!(
            bisect(|x: f64| x * x + 1.0, -1.0, 1.0, 1e-12),
            Err(NumericsError::NoSignChange { .. })
        ));
    }

    #[test]
    fn thomas_matches_dense() {
        let a = Tridiagonal {
            sub: vec![0.0, -1.0, -1.0, -1.0],
            diag: vec![4.0, 4.0, 4.0, 4.0],
            sup: vec![-1.0, -1.0, -1.0, 0.0],
        };
        let x_true = [1.0, -2.0, 0.5, 3.0];
        let rhs: Vec<f64> = (0..4).map(|i| a.apply_row(&x_true, i)).collect();
        let x = a.solve(&rhs);
        for (u, v) in x.iter().zip(x_true) {
            assert_relative_eq!(*u, v, epsilon = 1e-14);
        }
    }

    #[test]
    fn psor_without_active_bounds_is_a_linear_solve() {
        let n = 30;
        let a = Tridiagonal {
            sub: vec![-1.0; n],
            diag: vec![3.0; n],
            sup: vec![-1.0; n],
        };
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut x = vec![0.0; n];
        let inf = vec![f64::INFINITY; n];
        let ninf = vec![f64::NEG_INFINITY; n];
        psor(&a, &rhs, &ninf, &inf, &mut x, 1.2, 1e-13, 1000).unwrap();
        for (u, v) in x.iter().zip(a.solve(&rhs)) {
            assert!((u - v).abs() < 1e-11);
        }
    }

    #[test]
    fn psor_respects_bounds_and_complementarity() {
        let n = 40;
        let a = Tridiagonal {
            sub: vec![-1.0; n],
            diag: vec![2.5; n],
            sup: vec![-1.0; n],
        };
        let rhs: Vec<f64> = (0..n).map(|i| 3.0 * ((i as f64) * 0.3).sin()).collect();
        let lo = vec![-1.0; n];
        let hi = vec![1.5; n];
        let mut x = vec![0.0; n];
        psor(&a, &rhs, &lo, &hi, &mut x, 1.5, 1e-13, 10_000).unwrap();
        for i in 0..n {
            assert!(x[i] >= lo[i] && x[i] <= hi[i]);
            let r = rhs[i] - a.apply_row(&x, i);
            if x[i] == lo[i] {
                assert!(r <= 1e-10);
            } else if x[i] == hi[i] {
                assert!(r >= -1e-10);
            } else {
                assert!(r.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn psor_reports_non_convergence() {
        let a = Tridiagonal {
            sub: vec![-1.0; 50],
            diag: vec![2.0; 50],
            sup: vec![-1.0; 50],
        };
        let rhs = vec![1.0; 50];
        let big = vec![1e9; 50];
        let mut x = vec![0.0; 50];
        let err = psor(&a, &rhs, &big.iter().map(|v| -v).collect::<Vec<_>>(), &big, &mut x, 1.1, 1e-14, 3);
        assert!(matches!(err, Err(NumericsError::NoConvergence { sweeps: 3, .. })));
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let f = |x: f64| x * x * x - 2.0 * x + 1.0;
        let df = |x: f64| 3.0 * x * x - 2.0;
        let (x0, x1) = (0.3, 1.1);
        for k in 0..=10 {
            let x = x0 + (x1 - x0) * k as f64 / 10.0;
            let v = hermite(x0, x1, f(x0), f(x1), df(x0), df(x1), x);
            assert_relative_eq!(v, f(x), epsilon = 1e-13);
        }
    }

    #[test]
    fn linear_interp_clamps() {
        let ys = [0.0, 1.0, 4.0];
        assert_eq!(interp_linear(0.0, 1.0, &ys, -3.0), 0.0);
        assert_eq!(interp_linear(0.0, 1.0, &ys, 1.5), 2.5);
        assert_eq!(interp_linear(0.0, 1.0, &ys, 9.0), 4.0);
    }

    #[test]
    fn single_precision_kernels() {
        let f: Vec<f32> = (0..101).map(|i| (i as f32 * 0.01).powi(2)).collect();
        assert!((trapezoid(&f, 0.01f32) - 1.0 / 3.0).abs() < 1e-4);
        let r = bisect(|x: f32| x * x - 2.0, 0.0, 2.0, 1e-6).unwrap();
        assert!((r - std::f32::consts::SQRT_2).abs() < 1e-6);
    }

    #[test]
    fn mean_and_se_known_values() {
        let (m, se) = mean_and_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert_relative_eq!(se, (5.0f64 / 3.0 / 4.0).sqrt(), epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn pairwise_sum_close_to_naive(xs in prop::collection::vec(-1e3f64..1e3, 0..500)) {
            let naive: f64 = xs.iter().sum();
            prop_assert!((pairwise_sum(&xs) - naive).abs() <= 1e-9 * (1.0 + naive.abs()) + 1e-9 * xs.len() as f64);
        }

        #[test]
        fn cumulative_differences_recover_integrand(
            xs in prop::collection::vec(-10f64..10.0, 3..60),
            origin_frac in 0.0f64..1.0,
        ) {
            let origin = ((xs.len() - 1) as f64 * origin_frac) as usize;
            let c = cumulative_trapezoid(&xs, 0.5, origin);
            prop_assert_eq!(c[origin], 0.0);
            for i in 1..xs.len() {
                let step = c[i] - c[i - 1];
                prop_assert!((step - 0.25 * (xs[i] + xs[i - 1])).abs() < 1e-10);
            }
        }
    }
}
