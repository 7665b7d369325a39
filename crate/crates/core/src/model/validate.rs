use super::{ModelError, ProblemSpec, TerminalMode};
use crate::grid::Grid;

/// Worst sampled violation of a check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub t: f64,
    pub y: f64,
    /// Size of the violation (positive).
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Number of violating nodes (or node pairs for monotonicity checks).
    pub violations: usize,
    pub worst: Option<Violation>,
    /// Extra figure reported with the check, e.g. the sampled bound.
    pub note: Option<String>,
}

impl Check {
    fn new(name: &'static str) -> Self {
        Check {
            name,
            passed: true,
            violations: 0,
            worst: None,
            note: None,
        }
    }

    fn record(&mut self, t: f64, y: f64, amount: f64) {
        self.passed = false;
        self.violations += 1;
        if self.worst.map_or(true, |w| amount > w.amount) {
            self.worst = Some(Violation { t, y, amount });
        }
    }
}

pub const SIGMA: &str = "sigma >= sigma_min";
pub const SIGNS: &str = "f2 > 0 > -f1";
pub const BOUNDED: &str = "|f1|, |f2|, |h|, |g| <= M";
pub const SANDWICH: &str = "-f1(T,y) <= g(y) <= f2(T,y)";
pub const CROSSOVER: &str = "g below -f1(T,.) left of A, above f2(T,.) right of B, between on [A,B]";
pub const H_INCREASING: &str = "h strictly increasing in y";
pub const F1_NONDECREASING: &str = "f1 nondecreasing in y";
pub const F2_NONINCREASING: &str = "f2 nonincreasing in y";
pub const H_ZERO: &str = "h(t,0) = 0";
pub const G_ZERO: &str = "g(0) = 0";

const ZERO_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    /// The sandwich check applies to the plain game, the crossover pattern
    /// to the envelope variant.
    fn applies(name: &str, mode: TerminalMode) -> bool {
        match mode {
            TerminalMode::Given => name != CROSSOVER,
            TerminalMode::Envelope => name != SANDWICH,
        }
    }

    pub fn passed(&self, mode: TerminalMode) -> bool {
        self.first_failure(mode).is_none()
    }

    pub fn first_failure(&self, mode: TerminalMode) -> Option<&Check> {
        self.checks
            .iter()
            .find(|c| Self::applies(c.name, mode) && !c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Samples the standing assumptions on every grid node. Evaluation errors
/// (including non-finite values) abort with the function and node named.
pub fn validate_problem(spec: &ProblemSpec, grid: &Grid) -> Result<ValidationReport, ModelError> {
    let s = spec.sample(grid)?;
    let (nt, ny) = (grid.nt, grid.ny);
    let at = |v: &[f64], n: usize, i: usize| v[n * ny + i];

    let mut sigma = Check::new(SIGMA);
    for i in 0..ny {
        if s.sigma[i] < spec.sigma_min {
            sigma.record(grid.horizon, grid.y(i), spec.sigma_min - s.sigma[i]);
        }
    }

    let mut signs = Check::new(SIGNS);
    let mut h_zero = Check::new(H_ZERO);
    let mut inc_h = Check::new(H_INCREASING);
    let mut inc_f1 = Check::new(F1_NONDECREASING);
    let mut dec_f2 = Check::new(F2_NONINCREASING);
    let mut sup: f64 = 0.0;
    for n in 0..nt {
        let t = grid.t(n);
        for i in 0..ny {
            let y = grid.y(i);
            let (f1, f2) = (at(&s.f1, n, i), at(&s.f2, n, i));
            if f1 <= 0.0 || f2 <= 0.0 {
                signs.record(t, y, (-f1).max(-f2).max(0.0));
            }
            sup = sup.max(f1.abs()).max(f2.abs()).max(at(&s.h, n, i).abs());
            if i > 0 {
                let yl = grid.y(i - 1);
                let dh = at(&s.h, n, i) - at(&s.h, n, i - 1);
                if dh <= 0.0 {
                    inc_h.record(t, yl, -dh);
                }
                let d1 = at(&s.f1, n, i) - at(&s.f1, n, i - 1);
                if d1 < 0.0 {
                    inc_f1.record(t, yl, -d1);
                }
                let d2 = at(&s.f2, n, i) - at(&s.f2, n, i - 1);
                if d2 > 0.0 {
                    dec_f2.record(t, yl, d2);
                }
            }
        }
        let h0 = at(&s.h, n, grid.zero_index);
        if h0.abs() > ZERO_TOL {
            h_zero.record(t, 0.0, h0.abs());
        }
    }

    let last = nt - 1;
    let mut sandwich = Check::new(SANDWICH);
    let mut below = Vec::with_capacity(ny);
    let mut above = Vec::with_capacity(ny);
    for i in 0..ny {
        let g = s.g[i];
        sup = sup.max(g.abs());
        let lower = -at(&s.f1, last, i);
        let upper = at(&s.f2, last, i);
        below.push(g < lower);
        above.push(g > upper);
        if g < lower || g > upper {
            sandwich.record(grid.horizon, grid.y(i), (lower - g).max(g - upper));
        }
    }

    // Violations below the lower obstacle must form a prefix of the nodes
    // left of 0, those above the upper obstacle a suffix right of 0.
    let mut crossover = Check::new(CROSSOVER);
    let z = grid.zero_index;
    let first_ok = below.iter().position(|&b| !b).unwrap_or(ny);
    let last_ok = above.iter().rposition(|&a| !a).map_or(0, |j| j + 1);
    for i in 0..ny {
        let in_prefix = i < first_ok && i < z;
        let in_suffix = i >= last_ok && i > z;
        if (below[i] && !in_prefix) || (above[i] && !in_suffix) {
            let amount = (-at(&s.f1, last, i) - s.g[i]).max(s.g[i] - at(&s.f2, last, i));
            crossover.record(grid.horizon, grid.y(i), amount);
        }
    }

    let mut g_zero = Check::new(G_ZERO);
    if s.g[z].abs() > ZERO_TOL {
        g_zero.record(grid.horizon, 0.0, s.g[z].abs());
    }

    let mut bounded = Check::new(BOUNDED);
    bounded.note = Some(format!("sampled max {sup:.6e}"));
    if let Some(m) = spec.bound {
        if sup > m {
            bounded.record(f64::NAN, f64::NAN, sup - m);
        }
    }

    Ok(ValidationReport {
        checks: vec![
            sigma, signs, bounded, sandwich, crossover, inc_h, inc_f1, dec_f2, h_zero, g_zero,
        ],
    })
}
