use super::control::{evaluate_cost, CostModel, Policy, TerminalPolicy};
use super::{Estimate, McParams, SimError};
use crate::game::FreeBoundaries;
use crate::model::ProblemSpec;
use crate::singular::WSurface;
use std::fmt::Write as _;

/// Constant of the Monte Carlo scheme bias budget `C (sqrt(dt) + dy)`,
/// calibrated on P0.
pub const SCHEME_BIAS_C: f64 = 0.25;

pub fn calibrated_scheme_bias(dt: f64, dy: f64) -> f64 {
    SCHEME_BIAS_C * (dt.sqrt() + dy)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
    /// The confidence interval is wider than the bias budget.
    Inconclusive,
}

impl Outcome {
    pub fn label(self) -> &'static str {
        match self {
            Outcome::Pass => "PASS",
            Outcome::Fail => "FAIL",
            Outcome::Inconclusive => "INCONCLUSIVE",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub name: String,
    pub outcome: Outcome,
    pub detail: String,
}

/// Compares an estimate with a PDE value under `3 SE + bias`.
pub fn ci_check(name: &str, est: &Estimate, reference: f64, bias: f64) -> CheckLine {
    let err = (est.mean - reference).abs();
    let width = 3.0 * est.se;
    let outcome = if width > bias {
        Outcome::Inconclusive
    } else if err <= width + bias {
        Outcome::Pass
    } else {
        Outcome::Fail
    };
    CheckLine {
        name: name.into(),
        outcome,
        detail: format!("|{:.6e} - {:.6e}| = {:.3e} vs 3 SE + bias = {:.3e}", est.mean, reference, err, width + bias),
    }
}

/// `diff >= -2 SE`; a failure with `2 SE` wider than the bias budget is
/// inconclusive.
fn ordering_check(name: String, diff_mean: f64, diff_se: f64, bias: f64, what: &str) -> CheckLine {
    let outcome = if diff_mean >= -2.0 * diff_se {
        Outcome::Pass
    } else if 2.0 * diff_se > bias {
        Outcome::Inconclusive
    } else {
        Outcome::Fail
    };
    CheckLine {
        name,
        outcome,
        detail: format!("{what} = {diff_mean:.6e} vs -2 SE = {:.6e}", -2.0 * diff_se),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyResult {
    pub label: String,
    pub estimate: Estimate,
    /// Mean and SE of the per-path difference to the optimal policy on the
    /// same random numbers.
    pub diff_mean: f64,
    pub diff_se: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TerminalComparison {
    pub a: f64,
    pub b: f64,
    pub none: Estimate,
    pub clamp: Estimate,
    /// `none - clamp` per path.
    pub diff_mean: f64,
    pub diff_se: f64,
    /// Share of paths whose cost differs, i.e. that ended outside `[a, b]`.
    pub outside_fraction: f64,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub s: f64,
    pub x: f64,
    pub mc: McParams,
    pub perturbations: Vec<Policy>,
    /// Bias budget added to `3 SE`.
    pub scheme_bias: f64,
    /// Crossover points when the terminal jump should be compared.
    pub terminal_ab: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub seed: u64,
    pub n_paths: usize,
    pub dt: f64,
    pub start: (f64, f64),
    pub scheme_bias: f64,
    pub w_pde: f64,
    pub optimal: Estimate,
    pub perturbed: Vec<PolicyResult>,
    pub terminal: Option<TerminalComparison>,
    /// Extra `key: value` lines, written before the checks.
    pub values: Vec<(String, String)>,
    pub checks: Vec<CheckLine>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.outcome != Outcome::Fail)
    }

    /// `Fail` if any check failed, else `Inconclusive` if any was, else `Pass`.
    pub fn outcome(&self) -> Outcome {
        if !self.passed() {
            Outcome::Fail
        } else if self.checks.iter().any(|c| c.outcome == Outcome::Inconclusive) {
            Outcome::Inconclusive
        } else {
            Outcome::Pass
        }
    }

    pub fn first_failure(&self) -> Option<&CheckLine> {
        self.checks.iter().find(|c| c.outcome == Outcome::Fail)
    }

    pub fn push_value(&mut self, key: &str, value: impl Into<String>) {
        self.values.push((key.into(), value.into()));
    }

    /// `key: value` text; numbers at 17 significant digits.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let num = |v: f64| format!("{v:.16e}");
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k}: {v}");
        };
        kv("seed", self.seed.to_string());
        kv("n_paths", self.n_paths.to_string());
        kv("dt", num(self.dt));
        kv("start_s", num(self.start.0));
        kv("start_x", num(self.start.1));
        kv("scheme_bias", num(self.scheme_bias));
        kv("w_pde", num(self.w_pde));
        kv("optimal.mean", num(self.optimal.mean));
        kv("optimal.se", num(self.optimal.se));
        for p in &self.perturbed {
            kv(&format!("policy.{}.mean", p.label), num(p.estimate.mean));
            kv(&format!("policy.{}.se", p.label), num(p.estimate.se));
            kv(&format!("policy.{}.diff_mean", p.label), num(p.diff_mean));
            kv(&format!("policy.{}.diff_se", p.label), num(p.diff_se));
        }
        if let Some(t) = &self.terminal {
            kv("terminal.A", num(t.a));
            kv("terminal.B", num(t.b));
            kv("terminal.none.mean", num(t.none.mean));
            kv("terminal.none.se", num(t.none.se));
            kv("terminal.clamp.mean", num(t.clamp.mean));
            kv("terminal.clamp.se", num(t.clamp.se));
            kv("terminal.diff_mean", num(t.diff_mean));
            kv("terminal.diff_se", num(t.diff_se));
            kv("terminal.outside_fraction", num(t.outside_fraction));
        }
        for (k, v) in &self.values {
            kv(k, v.clone());
        }
        for c in &self.checks {
            kv(&format!("check.{}", c.name), format!("{} ({})", c.outcome.label(), c.detail));
        }
        kv("result", self.outcome().label().into());
        out
    }
}

fn paired(a: &[f64], b: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let e = Estimate::from_samples(&d);
    (e.mean, e.se)
}

/// Prices the boundary policy and its perturbations on common random
/// numbers and checks the ordering and the match with `W`.
pub fn verify_optimality(
    spec: &ProblemSpec,
    ws: &WSurface,
    boundaries: &FreeBoundaries,
    model: &CostModel,
    config: &VerifyConfig,
) -> Result<VerificationReport, SimError> {
    let (s, x) = (config.s, config.x);
    let mc = &config.mc;
    let optimal = evaluate_cost(spec, boundaries, model, Policy::Optimal, s, x, mc, TerminalPolicy::None)?;
    let w_pde = ws.interp(s, x);
    let mut report = VerificationReport {
        seed: mc.seed,
        n_paths: mc.n_paths,
        dt: mc.dt,
        start: (s, x),
        scheme_bias: config.scheme_bias,
        w_pde,
        optimal: optimal.estimate,
        perturbed: Vec::new(),
        terminal: None,
        values: Vec::new(),
        checks: Vec::new(),
    };
    report
        .checks
        .push(ci_check("optimal_cost_matches_w", &optimal.estimate, w_pde, config.scheme_bias));

    for &policy in &config.perturbations {
        let sample = evaluate_cost(spec, boundaries, model, policy, s, x, mc, TerminalPolicy::None)?;
        let (diff_mean, diff_se) = paired(&sample.costs, &optimal.costs);
        let check = ordering_check(
            format!("policy_{}_not_cheaper", policy.label()),
            diff_mean,
            diff_se,
            config.scheme_bias,
            "policy - optimal",
        );
        let passed = check.outcome == Outcome::Pass;
        report.checks.push(check);
        report.perturbed.push(PolicyResult {
            label: policy.label(),
            estimate: sample.estimate,
            diff_mean,
            diff_se,
            passed,
        });
    }

    if let Some((a, b)) = config.terminal_ab {
        let clamp = evaluate_cost(spec, boundaries, model, Policy::Optimal, s, x, mc, TerminalPolicy::Clamp { a, b })?;
        let (diff_mean, diff_se) = paired(&optimal.costs, &clamp.costs);
        let changed = optimal.costs.iter().zip(&clamp.costs).filter(|(p, q)| p != q).count();
        let check = ordering_check(
            "terminal_clamp_not_costlier".into(),
            diff_mean,
            diff_se,
            config.scheme_bias,
            "none - clamp",
        );
        let passed = check.outcome == Outcome::Pass;
        report.checks.push(check);
        report.terminal = Some(TerminalComparison {
            a,
            b,
            none: optimal.estimate,
            clamp: clamp.estimate,
            diff_mean,
            diff_se,
            outside_fraction: changed as f64 / mc.n_paths as f64,
            passed,
        });
    }
    Ok(report)
}
