//! The ten acceptance criteria, one line each. Runs without the test
//! harness so the lines always print; exits nonzero if any criterion fails.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scl_core::expr::{parse, Expr, Func, Var};
use scl_core::game::{
    extract_free_boundaries, richardson_ratios, smooth_fit_check, solve_dynkin_game, FreeBoundaries, Region,
    SolverParams, ValueSurface,
};
use scl_core::model::{compute_ab_curves, fixtures, terminal_transform, ProblemSpec, TerminalMode};
use scl_core::simulate::{
    calibrated_scheme_bias, evaluate_cost, saddle_game_estimate, verify_optimality, CostModel, Estimate, GameRules,
    McParams, Policy, TerminalPolicy, VerifyConfig,
};
use scl_core::singular::{compute_holding_cost, default_hjb_tol, hjb_residual, integrate_value, WSurface};
use std::process::{Command, ExitCode};
use std::time::Instant;

type Outcome = (bool, String);

struct Solved {
    spec: ProblemSpec,
    surface: ValueSurface<f64>,
    fb: FreeBoundaries,
}

fn solve(spec: ProblemSpec, nt: usize, ny: usize, mode: TerminalMode) -> Solved {
    let g = spec.grid(nt, ny).unwrap();
    let surface = solve_dynkin_game(&spec, &g, mode, &SolverParams::default()).unwrap();
    let curves = compute_ab_curves(&spec, &g).unwrap();
    let fb = extract_free_boundaries(&surface, &spec, &curves).unwrap();
    Solved { spec, surface, fb }
}

fn cost_model(s: &Solved) -> (WSurface, CostModel) {
    let ws = integrate_value(&s.surface, &s.spec);
    let hc = compute_holding_cost(&ws, &s.fb, &s.spec).unwrap();
    let model = CostModel::new(&s.spec, &s.surface.grid, &hc).unwrap();
    (ws, model)
}

fn p0_f1(y: f64) -> f64 {
    2.0 + (y + 1.0).tanh()
}

fn p0_f2(y: f64) -> f64 {
    2.0 - (y - 1.0).tanh()
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    assert!(f(lo) * f(hi) < 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(lo) * f(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn sech2(x: f64) -> f64 {
    1.0 / x.cosh().powi(2)
}

/// Sandwich checked against the obstacles evaluated here, complementarity
/// against a residual of the theta-scheme written out independently:
/// `(V^{n+1} - V^n)/dt + theta (L V^n + y) + (1 - theta)(L V^{n+1} + y)` with
/// `L = (1/2) d^2/dy^2` for unit volatility and no drift.
fn criterion_1() -> Outcome {
    let start = Instant::now();
    let s = solve(fixtures::p0(), 201, 201, TerminalMode::Given);
    let elapsed = start.elapsed().as_secs_f64();
    let g = s.surface.grid;
    let params = SolverParams::default();
    let (nt, ny) = (g.nt, g.ny);
    let v = |n: usize, i: usize| s.surface.at(n, i);
    let mut sandwich = 0;
    let mut worst: f64 = 0.0;
    for n in 0..nt {
        for i in 0..ny {
            let y = g.y(i);
            if !(-p0_f1(y) <= v(n, i) && v(n, i) <= p0_f2(y)) {
                sandwich += 1;
            }
        }
    }
    for n in 0..nt - 1 {
        let theta = if n + 1 + params.implicit_start_steps >= nt { 1.0 } else { params.theta };
        let lap = |m: usize, i: usize| 0.5 * (v(m, i + 1) - 2.0 * v(m, i) + v(m, i - 1)) / (g.dy * g.dy);
        for i in 1..ny - 1 {
            let y = g.y(i);
            let r = (v(n + 1, i) - v(n, i)) / g.dt + theta * (lap(n, i) + y) + (1.0 - theta) * (lap(n + 1, i) + y);
            let dist = (v(n, i) + p0_f1(y)).min(p0_f2(y) - v(n, i));
            worst = worst.max(r.abs().min(dist));
        }
    }
    (
        sandwich == 0 && worst < 1e-6 && elapsed < 10.0,
        format!("{sandwich} sandwich violations, max min(|r|, dist) {worst:.2e}, solve {elapsed:.2} s"),
    )
}

/// Reference curves as roots of `L(-f1) + h` and `L f2 + h`, here in
/// closed form for P0.
fn criterion_2() -> Outcome {
    let s = solve(fixtures::p0(), 201, 201, TerminalMode::Given);
    let g = s.surface.grid;
    let a = bisect(|y| y + (y + 1.0).tanh() * sech2(y + 1.0), -3.0, 0.0);
    let b = bisect(|y| y + (y - 1.0).tanh() * sech2(y - 1.0), 0.0, 3.0);
    let (mut interior, mut lower, mut upper) = (0, 0, 0);
    for n in 0..g.nt {
        for i in 0..g.ny {
            let y = g.y(i);
            let r = s.surface.region_at(n, i);
            if y > a && y < b && r != Region::Continuation {
                interior += 1;
            }
            if r == Region::LowerContact && y > a + g.dy {
                lower += 1;
            }
            if r == Region::UpperContact && y < b - g.dy {
                upper += 1;
            }
        }
    }
    (
        interior + lower + upper == 0,
        format!("a = {a:.6}, b = {b:.6}; {interior} contact nodes inside, {lower} lower and {upper} upper misplaced"),
    )
}

fn criterion_3() -> Outcome {
    let s = solve(fixtures::p0(), 201, 201, TerminalMode::Given);
    let g = s.surface.grid;
    let mut v_err: f64 = 0.0;
    for n in 0..g.nt {
        for i in 0..g.ny {
            let j = g.ny - 1 - i;
            assert_eq!(g.y(i), -g.y(j));
            v_err = v_err.max((s.surface.at(n, i) + s.surface.at(n, j)).abs());
        }
    }
    let fb_err = (0..g.nt).fold(0.0f64, |m, n| m.max((s.fb.a_tilde[n] + s.fb.b_tilde[n]).abs()));
    (
        v_err < 1e-6 && fb_err < 2.0 * g.dy,
        format!("max |V(t,y) + V(t,-y)| {v_err:.2e}, max |a~ + b~| {fb_err:.2e} vs 2 dy = {:.2e}", 2.0 * g.dy),
    )
}

fn criterion_4() -> Outcome {
    let gaps: Vec<f64> = [201, 401, 801, 1601]
        .iter()
        .map(|&ny| {
            let s = solve(fixtures::p0(), 201, ny, TerminalMode::Given);
            smooth_fit_check(&s.surface, &s.fb, &s.spec, (0.25, 0.75)).unwrap().max_gap()
        })
        .collect();
    let ratios = richardson_ratios(&gaps);
    let ok = ratios.iter().all(|r| (1.5..=3.0).contains(r));
    (ok, format!("gaps {gaps:.4?}, ratios {ratios:.3?}"))
}

fn mc() -> McParams {
    McParams {
        n_paths: 100_000,
        dt: 1e-3,
        seed: 20260101,
    }
}

fn criterion_5() -> Outcome {
    let s = solve(fixtures::p0(), 201, 201, TerminalMode::Given);
    let params = mc();
    let bias = calibrated_scheme_bias(params.dt, s.surface.grid.dy);
    let start = Instant::now();
    let e = saddle_game_estimate(&s.spec, &s.surface, &s.fb, 0.0, 0.0, &params, GameRules::default()).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let v = s.surface.interp(0.0, 0.0);
    let err = (e.mean - v).abs();
    (
        err <= 3.0 * e.se + bias && elapsed < 120.0,
        format!(
            "V(0,0) {v:.3e}, estimate {:.4e} +- {:.2e}, |err| {err:.2e} vs 3 SE + bias {:.2e}, {elapsed:.1} s",
            e.mean,
            e.se,
            3.0 * e.se + bias
        ),
    )
}

fn perturbations() -> Vec<Policy> {
    vec![Policy::Shift(0.2), Policy::Shift(-0.2), Policy::Widen(0.3), Policy::Narrow(0.3), Policy::Frozen]
}

fn criterion_6() -> Outcome {
    let s = solve(fixtures::p0(), 201, 201, TerminalMode::Given);
    let (ws, model) = cost_model(&s);
    let params = mc();
    let config = VerifyConfig {
        s: 0.0,
        x: 0.0,
        mc: params,
        perturbations: perturbations(),
        scheme_bias: calibrated_scheme_bias(params.dt, s.surface.grid.dy),
        terminal_ab: None,
    };
    let rep = verify_optimality(&s.spec, &ws, &s.fb, &model, &config).unwrap();
    // W(0, 0) is an integral over an empty interval
    let w = 0.0;
    let opt = rep.optimal;
    let err = (opt.mean - w).abs();
    let matches = err <= 3.0 * opt.se + config.scheme_bias && ws.interp(0.0, 0.0) == w;
    let ordered = rep
        .perturbed
        .iter()
        .all(|p| p.estimate.mean >= opt.mean - 2.0 * opt.se && p.diff_mean >= -2.0 * p.diff_se);
    let margins: Vec<String> = rep.perturbed.iter().map(|p| format!("{} +{:.2e}", p.label, p.diff_mean)).collect();
    (
        matches && ordered && rep.perturbed.len() == 5,
        format!(
            "cost {:.4e} +- {:.2e} vs W(0,0) = 0 (budget {:.2e}); {}",
            opt.mean,
            opt.se,
            3.0 * opt.se + config.scheme_bias,
            margins.join(", ")
        ),
    )
}

fn criterion_7() -> Outcome {
    let s = solve(fixtures::p0(), 201, 201, TerminalMode::Given);
    let ws = integrate_value(&s.surface, &s.spec);
    let hc = compute_holding_cost(&ws, &s.fb, &s.spec).unwrap();
    let tol = default_hjb_tol(&s.surface.grid);
    let r = hjb_residual(&ws, &hc, &s.fb, &s.spec, tol).unwrap();
    (
        r.max_continuation < tol && r.outside_nodes > 0 && r.outside_positive == r.outside_nodes,
        format!(
            "max |R| on continuation {:.2e} vs {tol:.1e}; R > 0 on {}/{} outside nodes (min {:.3e})",
            r.max_continuation, r.outside_positive, r.outside_nodes, r.min_outside
        ),
    )
}

/// With `g = 2y` and `c = 0`: `G = x^2`, the crossovers are `-1` and `1`,
/// and the envelope is `-1 - 2x - ln cosh(x + 1)` left of `-1`,
/// `2x - 1 - ln cosh(x - 1)` right of `1`.
fn closed_form_err(ny: usize) -> f64 {
    let spec = fixtures::p0_jump();
    let g = spec.grid(201, ny).unwrap();
    let tt = terminal_transform(&spec, &g).unwrap();
    (0..g.ny).fold(0.0f64, |m, i| m.max((tt.big_g_tilde[i] - envelope_exact(g.y(i))).abs()))
}

fn envelope_exact(x: f64) -> f64 {
    if x < -1.0 {
        -1.0 - 2.0 * x - (x + 1.0).cosh().ln()
    } else if x > 1.0 {
        2.0 * x - 1.0 - (x - 1.0).cosh().ln()
    } else {
        x * x
    }
}

fn criterion_8() -> Outcome {
    let spec = fixtures::p0_jump();
    let g = spec.grid(201, 201).unwrap();
    let tt = terminal_transform(&spec, &g).unwrap();
    let (big_a, big_b) = (-1.0, 1.0);
    let mut above = 0;
    let mut equality_off = 0;
    let mut oracle_err: f64 = 0.0;
    for i in 0..g.ny {
        let x = g.y(i);
        let (gi, gt) = (tt.big_g[i], tt.big_g_tilde[i]);
        if gt > gi {
            above += 1;
        }
        let equal = gt == gi;
        let inside = x >= big_a && x <= big_b;
        let near = x >= big_a - g.dy && x <= big_b + g.dy;
        if (inside && !equal) || (!near && equal) {
            equality_off += 1;
        }
        oracle_err = oracle_err.max((gt - envelope_exact(x)).abs());
    }
    // trapezoid quadrature: error within dy^2 and second order under refinement
    let refined = closed_form_err(401);
    let quad_ok = oracle_err < g.dy * g.dy && oracle_err / refined > 3.0;
    let s = solve(spec, 201, 201, TerminalMode::Envelope);
    let last = g.nt - 1;
    let hit_a = (s.fb.a_tilde[last] - big_a).abs();
    let hit_b = (s.fb.b_tilde[last] - big_b).abs();
    let (_, model) = cost_model(&s);
    let params = mc();
    let clamp = TerminalPolicy::Clamp { a: tt.a, b: tt.b };
    let mut clamp_ok = true;
    let mut notes = Vec::new();
    for policy in [Policy::Optimal, Policy::Widen(0.3)] {
        let none = evaluate_cost(&s.spec, &s.fb, &model, policy, 0.0, 0.0, &params, TerminalPolicy::None).unwrap();
        let clamped = evaluate_cost(&s.spec, &s.fb, &model, policy, 0.0, 0.0, &params, clamp).unwrap();
        let d: Vec<f64> = none.costs.iter().zip(&clamped.costs).map(|(a, b)| a - b).collect();
        let e = Estimate::from_samples(&d);
        clamp_ok &= e.mean >= -2.0 * e.se;
        let moved = d.iter().filter(|x| **x != 0.0).count();
        notes.push(format!("{}: none - clamp {:.2e} +- {:.1e} ({moved} paths moved)", policy.label(), e.mean, e.se));
    }
    (
        above == 0 && equality_off == 0 && hit_a <= g.dy && hit_b <= g.dy && clamp_ok && quad_ok,
        format!(
            "A, B = {:.6}, {:.6}; {above} nodes with G~ > G, {equality_off} equality mismatches, closed form err {oracle_err:.1e} (dy^2 {:.1e}, {refined:.1e} at half dy); |a~(T) - A| {hit_a:.1e}, |b~(T) - B| {hit_b:.1e} vs dy {:.1e}; {}",
            tt.a,
            tt.b,
            g.dy * g.dy,
            g.dy,
            notes.join("; ")
        ),
    )
}

/// Random smooth expressions; arguments of log and sqrt are kept >= 1 and
/// denominators >= 1.
fn random_expr(rng: &mut ChaCha8Rng, depth: u32) -> Expr {
    let b = Box::new;
    if depth == 0 || rng.random_bool(0.25) {
        return match rng.random_range(0..3) {
            0 => Expr::Num((rng.random_range(-3.0..3.0f64) * 100.0).round() / 100.0),
            1 => Expr::Var(Var::Y),
            _ => Expr::Var(Var::T),
        };
    }
    let sub = |rng: &mut ChaCha8Rng| random_expr(rng, depth - 1);
    let one_plus_sq = |x: Expr| Expr::Add(b(Expr::Num(1.0)), b(Expr::Pow(b(x), b(Expr::Num(2.0)))));
    match rng.random_range(0..13) {
        0 => Expr::Add(b(sub(rng)), b(sub(rng))),
        1 => Expr::Sub(b(sub(rng)), b(sub(rng))),
        2 => Expr::Mul(b(sub(rng)), b(sub(rng))),
        3 => {
            let (x, z) = (sub(rng), sub(rng));
            Expr::Div(b(x), b(Expr::Add(b(Expr::Num(2.0)), b(Expr::Call(Func::Sin, b(z))))))
        }
        4 => Expr::Pow(b(sub(rng)), b(Expr::Num(rng.random_range(0..4) as f64))),
        5 => Expr::Neg(b(sub(rng))),
        6 => Expr::Call(Func::Tanh, b(sub(rng))),
        7 => Expr::Call(Func::Sech, b(sub(rng))),
        8 => Expr::Call(Func::Sin, b(sub(rng))),
        9 => Expr::Call(Func::Cos, b(sub(rng))),
        10 => Expr::Call(Func::Exp, b(Expr::Call(Func::Tanh, b(sub(rng))))),
        11 => Expr::Call(Func::Log, b(one_plus_sq(sub(rng)))),
        _ => Expr::Call(Func::Sqrt, b(one_plus_sq(sub(rng)))),
    }
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let h = 1e-5;
    let (mut checks, mut fd_fail, mut trip_fail) = (0, 0, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let e = random_expr(&mut rng, 4);
        let (t, y) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        for var in [Var::Y, Var::T] {
            let (fp, fm) = match var {
                Var::Y => (e.eval(t, y + h), e.eval(t, y - h)),
                Var::T => (e.eval(t + h, y), e.eval(t - h, y)),
            };
            let fd = (fp.unwrap() - fm.unwrap()) / (2.0 * h);
            let exact = e.diff(var).eval(t, y).unwrap();
            let rel = (fd - exact).abs() / (1.0 + exact.abs());
            worst = worst.max(rel);
            checks += 1;
            if rel >= 1e-6 {
                fd_fail += 1;
            }
        }
        let once = parse(&e.to_string()).unwrap();
        let twice = parse(&once.to_string()).unwrap();
        if once != twice || once.eval(t, y).unwrap().to_bits() != e.eval(t, y).unwrap().to_bits() {
            trip_fail += 1;
        }
    }
    (
        fd_fail == 0 && trip_fail == 0,
        format!("{checks} derivative checks, {fd_fail} failed (worst relative {worst:.1e}); {trip_fail} round-trip failures"),
    )
}

fn criterion_10() -> Outcome {
    let dir = tempfile::TempDir::new().unwrap();
    let cfg_src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/p0.json")).unwrap();
    let mut cfg: serde_json::Value = serde_json::from_str(&cfg_src).unwrap();
    cfg["mc"]["n_paths"] = serde_json::json!(10_000);
    let cfg_path = dir.path().join("p0.json");
    std::fs::write(&cfg_path, cfg.to_string()).unwrap();
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        let status = Command::new(env!("CARGO_BIN_EXE_scl"))
            .args(["verify", cfg_path.to_str().unwrap(), "--seed", "7", "--out", out.to_str().unwrap()])
            .output()
            .unwrap();
        (status.status.code(), std::fs::read(out.join("report.txt")).unwrap_or_default())
    };
    let (c1, r1) = run("first");
    let (c2, r2) = run("second");
    (
        c1 == Some(0) && c2 == Some(0) && !r1.is_empty() && r1 == r2,
        format!("exit codes {c1:?}, {c2:?}; reports {} and {} bytes, identical: {}", r1.len(), r2.len(), r1 == r2),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("obstacle sandwich and complementarity", criterion_1),
        ("region structure", criterion_2),
        ("antisymmetry", criterion_3),
        ("smooth fit", criterion_4),
        ("game Monte Carlo", criterion_5),
        ("control Monte Carlo", criterion_6),
        ("HJB trichotomy", criterion_7),
        ("terminal envelope", criterion_8),
        ("expression engine", criterion_9),
        ("determinism", criterion_10),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let (ok, detail) = f();
        if !ok {
            failed += 1;
        }
        println!("criterion {:>2} {}: {name}: {detail}", k + 1, if ok { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {} of 10 passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
