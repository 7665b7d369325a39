use crate::config::{Format, RunConfig};
use crate::output::{num, write_file};
use crate::CliError;
use scl_core::game::{
    extract_free_boundaries, pde_residual, read_cache, region_structure_check, solve_dynkin_game, write_cache,
    FreeBoundaries, GameError, Region, ValueSurface,
};
use scl_core::grid::Grid;
use scl_core::model::{compute_ab_curves, terminal_transform, validate_problem, CurvePair, ProblemSpec, TerminalMode};
use scl_core::simulate::{
    calibrated_scheme_bias, ci_check, saddle_game_estimate, verify_optimality, CheckLine, CostModel, GameRules, Outcome,
    VerifyConfig,
};
use scl_core::singular::{compute_holding_cost, default_hjb_tol, hjb_residual, integrate_value};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

const CACHE_FILE: &str = "surface.bin";
const KEY_FILE: &str = "surface.key";

pub struct Solved {
    pub spec: ProblemSpec,
    pub grid: Grid,
    pub mode: TerminalMode,
    pub surface: ValueSurface<f64>,
    pub curves: CurvePair,
    pub boundaries: FreeBoundaries,
}

fn game_error(e: GameError) -> CliError {
    match e {
        GameError::Sweep { .. } => CliError::Failed(e.to_string()),
        _ => CliError::Input(e.to_string()),
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}

/// Parses the problem and checks the standing assumptions on the grid.
fn prepare(cfg: &RunConfig) -> Result<(ProblemSpec, Grid, TerminalMode), CliError> {
    let spec = cfg.spec()?;
    let grid = cfg.grid(&spec)?;
    let mode = cfg.mode();
    let report = validate_problem(&spec, &grid).map_err(|e| CliError::Input(e.to_string()))?;
    if let Some(c) = report.first_failure(mode) {
        let mut msg = format!("assumption failed: {} ({} nodes)", c.name, c.violations);
        if let Some(w) = c.worst {
            let _ = write!(msg, ", worst {:.3e} at t = {}, y = {}", w.amount, w.t, w.y);
        }
        if c.name == scl_core::model::SANDWICH {
            msg.push_str("; --general-terminal solves with the terminal envelope instead");
        }
        return Err(CliError::Input(msg));
    }
    Ok((spec, grid, mode))
}

fn finish(spec: ProblemSpec, grid: Grid, mode: TerminalMode, surface: ValueSurface<f64>) -> Result<Solved, CliError> {
    let curves = compute_ab_curves(&spec, &grid).map_err(|e| CliError::Input(e.to_string()))?;
    let boundaries = extract_free_boundaries(&surface, &spec, &curves).map_err(game_error)?;
    Ok(Solved {
        spec,
        grid,
        mode,
        surface,
        curves,
        boundaries,
    })
}

fn solve_inline(cfg: &RunConfig) -> Result<Solved, CliError> {
    let (spec, grid, mode) = prepare(cfg)?;
    let surface = solve_dynkin_game::<f64>(&spec, &grid, mode, &cfg.solver_params()).map_err(game_error)?;
    finish(spec, grid, mode, surface)
}

/// The cached surface when its key matches this configuration.
fn load_cached(cfg: &RunConfig, dir: &Path) -> Result<Option<Solved>, CliError> {
    let key = match fs::read_to_string(dir.join(KEY_FILE)) {
        Ok(k) => k,
        Err(_) => return Ok(None),
    };
    if key != cfg.solve_key() {
        return Ok(None);
    }
    let path = dir.join(CACHE_FILE);
    let bytes = match fs::read(&path) {
        Ok(b) => b,
        Err(_) => return Ok(None),
    };
    let (spec, grid, mode) = prepare(cfg)?;
    let cache = read_cache(bytes.as_slice()).map_err(|e| io_error(&path, e))?;
    if cache.mode != mode || cache.nt != grid.nt || cache.ny != grid.ny {
        return Ok(None);
    }
    let surface = cache.into_surface(&spec, cfg.solver_params()).map_err(|e| io_error(&path, e))?;
    finish(spec, grid, mode, surface).map(Some)
}

fn store_cache(cfg: &RunConfig, dir: &Path, surface: &ValueSurface<f64>) -> Result<(), CliError> {
    let mut bytes = Vec::new();
    write_cache(surface, &mut bytes).map_err(|e| io_error(dir, e))?;
    write_file(&dir.join(CACHE_FILE), &bytes)?;
    write_file(&dir.join(KEY_FILE), cfg.solve_key().as_bytes())
}

fn region_name(r: Region) -> &'static str {
    match r {
        Region::LowerContact => "LOWER_CONTACT",
        Region::Continuation => "CONTINUATION",
        Region::UpperContact => "UPPER_CONTACT",
    }
}

/// `scl solve`: surface, boundaries and residual tables.
pub fn solve(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let dir = &cfg.output.dir;
    let s = solve_inline(cfg)?;
    let g = &s.grid;
    let res = pde_residual(&s.surface, &s.spec, cfg.solver.residual_tol).map_err(game_error)?;
    let mut written = Vec::new();
    if cfg.output.formats.contains(&Format::Csv) {
        let mut v = String::from("t,y,V,region,residual\n");
        for n in 0..g.nt {
            for i in 0..g.ny {
                let k = g.idx(n, i);
                let _ = writeln!(
                    v,
                    "{},{},{},{},{}",
                    num(g.t(n)),
                    num(g.y(i)),
                    num(s.surface.v[k]),
                    region_name(s.surface.region[k]),
                    num(res.values[k])
                );
            }
        }
        let fb = &s.boundaries;
        let mut b = String::from("t,a_tilde,b_tilde,slope_a,slope_b\n");
        for n in 0..fb.len() {
            let _ = writeln!(
                b,
                "{},{},{},{},{}",
                num(fb.t[n]),
                num(fb.a_tilde[n]),
                num(fb.b_tilde[n]),
                num(fb.slope_a[n]),
                num(fb.slope_b[n])
            );
        }
        let r = format!(
            "quantity,value\nresidual_tol,{}\nmax_continuation,{}\nmax_lower,{}\nmin_upper,{}\nmax_complementarity,{}\nmisclassified,{}\nmax_sweeps,{}\npassed,{}\n",
            num(res.residual_tol),
            num(res.max_continuation),
            num(res.max_lower),
            num(res.min_upper),
            num(res.max_complementarity),
            res.misclassified,
            s.surface.sweeps.iter().max().copied().unwrap_or(0),
            res.passed()
        );
        for (name, text) in [("V.csv", v), ("boundaries.csv", b), ("residuals.csv", r)] {
            let path = dir.join(name);
            write_file(&path, text.as_bytes())?;
            written.push(path);
        }
    }
    if cfg.output.formats.contains(&Format::Cache) {
        store_cache(cfg, dir, &s.surface)?;
        written.push(dir.join(CACHE_FILE));
    }
    if !res.passed() {
        return Err(CliError::Failed(format!(
            "complementarity: max {:.3e} with {} misclassified nodes (tolerance {:.1e})",
            res.max_complementarity, res.misclassified, res.residual_tol
        )));
    }
    Ok(written)
}

fn line(name: &str, passed: bool, detail: String) -> CheckLine {
    CheckLine {
        name: name.into(),
        outcome: if passed { Outcome::Pass } else { Outcome::Fail },
        detail,
    }
}

/// `scl verify`: every check of the pipeline in one report. The report
/// depends only on the configuration, so equal seeds give equal bytes.
pub fn verify(cfg: &RunConfig) -> Result<(PathBuf, scl_core::simulate::VerificationReport), CliError> {
    let dir = &cfg.output.dir;
    let s = match load_cached(cfg, dir)? {
        Some(s) => s,
        None => {
            let s = solve_inline(cfg)?;
            if cfg.output.formats.contains(&Format::Cache) {
                store_cache(cfg, dir, &s.surface)?;
            }
            s
        }
    };
    let fail = |e: &dyn std::fmt::Display| CliError::Failed(e.to_string());
    let (spec, g, fb) = (&s.spec, &s.grid, &s.boundaries);
    let res = pde_residual(&s.surface, spec, cfg.solver.residual_tol).map_err(game_error)?;
    let structure = region_structure_check(&s.surface, &s.curves);
    let ws = integrate_value(&s.surface, spec);
    let hc = compute_holding_cost(&ws, fb, spec).map_err(|e| fail(&e))?;
    let hjb_tol = cfg.solver.hjb_tol.unwrap_or_else(|| default_hjb_tol(g));
    let hjb = hjb_residual(&ws, &hc, fb, spec, hjb_tol).map_err(|e| fail(&e))?;
    let model = CostModel::new(spec, g, &hc).map_err(|e| fail(&e))?;

    let mc = cfg.mc_params();
    let [s0, x0] = cfg.mc.start;
    let bias = cfg.mc.scheme_bias.unwrap_or_else(|| calibrated_scheme_bias(mc.dt, g.dy));
    let terminal_ab = match s.mode {
        TerminalMode::Envelope => {
            let tt = terminal_transform(spec, g).map_err(|e| CliError::Input(e.to_string()))?;
            Some((tt.a, tt.b))
        }
        TerminalMode::Given => None,
    };
    let vc = VerifyConfig {
        s: s0,
        x: x0,
        mc,
        perturbations: cfg.mc.perturbations.iter().map(|&p| p.into()).collect(),
        scheme_bias: bias,
        terminal_ab,
    };
    let mut report = verify_optimality(spec, &ws, fb, &model, &vc).map_err(|e| fail(&e))?;
    let game = saddle_game_estimate(spec, &s.surface, fb, s0, x0, &mc, GameRules::default()).map_err(|e| fail(&e))?;
    let v_pde = s.surface.interp(s0, x0);

    report.push_value("grid.nt", g.nt.to_string());
    report.push_value("grid.ny", g.ny.to_string());
    report.push_value("terminal_mode", format!("{:?}", s.mode));
    report.push_value("residual.max_complementarity", num(res.max_complementarity));
    report.push_value("residual.misclassified", res.misclassified.to_string());
    report.push_value("hjb.tol", num(hjb.hjb_tol));
    report.push_value("hjb.max_continuation", num(hjb.max_continuation));
    report.push_value("hjb.outside_positive", format!("{}/{}", hjb.outside_positive, hjb.outside_nodes));
    report.push_value("hjb.min_outside", num(hjb.min_outside));
    report.push_value("holding.c_mismatch", num(hc.max_mismatch));
    report.push_value("v_pde", num(v_pde));
    report.push_value("game.mean", num(game.mean));
    report.push_value("game.se", num(game.se));
    if let Some((a, b)) = terminal_ab {
        let last = fb.len() - 1;
        report.push_value("terminal.a_tilde", num(fb.a_tilde[last]));
        report.push_value("terminal.b_tilde", num(fb.b_tilde[last]));
        let hit = (fb.a_tilde[last] - a).abs() <= g.dy && (fb.b_tilde[last] - b).abs() <= g.dy;
        report.checks.push(line(
            "boundaries_reach_crossovers",
            hit,
            format!("|a~(T) - A| = {:.3e}, |b~(T) - B| = {:.3e}, cell {:.3e}", (fb.a_tilde[last] - a).abs(), (fb.b_tilde[last] - b).abs(), g.dy),
        ));
    }

    let mut front = vec![
        line(
            "complementarity",
            res.passed(),
            format!("max {:.3e}, {} misclassified, tolerance {:.1e}", res.max_complementarity, res.misclassified, res.residual_tol),
        ),
        line(
            "region_structure",
            structure.passed(),
            format!(
                "{} contact nodes between a and b, {} lower and {} upper misplaced",
                structure.interior_contact, structure.lower_misplaced, structure.upper_misplaced
            ),
        ),
        line(
            "hjb_trichotomy",
            hjb.passed(),
            format!(
                "max |R| {:.3e} vs {:.3e} on continuation, {}/{} positive outside",
                hjb.max_continuation, hjb.hjb_tol, hjb.outside_positive, hjb.outside_nodes
            ),
        ),
        ci_check("game_estimate_matches_v", &game, v_pde, bias),
    ];
    front.append(&mut report.checks);
    report.checks = front;

    let path = dir.join("report.txt");
    write_file(&path, report.render().as_bytes())?;
    Ok((path, report))
}

/// `scl plotdata`: whitespace-separated tables for gnuplot.
pub fn plotdata(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let dir = &cfg.output.dir;
    let s = load_cached(cfg, dir)?.ok_or_else(|| {
        CliError::Input(format!("no matching solve cache in {}; run `scl solve` first", dir.display()))
    })?;
    let g = &s.grid;
    let fb = &s.boundaries;
    let mut curves = String::from("# t a b\n");
    let mut free = String::from("# t a_tilde b_tilde\n");
    for n in 0..g.nt {
        let _ = writeln!(curves, "{} {} {}", num(g.t(n)), num(s.curves.a[n]), num(s.curves.b[n]));
        let _ = writeln!(free, "{} {} {}", num(fb.t[n]), num(fb.a_tilde[n]), num(fb.b_tilde[n]));
    }
    let mut regions = String::from("# t y region (0 lower contact, 1 continuation, 2 upper contact)\n");
    for n in 0..g.nt {
        for i in 0..g.ny {
            let _ = writeln!(regions, "{} {} {}", num(g.t(n)), num(g.y(i)), s.surface.region_at(n, i).code());
        }
        regions.push('\n');
    }
    let mut files = vec![("curves.dat", curves), ("free_boundaries.dat", free), ("regions.dat", regions)];
    if s.mode == TerminalMode::Envelope {
        let tt = terminal_transform(&s.spec, g).map_err(|e| CliError::Input(e.to_string()))?;
        let t = num(s.spec.horizon);
        let seg = format!("# t y label: the segment AB on the terminal line\n{t} {} A\n{t} {} B\n", num(tt.a), num(tt.b));
        files.push(("terminal.dat", seg));
    }
    let mut written = Vec::new();
    for (name, text) in files {
        let path = dir.join(name);
        write_file(&path, text.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}
