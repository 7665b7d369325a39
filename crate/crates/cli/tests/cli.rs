use serde_json::{json, Value};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

fn p0(out: &Path) -> Value {
    json!({
        "constants": { "k": 1.0 },
        "problem": {
            "c": 0.0, "d": 0.0, "horizon": 1.0, "band": [-6.0, 6.0],
            "sigma": "1",
            "f1": "2 + tanh(y + k)",
            "f2": "2 - tanh(y - k)",
            "h": "y",
            "g": "max(-(2 + tanh(y + k)), min(2 - tanh(y - k), y))",
            "sigma_min": 0.5,
            "bound": 8.0
        },
        "grid": { "nt": 51, "ny": 101 },
        "mc": { "n_paths": 2000, "dt": 0.01, "seed": 3 },
        "output": { "dir": out }
    })
}

fn p0_jump(out: &Path) -> Value {
    let mut v = p0(out);
    v["problem"]["g"] = json!("2*y");
    v["problem"]["bound"] = json!(13.0);
    v
}

fn write_config(dir: &TempDir, name: &str, v: &Value) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, serde_json::to_string_pretty(v).unwrap()).unwrap();
    path
}

fn scl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scl")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_writes_tables_at_full_precision() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(&dir, "p0.json", &p0(&out));
    let o = scl(&["solve", s(&cfg)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["V.csv", "boundaries.csv", "residuals.csv", "surface.bin", "surface.key"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let v = fs::read_to_string(out.join("V.csv")).unwrap();
    let mut lines = v.lines();
    assert_eq!(lines.next(), Some("t,y,V,region,residual"));
    assert_eq!(v.lines().count(), 1 + 51 * 101);
    let row: Vec<&str> = lines.nth(60).unwrap().split(',').collect();
    assert_eq!(row.len(), 5);
    for field in [row[0], row[1], row[2]] {
        let mantissa = field.split('e').next().unwrap().trim_start_matches('-');
        assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17, "{field}");
        let x: f64 = field.parse().unwrap();
        assert_eq!(format!("{x:.16e}"), field);
    }
    assert!(["LOWER_CONTACT", "CONTINUATION", "UPPER_CONTACT"].contains(&row[3]));
    let b = fs::read_to_string(out.join("boundaries.csv")).unwrap();
    assert_eq!(b.lines().next(), Some("t,a_tilde,b_tilde,slope_a,slope_b"));
    assert_eq!(b.lines().count(), 52);
    assert!(fs::read_to_string(out.join("residuals.csv")).unwrap().contains("passed,true"));
}

#[test]
fn payoff_outside_the_obstacles_needs_the_general_terminal_flag() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(&dir, "jump.json", &p0_jump(&out));
    let o = scl(&["solve", s(&cfg)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("assumption failed"), "{}", stderr(&o));
    let o = scl(&["solve", s(&cfg), "--general-terminal"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn verify_reports_every_check() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(&dir, "p0.json", &p0(&out));
    let o = scl(&["verify", s(&cfg)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    for key in [
        "seed: 3",
        "n_paths: 2000",
        "w_pde: ",
        "optimal.mean: ",
        "check.complementarity: PASS",
        "check.region_structure: PASS",
        "check.hjb_trichotomy: PASS",
        "check.game_estimate_matches_v: ",
        "check.policy_frozen_not_cheaper: ",
    ] {
        assert!(report.contains(key), "{key}\n{report}");
    }
    assert!(!report.contains("terminal.A"));
    assert!(report.ends_with("result: PASS\n") || report.ends_with("result: INCONCLUSIVE\n"));
}

#[test]
fn few_paths_are_inconclusive_not_failing() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let mut v = p0(&out);
    v["mc"]["n_paths"] = json!(10);
    let cfg = write_config(&dir, "p0.json", &v);
    let o = scl(&["verify", s(&cfg)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("INCONCLUSIVE ("), "{report}");
    assert!(report.ends_with("result: INCONCLUSIVE\n"));
}

#[test]
fn jump_configuration_adds_the_terminal_comparison() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(&dir, "jump.json", &p0_jump(&out));
    let o = scl(&["verify", s(&cfg), "--general-terminal"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    for key in ["terminal.A: ", "terminal.B: ", "terminal.diff_mean: ", "check.terminal_clamp_not_costlier: PASS", "check.boundaries_reach_crossovers: PASS"] {
        assert!(report.contains(key), "{key}\n{report}");
    }
}

#[test]
fn failed_criterion_exits_one_and_names_it() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let mut v = p0(&out);
    v["solver"] = json!({ "hjb_tol": 1e-30 });
    let cfg = write_config(&dir, "p0.json", &v);
    let o = scl(&["verify", s(&cfg)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("criterion failed: hjb_trichotomy"), "{}", stderr(&o));
    assert!(fs::read_to_string(out.join("report.txt")).unwrap().ends_with("result: FAIL\n"));
}

#[test]
fn verify_is_byte_reproducible_and_seed_sensitive() {
    let dir = TempDir::new().unwrap();
    let run = |sub: &str, seed: &str| {
        let out = dir.path().join(sub);
        let cfg = write_config(&dir, &format!("{sub}.json"), &p0(&out));
        let o = scl(&["verify", s(&cfg), "--seed", seed]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        fs::read(out.join("report.txt")).unwrap()
    };
    let a = run("a", "17");
    assert_eq!(a, run("b", "17"));
    assert_ne!(a, run("c", "18"));
}

#[test]
fn cached_surface_gives_the_same_report_as_an_inline_solve() {
    let dir = TempDir::new().unwrap();
    let cached = dir.path().join("cached");
    let fresh = dir.path().join("fresh");
    let cfg_cached = write_config(&dir, "cached.json", &p0(&cached));
    let cfg_fresh = write_config(&dir, "fresh.json", &p0(&fresh));
    assert_eq!(code(&scl(&["solve", s(&cfg_cached)])), 0);
    let key = cached.join("surface.key");
    let stamp = fs::metadata(&key).unwrap().modified().unwrap();
    assert_eq!(code(&scl(&["verify", s(&cfg_cached)])), 0);
    assert_eq!(code(&scl(&["verify", s(&cfg_fresh)])), 0);
    assert_eq!(fs::metadata(&key).unwrap().modified().unwrap(), stamp);
    assert_eq!(fs::read(cached.join("report.txt")).unwrap(), fs::read(fresh.join("report.txt")).unwrap());
}

#[test]
fn changed_problem_does_not_reuse_the_cache() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(&dir, "p0.json", &p0(&out));
    assert_eq!(code(&scl(&["solve", s(&cfg)])), 0);
    let mut v = p0(&out);
    v["constants"]["k"] = json!(1.2);
    let cfg2 = write_config(&dir, "p0b.json", &v);
    let o = scl(&["plotdata", s(&cfg2)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("no matching solve cache"));
}

#[test]
fn plotdata_needs_a_cache() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("empty");
    let cfg = write_config(&dir, "p0.json", &p0(&out));
    let o = scl(&["plotdata", s(&cfg)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn plotdata_writes_gnuplot_tables() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(&dir, "p0.json", &p0(&out));
    assert_eq!(code(&scl(&["solve", s(&cfg)])), 0);
    let o = scl(&["plotdata", s(&cfg)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = |f: &str| -> Vec<Vec<String>> {
        fs::read_to_string(out.join(f))
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with('#') && !l.is_empty())
            .map(|l| l.split_whitespace().map(String::from).collect())
            .collect()
    };
    let curves = rows("curves.dat");
    assert_eq!(curves.len(), 51);
    assert!(curves.iter().all(|r| r.len() == 3));
    let free = rows("free_boundaries.dat");
    assert_eq!(free.len(), 51);
    for r in &free {
        let a: f64 = r[1].parse().unwrap();
        let b: f64 = r[2].parse().unwrap();
        assert!(a < 0.0 && b > 0.0);
    }
    assert_eq!(rows("regions.dat").len(), 51 * 101);
    assert!(!out.join("terminal.dat").exists());
}

#[test]
fn jump_plotdata_marks_the_terminal_segment() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let mut v = p0_jump(&out);
    v["problem"]["general_terminal"] = json!(true);
    let cfg = write_config(&dir, "jump.json", &v);
    assert_eq!(code(&scl(&["solve", s(&cfg)])), 0);
    assert_eq!(code(&scl(&["plotdata", s(&cfg)])), 0);
    let text = fs::read_to_string(out.join("terminal.dat")).unwrap();
    let marks: Vec<(f64, String)> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            (f[1].parse().unwrap(), f[2].to_string())
        })
        .collect();
    assert_eq!(marks.len(), 2);
    assert_eq!(marks[0].1, "A");
    assert!((marks[0].0 + 1.0).abs() < 1e-6 && (marks[1].0 - 1.0).abs() < 1e-6);
}

#[test]
fn dumped_config_reparses_to_itself() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(&dir, "p0.json", &p0(&out));
    let o = scl(&["verify", s(&cfg), "--dump-config", "--seed", "99"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let dumped = String::from_utf8(o.stdout).unwrap();
    let v: Value = serde_json::from_str(&dumped).unwrap();
    assert_eq!(v["mc"]["seed"], json!(99));
    assert_eq!(v["solver"]["theta"], json!(0.5));
    assert!(v["mc"]["perturbations"].as_array().unwrap().contains(&json!("frozen")));
    let again = write_config(&dir, "again.json", &v);
    let o2 = scl(&["solve", s(&again), "--dump-config"]);
    assert_eq!(String::from_utf8(o2.stdout).unwrap(), dumped);
    assert!(!out.exists());
}

#[test]
fn invalid_input_exits_two() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let bad_json = dir.path().join("bad.json");
    fs::write(&bad_json, "{ not json").unwrap();
    assert_eq!(code(&scl(&["solve", s(&bad_json)])), 2);
    assert_eq!(code(&scl(&["solve", s(&dir.path().join("missing.json"))])), 2);

    let mut v = p0(&out);
    v["problem"]["f1"] = json!("2 + tanh(y + q)");
    let cfg = write_config(&dir, "unknown.json", &v);
    let o = scl(&["solve", s(&cfg)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains('q'), "{}", stderr(&o));

    let mut v = p0(&out);
    v["grid"]["extra"] = json!(1);
    assert_eq!(code(&scl(&["solve", s(&write_config(&dir, "extra.json", &v))])), 2);

    let mut v = p0(&out);
    v["mc"]["n_paths"] = json!(0);
    assert_eq!(code(&scl(&["verify", s(&write_config(&dir, "zero.json", &v))])), 2);
}
