use scl_core::grid::Grid;
use scl_core::model::*;

fn grid(spec: &ProblemSpec) -> Grid {
    spec.grid(21, 41).unwrap()
}

#[test]
fn p0_passes_everything() {
    let p = fixtures::p0();
    let r = validate_problem(&p, &grid(&p)).unwrap();
    for c in &r.checks {
        assert!(c.passed, "{} failed: {:?}", c.name, c.worst);
    }
    assert!(r.passed(TerminalMode::Given));
}

#[test]
fn p0_jump_needs_the_envelope() {
    let p = fixtures::p0_jump();
    let r = validate_problem(&p, &grid(&p)).unwrap();
    assert!(!r.passed(TerminalMode::Given));
    assert_eq!(r.first_failure(TerminalMode::Given).unwrap().name, SANDWICH);
    assert!(r.passed(TerminalMode::Envelope));
}

fn variant(f1: &str, h: &str) -> ProblemSpec {
    ProblemSpec::parse(
        0.0,
        0.0,
        1.0,
        (-6.0, 6.0),
        Sources {
            sigma: "1",
            f1,
            f2: fixtures::P0_F2,
            h,
            g: "0",
        },
    )
    .unwrap()
}

#[test]
fn negative_cost_fails_signs_at_every_node() {
    let p = variant("-1", "y");
    let g = grid(&p);
    let r = validate_problem(&p, &g).unwrap();
    let c = r.check(SIGNS).unwrap();
    assert!(!c.passed);
    assert_eq!(c.violations, g.nt * g.ny);
}

#[test]
fn decreasing_h_fails_at_every_pair() {
    let p = variant(fixtures::P0_F1, "-y");
    let g = grid(&p);
    let r = validate_problem(&p, &g).unwrap();
    let c = r.check(H_INCREASING).unwrap();
    assert!(!c.passed);
    assert_eq!(c.violations, g.nt * (g.ny - 1));
    assert!((c.worst.unwrap().amount - g.dy).abs() < 1e-12);
}

#[test]
fn non_finite_values_name_function_and_node() {
    let p = variant("1 / (y - 1.5)", "y");
    let err = validate_problem(&p, &grid(&p)).unwrap_err();
    match err {
        ModelError::Eval { function, y, .. } => {
            assert_eq!(function, Function::F1);
            assert_eq!(y, 1.5);
        }
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn bound_is_checked_when_given() {
    let p = fixtures::p0().with_bound(Some(2.5));
    let r = validate_problem(&p, &grid(&p)).unwrap();
    assert!(!r.check(BOUNDED).unwrap().passed);
}
