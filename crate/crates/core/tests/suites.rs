use coordpath::control::ChiFunction;
use coordpath::verify::{lemma6, invariance, run_suites, Suite, VerifyContext, VerifyOptions};
use coordpath::{CoordParams, Direction, Exec, Limits, Path};
use nalgebra::Vector2;

const LIMITS: Limits = Limits::new(10.0, 25.0, 0.2, 0.002);

fn circle() -> Path {
    Path::circle(Vector2::zeros(), 1000.0, Direction::Ccw, LIMITS.kappa0).unwrap()
}

fn options(runs: usize, samples: usize) -> VerifyOptions {
    VerifyOptions {
        seed: 11,
        runs,
        samples,
        sim_time: 100.0,
        dt: 0.01,
        exec: Exec::Parallel,
    }
}

/// Fast airframe whose slanted-edge turn-rate bound is tight at `v_m` well
/// below `v_max`, so large arc distances push the assigned speed past `v_m`
/// and the reset step has to act.
fn reset_set() -> CoordParams {
    let lim = Limits::new(5.0, 150.0, 0.5, 0.002);
    let (a, r1) = (1.2_f64, 234.0_f64);
    let alpha = 0.01;
    let v_m = 0.999 * (lim.omega_max - alpha) / ((a / r1).powi(2) + lim.kappa0.powi(2)).sqrt();
    let p = CoordParams::with_defaults(lim, a, r1, v_m, 1000.0);
    assert!(p.constraint_report().all_hold(), "{:?}", p.constraint_report().violated());
    p
}

#[test]
fn resets_exercised_and_bounded_below() {
    let p = reset_set();
    let chi = ChiFunction::piecewise(&p).unwrap();
    let path = circle();
    let ctx = VerifyContext {
        params: &p,
        chi: &chi,
        path: &path,
        options: options(20, 50_000),
    };
    let r = lemma6(&ctx);
    assert!(r.passed, "{r:?}");
    let resets: usize = r
        .summary
        .split_whitespace()
        .find_map(|w| w.parse().ok())
        .unwrap();
    assert!(resets > 100, "only {resets} resets: {}", r.summary);
}

#[test]
fn every_suite_passes_on_reset_set() {
    let p = reset_set();
    let chi = ChiFunction::piecewise(&p).unwrap();
    let path = circle();
    let ctx = VerifyContext {
        params: &p,
        chi: &chi,
        path: &path,
        options: options(30, 20_000),
    };
    for r in run_suites(&Suite::ALL, &ctx) {
        assert!(r.passed, "{r:?}");
    }
}

#[test]
fn reports_sorted_by_name() {
    let p = reset_set();
    let chi = ChiFunction::piecewise(&p).unwrap();
    let path = circle();
    let ctx = VerifyContext {
        params: &p,
        chi: &chi,
        path: &path,
        options: options(2, 1000),
    };
    let names: Vec<String> = run_suites(&[Suite::Sliding, Suite::Boundary, Suite::Lemma6], &ctx)
        .into_iter()
        .map(|r| r.suite)
        .collect();
    assert_eq!(names, ["boundary", "lemma6", "sliding"]);
}

#[test]
fn oversized_set_yields_counterexample() {
    let p = CoordParams::with_defaults(LIMITS, 1.5, 20.0, 25.0, 1000.0);
    assert!(!p.constraint_report().all_hold());
    let chi = ChiFunction::linear(0.01, &p);
    let path = circle();
    let ctx = VerifyContext {
        params: &p,
        chi: &chi,
        path: &path,
        options: options(40, 1000),
    };
    let r = invariance(&ctx);
    assert!(!r.passed);
    assert!(r.failures > 0);
    let ce = r.counterexample.unwrap();
    assert!(ce.contains("left S1"), "{ce}");
}

#[test]
fn same_seed_same_report_across_executors() {
    let p = reset_set();
    let chi = ChiFunction::piecewise(&p).unwrap();
    let path = circle();
    let mk = |exec| VerifyContext {
        params: &p,
        chi: &chi,
        path: &path,
        options: VerifyOptions { exec, ..options(8, 5000) },
    };
    let a = run_suites(&Suite::ALL, &mk(Exec::Sequential));
    let b = run_suites(&Suite::ALL, &mk(Exec::Parallel));
    assert_eq!(a, b);
}
