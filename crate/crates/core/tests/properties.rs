use std::f64::consts::PI;

use coordpath::control::{coord_control, ChiFunction};
use coordpath::error_frame::{classify_point, in_s1};
use coordpath::paths::wrap_angle;
use coordpath::{hybrid_supervisor, CoordParams, Direction, Limits, Path, PathError, Region};
use nalgebra::Vector2;
use proptest::prelude::*;

const LIMITS: Limits = Limits::new(10.0, 25.0, 0.2, 0.002);

fn params() -> CoordParams {
    CoordParams::with_defaults(LIMITS, 0.6303, 122.1297, 25.0, 1000.0 * PI / 3.0)
}

fn in_box(v: f64, w: f64) -> bool {
    (LIMITS.v_min..=LIMITS.v_max).contains(&v) && w.abs() <= LIMITS.omega_max
}

proptest! {
    #[test]
    fn wrap_angle_is_half_open_and_congruent(x in -100.0f64..100.0) {
        let y = wrap_angle(x);
        prop_assert!((-PI..PI).contains(&y));
        let turns = (x - y) / (2.0 * PI);
        prop_assert!((turns - turns.round()).abs() < 1e-9);
    }

    #[test]
    fn regions_partition_the_plane(rho in -500.0f64..500.0, psi in -PI..PI) {
        let p = params();
        let r = classify_point(rho, psi, &p);
        prop_assert_eq!(r.in_s1(), in_s1(rho, psi, p.a, p.r1));
        prop_assert_eq!(r == Region::OutsideS, rho.abs() > p.r2);
    }

    #[test]
    fn coordinated_command_in_box(
        u in 0.0f64..1.0,
        w in 0.0f64..1.0,
        kappa in -0.002f64..0.002,
        zeta in 0.0f64..5000.0,
        pure in any::<bool>(),
    ) {
        let mut p = params();
        p.pure_sign = pure;
        let rho = (2.0 * u - 1.0) * p.r1;
        let span = p.a * (1.0 - rho.abs() / p.r1);
        let psi = if rho >= 0.0 { -p.a + w * (p.a + span) } else { -span + w * (p.a + span) };
        prop_assume!(in_s1(rho, psi, p.a, p.r1));
        let chi = ChiFunction::piecewise(&p).unwrap();
        let cmd = coord_control(&PathError::new(rho, psi, kappa), zeta, &p, &chi).unwrap();
        prop_assert!(in_box(cmd.v, cmd.omega), "{:?}", cmd);
    }

    #[test]
    fn supervisor_command_in_box(
        rho in -404.0f64..404.0,
        psi in -PI..PI,
        kappa in -0.002f64..0.002,
        zeta in proptest::option::of(0.0f64..5000.0),
    ) {
        let p = params();
        let chi = ChiFunction::piecewise(&p).unwrap();
        let cmd = hybrid_supervisor(&PathError::new(rho, psi, kappa), zeta, &p, &chi).unwrap();
        prop_assert!(in_box(cmd.v, cmd.omega), "{:?}", cmd);
    }

    #[test]
    fn circle_projection_round_trip(s in 0.0f64..6283.0, rho in -450.0f64..450.0) {
        let path = Path::circle(Vector2::new(30.0, -20.0), 1000.0, Direction::Cw, 0.002).unwrap();
        let t = path.tangent(s);
        let q = path.point_at(s) + Vector2::new(-t.y, t.x) * rho;
        let pr = path.project(q, None).unwrap();
        prop_assert!((pr.rho - rho).abs() < 1e-6);
        prop_assert!(path.arc_distance(s, pr.s).min(path.arc_distance(pr.s, s)) < 1e-6);
    }
}
