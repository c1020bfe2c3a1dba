//! Path-following error `(rho, psi)`, its dynamics, and the region partition
//! of the error plane that the hybrid controller dispatches on.

use std::fmt;

use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::params::CoordParams;
use crate::paths::{wrap_angle, Path};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathError {
    pub rho: f64,
    /// Heading relative to the path tangent, in `[-π, π)`.
    pub psi: f64,
    pub s_proj: f64,
    pub kappa_p: f64,
}

impl PathError {
    pub fn new(rho: f64, psi: f64, kappa_p: f64) -> Self {
        PathError {
            rho,
            psi: wrap_angle(psi),
            s_proj: 0.0,
            kappa_p,
        }
    }

    /// `1 - κρ`, the denominator of the heading-error dynamics.
    pub fn denominator(&self) -> f64 {
        1.0 - self.kappa_p * self.rho
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Region {
    S1_1,
    S1_2,
    S1_3,
    S1_4,
    S1_5,
    S1_6,
    S2_1,
    S2_2,
    S2_3,
    S2_4,
    OutsideS,
}

impl Region {
    pub const ALL: [Region; 11] = [
        Region::S1_1,
        Region::S1_2,
        Region::S1_3,
        Region::S1_4,
        Region::S1_5,
        Region::S1_6,
        Region::S2_1,
        Region::S2_2,
        Region::S2_3,
        Region::S2_4,
        Region::OutsideS,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Region::S1_1 => "S1_1",
            Region::S1_2 => "S1_2",
            Region::S1_3 => "S1_3",
            Region::S1_4 => "S1_4",
            Region::S1_5 => "S1_5",
            Region::S1_6 => "S1_6",
            Region::S2_1 => "S2_1",
            Region::S2_2 => "S2_2",
            Region::S2_3 => "S2_3",
            Region::S2_4 => "S2_4",
            Region::OutsideS => "OutsideS",
        }
    }

    pub fn in_s1(self) -> bool {
        matches!(
            self,
            Region::S1_1 | Region::S1_2 | Region::S1_3 | Region::S1_4 | Region::S1_5 | Region::S1_6
        )
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `ϑ = k₁ρ + k₂ψ + k₃ sin ψ`.
pub fn theta(rho: f64, psi: f64, params: &CoordParams) -> f64 {
    params.k1 * rho + params.k2 * psi + params.k3 * psi.sin()
}

/// Projects a UAV pose onto `path` and returns its error coordinates.
pub fn compute_error(
    x: f64,
    y: f64,
    heading: f64,
    path: &Path,
    hint_s: Option<f64>,
) -> Result<PathError> {
    let p = path.project(Vector2::new(x, y), hint_s)?;
    Ok(PathError {
        rho: p.rho,
        psi: wrap_angle(heading - p.tangent_angle),
        s_proj: p.s,
        kappa_p: p.curvature,
    })
}

/// `(ρ̇, ψ̇)` under the command `(v, ω)`.
pub fn error_dynamics(err: &PathError, v: f64, omega: f64) -> Result<(f64, f64)> {
    let den = err.denominator();
    if den <= 0.0 {
        return Err(Error::SingularDenominator { denominator: den });
    }
    Ok((
        v * err.psi.sin(),
        omega - err.kappa_p * v * err.psi.cos() / den,
    ))
}

/// Membership in the hexagonal coordination set.
pub fn in_s1(rho: f64, psi: f64, a: f64, r1: f64) -> bool {
    rho.abs() <= r1 && psi.abs() <= a && (a * rho + r1 * psi).abs() <= a * r1
}

/// Smallest normalized slack of the three hexagon inequalities; non-negative
/// exactly inside the set.
pub fn s1_slack(rho: f64, psi: f64, a: f64, r1: f64) -> f64 {
    let s_rho = 1.0 - rho.abs() / r1;
    let s_psi = 1.0 - psi.abs() / a;
    let s_diag = 1.0 - (a * rho + r1 * psi).abs() / (a * r1);
    s_rho.min(s_psi).min(s_diag)
}

pub fn classify(err: &PathError, params: &CoordParams) -> Region {
    classify_point(err.rho, err.psi, params)
}

/// Region of `(rho, psi)`. Ties on shared boundaries go to the first match in
/// the order S₁ subsets 1..6, then S₂² and S₂⁴, then S₂¹ and S₂³.
pub fn classify_point(rho: f64, psi: f64, params: &CoordParams) -> Region {
    let (a, r1, r2) = (params.a, params.r1, params.r2);
    if in_s1(rho, psi, a, r1) {
        let th = theta(rho, psi, params);
        return if rho > 0.0 && psi >= 0.0 && th > 0.0 {
            Region::S1_1
        } else if rho <= 0.0 && psi >= 0.0 && th >= 0.0 {
            Region::S1_2
        } else if rho < 0.0 && psi <= 0.0 && th < 0.0 {
            Region::S1_3
        } else if rho >= 0.0 && psi <= 0.0 && th <= 0.0 {
            Region::S1_4
        } else if rho < 0.0 && psi > 0.0 && th < 0.0 {
            Region::S1_5
        } else if rho > 0.0 && psi < 0.0 && th > 0.0 {
            Region::S1_6
        } else {
            Region::S1_2
        };
    }
    if rho.abs() > r2 || !(-std::f64::consts::PI..std::f64::consts::PI).contains(&psi) {
        return Region::OutsideS;
    }
    if rho < -r1 && psi > 0.0 && psi <= a {
        Region::S2_2
    } else if rho > r1 && psi >= -a && psi < 0.0 {
        Region::S2_4
    } else if psi > 0.0 || (psi == 0.0 && rho > r1) {
        Region::S2_1
    } else {
        Region::S2_3
    }
}

/// Membership in the escape set of the unconstrained design for a path with
/// non-positive curvature: `ρ ∈ [0, R₀]`, `ψ ∈ [0, π/2]` and
/// `v_min (ψ - ε₀) sin ε₀ / ω_max + ρ - R₀ > 0`.
pub fn in_escape_set(err: &PathError, params: &CoordParams, eps0: f64) -> bool {
    let lim = &params.limits;
    let r0 = lim.r0();
    let (rho, psi) = (err.rho, err.psi);
    (0.0..=r0).contains(&rho)
        && (0.0..=std::f64::consts::FRAC_PI_2).contains(&psi)
        && lim.v_min * (psi - eps0) * eps0.sin() / lim.omega_max + rho - r0 > 0.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::tests::reference_params;
    use crate::paths::Direction;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn circle() -> Path {
        Path::circle(Vector2::zeros(), 1000.0, Direction::Ccw, 0.002).unwrap()
    }

    #[test]
    fn errors_for_initial_poses() {
        let e = compute_error(1000.0, 0.0, FRAC_PI_2, &circle(), None).unwrap();
        assert_abs_diff_eq!(e.rho, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.psi, 0.0, epsilon = 1e-12);
        let e = compute_error(600.0, 0.0, 0.6 * PI, &circle(), None).unwrap();
        assert_abs_diff_eq!(e.rho, 400.0, epsilon = 1e-9);
        assert_abs_diff_eq!(e.psi, 0.1 * PI, epsilon = 1e-12);
        let e = compute_error(1100.0, 0.0, -0.25 * PI, &circle(), None).unwrap();
        assert_abs_diff_eq!(e.rho, -100.0, epsilon = 1e-9);
    }

    #[test]
    fn dynamics_examples() {
        let e = PathError::new(0.0, 0.0, 0.001);
        let (rd, pd) = error_dynamics(&e, 16.082, 0.016082).unwrap();
        assert_abs_diff_eq!(rd, 0.0);
        assert_abs_diff_eq!(pd, 0.0, epsilon = 1e-15);
        let e = PathError::new(0.0, FRAC_PI_2, 0.0);
        let (rd, pd) = error_dynamics(&e, 10.0, 0.0).unwrap();
        assert_abs_diff_eq!(rd, 10.0);
        assert_abs_diff_eq!(pd, 0.0);
        let e = PathError::new(100.0, 0.0, 0.001);
        let (rd, pd) = error_dynamics(&e, 10.0, 0.0).unwrap();
        assert_abs_diff_eq!(rd, 0.0);
        assert_abs_diff_eq!(pd, -0.01 / 0.9, epsilon = 1e-15);
        let e = PathError::new(1000.0, 0.0, 0.001);
        assert!(matches!(
            error_dynamics(&e, 10.0, 0.0),
            Err(Error::SingularDenominator { .. })
        ));
    }

    #[test]
    fn classify_examples() {
        let p = reference_params();
        assert_eq!(classify_point(0.0, 0.0, &p), Region::S1_2);
        assert_eq!(classify_point(p.r1 + 1.0, -p.a / 2.0, &p), Region::S2_4);
        assert_eq!(classify_point(-p.r2, PI - 0.01, &p), Region::S2_1);
        assert_eq!(classify_point(-p.r1 - 1.0, p.a / 2.0, &p), Region::S2_2);
        assert_eq!(classify_point(-p.r1 - 1.0, -0.1, &p), Region::S2_3);
        assert_eq!(classify_point(p.r1 + 1.0, 0.0, &p), Region::S2_1);
        assert_eq!(classify_point(-p.r1 - 1.0, 0.0, &p), Region::S2_3);
        assert_eq!(classify_point(p.r2 + 1.0, 0.0, &p), Region::OutsideS);
        assert_eq!(classify_point(10.0, 0.1, &p), Region::S1_1);
        assert_eq!(classify_point(-10.0, -0.1, &p), Region::S1_3);
        assert_eq!(classify_point(10.0, -0.01, &p), Region::S1_6);
        assert_eq!(classify_point(1.0, -0.1, &p), Region::S1_4);
        assert_eq!(classify_point(-10.0, 0.01, &p), Region::S1_5);
    }

    #[test]
    fn escape_set_examples() {
        let p = reference_params();
        let r0 = 500.0;
        assert!(in_escape_set(&PathError::new(r0, FRAC_PI_2, -0.001), &p, 0.05));
        assert!(!in_escape_set(&PathError::new(0.0, 0.0, 0.0), &p, 0.05));
        assert!(!in_escape_set(&PathError::new(0.99 * r0, FRAC_PI_2, 0.0), &p, 0.05));
    }

    #[test]
    fn theta_monotone() {
        let p = reference_params();
        let mut prev = f64::NEG_INFINITY;
        for k in -100..=100 {
            let t = theta(k as f64, 0.2, &p);
            assert!(t > prev);
            prev = t;
        }
        prev = f64::NEG_INFINITY;
        for k in -100..=100 {
            let t = theta(5.0, k as f64 * FRAC_PI_2 / 100.0, &p);
            assert!(t > prev);
            prev = t;
        }
    }

    #[test]
    fn regions_cover_universe() {
        let p = reference_params();
        let n = 1000;
        let mut in_s = 0usize;
        for i in 0..n {
            for j in 0..n {
                let rho = -p.r2 + 2.0 * p.r2 * (i as f64 + 0.5) / n as f64;
                let psi = -PI + 2.0 * PI * (j as f64 + 0.5) / n as f64;
                let r = classify_point(rho, psi, &p);
                if r != Region::OutsideS {
                    in_s += 1;
                }
            }
        }
        assert_eq!(in_s, n * n);
    }
}
