//! The hybrid control law: the coordinated law inside S₁, near time-optimal
//! laws in S₂² and S₂⁴, robust laws in S₂¹ and S₂³, and the supervisor that
//! dispatches between them.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::error_frame::{classify, theta, PathError, Region};
use crate::params::CoordParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlCommand {
    pub v: f64,
    pub omega: f64,
    pub region: Region,
    pub resetvalue_applied: bool,
}

/// `Sat(x, lo, hi)`.
pub fn sat(x: f64, lo: f64, hi: f64) -> f64 {
    if x <= lo {
        lo
    } else if x <= hi {
        x
    } else {
        hi
    }
}

/// `sign(ϑ)` or its saturated-ramp replacement, depending on the params.
/// `sign(0) = 0` in both cases.
pub fn sign_fn(th: f64, params: &CoordParams) -> f64 {
    if params.pure_sign {
        if th > 0.0 {
            1.0
        } else if th < 0.0 {
            -1.0
        } else {
            0.0
        }
    } else {
        sat(th / params.sign_eps, -1.0, 1.0)
    }
}

/// Along-path speed assignment as a function of the arc distance to the
/// pre-neighbor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChiFunction {
    /// Flat at `floor` below `l - delta`, slope `slope` on `|ζ - l| <= delta`
    /// and slope `2 * slope` above.
    Piecewise {
        l: f64,
        delta: f64,
        slope: f64,
        floor: f64,
    },
    /// `slope * ζ + floor` everywhere, negative `ζ` included.
    Linear { slope: f64, floor: f64 },
}

impl ChiFunction {
    /// Piecewise-linear instance whose value at `L` and slopes follow from
    /// `(λ, δ₁, δ₂)` and the set parameters.
    pub fn piecewise(params: &CoordParams) -> Result<Self> {
        let (l, d1, d2) = (params.l, params.delta1, params.delta2);
        if !(d2 > 0.0 && d2 <= d1 && d1 < l) {
            return Err(Error::InvalidParams(format!(
                "chi needs 0 < delta2 <= delta1 < L (delta1 = {d1}, delta2 = {d2}, L = {l})"
            )));
        }
        let floor = params.v_r_min();
        let at_l = params.lambda * floor + (1.0 - params.lambda) * params.v_r_top();
        let slope = (at_l - floor) / d1;
        if !(slope > 0.0) {
            return Err(Error::InvalidParams(
                "chi(L) must exceed the floor speed; the ordering speed margin is violated".into(),
            ));
        }
        Ok(ChiFunction::Piecewise {
            l,
            delta: d1,
            slope,
            floor,
        })
    }

    pub fn linear(slope: f64, params: &CoordParams) -> Self {
        ChiFunction::Linear {
            slope,
            floor: params.v_r_min(),
        }
    }

    pub fn eval(&self, zeta: f64) -> f64 {
        match *self {
            ChiFunction::Piecewise {
                l,
                delta,
                slope,
                floor,
            } => {
                if zeta < l - delta {
                    floor
                } else if zeta <= l + delta {
                    slope * (zeta - l + delta) + floor
                } else {
                    2.0 * slope * (zeta - l) + floor
                }
            }
            ChiFunction::Linear { slope, floor } => slope * zeta + floor,
        }
    }
}

/// Intermediate values of the coordinated law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordDetail {
    /// Speed from the arc-distance assignment, before any reset.
    pub v_assigned: f64,
    pub omega: f64,
    /// Speed returned by the reset step, before clamping to the box.
    pub v_reset: f64,
    pub region: Region,
}

pub fn coord_control_detail(
    err: &PathError,
    zeta: f64,
    params: &CoordParams,
    chi: &ChiFunction,
) -> Result<CoordDetail> {
    let region = classify(err, params);
    if !region.in_s1() {
        return Err(Error::WrongRegion {
            expected: "S1",
            actual: region,
        });
    }
    let lim = &params.limits;
    let den = err.denominator();
    let cos = err.psi.cos();
    let v1 = sat(den / cos * chi.eval(zeta), lim.v_min, lim.v_max);
    let th = theta(err.rho, err.psi, params);
    let omega_d = v1 * (-params.k1 * th / params.k2 + err.kappa_p * cos / den)
        - params.alpha * sign_fn(th, params);
    let omega = sat(omega_d, -lim.omega_max, lim.omega_max);
    Ok(CoordDetail {
        v_assigned: v1,
        omega,
        v_reset: reset_value(v1, omega, err, region, params),
        region,
    })
}

/// The coordinated law for errors inside S₁.
pub fn coord_control(
    err: &PathError,
    zeta: f64,
    params: &CoordParams,
    chi: &ChiFunction,
) -> Result<ControlCommand> {
    let d = coord_control_detail(err, zeta, params, chi)?;
    let lim = &params.limits;
    let applied = d.v_reset != d.v_assigned;
    Ok(ControlCommand {
        v: if applied {
            sat(d.v_reset, lim.v_min, lim.v_max)
        } else {
            d.v_assigned
        },
        omega: d.omega,
        region: d.region,
        resetvalue_applied: applied,
    })
}

/// Checks the boundary inequality that applies in `region` and, if it fails,
/// returns the speed that restores it. The turn rate is left untouched.
///
/// The margin is `α |sign(ϑ)|`, which equals `α` away from the linear zone of
/// the smoothed sign.
pub fn reset_value(v: f64, omega: f64, err: &PathError, region: Region, params: &CoordParams) -> f64 {
    let th = theta(err.rho, err.psi, params);
    let m = params.alpha * sign_fn(th, params).abs();
    let q = err.kappa_p * err.psi.cos() / err.denominator();
    let r1 = params.r1;
    let edge = params.a * err.psi.sin() - r1 * q;
    let psi_dot = omega - v * q;
    let by_rate = |target: f64| if q != 0.0 { (omega - target) / q } else { v };
    match region {
        Region::S1_1 if v * edge + r1 * omega + r1 * m > 0.0 && edge != 0.0 => -r1 * (omega + m) / edge,
        Region::S1_2 if psi_dot + m > 0.0 => by_rate(-m),
        Region::S1_3 if v * edge + r1 * omega - r1 * m < 0.0 && edge != 0.0 => -r1 * (omega - m) / edge,
        Region::S1_4 if psi_dot - m < 0.0 => by_rate(m),
        Region::S1_5 if psi_dot - m < 0.0 => by_rate(m),
        Region::S1_6 if psi_dot + m > 0.0 => by_rate(-m),
        _ => v,
    }
}

/// Near time-optimal law in S₂⁴.
pub fn near_optimal_control_s24(err: &PathError, params: &CoordParams) -> Result<ControlCommand> {
    let region = classify(err, params);
    if region != Region::S2_4 {
        return Err(Error::WrongRegion {
            expected: "S2_4",
            actual: region,
        });
    }
    let lim = &params.limits;
    let (v, omega) = if err.psi >= -params.a + params.eps0 {
        (lim.v_max, -lim.omega_max)
    } else {
        let q = err.kappa_p * err.psi.cos() / err.denominator();
        if lim.omega_max - q * lim.v_max >= 0.0 {
            (lim.v_max, (q * lim.v_max).max(-lim.omega_max))
        } else {
            (lim.omega_max / q, lim.omega_max)
        }
    };
    Ok(ControlCommand {
        v: sat(v, lim.v_min, lim.v_max),
        omega,
        region,
        resetvalue_applied: false,
    })
}

/// Near time-optimal law in S₂², the mirror image of the S₂⁴ law.
pub fn near_optimal_control_s22(err: &PathError, params: &CoordParams) -> Result<ControlCommand> {
    let region = classify(err, params);
    if region != Region::S2_2 {
        return Err(Error::WrongRegion {
            expected: "S2_2",
            actual: region,
        });
    }
    let lim = &params.limits;
    let (v, omega) = if err.psi <= params.a - params.eps0 {
        (lim.v_max, lim.omega_max)
    } else {
        let q = err.kappa_p * err.psi.cos() / err.denominator();
        if q * lim.v_max + lim.omega_max >= 0.0 {
            (lim.v_max, (q * lim.v_max).min(lim.omega_max))
        } else {
            (-lim.omega_max / q, -lim.omega_max)
        }
    };
    Ok(ControlCommand {
        v: sat(v, lim.v_min, lim.v_max),
        omega,
        region,
        resetvalue_applied: false,
    })
}

/// Slowest speed, hardest turn back toward the path.
pub fn robust_control(err: &PathError, params: &CoordParams) -> Result<ControlCommand> {
    let region = classify(err, params);
    let lim = &params.limits;
    let omega = match region {
        Region::S2_1 => -lim.omega_max,
        Region::S2_3 => lim.omega_max,
        other => {
            return Err(Error::WrongRegion {
                expected: "S2_1 or S2_3",
                actual: other,
            })
        }
    };
    Ok(ControlCommand {
        v: lim.v_min,
        omega,
        region,
        resetvalue_applied: false,
    })
}

/// Dispatches to the law owning the current region. `zeta = None` means the
/// UAV has no pre-neighbor and is treated as perfectly spaced.
pub fn hybrid_supervisor(
    err: &PathError,
    zeta: Option<f64>,
    params: &CoordParams,
    chi: &ChiFunction,
) -> Result<ControlCommand> {
    match classify(err, params) {
        r if r.in_s1() => coord_control(err, zeta.unwrap_or(params.l), params, chi),
        Region::S2_2 => near_optimal_control_s22(err, params),
        Region::S2_4 => near_optimal_control_s24(err, params),
        Region::S2_1 | Region::S2_3 => robust_control(err, params),
        _ => Err(Error::OutsideUniverse {
            uav: 0,
            t: 0.0,
            x: f64::NAN,
            y: f64::NAN,
            theta: f64::NAN,
            rho: err.rho,
            r2: params.r2,
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComparisonSide {
    S21,
    S23,
}

/// Worst-case comparison trajectory from an S₂¹ (or mirrored S₂³) start.
/// Returns the `ρ` at which the heading error first reaches zero, or `None`
/// if `|ρ|` exceeds `R₂` first.
pub fn comparison_system_trajectory(err0: &PathError, params: &CoordParams, side: ComparisonSide) -> Option<f64> {
    let sgn = match side {
        ComparisonSide::S21 => 1.0,
        ComparisonSide::S23 => -1.0,
    };
    let lim = &params.limits;
    let (k0, v, w) = (lim.kappa0, lim.v_min, lim.omega_max);
    let rhs = |rho: f64, psi: f64| -> (f64, f64) {
        let c = psi.cos();
        let psi_dot = if psi >= FRAC_PI_2 {
            -w - k0 * v * c / (1.0 - k0 * rho)
        } else {
            -w + k0 * v * c / (1.0 + k0 * rho)
        };
        (v * psi.sin(), psi_dot)
    };
    let (mut rho, mut psi) = (sgn * err0.rho, sgn * err0.psi);
    if psi <= 0.0 {
        return Some(sgn * rho);
    }
    let h = 1e-3;
    let t_max = 10.0 * PI / (w - k0 * v / (1.0 - k0 * params.r2)).max(1e-6);
    let mut t = 0.0;
    while t < t_max {
        let (k1r, k1p) = rhs(rho, psi);
        let (k2r, k2p) = rhs(rho + 0.5 * h * k1r, psi + 0.5 * h * k1p);
        let (k3r, k3p) = rhs(rho + 0.5 * h * k2r, psi + 0.5 * h * k2p);
        let (k4r, k4p) = rhs(rho + h * k3r, psi + h * k3p);
        let rho_n = rho + h / 6.0 * (k1r + 2.0 * k2r + 2.0 * k3r + k4r);
        let psi_n = psi + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        if rho_n.abs() > params.r2 {
            return None;
        }
        if psi_n <= 0.0 {
            let w_cross = psi / (psi - psi_n);
            return Some(sgn * (rho + w_cross * (rho_n - rho)));
        }
        rho = rho_n;
        psi = psi_n;
        t += h;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error_frame::error_dynamics;
    use crate::params::tests::reference_params;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sat_examples() {
        assert_eq!(sat(5.0, 0.0, 10.0), 5.0);
        assert_eq!(sat(-1.0, 0.0, 10.0), 0.0);
        assert_eq!(sat(30.0, 10.0, 25.0), 25.0);
        assert_eq!(sat(10.0, 10.0, 25.0), 10.0);
    }

    #[test]
    fn chi_properties() {
        let p = reference_params();
        let chi = ChiFunction::piecewise(&p).unwrap();
        let floor = p.v_r_min();
        assert_abs_diff_eq!(floor, 13.2321, epsilon = 1e-4);
        assert_eq!(chi.eval(0.0), floor);
        assert_eq!(chi.eval(p.l - 6.5), floor);
        let at_l = p.lambda * floor + (1.0 - p.lambda) * p.v_r_top();
        assert_abs_diff_eq!(chi.eval(p.l), at_l, epsilon = 1e-12);
        if let ChiFunction::Piecewise { slope, .. } = chi {
            assert_abs_diff_eq!(slope, 0.475, epsilon = 1e-3);
        }
        let mut prev = chi.eval(0.0);
        for k in 1..30000 {
            let z = k as f64 * 0.1;
            let x = chi.eval(z);
            assert!(x >= prev);
            assert!((x - prev).abs() < 0.2, "continuity at {z}");
            prev = x;
        }
    }

    #[test]
    fn equilibrium_on_circle() {
        let p = reference_params();
        let chi = ChiFunction::piecewise(&p).unwrap();
        let err = PathError::new(0.0, 0.0, 0.001);
        let cmd = coord_control(&err, p.l, &p, &chi).unwrap();
        assert_abs_diff_eq!(cmd.v, chi.eval(p.l), epsilon = 1e-12);
        assert_abs_diff_eq!(cmd.v, 16.082, epsilon = 2e-3);
        assert_abs_diff_eq!(cmd.omega, cmd.v * 0.001, epsilon = 1e-15);
        assert!(!cmd.resetvalue_applied);
    }

    #[test]
    fn straight_line_slow_equilibrium() {
        let p = reference_params();
        let chi = ChiFunction::piecewise(&p).unwrap();
        let cmd = coord_control(&PathError::new(0.0, 0.0, 0.0), 10.0, &p, &chi).unwrap();
        assert_abs_diff_eq!(cmd.v, 13.2321, epsilon = 1e-4);
        assert_eq!(cmd.omega, 0.0);
    }

    #[test]
    fn wrong_region_rejected() {
        let p = reference_params();
        let chi = ChiFunction::piecewise(&p).unwrap();
        assert!(matches!(
            coord_control(&PathError::new(200.0, 0.0, 0.0), p.l, &p, &chi),
            Err(Error::WrongRegion { .. })
        ));
        assert!(near_optimal_control_s24(&PathError::new(0.0, 0.0, 0.0), &p).is_err());
        assert!(robust_control(&PathError::new(0.0, 0.0, 0.0), &p).is_err());
    }

    #[test]
    fn s24_examples() {
        let p = reference_params();
        let cmd = near_optimal_control_s24(&PathError::new(200.0, -0.3, 0.001), &p).unwrap();
        assert_eq!((cmd.v, cmd.omega), (25.0, -0.2));
        let err = PathError::new(200.0, -p.a + 0.01, -0.0019);
        let q = err.kappa_p * err.psi.cos() / err.denominator();
        assert!(0.2 - q * 25.0 > 0.0);
        let cmd = near_optimal_control_s24(&err, &p).unwrap();
        assert_eq!(cmd.v, 25.0);
        assert_eq!(cmd.omega, (q * 25.0).max(-0.2));
        let cmd = near_optimal_control_s24(&PathError::new(200.0, -p.a + 0.01, 0.0), &p).unwrap();
        assert_eq!((cmd.v, cmd.omega), (25.0, 0.0));
    }

    #[test]
    fn s22_examples() {
        let p = reference_params();
        let cmd = near_optimal_control_s22(&PathError::new(-200.0, 0.3, 0.0), &p).unwrap();
        assert_eq!((cmd.v, cmd.omega), (25.0, 0.2));
        let cmd = near_optimal_control_s22(&PathError::new(-200.0, p.a - 0.01, 0.0), &p).unwrap();
        assert_eq!((cmd.v, cmd.omega), (25.0, 0.0));
        for k in 0..200 {
            let kappa = -0.0019 + 0.0038 * k as f64 / 199.0;
            let err = PathError::new(-300.0, p.a - 0.02, kappa);
            let cmd = near_optimal_control_s22(&err, &p).unwrap();
            let (_, psi_dot) = error_dynamics(&err, cmd.v, cmd.omega).unwrap();
            assert!(psi_dot <= 1e-15, "kappa {kappa}: {psi_dot}");
        }
    }

    #[test]
    fn robust_examples() {
        let p = reference_params();
        let a = robust_control(&PathError::new(300.0, 1.0, 0.0), &p).unwrap();
        assert_eq!((a.v, a.omega), (10.0, -0.2));
        let b = robust_control(&PathError::new(-300.0, -1.0, 0.0), &p).unwrap();
        assert_eq!((b.v, b.omega), (10.0, 0.2));
    }

    #[test]
    fn supervisor_aborts_outside_universe() {
        let p = reference_params();
        let chi = ChiFunction::piecewise(&p).unwrap();
        let err = PathError::new(p.r2 + 1.0, 0.0, 0.0);
        assert!(matches!(
            hybrid_supervisor(&err, None, &p, &chi),
            Err(Error::OutsideUniverse { .. })
        ));
    }

    #[test]
    fn comparison_examples() {
        let p = reference_params();
        let r = comparison_system_trajectory(&PathError::new(0.0, FRAC_PI_2, 0.0), &p, ComparisonSide::S21).unwrap();
        assert!(r > 0.0 && r <= p.r2);
        let r = comparison_system_trajectory(&PathError::new(150.0, 0.0, 0.0), &p, ComparisonSide::S21).unwrap();
        assert_eq!(r, 150.0);
        let mut line = p;
        line.limits.kappa0 = 1e-12;
        let r = comparison_system_trajectory(&PathError::new(0.0, FRAC_PI_2, 0.0), &line, ComparisonSide::S21).unwrap();
        assert_abs_diff_eq!(r, 50.0, epsilon = 1e-3);
        let r = comparison_system_trajectory(&PathError::new(0.0, -FRAC_PI_2, 0.0), &line, ComparisonSide::S23).unwrap();
        assert_abs_diff_eq!(r, -50.0, epsilon = 1e-3);
    }
}
