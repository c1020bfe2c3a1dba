//! Coordination-set parameters and their design by constrained maximization
//! of `a * R1`.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::Exec;

/// Actuator limits shared by every UAV, plus the path curvature bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Limits {
    pub v_min: f64,
    pub v_max: f64,
    pub omega_max: f64,
    pub kappa0: f64,
}

impl Limits {
    pub const fn new(v_min: f64, v_max: f64, omega_max: f64, kappa0: f64) -> Self {
        Limits {
            v_min,
            v_max,
            omega_max,
            kappa0,
        }
    }

    pub fn r0(&self) -> f64 {
        1.0 / self.kappa0
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.v_min > 0.0
            && self.v_max > self.v_min
            && self.omega_max > 0.0
            && self.kappa0 > 0.0
            && [self.v_min, self.v_max, self.omega_max, self.kappa0]
                .iter()
                .all(|x| x.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!(
                "limits must satisfy 0 < v_min < v_max and positive omega_max, kappa0; got {self:?}"
            )))
        }
    }

    /// Largest universe half-width allowed for the out-of-set laws.
    pub fn r2_bound(&self) -> f64 {
        self.r0() - self.v_min / self.omega_max
    }

    /// Default `R2`, strictly inside `r2_bound`.
    pub fn default_r2(&self) -> f64 {
        0.9 * self.r2_bound()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoordParams {
    pub limits: Limits,
    pub a: f64,
    pub r1: f64,
    pub v_m: f64,
    pub r2: f64,
    pub alpha: f64,
    pub c: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    /// Width of the switching band next to `|psi| = a` in the outer laws.
    pub eps0: f64,
    pub lambda: f64,
    pub delta1: f64,
    pub delta2: f64,
    /// Desired arc distance.
    pub l: f64,
    /// Half-width of the linear zone that replaces `sign` in the turn-rate law.
    pub sign_eps: f64,
    /// Use the discontinuous `sign` instead of the saturated ramp.
    pub pure_sign: bool,
}

pub const DEFAULT_ALPHA: f64 = 0.01;
pub const DEFAULT_C: f64 = 1.0;
pub const DEFAULT_EPS0: f64 = 0.05;
pub const DEFAULT_LAMBDA: f64 = 0.05;
pub const DEFAULT_DELTA: f64 = 6.0;
pub const DEFAULT_SIGN_EPS: f64 = 1e-3;

impl CoordParams {
    /// Parameters for a given set shape with every other field at its default.
    pub fn with_defaults(limits: Limits, a: f64, r1: f64, v_m: f64, l: f64) -> Self {
        CoordParams {
            limits,
            a,
            r1,
            v_m,
            r2: limits.default_r2(),
            alpha: DEFAULT_ALPHA,
            c: DEFAULT_C,
            k1: 1.0,
            k2: r1 / a + 1.0,
            k3: 1.0,
            eps0: DEFAULT_EPS0,
            lambda: DEFAULT_LAMBDA,
            delta1: DEFAULT_DELTA,
            delta2: DEFAULT_DELTA,
            l,
            sign_eps: DEFAULT_SIGN_EPS,
            pure_sign: false,
        }
    }

    pub fn r0(&self) -> f64 {
        self.limits.r0()
    }

    /// `v_min / (1 - κ₀R₁)`, the slowest along-path speed assigned in S₁.
    pub fn v_r_min(&self) -> f64 {
        self.limits.v_min / (1.0 - self.limits.kappa0 * self.r1)
    }

    /// `cos(a) v_m / (1 + κ₀R₁)`.
    pub fn v_r_top(&self) -> f64 {
        self.a.cos() * self.v_m / (1.0 + self.limits.kappa0 * self.r1)
    }

    /// Contraction factor `R₁k₁ / (a k₂)`.
    pub fn sigma(&self) -> f64 {
        self.r1 * self.k1 / (self.a * self.k2)
    }

    /// Structural checks. Violations of the design inequalities are not
    /// errors here; see [`CoordParams::constraint_report`].
    pub fn validate(&self) -> Result<()> {
        self.limits.validate()?;
        let mut problems = Vec::new();
        let lim = &self.limits;
        if !(self.a > 0.0 && self.a < FRAC_PI_2) {
            problems.push(format!("a = {} must lie in (0, pi/2)", self.a));
        }
        if !(self.r1 > 0.0 && self.r1 < lim.r0()) {
            problems.push(format!("R1 = {} must lie in (0, R0 = {})", self.r1, lim.r0()));
        }
        if !(self.v_m > lim.v_min && self.v_m <= lim.v_max) {
            problems.push(format!("v_m = {} must lie in (v_min, v_max]", self.v_m));
        }
        if !(self.k1 > 0.0 && self.k2 >= 1.0 && self.k3 >= 1.0) {
            problems.push("gains need k1 > 0, k2 >= 1, k3 >= 1".to_string());
        }
        if !(self.a <= self.r1 * self.k1 && self.r1 * self.k1 < self.a * self.k2) {
            problems.push(format!(
                "gains need a <= R1*k1 < a*k2 (a = {}, R1*k1 = {}, a*k2 = {})",
                self.a,
                self.r1 * self.k1,
                self.a * self.k2
            ));
        }
        if !(self.r2 > self.r1 && self.r2 < lim.r2_bound()) {
            problems.push(format!(
                "R2 = {} must lie in (R1, {})",
                self.r2,
                lim.r2_bound()
            ));
        }
        if !(self.alpha > 0.0) {
            problems.push("alpha must be positive".to_string());
        }
        if !(self.c > 0.0) {
            problems.push("c must be positive".to_string());
        }
        if !(self.eps0 > 0.0 && self.eps0 < self.a) {
            problems.push(format!("eps0 = {} must lie in (0, a)", self.eps0));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            problems.push("lambda must lie in (0, 1)".to_string());
        }
        if !(self.sign_eps > 0.0) {
            problems.push("sign_eps must be positive".to_string());
        }
        if !(self.l >= 0.0) {
            problems.push("L must be non-negative".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(problems.join("; ")))
        }
    }

    pub fn constraint_report(&self) -> ConstraintReport {
        constraint_report(&self.limits, self.a, self.r1, self.v_m, self.c, self.alpha)
    }
}

/// One design inequality written as `lhs <= rhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Constraint {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
}

impl Constraint {
    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }

    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintReport {
    pub constraints: Vec<Constraint>,
}

impl ConstraintReport {
    pub fn all_hold(&self) -> bool {
        self.constraints.iter().all(Constraint::holds)
    }

    pub fn violated(&self) -> Vec<&'static str> {
        self.constraints
            .iter()
            .filter(|c| !c.holds())
            .map(|c| c.name)
            .collect()
    }
}

/// Evaluates every inequality the set shape must satisfy.
pub fn constraint_report(lim: &Limits, a: f64, r1: f64, v_m: f64, c: f64, alpha: f64) -> ConstraintReport {
    let k0 = lim.kappa0;
    let constraints = vec![
        Constraint {
            name: "turn-rate margin on the slanted edges",
            lhs: ((a / r1).powi(2) + k0 * k0).sqrt() + alpha / v_m,
            rhs: lim.omega_max / v_m,
        },
        Constraint {
            name: "turn-rate margin on the heading edges",
            lhs: k0 / (1.0 - k0 * r1) + alpha / v_m,
            rhs: lim.omega_max / v_m,
        },
        Constraint {
            name: "ordering speed margin",
            lhs: lim.v_min / (1.0 - k0 * r1) + c,
            rhs: a.cos() * v_m / (1.0 + k0 * r1),
        },
        Constraint {
            name: "a < pi/2",
            lhs: a,
            rhs: FRAC_PI_2 - f64::EPSILON,
        },
        Constraint {
            name: "R1 < R0",
            lhs: r1,
            rhs: lim.r0() * (1.0 - f64::EPSILON),
        },
        Constraint {
            name: "v_m <= v_max",
            lhs: v_m,
            rhs: lim.v_max,
        },
        Constraint {
            name: "v_min < v_m",
            lhs: lim.v_min * (1.0 + f64::EPSILON),
            rhs: v_m,
        },
    ];
    ConstraintReport { constraints }
}

/// Sufficient condition for a feasible design to exist:
/// `κ₀ <= ω_max / v_max` and `v_min + c <= v_max`.
pub fn check_feasibility_precondition(lim: &Limits, c: f64) -> bool {
    lim.kappa0 <= lim.omega_max / lim.v_max && lim.v_min + c <= lim.v_max
}

/// Feasible interval of `v_m` for a fixed shape `(a, R1)`, if any.
fn v_m_interval(lim: &Limits, a: f64, r1: f64, c: f64, alpha: f64) -> Option<(f64, f64)> {
    let k0 = lim.kappa0;
    if !(a > 0.0 && a < FRAC_PI_2 && r1 > 0.0 && k0 * r1 < 1.0) {
        return None;
    }
    let budget = lim.omega_max - alpha;
    if budget <= 0.0 {
        return None;
    }
    let lower = (lim.v_min / (1.0 - k0 * r1) + c) * (1.0 + k0 * r1) / a.cos();
    let upper = lim
        .v_max
        .min(budget / ((a / r1).powi(2) + k0 * k0).sqrt())
        .min(budget * (1.0 - k0 * r1) / k0);
    (lower <= upper && upper > lim.v_min).then_some((lower.max(lim.v_min), upper))
}

/// Largest feasible `a` for a given `R1`. Feasibility is monotone in `a`
/// because the lower speed bound grows and the upper one shrinks with it.
fn a_max_for(lim: &Limits, r1: f64, c: f64, alpha: f64) -> Option<f64> {
    let feasible = |a: f64| v_m_interval(lim, a, r1, c, alpha).is_some();
    let mut lo = 1e-9;
    if !feasible(lo) {
        return None;
    }
    let mut hi = FRAC_PI_2 - 1e-12;
    if feasible(hi) {
        return Some(hi);
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    objective: f64,
    a: f64,
    r1: f64,
}

fn better(x: Candidate, y: Candidate) -> Candidate {
    let key = |c: &Candidate| (c.objective, c.a, c.r1);
    let (kx, ky) = (key(&x), key(&y));
    let ord = kx
        .0
        .total_cmp(&ky.0)
        .then(kx.1.total_cmp(&ky.1))
        .then(kx.2.total_cmp(&ky.2));
    if ord.is_ge() {
        x
    } else {
        y
    }
}

fn candidate_at(lim: &Limits, r1: f64, c: f64, alpha: f64) -> Option<Candidate> {
    a_max_for(lim, r1, c, alpha).map(|a| Candidate {
        objective: a * r1,
        a,
        r1,
    })
}

/// Number of `R1` samples in the coarse sweep.
pub const DESIGN_GRID: usize = 4000;

/// Maximizes `a * R1` over the feasible set and picks the largest feasible
/// `v_m` for the optimum. All other fields take their defaults.
pub fn design_coordination_set(lim: &Limits, c: f64, alpha: f64, l: f64, exec: Exec) -> Result<CoordParams> {
    lim.validate()?;
    if !(c > 0.0) {
        return Err(Error::InvalidParams(format!("c must be positive, got {c}")));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidParams(format!("alpha must be positive, got {alpha}")));
    }
    if lim.kappa0 > lim.omega_max / lim.v_max {
        return Err(Error::Infeasible(format!(
            "curvature bound exceeds omega_max/v_max ({} > {})",
            lim.kappa0,
            lim.omega_max / lim.v_max
        )));
    }
    if lim.v_min + c > lim.v_max {
        return Err(Error::Infeasible(format!(
            "v_min + c exceeds v_max ({} > {})",
            lim.v_min + c,
            lim.v_max
        )));
    }

    let r0 = lim.r0();
    let h = r0 / DESIGN_GRID as f64;
    let coarse = exec
        .map_range(DESIGN_GRID - 1, |k| candidate_at(lim, (k + 1) as f64 * h, c, alpha))
        .into_iter()
        .flatten()
        .reduce(better)
        .ok_or_else(|| Error::Infeasible("no feasible (a, R1) on the design grid".into()))?;

    // Golden-section refinement of the one-dimensional objective around the
    // best grid cell.
    let f = |r1: f64| candidate_at(lim, r1, c, alpha).map_or(f64::NEG_INFINITY, |x| x.objective);
    let (mut lo, mut hi) = ((coarse.r1 - h).max(h * 1e-3), (coarse.r1 + h).min(r0 - h * 1e-3));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-9 {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    let best = match candidate_at(lim, 0.5 * (lo + hi), c, alpha) {
        Some(x) => better(x, coarse),
        None => coarse,
    };

    let (_, v_m) = v_m_interval(lim, best.a, best.r1, c, alpha)
        .ok_or_else(|| Error::Infeasible("refined optimum lost feasibility".into()))?;
    let mut params = CoordParams::with_defaults(*lim, best.a, best.r1, v_m, l);
    params.c = c;
    params.alpha = alpha;
    Ok(params)
}

/// Upper bound on the coordination rate `|dζ/dt|` inside S₁.
pub fn coordination_rate_bound(params: &CoordParams) -> f64 {
    (1.0 - params.lambda) * (params.v_r_top() - params.v_r_min())
}
