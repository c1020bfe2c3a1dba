//! Randomized property suites for the closed loop and the control laws.
//!
//! Every suite draws from a ChaCha stream selected by the run index, so the
//! outcome depends only on the seed and not on the execution strategy.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::control::{
    comparison_system_trajectory, coord_control, coord_control_detail, hybrid_supervisor, ChiFunction,
    ComparisonSide, ControlCommand,
};
use crate::coordination::Topology;
use crate::error::Result;
use crate::error_frame::{classify_point, compute_error, error_dynamics, in_s1, s1_slack, theta, PathError, Region};
use crate::parallel::Exec;
use crate::params::CoordParams;
use crate::paths::Path;
use crate::sim::{rk4_unicycle, run_scenario, NullTrace, Scenario, UavSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Suite {
    Boundary,
    Invariance,
    Lemma6,
    NoOvertaking,
    Reachability,
    Remark6,
    Sliding,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Boundary,
        Suite::Invariance,
        Suite::Lemma6,
        Suite::NoOvertaking,
        Suite::Reachability,
        Suite::Remark6,
        Suite::Sliding,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Boundary => "boundary",
            Suite::Invariance => "invariance",
            Suite::Lemma6 => "lemma6",
            Suite::NoOvertaking => "no-overtaking",
            Suite::Reachability => "reachability",
            Suite::Remark6 => "remark6",
            Suite::Sliding => "sliding",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Suite::ALL.iter().map(|x| x.name()).collect();
                format!("unknown suite `{s}`; expected one of {}", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Closed-loop runs per suite (per start class for reachability).
    pub runs: usize,
    /// Pointwise samples for the static suites.
    pub samples: usize,
    pub sim_time: f64,
    pub dt: f64,
    pub exec: Exec,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 7,
            runs: 200,
            samples: 100_000,
            sim_time: 200.0,
            dt: 0.01,
            exec: Exec::Parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub cases: usize,
    pub failures: usize,
    pub counterexample: Option<String>,
    pub summary: String,
}

impl SuiteReport {
    fn from_cases<T>(suite: Suite, results: Vec<CaseResult<T>>, summary: String) -> Self {
        let cases = results.len();
        let mut failures = 0;
        let mut counterexample = None;
        for r in results {
            if let Err(msg) = r {
                failures += 1;
                counterexample.get_or_insert(msg);
            }
        }
        SuiteReport {
            suite: suite.name().to_string(),
            passed: failures == 0 && cases > 0,
            cases,
            failures,
            counterexample,
            summary,
        }
    }
}

type CaseResult<T = ()> = std::result::Result<T, String>;

/// Setting shared by every suite.
pub struct VerifyContext<'a> {
    pub params: &'a CoordParams,
    pub chi: &'a ChiFunction,
    pub path: &'a Path,
    pub options: VerifyOptions,
}

fn rng_for(seed: u64, suite: Suite, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((suite as u64 + 1) << 56));
    rng.set_stream(index as u64);
    rng
}

/// Uniform sample of the hexagon by rejection from its bounding box.
fn sample_s1(rng: &mut ChaCha8Rng, p: &CoordParams) -> (f64, f64) {
    loop {
        let rho = rng.random_range(-p.r1..=p.r1);
        let psi = rng.random_range(-p.a..=p.a);
        if in_s1(rho, psi, p.a, p.r1) {
            return (rho, psi);
        }
    }
}

fn sample_kappa(rng: &mut ChaCha8Rng, p: &CoordParams) -> f64 {
    let k0 = p.limits.kappa0 * (1.0 - 1e-9);
    rng.random_range(-k0..=k0)
}

/// Pose whose error with respect to `path` is `(rho, psi)` at arc position `s`.
fn pose_for(path: &Path, s: f64, rho: f64, psi: f64) -> (f64, f64, f64) {
    let p = path.point_at(s);
    let t = path.tangent(s);
    let n = Vector2::new(-t.y, t.x);
    let q = p + n * rho;
    (q.x, q.y, t.y.atan2(t.x) + psi)
}

fn start_s(rng: &mut ChaCha8Rng, path: &Path) -> f64 {
    let len = path.total_length();
    if len.is_finite() {
        rng.random_range(0.0..len)
    } else {
        0.0
    }
}

/// Single UAV with a constant arc distance. `observe` returns `false` to
/// stop early.
fn closed_loop<F>(ctx: &VerifyContext, pose: (f64, f64, f64), zeta: f64, t_end: f64, mut observe: F) -> Result<()>
where
    F: FnMut(f64, &PathError, &ControlCommand) -> bool,
{
    let (mut x, mut y, mut th) = pose;
    let dt = ctx.options.dt;
    let steps = (t_end / dt).round() as usize;
    let mut hint = None;
    for k in 0..=steps {
        let t = k as f64 * dt;
        let err = compute_error(x, y, th, ctx.path, hint)?;
        let cmd = hybrid_supervisor(&err, Some(zeta), ctx.params, ctx.chi)?;
        if !observe(t, &err, &cmd) || k == steps {
            break;
        }
        (x, y, th) = rk4_unicycle(x, y, th, cmd.v, cmd.omega, dt);
        hint = Some(err.s_proj);
    }
    Ok(())
}

/// Slack below which a single step counts as grazing the boundary.
pub const GRAZE_TOL: f64 = 1e-9;
/// Largest tolerated single-step excursion of the normalized slack.
pub const EXCURSION_TOL: f64 = 1e-4;

pub fn invariance(ctx: &VerifyContext) -> SuiteReport {
    let p = ctx.params;
    let opts = ctx.options;
    let results = opts.exec.map_range(opts.runs, |i| {
        let mut rng = rng_for(opts.seed, Suite::Invariance, i);
        let (rho0, psi0) = sample_s1(&mut rng, p);
        let zeta = rng.random_range(0.0..=2.0 * p.l.max(1.0));
        let pose = pose_for(ctx.path, start_s(&mut rng, ctx.path), rho0, psi0);
        let mut failure = None;
        let mut prev_grazed = false;
        let run = closed_loop(ctx, pose, zeta, opts.sim_time, |t, e, _| {
            let slack = s1_slack(e.rho, e.psi, p.a, p.r1);
            let grazed = slack < -GRAZE_TOL;
            if slack < -EXCURSION_TOL || (grazed && prev_grazed) {
                failure = Some(format!(
                    "run {i}: start (rho, psi) = ({rho0:.6}, {psi0:.6}), zeta = {zeta:.3}; left S1 at t = {t:.2} with (rho, psi) = ({:.6}, {:.6}), slack {slack:.3e}",
                    e.rho, e.psi
                ));
                return false;
            }
            prev_grazed = grazed;
            true
        });
        match (run, failure) {
            (Err(e), _) => Err(format!("run {i}: {e}")),
            (_, Some(f)) => Err(f),
            _ => Ok(()),
        }
    });
    SuiteReport::from_cases(
        Suite::Invariance,
        results,
        format!("{} runs of {} s from random S1 starts", opts.runs, opts.sim_time),
    )
}

pub fn no_overtaking(ctx: &VerifyContext) -> SuiteReport {
    let p = ctx.params;
    let opts = ctx.options;
    let runs = (opts.runs / 10).max(1);
    let len = ctx.path.total_length();
    let results = opts.exec.map_range(runs, |i| {
        let mut rng = rng_for(opts.seed, Suite::NoOvertaking, i);
        let n = rng.random_range(3..=6usize);
        let mut s: Vec<f64> = if len.is_finite() {
            (0..n).map(|_| rng.random_range(0.0..len)).collect()
        } else {
            (0..n).map(|_| rng.random_range(0.0..3.0 * p.l.max(100.0))).collect()
        };
        s.sort_by(f64::total_cmp);
        s.dedup_by(|a, b| (*a - *b).abs() < 1.0);
        let uavs: Vec<UavSpec> = s
            .iter()
            .enumerate()
            .map(|(k, &sk)| {
                let (rho, psi) = sample_s1(&mut rng, p);
                let (x, y, th) = pose_for(ctx.path, sk, rho, psi);
                UavSpec::new(k as u32 + 1, x, y, th)
            })
            .collect();
        let sc = Scenario {
            params: *p,
            chi: *ctx.chi,
            paths: vec![ctx.path.clone()],
            uavs,
            duration: opts.sim_time,
            dt: opts.dt,
            topology: Topology::Cyclic,
        };
        match run_scenario(&sc, Exec::Sequential, &mut NullTrace) {
            Err(e) => Err(format!("run {i}: {e}")),
            Ok(m) if m.all_in_s1_time != Some(0.0) => Err(format!("run {i}: start was not entirely inside S1")),
            Ok(m) if m.events_after_all_in_s1 > 0 => Err(format!(
                "run {i}: {} overtaking events with arc positions {s:?}",
                m.events_after_all_in_s1
            )),
            Ok(_) => Ok(()),
        }
    });
    SuiteReport::from_cases(
        Suite::NoOvertaking,
        results,
        format!("{runs} multi-UAV runs of {} s starting inside S1", opts.sim_time),
    )
}

/// Bound on the time to reach S₁ from S₂² or S₂⁴.
pub fn straight_entry_bound(p: &CoordParams, rho: f64, psi: f64) -> f64 {
    (p.r1 - rho.abs()).abs() / (p.limits.v_min * psi.sin().abs())
}

/// `ω_max - κ₀ v_min / (1 - κ₀ R₂)`.
pub fn turning_margin(p: &CoordParams) -> f64 {
    let lim = &p.limits;
    lim.omega_max - lim.kappa0 * lim.v_min / (1.0 - lim.kappa0 * p.r2)
}

pub const BOUND_MARGIN: f64 = 1.1;

pub fn reachability(ctx: &VerifyContext) -> SuiteReport {
    let p = ctx.params;
    let opts = ctx.options;
    let classes = [Region::S2_4, Region::S2_2, Region::S2_1, Region::S2_3];
    let alpha1 = turning_margin(p);
    let results = opts.exec.map_range(classes.len() * opts.runs, |idx| {
        let class = classes[idx / opts.runs];
        let i = idx % opts.runs;
        let mut rng = rng_for(opts.seed, Suite::Reachability, idx);
        let (rho0, psi0) = loop {
            let (rho, psi) = match class {
                Region::S2_4 => (rng.random_range(p.r1..=p.r2), -rng.random_range(0.0..=p.a)),
                Region::S2_2 => (-rng.random_range(p.r1..=p.r2), rng.random_range(0.0..=p.a)),
                _ => (rng.random_range(-p.r2..=p.r2), rng.random_range(-PI..PI)),
            };
            if classify_point(rho, psi, p) != class {
                continue;
            }
            let side = match class {
                Region::S2_1 => Some(ComparisonSide::S21),
                Region::S2_3 => Some(ComparisonSide::S23),
                _ => None,
            };
            if let Some(side) = side {
                let admissible = comparison_system_trajectory(&PathError::new(rho, psi, 0.0), p, side)
                    .is_some_and(|r| r.abs() <= p.r2);
                if !admissible {
                    continue;
                }
            }
            break (rho, psi);
        };
        let outer_budget = if matches!(class, Region::S2_1 | Region::S2_3) {
            PI / alpha1
        } else {
            0.0
        };
        let pose = pose_for(ctx.path, start_s(&mut rng, ctx.path), rho0, psi0);
        let mut first_near: Option<(f64, f64)> = if outer_budget == 0.0 { Some((0.0, straight_entry_bound(p, rho0, psi0))) } else { None };
        let mut entry = None;
        let horizon = 2000.0;
        let run = closed_loop(ctx, pose, p.l, horizon, |t, e, cmd| {
            if first_near.is_none() && matches!(cmd.region, Region::S2_2 | Region::S2_4) {
                first_near = Some((t, straight_entry_bound(p, e.rho, e.psi)));
            }
            if cmd.region.in_s1() {
                entry = Some(t);
                first_near.get_or_insert((t, 0.0));
                return false;
            }
            true
        });
        let tag = format!("{class} run {i}: start (rho, psi) = ({rho0:.4}, {psi0:.4})");
        if let Err(e) = run {
            return Err(format!("{tag}: {e}"));
        }
        let Some(t_entry) = entry else {
            return Err(format!("{tag}: no S1 entry within {horizon} s"));
        };
        let (t_near, bound_near) = first_near.expect("set on entry");
        if t_near > BOUND_MARGIN * outer_budget && outer_budget > 0.0 {
            return Err(format!("{tag}: reached S1/S2_2/S2_4 at {t_near:.2} s, bound {:.2} s", outer_budget));
        }
        if t_entry - t_near > BOUND_MARGIN * bound_near {
            return Err(format!(
                "{tag}: S1 entry took {:.2} s after t = {t_near:.2}, bound {bound_near:.2} s",
                t_entry - t_near
            ));
        }
        Ok(())
    });
    SuiteReport::from_cases(
        Suite::Reachability,
        results,
        format!("{} runs per class over S2_1..S2_4, bounds with {BOUND_MARGIN}x margin", opts.runs),
    )
}

fn sample_state(rng: &mut ChaCha8Rng, p: &CoordParams) -> (PathError, f64) {
    let (rho, psi) = sample_s1(rng, p);
    let kappa = sample_kappa(rng, p);
    let zeta = rng.random_range(0.0..=2.0 * p.l.max(1.0) + 10.0);
    (PathError::new(rho, psi, kappa), zeta)
}

fn in_box(cmd: &ControlCommand, p: &CoordParams) -> bool {
    let lim = &p.limits;
    cmd.v >= lim.v_min && cmd.v <= lim.v_max && cmd.omega.abs() <= lim.omega_max
}

fn pointwise<T, F>(ctx: &VerifyContext, suite: Suite, check: F) -> Vec<CaseResult<T>>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> CaseResult<T> + Sync + Send,
{
    let opts = ctx.options;
    let chunk = 1000usize;
    let chunks = opts.samples.div_ceil(chunk);
    opts.exec
        .map_range(chunks, |c| {
            let mut rng = rng_for(opts.seed, suite, c);
            let n = chunk.min(opts.samples - c * chunk);
            (0..n).map(|_| check(&mut rng)).collect::<Vec<_>>()
        })
        .into_iter()
        .flatten()
        .collect()
}

pub fn lemma6(ctx: &VerifyContext) -> SuiteReport {
    let results = pointwise(ctx, Suite::Lemma6, |rng| {
        let mut p = *ctx.params;
        p.pure_sign = rng.random_bool(0.5);
        let (err, zeta) = sample_state(rng, &p);
        let d = coord_control_detail(&err, zeta, &p, ctx.chi).map_err(|e| e.to_string())?;
        let cmd = coord_control(&err, zeta, &p, ctx.chi).map_err(|e| e.to_string())?;
        if !in_box(&cmd, &p) {
            return Err(format!("{err:?}: command ({}, {}) outside the box", cmd.v, cmd.omega));
        }
        let reset = d.v_reset != d.v_assigned;
        if reset && !(p.v_m <= d.v_reset && d.v_reset < d.v_assigned) {
            return Err(format!(
                "{err:?} in {}: reset speed {} not in [v_m = {}, {})",
                d.region, d.v_reset, p.v_m, d.v_assigned
            ));
        }
        Ok(reset)
    });
    let resets = results.iter().filter(|r| matches!(r, Ok(true))).count();
    SuiteReport::from_cases(
        Suite::Lemma6,
        results,
        format!("random S1 states; {resets} resets, each in [v_m, v_assigned)"),
    )
}

pub const RATE_TOL: f64 = 1e-9;

pub fn remark6(ctx: &VerifyContext) -> SuiteReport {
    let mut p = *ctx.params;
    p.pure_sign = true;
    let results = pointwise(ctx, Suite::Remark6, |rng| {
        let (err, zeta) = sample_state(rng, &p);
        let cmd = coord_control(&err, zeta, &p, ctx.chi).map_err(|e| e.to_string())?;
        let (rho_dot, psi_dot) = error_dynamics(&err, cmd.v, cmd.omega).map_err(|e| e.to_string())?;
        let th = theta(err.rho, err.psi, &p);
        if th > 0.0 && psi_dot > -p.alpha + RATE_TOL {
            return Err(format!("{err:?}: theta > 0 but psi_dot = {psi_dot}"));
        }
        if th < 0.0 && psi_dot < p.alpha - RATE_TOL {
            return Err(format!("{err:?}: theta < 0 but psi_dot = {psi_dot}"));
        }
        if matches!(cmd.region, Region::S1_1 | Region::S1_3) && err.psi != 0.0 {
            let ratio = psi_dot / rho_dot;
            if ratio > -p.a / p.r1 + RATE_TOL {
                return Err(format!("{err:?}: psi_dot/rho_dot = {ratio} above -a/R1"));
            }
        }
        Ok(())
    });
    SuiteReport::from_cases(
        Suite::Remark6,
        results,
        "random S1 states with the discontinuous sign".into(),
    )
}

pub fn boundary(ctx: &VerifyContext) -> SuiteReport {
    let mut p = *ctx.params;
    p.pure_sign = true;
    let results = pointwise(ctx, Suite::Boundary, |rng| {
        let edge = rng.random_range(0..4u8);
        let u: f64 = rng.random_range(0.0..=1.0);
        let (rho, psi) = match edge {
            0 => (u * p.r1, p.a * (1.0 - u)),
            1 => (-u * p.r1, p.a),
            2 => (-u * p.r1, -p.a * (1.0 - u)),
            _ => (u * p.r1, -p.a),
        };
        if !in_s1(rho, psi, p.a, p.r1) || (rho == 0.0 && psi == 0.0) {
            return Ok(());
        }
        let err = PathError::new(rho, psi, sample_kappa(rng, &p));
        let zeta = rng.random_range(0.0..=2.0 * p.l.max(1.0) + 10.0);
        let cmd = coord_control(&err, zeta, &p, ctx.chi).map_err(|e| e.to_string())?;
        let (rho_dot, psi_dot) = error_dynamics(&err, cmd.v, cmd.omega).map_err(|e| e.to_string())?;
        let (rate, limit, name) = match edge {
            0 => (p.a * rho_dot + p.r1 * psi_dot, -p.r1 * p.alpha, "a rho + R1 psi"),
            1 => (psi_dot, -p.alpha, "psi"),
            2 => (-(p.a * rho_dot + p.r1 * psi_dot), -p.r1 * p.alpha, "-(a rho + R1 psi)"),
            _ => (-psi_dot, -p.alpha, "-psi"),
        };
        if rate > limit * (1.0 - 1e-12) + RATE_TOL {
            return Err(format!(
                "{err:?} in {}: d/dt({name}) = {rate} exceeds {limit}",
                cmd.region
            ));
        }
        Ok(())
    });
    SuiteReport::from_cases(
        Suite::Boundary,
        results,
        "points on the four constraining edges of S1 point inward with margin".into(),
    )
}

pub fn sliding(ctx: &VerifyContext) -> SuiteReport {
    let mut p = *ctx.params;
    p.pure_sign = true;
    let vmax = p.limits.v_max;
    let results = pointwise(ctx, Suite::Sliding, |rng| {
        let (err, zeta) = loop {
            let (err, zeta) = sample_state(rng, &p);
            let psi = err.psi;
            if p.k1 * vmax * psi.sin().abs() <= (p.k2 + p.k3 * psi.cos()) * p.alpha {
                break (err, zeta);
            }
            let psi = rng.random_range(-1.0..=1.0) * p.alpha * (p.k2 + p.k3) / (p.k1 * vmax);
            let err = PathError::new(err.rho, psi, err.kappa_p);
            if in_s1(err.rho, psi, p.a, p.r1) && p.k1 * vmax * psi.sin().abs() <= (p.k2 + p.k3 * psi.cos()) * p.alpha {
                break (err, zeta);
            }
        };
        let cmd = coord_control(&err, zeta, &p, ctx.chi).map_err(|e| e.to_string())?;
        let (rho_dot, psi_dot) = error_dynamics(&err, cmd.v, cmd.omega).map_err(|e| e.to_string())?;
        let th = theta(err.rho, err.psi, &p);
        let th_dot = p.k1 * rho_dot + (p.k2 + p.k3 * err.psi.cos()) * psi_dot;
        if th * th_dot > RATE_TOL * th.abs() {
            return Err(format!("{err:?}: theta = {th}, theta_dot = {th_dot}"));
        }
        Ok(())
    });
    SuiteReport::from_cases(
        Suite::Sliding,
        results,
        "near the origin the switching surface is attractive".into(),
    )
}

pub fn run_suite(suite: Suite, ctx: &VerifyContext) -> SuiteReport {
    match suite {
        Suite::Boundary => boundary(ctx),
        Suite::Invariance => invariance(ctx),
        Suite::Lemma6 => lemma6(ctx),
        Suite::NoOvertaking => no_overtaking(ctx),
        Suite::Reachability => reachability(ctx),
        Suite::Remark6 => remark6(ctx),
        Suite::Sliding => sliding(ctx),
    }
}

/// Runs the requested suites; reports come back sorted by suite name.
pub fn run_suites(suites: &[Suite], ctx: &VerifyContext) -> Vec<SuiteReport> {
    let mut list = suites.to_vec();
    list.sort();
    list.dedup();
    list.into_iter().map(|s| run_suite(s, ctx)).collect()
}
