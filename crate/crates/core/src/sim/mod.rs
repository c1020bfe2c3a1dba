//! Fixed-step closed-loop simulation of several UAVs under the hybrid
//! supervisor.

mod escape;
mod trace;

use std::collections::BTreeMap;

use serde::Serialize;

pub use escape::{escape_demo, EscapeConfig, EscapeReport};
pub use trace::{write_metrics, CsvTrace, MemoryTrace, NullTrace, SeriesWriter, TraceSink};

use crate::control::{hybrid_supervisor, ChiFunction, ControlCommand};
use crate::coordination::{
    detect_overtaking, update_pre_neighbors, update_tree, CoordinationState, OvertakingEvent, OvertakingKind,
    ProjectionInfo, Topology,
};
use crate::error::{Error, Result};
use crate::error_frame::{compute_error, PathError, Region};
use crate::parallel::Exec;
use crate::params::CoordParams;
use crate::paths::{wrap_angle, Path};

/// Initial condition of one UAV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UavSpec {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    /// Index into [`Scenario::paths`].
    pub path: usize,
    /// The UAV appears at the first step at or after this time.
    pub join_time: f64,
    /// Fixed pre-neighbor for the tree topology.
    pub pre_neighbor: Option<u32>,
}

impl UavSpec {
    pub fn new(id: u32, x: f64, y: f64, theta: f64) -> Self {
        UavSpec {
            id,
            x,
            y,
            theta,
            path: 0,
            join_time: 0.0,
            pre_neighbor: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub params: CoordParams,
    pub chi: ChiFunction,
    pub paths: Vec<Path>,
    pub uavs: Vec<UavSpec>,
    pub duration: f64,
    pub dt: f64,
    pub topology: Topology,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(Error::Config(format!("duration must be non-negative, got {}", self.duration)));
        }
        if self.paths.is_empty() {
            return Err(Error::Config("at least one path is required".into()));
        }
        if self.uavs.is_empty() {
            return Err(Error::Config("at least one UAV is required".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for u in &self.uavs {
            if !seen.insert(u.id) {
                return Err(Error::Config(format!("duplicate UAV id {}", u.id)));
            }
            if u.path >= self.paths.len() {
                return Err(Error::Config(format!("UAV {} refers to missing path {}", u.id, u.path)));
            }
            if self.topology == Topology::Cyclic && u.path != self.uavs[0].path {
                return Err(Error::Config("the cyclic topology needs every UAV on the same path".into()));
            }
        }
        if self.topology == Topology::Tree {
            for u in &self.uavs {
                if let Some(j) = u.pre_neighbor {
                    if !seen.contains(&j) || j == u.id {
                        return Err(Error::Config(format!("UAV {} has invalid pre-neighbor {j}", u.id)));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }
}

/// Live state of one UAV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UavState {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub path: usize,
    pub s_hint: Option<f64>,
}

/// One trace line: the pre-step state of a UAV and the command applied over
/// the step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub uav: u32,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub rho: f64,
    pub psi: f64,
    pub s: f64,
    pub region: Region,
    pub v: f64,
    pub omega: f64,
    pub zeta: f64,
    pub pre_neighbor: Option<u32>,
    pub resetvalue: bool,
}

pub const TRACE_HEADER: [&str; 14] = [
    "t",
    "uav",
    "x",
    "y",
    "theta",
    "rho",
    "psi",
    "s",
    "region",
    "v",
    "omega",
    "zeta",
    "pre_neighbor",
    "resetvalue",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord {
    pub t: f64,
    pub event: OvertakingEvent,
}

/// Explicit RK4 step of the unicycle model under a held command.
pub fn rk4_unicycle(x: f64, y: f64, theta: f64, v: f64, omega: f64, dt: f64) -> (f64, f64, f64) {
    let f = |th: f64| (v * th.cos(), v * th.sin());
    let (k1x, k1y) = f(theta);
    let (k2x, k2y) = f(theta + 0.5 * dt * omega);
    let (k3x, k3y) = (k2x, k2y);
    let (k4x, k4y) = f(theta + dt * omega);
    (
        x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
        y + dt / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y),
        wrap_angle(theta + dt * omega),
    )
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct UavMetrics {
    pub id: u32,
    pub s1_entry_time: Option<f64>,
    pub final_rho: f64,
    pub final_psi: f64,
    pub final_zeta: Option<f64>,
    pub final_zeta_error: Option<f64>,
    /// Largest `|rho|`, `|psi|` over the last 10 % of the run.
    pub tail_max_abs_rho: f64,
    pub tail_max_abs_psi: f64,
    /// Peak-to-peak `zeta` over the last 20 % of the run.
    pub tail_zeta_peak_to_peak: Option<f64>,
    /// `zeta` when every UAV was first inside S₁.
    pub zeta_at_all_in_s1: Option<f64>,
    /// Largest one-step growth of `|zeta - L|` after every UAV was inside S₁.
    pub max_gap_growth_after_all_in_s1: f64,
    pub max_abs_rho: f64,
    pub reset_count: u64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Metrics {
    pub duration: f64,
    pub dt: f64,
    pub steps: usize,
    pub all_in_s1_time: Option<f64>,
    pub events_before_all_in_s1: usize,
    pub events_after_all_in_s1: usize,
    pub uavs: Vec<UavMetrics>,
}

struct Evaluated {
    err: PathError,
    cmd: ControlCommand,
}

/// Stepping simulator; [`run_scenario`] drives it to the end.
pub struct Simulation<'a> {
    scenario: &'a Scenario,
    exec: Exec,
    states: Vec<UavState>,
    pending: Vec<UavSpec>,
    step: usize,
    prev_coord: Option<CoordinationState>,
    chain: BTreeMap<u32, u32>,
    tracker: MetricsTracker,
}

impl<'a> Simulation<'a> {
    pub fn new(scenario: &'a Scenario, exec: Exec) -> Result<Self> {
        scenario.validate()?;
        let mut pending: Vec<UavSpec> = scenario.uavs.clone();
        pending.sort_by(|a, b| a.join_time.total_cmp(&b.join_time).then(a.id.cmp(&b.id)));
        let chain = scenario
            .uavs
            .iter()
            .filter_map(|u| u.pre_neighbor.map(|j| (u.id, j)))
            .collect();
        let mut ids: Vec<u32> = scenario.uavs.iter().map(|u| u.id).collect();
        ids.sort_unstable();
        Ok(Simulation {
            scenario,
            exec,
            states: Vec::new(),
            pending,
            step: 0,
            prev_coord: None,
            chain,
            tracker: MetricsTracker::new(scenario, &ids),
        })
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.scenario.dt
    }

    pub fn states(&self) -> &[UavState] {
        &self.states
    }

    fn spawn(&mut self, t: f64) {
        let tol = 1e-9 * self.scenario.dt;
        while let Some(u) = self.pending.first() {
            if u.join_time > t + tol {
                break;
            }
            let u = self.pending.remove(0);
            self.states.push(UavState {
                id: u.id,
                x: u.x,
                y: u.y,
                theta: wrap_angle(u.theta),
                path: u.path,
                s_hint: None,
            });
        }
        self.states.sort_by_key(|s| s.id);
    }

    fn errors(&self, t: f64) -> Result<Vec<PathError>> {
        let paths = &self.scenario.paths;
        let r2 = self.scenario.params.r2;
        let errs = self.exec.map(&self.states, |s| {
            compute_error(s.x, s.y, s.theta, &paths[s.path], s.s_hint)
        });
        errs.into_iter()
            .zip(&self.states)
            .map(|(e, s)| {
                let e = e?;
                if e.rho.abs() > r2 {
                    return Err(Error::OutsideUniverse {
                        uav: s.id,
                        t,
                        x: s.x,
                        y: s.y,
                        theta: s.theta,
                        rho: e.rho,
                        r2,
                    });
                }
                Ok(e)
            })
            .collect()
    }

    fn coordinate(&self, errs: &[PathError]) -> CoordinationState {
        let infos: Vec<ProjectionInfo> = self
            .states
            .iter()
            .zip(errs)
            .map(|(s, e)| ProjectionInfo {
                id: s.id,
                s: e.s_proj,
                rho: e.rho,
            })
            .collect();
        let sc = self.scenario;
        match sc.topology {
            Topology::Cyclic => update_pre_neighbors(&infos, &sc.paths[sc.uavs[0].path], sc.params.l),
            Topology::Tree => {
                let r0 = sc.paths[0].r0();
                update_tree(&infos, &self.chain, r0, sc.params.l)
            }
        }
    }

    /// Advances one step. Returns `false` once the configured duration has
    /// been reached.
    pub fn step(&mut self, sink: &mut dyn TraceSink) -> Result<bool> {
        let sc = self.scenario;
        if self.step >= sc.steps() {
            return Ok(false);
        }
        let t = self.time();
        self.spawn(t);
        if self.states.is_empty() {
            self.step += 1;
            return Ok(true);
        }
        let errs = self.errors(t)?;
        let coord = self.coordinate(&errs);

        let params = &sc.params;
        let chi = &sc.chi;
        let inputs: Vec<(PathError, Option<f64>)> = errs
            .iter()
            .zip(&coord.uavs)
            .map(|(e, c)| (*e, c.zeta))
            .collect();
        let cmds = self
            .exec
            .map(&inputs, |(e, z)| hybrid_supervisor(e, *z, params, chi));
        let mut evaluated = Vec::with_capacity(cmds.len());
        for ((cmd, e), s) in cmds.into_iter().zip(&errs).zip(&self.states) {
            let cmd = cmd.map_err(|err| match err {
                Error::OutsideUniverse { rho, r2, .. } => Error::OutsideUniverse {
                    uav: s.id,
                    t,
                    x: s.x,
                    y: s.y,
                    theta: s.theta,
                    rho,
                    r2,
                },
                other => other,
            })?;
            evaluated.push(Evaluated { err: *e, cmd });
        }

        let events = match &self.prev_coord {
            Some(prev) => detect_overtaking(prev, &coord),
            None => Vec::new(),
        };
        for ev in &events {
            sink.event(&EventRecord { t, event: *ev })?;
        }

        for ((s, ev), c) in self.states.iter().zip(&evaluated).zip(&coord.uavs) {
            sink.row(&TraceRow {
                t,
                uav: s.id,
                x: s.x,
                y: s.y,
                theta: s.theta,
                rho: ev.err.rho,
                psi: ev.err.psi,
                s: ev.err.s_proj,
                region: ev.cmd.region,
                v: ev.cmd.v,
                omega: ev.cmd.omega,
                zeta: c.zeta.unwrap_or(sc.params.l),
                pre_neighbor: c.pre_neighbor,
                resetvalue: ev.cmd.resetvalue_applied,
            })?;
        }
        self.tracker.observe(t, &self.states, &evaluated, &coord, events.len(), self.pending.is_empty());

        for (s, ev) in self.states.iter_mut().zip(&evaluated) {
            let (x, y, th) = rk4_unicycle(s.x, s.y, s.theta, ev.cmd.v, ev.cmd.omega, sc.dt);
            s.x = x;
            s.y = y;
            s.theta = th;
            s.s_hint = Some(ev.err.s_proj);
        }
        self.prev_coord = Some(coord);
        self.step += 1;
        Ok(true)
    }

    /// Errors and coordination at the current (post-step) time.
    fn finish(mut self) -> Result<Metrics> {
        let t = self.time();
        self.spawn(t);
        let (errs, coord) = if self.states.is_empty() {
            (Vec::new(), None)
        } else {
            let errs = self.errors(t)?;
            let coord = self.coordinate(&errs);
            (errs, Some(coord))
        };
        Ok(self.tracker.finish(self.scenario, &self.states, &errs, coord.as_ref(), self.step))
    }
}

/// Runs a scenario to completion, streaming rows and events into `sink`.
pub fn run_scenario(scenario: &Scenario, exec: Exec, sink: &mut dyn TraceSink) -> Result<Metrics> {
    let mut sim = Simulation::new(scenario, exec)?;
    let run = loop {
        match sim.step(sink) {
            Ok(true) => {}
            Ok(false) => break Ok(()),
            Err(e) => break Err(e),
        }
    };
    // Keep whatever was traced before an abort.
    sink.flush()?;
    run?;
    sim.finish()
}

struct PerUav {
    entry: Option<f64>,
    tail_rho: f64,
    tail_psi: f64,
    tail_zeta: Option<(f64, f64)>,
    zeta_at_all: Option<f64>,
    last_gap: Option<f64>,
    gap_growth: f64,
    max_abs_rho: f64,
    resets: u64,
}

struct MetricsTracker {
    index: BTreeMap<u32, usize>,
    per: Vec<PerUav>,
    all_in_s1: Option<f64>,
    events_before: usize,
    events_after: usize,
    tail10: f64,
    tail20: f64,
    l: f64,
}

impl MetricsTracker {
    fn new(sc: &Scenario, ids: &[u32]) -> Self {
        MetricsTracker {
            index: ids.iter().enumerate().map(|(k, id)| (*id, k)).collect(),
            per: ids
                .iter()
                .map(|_| PerUav {
                    entry: None,
                    tail_rho: 0.0,
                    tail_psi: 0.0,
                    tail_zeta: None,
                    zeta_at_all: None,
                    last_gap: None,
                    gap_growth: 0.0,
                    max_abs_rho: 0.0,
                    resets: 0,
                })
                .collect(),
            all_in_s1: None,
            events_before: 0,
            events_after: 0,
            tail10: 0.9 * sc.duration,
            tail20: 0.8 * sc.duration,
            l: sc.params.l,
        }
    }

    fn observe(
        &mut self,
        t: f64,
        states: &[UavState],
        evaluated: &[Evaluated],
        coord: &CoordinationState,
        n_events: usize,
        everyone_joined: bool,
    ) {
        if self.all_in_s1.is_none()
            && everyone_joined
            && evaluated.iter().all(|e| e.cmd.region.in_s1())
        {
            self.all_in_s1 = Some(t);
            for (s, c) in states.iter().zip(&coord.uavs) {
                let p = &mut self.per[self.index[&s.id]];
                p.zeta_at_all = c.zeta;
            }
        }
        if self.all_in_s1.is_some() {
            self.events_after += n_events;
        } else {
            self.events_before += n_events;
        }
        for ((s, e), c) in states.iter().zip(evaluated).zip(&coord.uavs) {
            let p = &mut self.per[self.index[&s.id]];
            if p.entry.is_none() && e.cmd.region.in_s1() {
                p.entry = Some(t);
            }
            p.max_abs_rho = p.max_abs_rho.max(e.err.rho.abs());
            if e.cmd.resetvalue_applied {
                p.resets += 1;
            }
            if t >= self.tail10 {
                p.tail_rho = p.tail_rho.max(e.err.rho.abs());
                p.tail_psi = p.tail_psi.max(e.err.psi.abs());
            }
            if let Some(z) = c.zeta {
                if t >= self.tail20 {
                    p.tail_zeta = Some(match p.tail_zeta {
                        Some((lo, hi)) => (lo.min(z), hi.max(z)),
                        None => (z, z),
                    });
                }
                if self.all_in_s1.is_some() {
                    let gap = (z - self.l).abs();
                    if let Some(prev) = p.last_gap {
                        p.gap_growth = p.gap_growth.max(gap - prev);
                    }
                    p.last_gap = Some(gap);
                }
            }
        }
    }

    fn finish(
        self,
        sc: &Scenario,
        states: &[UavState],
        errs: &[PathError],
        coord: Option<&CoordinationState>,
        steps: usize,
    ) -> Metrics {
        let mut uavs: Vec<UavMetrics> = self
            .index
            .iter()
            .map(|(id, &k)| {
                let p = &self.per[k];
                let pos = states.iter().position(|s| s.id == *id);
                let err = pos.map(|i| errs[i]);
                let zeta = pos.and_then(|i| coord.and_then(|c| c.uavs[i].zeta));
                UavMetrics {
                    id: *id,
                    s1_entry_time: p.entry,
                    final_rho: err.map_or(f64::NAN, |e| e.rho),
                    final_psi: err.map_or(f64::NAN, |e| e.psi),
                    final_zeta: zeta,
                    final_zeta_error: zeta.map(|z| z - sc.params.l),
                    tail_max_abs_rho: p.tail_rho,
                    tail_max_abs_psi: p.tail_psi,
                    tail_zeta_peak_to_peak: p.tail_zeta.map(|(lo, hi)| hi - lo),
                    zeta_at_all_in_s1: p.zeta_at_all,
                    max_gap_growth_after_all_in_s1: p.gap_growth,
                    max_abs_rho: p.max_abs_rho,
                    reset_count: p.resets,
                }
            })
            .collect();
        uavs.sort_by_key(|u| u.id);
        Metrics {
            duration: sc.duration,
            dt: sc.dt,
            steps,
            all_in_s1_time: self.all_in_s1,
            events_before_all_in_s1: self.events_before,
            events_after_all_in_s1: self.events_after,
            uavs,
        }
    }
}

impl OvertakingKind {
    pub fn label(&self) -> &'static str {
        match self {
            OvertakingKind::PreNeighborChanged { .. } => "pre_neighbor_changed",
            OvertakingKind::ZeroCrossing { .. } => "zero_crossing",
        }
    }
}
