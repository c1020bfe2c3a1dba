//! Scenario files.
//!
//! A scenario is a TOML document:
//!
//! ```toml
//! [limits]
//! v_min = 10.0
//! v_max = 25.0
//! omega_max = 0.2
//! kappa0 = 0.002
//!
//! [params]          # or [design] with `c` and `alpha`
//! a = 0.6303
//! r1 = 122.1297
//! v_m = 25.0
//!
//! [chi]
//! kind = "piecewise"
//!
//! [simulation]
//! duration = 400.0
//! dt = 0.01
//! L = 1047.1975511965977
//!
//! [[paths]]
//! kind = "circle"
//! center = [0.0, 0.0]
//! radius = 1000.0
//! direction = "ccw"
//!
//! [[uavs]]
//! id = 1
//! x = 600.0
//! y = 0.0
//! theta_deg = 108.0
//! ```

use std::path::{Path as FsPath, PathBuf};

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::control::ChiFunction;
use crate::coordination::Topology;
use crate::error::{Error, Result};
use crate::parallel::Exec;
use crate::params::{design_coordination_set, CoordParams, Limits, DEFAULT_ALPHA, DEFAULT_C};
use crate::paths::{lonlat_to_local, Direction, Path};
use crate::sim::{EscapeConfig, Scenario, UavSpec};
use crate::verify::VerifyOptions;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub limits: Limits,
    pub params: Option<ParamsSection>,
    pub design: Option<DesignSection>,
    #[serde(default)]
    pub chi: ChiSection,
    pub simulation: Option<SimulationSection>,
    #[serde(default)]
    pub paths: Vec<PathSection>,
    #[serde(default)]
    pub uavs: Vec<UavSection>,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub escape: EscapeSection,
}

/// Explicit set shape. Anything left out takes the usual default.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub a: f64,
    pub r1: f64,
    pub v_m: f64,
    pub r2: Option<f64>,
    pub alpha: Option<f64>,
    pub c: Option<f64>,
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    pub k3: Option<f64>,
    pub eps0: Option<f64>,
    pub lambda: Option<f64>,
    pub delta1: Option<f64>,
    pub delta2: Option<f64>,
    pub sign_eps: Option<f64>,
    pub pure_sign: Option<bool>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSection {
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

impl Default for DesignSection {
    fn default() -> Self {
        DesignSection {
            c: DEFAULT_C,
            alpha: DEFAULT_ALPHA,
        }
    }
}

fn default_c() -> f64 {
    DEFAULT_C
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChiKind {
    #[default]
    Piecewise,
    Linear,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChiSection {
    #[serde(default)]
    pub kind: ChiKind,
    /// Slope of the linear variant.
    pub slope: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub duration: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(rename = "L", alias = "l")]
    pub l: f64,
    #[serde(default)]
    pub topology: Topology,
}

fn default_dt() -> f64 {
    0.01
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PathSection {
    Circle {
        center: [f64; 2],
        radius: f64,
        #[serde(default = "default_direction")]
        direction: Direction,
    },
    Line {
        origin: [f64; 2],
        /// Radians from the +x axis.
        heading: f64,
    },
    Bspline {
        /// Local `(x, y)` control points in metres.
        waypoints: Option<Vec<[f64; 2]>>,
        /// `(lon, lat)` control points in degrees, used with `origin`.
        lonlat: Option<Vec<[f64; 2]>>,
        origin: Option<[f64; 2]>,
        /// Translation applied after conversion to local coordinates.
        #[serde(default)]
        offset: [f64; 2],
    },
}

fn default_direction() -> Direction {
    Direction::Ccw
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UavSection {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    /// Heading in radians; `theta_deg` is accepted instead.
    pub theta: Option<f64>,
    pub theta_deg: Option<f64>,
    #[serde(default)]
    pub path: usize,
    #[serde(default)]
    pub join_time: f64,
    pub pre_neighbor: Option<u32>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
    #[serde(default = "one")]
    pub trace_every: usize,
    /// Write `series.csv`, sampling every this many steps.
    pub series_every: Option<usize>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: default_out(),
            trace_every: 1,
            series_every: None,
        }
    }
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub samples: Option<usize>,
    pub sim_time: Option<f64>,
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EscapeSection {
    pub eps0: Option<f64>,
    pub kappa: Option<f64>,
    pub n_psi: Option<usize>,
    pub n_rho: Option<usize>,
    pub n_v: Option<usize>,
    pub n_omega: Option<usize>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
}

/// Everything a run needs, resolved from a [`ConfigFile`].
#[derive(Debug, Clone)]
pub struct Loaded {
    pub scenario: Scenario,
    pub output: OutputSection,
    pub verify: VerifyOptions,
    pub escape: EscapeConfig,
    /// `true` when the set came from the optimizer rather than `[params]`.
    pub designed: bool,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn read(path: &FsPath) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Parameters from `[params]`, or designed from `[design]` when absent.
    pub fn params(&self, exec: Exec) -> Result<(CoordParams, bool)> {
        let lim = self.limits;
        lim.validate()?;
        let l = self.simulation.as_ref().map_or(0.0, |s| s.l);
        match (&self.params, &self.design) {
            (Some(_), Some(_)) => Err(Error::Config("give either [params] or [design], not both".into())),
            (Some(ps), None) => {
                let mut p = CoordParams::with_defaults(lim, ps.a, ps.r1, ps.v_m, l);
                macro_rules! set {
                    ($($f:ident),*) => { $( if let Some(v) = ps.$f { p.$f = v; } )* };
                }
                set!(r2, alpha, c, k1, k2, k3, eps0, lambda, delta1, delta2, sign_eps, pure_sign);
                p.validate()?;
                let report = p.constraint_report();
                if !report.all_hold() {
                    log::warn!(
                        "explicit parameters violate the design inequalities: {}",
                        report.violated().join(", ")
                    );
                }
                Ok((p, false))
            }
            (None, d) => {
                let d = d.unwrap_or_default();
                let p = design_coordination_set(&lim, d.c, d.alpha, l, exec)?;
                Ok((p, true))
            }
        }
    }

    pub fn chi(&self, params: &CoordParams) -> Result<ChiFunction> {
        match self.chi.kind {
            ChiKind::Piecewise => {
                if self.chi.slope.is_some() {
                    return Err(Error::Config("`slope` only applies to kind = \"linear\"".into()));
                }
                ChiFunction::piecewise(params)
            }
            ChiKind::Linear => {
                let slope = self
                    .chi
                    .slope
                    .ok_or_else(|| Error::Config("kind = \"linear\" needs `slope`".into()))?;
                if !(slope > 0.0 && slope.is_finite()) {
                    return Err(Error::Config(format!("chi slope must be positive, got {slope}")));
                }
                Ok(ChiFunction::linear(slope, params))
            }
        }
    }

    pub fn build_paths(&self, kappa0: f64) -> Result<Vec<Path>> {
        self.paths.iter().map(|p| p.build(kappa0)).collect()
    }

    pub fn uav_specs(&self) -> Result<Vec<UavSpec>> {
        self.uavs
            .iter()
            .map(|u| {
                let theta = match (u.theta, u.theta_deg) {
                    (Some(t), None) => t,
                    (None, Some(d)) => d.to_radians(),
                    _ => {
                        return Err(Error::Config(format!(
                            "UAV {} needs exactly one of `theta` and `theta_deg`",
                            u.id
                        )))
                    }
                };
                Ok(UavSpec {
                    id: u.id,
                    x: u.x,
                    y: u.y,
                    theta,
                    path: u.path,
                    join_time: u.join_time,
                    pre_neighbor: u.pre_neighbor,
                })
            })
            .collect()
    }

    pub fn verify_options(&self, exec: Exec) -> VerifyOptions {
        let d = VerifyOptions::default();
        let v = &self.verify;
        VerifyOptions {
            seed: v.seed.unwrap_or(d.seed),
            runs: v.runs.unwrap_or(d.runs),
            samples: v.samples.unwrap_or(d.samples),
            sim_time: v.sim_time.unwrap_or(d.sim_time),
            dt: v.dt.or(self.simulation.as_ref().map(|s| s.dt)).unwrap_or(d.dt),
            exec,
        }
    }

    pub fn escape_config(&self, params: &CoordParams) -> EscapeConfig {
        let d = EscapeConfig::default();
        let e = &self.escape;
        EscapeConfig {
            eps0: e.eps0.unwrap_or(params.eps0),
            kappa: e.kappa.unwrap_or(d.kappa),
            n_psi: e.n_psi.unwrap_or(d.n_psi),
            n_rho: e.n_rho.unwrap_or(d.n_rho),
            n_v: e.n_v.unwrap_or(d.n_v),
            n_omega: e.n_omega.unwrap_or(d.n_omega),
            dt: e.dt.unwrap_or(d.dt),
            horizon: e.horizon.unwrap_or(d.horizon),
        }
    }

    /// Resolves every section. The scenario is validated only when
    /// `need_scenario` is set, so files meant for `verify` may omit UAVs.
    pub fn load(&self, exec: Exec, need_scenario: bool) -> Result<Loaded> {
        let sim = self
            .simulation
            .clone()
            .ok_or_else(|| Error::Config("missing [simulation] section".into()))?;
        let (params, designed) = self.params(exec)?;
        let chi = self.chi(&params)?;
        let paths = self.build_paths(params.limits.kappa0)?;
        let uavs = self.uav_specs()?;
        let scenario = Scenario {
            params,
            chi,
            paths,
            uavs,
            duration: sim.duration,
            dt: sim.dt,
            topology: sim.topology,
        };
        if need_scenario {
            scenario.validate()?;
        }
        Ok(Loaded {
            escape: self.escape_config(&params),
            verify: self.verify_options(exec),
            output: self.output.clone(),
            scenario,
            designed,
        })
    }
}

impl PathSection {
    pub fn build(&self, kappa0: f64) -> Result<Path> {
        match self {
            PathSection::Circle {
                center,
                radius,
                direction,
            } => Path::circle(Vector2::from(*center), *radius, *direction, kappa0),
            PathSection::Line { origin, heading } => Path::line(Vector2::from(*origin), *heading, kappa0),
            PathSection::Bspline {
                waypoints,
                lonlat,
                origin,
                offset,
            } => {
                let pts: Vec<Vector2<f64>> = match (waypoints, lonlat, origin) {
                    (Some(w), None, None) => w.iter().map(|&p| Vector2::from(p)).collect(),
                    (None, Some(ll), Some(o)) => ll.iter().map(|p| lonlat_to_local(p[0], p[1], o[0], o[1])).collect(),
                    (None, Some(_), None) => {
                        return Err(Error::Config("`lonlat` waypoints need an `origin`".into()))
                    }
                    _ => {
                        return Err(Error::Config(
                            "a bspline path needs either `waypoints` or `lonlat` with `origin`".into(),
                        ))
                    }
                };
                let off = Vector2::from(*offset);
                let pts: Vec<_> = pts.into_iter().map(|p| p + off).collect();
                Path::bspline(&pts, kappa0)
            }
        }
    }
}

/// `[params]` fragment for a designed set, suitable for pasting back into a
/// scenario file.
pub fn params_fragment(p: &CoordParams) -> Result<String> {
    #[derive(Serialize)]
    struct Fragment<'a> {
        limits: &'a Limits,
        params: ParamsOut,
    }
    #[derive(Serialize)]
    struct ParamsOut {
        a: f64,
        r1: f64,
        v_m: f64,
        r2: f64,
        alpha: f64,
        c: f64,
        k1: f64,
        k2: f64,
        k3: f64,
        eps0: f64,
        lambda: f64,
        delta1: f64,
        delta2: f64,
        sign_eps: f64,
        pure_sign: bool,
    }
    let frag = Fragment {
        limits: &p.limits,
        params: ParamsOut {
            a: p.a,
            r1: p.r1,
            v_m: p.v_m,
            r2: p.r2,
            alpha: p.alpha,
            c: p.c,
            k1: p.k1,
            k2: p.k2,
            k3: p.k3,
            eps0: p.eps0,
            lambda: p.lambda,
            delta1: p.delta1,
            delta2: p.delta2,
            sign_eps: p.sign_eps,
            pure_sign: p.pure_sign,
        },
    };
    toml::to_string(&frag).map_err(|e| Error::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[limits]
v_min = 10.0
v_max = 25.0
omega_max = 0.2
kappa0 = 0.002

[params]
a = 0.6303
r1 = 122.1297
v_m = 25.0

[simulation]
duration = 1.0
L = 1000.0

[[paths]]
kind = "circle"
center = [0.0, 0.0]
radius = 1000.0

[[uavs]]
id = 1
x = 1000.0
y = 0.0
theta_deg = 90.0
"#;

    #[test]
    fn base_config_loads() {
        let cfg = ConfigFile::parse(BASE).unwrap();
        let l = cfg.load(Exec::Sequential, true).unwrap();
        assert!(!l.designed);
        assert_eq!(l.scenario.params.r1, 122.1297);
        assert_eq!(l.scenario.dt, 0.01);
        assert_eq!(l.scenario.uavs[0].theta, std::f64::consts::FRAC_PI_2);
        assert_eq!(l.output.trace_every, 1);
    }

    #[test]
    fn limits_only_is_enough_for_design() {
        let text = "[limits]\nv_min = 10.0\nv_max = 25.0\nomega_max = 0.2\nkappa0 = 0.002\n";
        let cfg = ConfigFile::parse(text).unwrap();
        let (p, designed) = cfg.params(Exec::Sequential).unwrap();
        assert!(designed);
        assert!(p.constraint_report().all_hold());
        assert!(cfg.load(Exec::Sequential, false).is_err());
    }

    #[test]
    fn lonlat_waypoints_convert() {
        let text = format!(
            "{BASE}\n[[paths]]\nkind = \"bspline\"\norigin = [113.2167, 28.2029]\nlonlat = [[113.2167, 28.2029], [113.2371, 28.2209], [113.2167, 28.2390], [113.1963, 28.2570]]\n"
        );
        let cfg = ConfigFile::parse(&text).unwrap();
        let paths = cfg.build_paths(0.002).unwrap();
        let end = paths[1].point_at(paths[1].total_length());
        assert!((end - Vector2::new(6019.83, -1997.26)).norm() < 10.0, "{end}");
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = BASE.replace("v_m = 25.0", "v_m = 25.0\nbogus = 1");
        assert!(matches!(ConfigFile::parse(&text), Err(Error::Config(_))));
    }

    #[test]
    fn design_section_runs_optimizer() {
        let text = BASE.replace("[params]\na = 0.6303\nr1 = 122.1297\nv_m = 25.0", "[design]\nc = 1.0");
        let cfg = ConfigFile::parse(&text).unwrap();
        let l = cfg.load(Exec::Sequential, true).unwrap();
        assert!(l.designed);
        assert!(l.scenario.params.constraint_report().all_hold());
    }

    #[test]
    fn linear_chi_needs_slope() {
        let text = format!("{BASE}\n[chi]\nkind = \"linear\"\n");
        let cfg = ConfigFile::parse(&text).unwrap();
        assert!(cfg.load(Exec::Sequential, true).is_err());
        let text = format!("{BASE}\n[chi]\nkind = \"linear\"\nslope = 0.5\n");
        let cfg = ConfigFile::parse(&text).unwrap();
        assert!(matches!(cfg.load(Exec::Sequential, true).unwrap().scenario.chi, ChiFunction::Linear { .. }));
    }

    #[test]
    fn tight_circle_is_a_curvature_error() {
        let text = BASE.replace("radius = 1000.0", "radius = 100.0");
        let cfg = ConfigFile::parse(&text).unwrap();
        assert!(matches!(
            cfg.load(Exec::Sequential, true),
            Err(Error::CurvatureBoundExceeded { .. })
        ));
    }

    #[test]
    fn fragment_round_trips() {
        let cfg = ConfigFile::parse(BASE).unwrap();
        let p = cfg.load(Exec::Sequential, true).unwrap().scenario.params;
        let frag = params_fragment(&p).unwrap();
        let back: toml::Table = toml::from_str(&frag).unwrap();
        assert_eq!(back["params"]["r1"].as_float(), Some(122.1297));
        assert_eq!(back["limits"]["kappa0"].as_float(), Some(0.002));
    }
}
