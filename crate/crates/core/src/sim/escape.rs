//! Brute-force check that no admissible constant command keeps an error
//! starting in the escape set within `|rho| <= R0`.

use std::f64::consts::FRAC_PI_2;

use serde::Serialize;

use crate::error_frame::{in_escape_set, PathError};
use crate::parallel::Exec;
use crate::params::CoordParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EscapeConfig {
    pub eps0: f64,
    /// Constant path curvature; must lie in `(-κ₀, 0]`.
    pub kappa: f64,
    pub n_psi: usize,
    pub n_rho: usize,
    pub n_v: usize,
    pub n_omega: usize,
    pub dt: f64,
    pub horizon: f64,
}

impl Default for EscapeConfig {
    fn default() -> Self {
        EscapeConfig {
            eps0: 0.05,
            kappa: -0.001,
            n_psi: 20,
            n_rho: 20,
            n_v: 21,
            n_omega: 21,
            dt: 0.01,
            horizon: 200.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct EscapeReport {
    pub states: usize,
    pub controls: usize,
    pub pairs: usize,
    pub exited: usize,
    pub exit_fraction: f64,
    pub max_exit_time: f64,
    /// First `(rho, psi, v, omega)` that stayed inside, if any.
    pub first_survivor: Option<(f64, f64, f64, f64)>,
}

fn exit_time(mut rho: f64, mut psi: f64, v: f64, omega: f64, cfg: &EscapeConfig, r0: f64) -> Option<f64> {
    let k = cfg.kappa;
    let f = |rho: f64, psi: f64| (v * psi.sin(), omega - k * v * psi.cos() / (1.0 - k * rho));
    let h = cfg.dt;
    let n = (cfg.horizon / h).ceil() as usize;
    for step in 0..n {
        let (a1, b1) = f(rho, psi);
        let (a2, b2) = f(rho + 0.5 * h * a1, psi + 0.5 * h * b1);
        let (a3, b3) = f(rho + 0.5 * h * a2, psi + 0.5 * h * b2);
        let (a4, b4) = f(rho + h * a3, psi + h * b3);
        rho += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
        psi += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
        if rho.abs() > r0 {
            return Some((step + 1) as f64 * h);
        }
    }
    None
}

/// Samples the escape set on a grid, pairs every state with every command on
/// a grid over the admissible box, and integrates the error dynamics.
pub fn escape_demo(params: &CoordParams, cfg: &EscapeConfig, exec: Exec) -> EscapeReport {
    let lim = &params.limits;
    let r0 = lim.r0();
    let mut states = Vec::with_capacity(cfg.n_psi * cfg.n_rho);
    for j in 0..cfg.n_psi {
        let psi = cfg.eps0 + (FRAC_PI_2 - cfg.eps0) * (j + 1) as f64 / cfg.n_psi as f64;
        let lower = r0 - lim.v_min * (psi - cfg.eps0) * cfg.eps0.sin() / lim.omega_max;
        for i in 0..cfg.n_rho {
            let rho = lower + (r0 - lower) * (i + 1) as f64 / cfg.n_rho as f64;
            let err = PathError::new(rho, psi, cfg.kappa);
            if in_escape_set(&err, params, cfg.eps0) {
                states.push((rho, psi));
            }
        }
    }
    let lerp = |lo: f64, hi: f64, k: usize, n: usize| {
        if n <= 1 {
            lo
        } else {
            lo + (hi - lo) * k as f64 / (n - 1) as f64
        }
    };
    let mut controls = Vec::with_capacity(cfg.n_v * cfg.n_omega);
    for a in 0..cfg.n_v {
        for b in 0..cfg.n_omega {
            controls.push((
                lerp(lim.v_min, lim.v_max, a, cfg.n_v),
                lerp(-lim.omega_max, lim.omega_max, b, cfg.n_omega),
            ));
        }
    }

    let per_state = exec.map(&states, |&(rho, psi)| {
        let mut exited = 0usize;
        let mut worst = 0.0f64;
        let mut survivor = None;
        for &(v, w) in &controls {
            match exit_time(rho, psi, v, w, cfg, r0) {
                Some(t) => {
                    exited += 1;
                    worst = worst.max(t);
                }
                None => {
                    survivor.get_or_insert((rho, psi, v, w));
                }
            }
        }
        (exited, worst, survivor)
    });

    let pairs = states.len() * controls.len();
    let exited: usize = per_state.iter().map(|r| r.0).sum();
    EscapeReport {
        states: states.len(),
        controls: controls.len(),
        pairs,
        exited,
        exit_fraction: if pairs == 0 { 0.0 } else { exited as f64 / pairs as f64 },
        max_exit_time: per_state.iter().map(|r| r.1).fold(0.0, f64::max),
        first_survivor: per_state.iter().find_map(|r| r.2),
    }
}
