//! Clamped cubic B-spline through a waypoint control polygon, reparameterized
//! to arc length with a uniform lookup table.

use nalgebra::Vector2;

use crate::error::{Error, Result};

/// Spacing of the arc-length lookup table in meters.
pub const ARC_TABLE_STEP: f64 = 0.1;

const DEGREE: usize = 3;

// 5-point Gauss-Legendre nodes/weights on [-1, 1].
const GL_NODES: [f64; 5] = [
    0.0,
    -0.538_469_310_105_683_1,
    0.538_469_310_105_683_1,
    -0.906_179_845_938_664,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];

/// A B-spline curve in its native parameter `u ∈ [0, 1]`.
#[derive(Debug, Clone)]
struct Curve {
    ctrl: Vec<Vector2<f64>>,
    knots: Vec<f64>,
    degree: usize,
}

impl Curve {
    fn find_span(&self, u: f64) -> usize {
        let n = self.ctrl.len() - 1;
        if u >= self.knots[n + 1] {
            return n;
        }
        if u <= self.knots[self.degree] {
            return self.degree;
        }
        let (mut lo, mut hi) = (self.degree, n + 1);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if u < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    /// de Boor evaluation.
    fn eval(&self, u: f64) -> Vector2<f64> {
        let p = self.degree;
        let k = self.find_span(u);
        let mut d: Vec<Vector2<f64>> = (0..=p).map(|j| self.ctrl[j + k - p]).collect();
        for r in 1..=p {
            for j in (r..=p).rev() {
                let i = j + k - p;
                let denom = self.knots[i + p + 1 - r] - self.knots[i];
                let alpha = if denom > 0.0 {
                    (u - self.knots[i]) / denom
                } else {
                    0.0
                };
                d[j] = d[j - 1] * (1.0 - alpha) + d[j] * alpha;
            }
        }
        d[p]
    }

    /// Hodograph: a B-spline of one lower degree.
    fn derivative(&self) -> Curve {
        let p = self.degree;
        let ctrl = (0..self.ctrl.len() - 1)
            .map(|i| {
                let span = self.knots[i + p + 1] - self.knots[i + 1];
                if span > 0.0 {
                    (self.ctrl[i + 1] - self.ctrl[i]) * (p as f64 / span)
                } else {
                    Vector2::zeros()
                }
            })
            .collect();
        Curve {
            ctrl,
            knots: self.knots[1..self.knots.len() - 1].to_vec(),
            degree: p - 1,
        }
    }
}

/// Arc-length parameterized cubic B-spline.
#[derive(Debug, Clone)]
pub struct BSplinePath {
    curve: Curve,
    d1: Curve,
    d2: Curve,
    /// `u` at `s = k * ARC_TABLE_STEP`; the last entry sits at `length`.
    u_table: Vec<f64>,
    length: f64,
}

impl BSplinePath {
    /// Builds the clamped cubic with the waypoints as control points. Interior
    /// knots come from chord-length parameters of the control polygon,
    /// averaged over `degree` consecutive values.
    pub fn new(waypoints: &[Vector2<f64>]) -> Result<Self> {
        if waypoints.len() < DEGREE + 1 {
            return Err(Error::Config(format!(
                "a cubic B-spline needs at least {} waypoints, got {}",
                DEGREE + 1,
                waypoints.len()
            )));
        }
        let n = waypoints.len() - 1;
        let chords: Vec<f64> = waypoints.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
        let total: f64 = chords.iter().sum();
        if total <= 0.0 || chords.iter().any(|c| *c <= 0.0) {
            return Err(Error::DegenerateSpline { u: 0.0 });
        }
        let mut params = vec![0.0; n + 1];
        for i in 1..=n {
            params[i] = params[i - 1] + chords[i - 1] / total;
        }
        params[n] = 1.0;

        let mut knots = vec![0.0; DEGREE + 1];
        for j in 1..=(n - DEGREE) {
            let avg = params[j..j + DEGREE].iter().sum::<f64>() / DEGREE as f64;
            knots.push(avg);
        }
        knots.extend(std::iter::repeat_n(1.0, DEGREE + 1));

        let curve = Curve {
            ctrl: waypoints.to_vec(),
            knots,
            degree: DEGREE,
        };
        let d1 = curve.derivative();
        let d2 = d1.derivative();
        let mut path = BSplinePath {
            curve,
            d1,
            d2,
            u_table: Vec::new(),
            length: 0.0,
        };
        path.build_arc_table(total)?;
        Ok(path)
    }

    fn speed(&self, u: f64) -> f64 {
        self.d1.eval(u).norm()
    }

    fn arc_between(&self, u0: f64, u1: f64) -> f64 {
        let half = 0.5 * (u1 - u0);
        let mid = 0.5 * (u1 + u0);
        GL_NODES
            .iter()
            .zip(GL_WEIGHTS)
            .map(|(x, w)| w * self.speed(mid + half * x))
            .sum::<f64>()
            * half
    }

    fn build_arc_table(&mut self, polygon_length: f64) -> Result<()> {
        // Dense uniform-u pass; 0.05 m nominal spacing keeps each Gauss
        // interval far below the curvature scale.
        let samples = ((polygon_length / 0.05).ceil() as usize).max(1000);
        let mut cum = Vec::with_capacity(samples + 1);
        cum.push(0.0);
        let du = 1.0 / samples as f64;
        for k in 0..samples {
            let u = k as f64 * du;
            if self.speed(u) < 1e-9 {
                return Err(Error::DegenerateSpline { u });
            }
            let last = *cum.last().unwrap();
            cum.push(last + self.arc_between(u, u + du));
        }
        if self.speed(1.0) < 1e-9 {
            return Err(Error::DegenerateSpline { u: 1.0 });
        }
        self.length = cum[samples];

        let nodes = (self.length / ARC_TABLE_STEP).floor() as usize;
        let mut table = Vec::with_capacity(nodes + 2);
        let mut k = 0usize;
        for j in 0..=nodes {
            let target = j as f64 * ARC_TABLE_STEP;
            while k + 1 < samples && cum[k + 1] < target {
                k += 1;
            }
            table.push(self.invert_in_cell(target, k, du, &cum));
        }
        if table.len() < 2 || (nodes as f64) * ARC_TABLE_STEP < self.length {
            table.push(1.0);
        }
        self.u_table = table;
        Ok(())
    }

    /// Newton solve for `s(u) = target` inside `[u_k, u_k + du]`.
    fn invert_in_cell(&self, target: f64, k: usize, du: f64, cum: &[f64]) -> f64 {
        let u0 = k as f64 * du;
        let (s0, s1) = (cum[k], cum[k + 1]);
        let mut u = if s1 > s0 {
            u0 + du * ((target - s0) / (s1 - s0)).clamp(0.0, 1.0)
        } else {
            u0
        };
        for _ in 0..4 {
            let s = s0 + self.arc_between(u0, u);
            u -= (s - target) / self.speed(u);
            u = u.clamp(u0, u0 + du);
        }
        u
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Native parameter at arc length `s ∈ [0, length]`.
    fn param_at(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, self.length);
        let x = s / ARC_TABLE_STEP;
        let j = (x.floor() as usize).min(self.u_table.len() - 2);
        let s_j = j as f64 * ARC_TABLE_STEP;
        let s_next = if j + 1 == self.u_table.len() - 1 {
            self.length
        } else {
            (j + 1) as f64 * ARC_TABLE_STEP
        };
        let w = if s_next > s_j {
            ((s - s_j) / (s_next - s_j)).clamp(0.0, 1.0)
        } else {
            0.0
        };
        self.u_table[j] * (1.0 - w) + self.u_table[j + 1] * w
    }

    pub fn point_at(&self, s: f64) -> Vector2<f64> {
        if s < 0.0 {
            return self.curve.eval(0.0) + self.unit_tangent_u(0.0) * s;
        }
        if s > self.length {
            return self.curve.eval(1.0) + self.unit_tangent_u(1.0) * (s - self.length);
        }
        self.curve.eval(self.param_at(s))
    }

    fn unit_tangent_u(&self, u: f64) -> Vector2<f64> {
        self.d1.eval(u).normalize()
    }

    pub fn tangent_at(&self, s: f64) -> Vector2<f64> {
        self.unit_tangent_u(self.param_at(s))
    }

    /// Signed curvature, positive for left turns. Zero on the straight
    /// extensions beyond either end.
    pub fn curvature_at(&self, s: f64) -> f64 {
        if s < 0.0 || s > self.length {
            return 0.0;
        }
        let u = self.param_at(s);
        let d1 = self.d1.eval(u);
        let d2 = self.d2.eval(u);
        (d1.x * d2.y - d1.y * d2.x) / d1.norm().powi(3)
    }

    /// Largest |κ| over the lookup-table nodes and where it occurs.
    pub fn max_abs_curvature(&self) -> (f64, f64) {
        let mut best = (0.0, 0.0);
        for j in 0..self.u_table.len() {
            let s = (j as f64 * ARC_TABLE_STEP).min(self.length);
            let k = self.curvature_at(s).abs();
            if k > best.0 {
                best = (k, s);
            }
        }
        best
    }

    pub fn control_points(&self) -> &[Vector2<f64>] {
        &self.curve.ctrl
    }
}
