//! Directed planar paths with bounded curvature.
//!
//! Sign conventions used throughout the crate: the lateral error `rho` is
//! positive on the left of the direction of travel and the curvature `kappa`
//! is positive where the path turns left.

mod bspline;

use std::f64::consts::PI;

use nalgebra::Vector2;

pub use bspline::{BSplinePath, ARC_TABLE_STEP};

use crate::error::{Error, Result};

/// Mean Earth radius used by the lon/lat conversion, in meters.
pub const EARTH_RADIUS: f64 = 6_371_000.0;

const GOLDEN_TOL: f64 = 1e-8;
const HINT_WINDOW: f64 = 20.0;
const TIE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[serde(alias = "counterclockwise")]
    Ccw,
    #[serde(alias = "clockwise")]
    Cw,
}

#[derive(Debug, Clone)]
pub enum Geometry {
    Circle {
        center: Vector2<f64>,
        radius: f64,
        direction: Direction,
    },
    Line {
        origin: Vector2<f64>,
        /// Unit vector.
        direction: Vector2<f64>,
    },
    BSpline(Box<BSplinePath>),
}

#[derive(Debug, Clone)]
pub struct Path {
    geometry: Geometry,
    kappa0: f64,
}

/// Closest point on a path to a query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub s: f64,
    pub point: Vector2<f64>,
    pub tangent_angle: f64,
    pub curvature: f64,
    /// Signed distance, positive on the left.
    pub rho: f64,
}

/// Wraps an angle to `[-π, π)`.
pub fn wrap_angle(x: f64) -> f64 {
    if (-PI..PI).contains(&x) {
        return x;
    }
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y >= PI {
        -PI
    } else {
        y
    }
}

fn cross(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Equirectangular projection about `origin = (lon, lat)` in degrees.
/// Returns `(x, y)` in a north-east frame: `x` points north, `y` east.
pub fn lonlat_to_local(lon: f64, lat: f64, origin_lon: f64, origin_lat: f64) -> Vector2<f64> {
    let north = EARTH_RADIUS * (lat - origin_lat).to_radians();
    let east = EARTH_RADIUS * (lon - origin_lon).to_radians() * origin_lat.to_radians().cos();
    Vector2::new(north, east)
}

impl Path {
    pub fn circle(center: Vector2<f64>, radius: f64, direction: Direction, kappa0: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::Config(format!("circle radius must be positive, got {radius}")));
        }
        check_kappa0(kappa0)?;
        if 1.0 / radius >= kappa0 {
            return Err(Error::CurvatureBoundExceeded {
                max_kappa: 1.0 / radius,
                s: 0.0,
                kappa0,
            });
        }
        Ok(Path {
            geometry: Geometry::Circle {
                center,
                radius,
                direction,
            },
            kappa0,
        })
    }

    /// Straight line through `origin` with heading `heading` (rad from +x).
    pub fn line(origin: Vector2<f64>, heading: f64, kappa0: f64) -> Result<Self> {
        check_kappa0(kappa0)?;
        Ok(Path {
            geometry: Geometry::Line {
                origin,
                direction: Vector2::new(heading.cos(), heading.sin()),
            },
            kappa0,
        })
    }

    /// Cubic B-spline with `waypoints` as its control polygon. Rejected when
    /// the sampled curvature reaches `kappa0`.
    pub fn bspline(waypoints: &[Vector2<f64>], kappa0: f64) -> Result<Self> {
        check_kappa0(kappa0)?;
        let spline = BSplinePath::new(waypoints)?;
        let (max_kappa, s) = spline.max_abs_curvature();
        if max_kappa >= kappa0 {
            return Err(Error::CurvatureBoundExceeded { max_kappa, s, kappa0 });
        }
        Ok(Path {
            geometry: Geometry::BSpline(Box::new(spline)),
            kappa0,
        })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn kappa0(&self) -> f64 {
        self.kappa0
    }

    /// `R₀ = 1/κ₀`.
    pub fn r0(&self) -> f64 {
        1.0 / self.kappa0
    }

    pub fn is_closed(&self) -> bool {
        matches!(self.geometry, Geometry::Circle { .. })
    }

    /// Circumference for circles, the spline length between its end
    /// waypoints, and infinity for lines.
    pub fn total_length(&self) -> f64 {
        match &self.geometry {
            Geometry::Circle { radius, .. } => 2.0 * PI * radius,
            Geometry::Line { .. } => f64::INFINITY,
            Geometry::BSpline(b) => b.length(),
        }
    }

    fn circle_angle(radius: f64, direction: Direction, s: f64) -> f64 {
        let s = s.rem_euclid(2.0 * PI * radius);
        match direction {
            Direction::Ccw => s / radius,
            Direction::Cw => -s / radius,
        }
    }

    pub fn point_at(&self, s: f64) -> Vector2<f64> {
        match &self.geometry {
            Geometry::Circle {
                center,
                radius,
                direction,
            } => {
                let phi = Self::circle_angle(*radius, *direction, s);
                center + Vector2::new(phi.cos(), phi.sin()) * *radius
            }
            Geometry::Line { origin, direction } => origin + direction * s,
            Geometry::BSpline(b) => b.point_at(s),
        }
    }

    /// Unit tangent in the direction of travel.
    pub fn tangent(&self, s: f64) -> Vector2<f64> {
        match &self.geometry {
            Geometry::Circle {
                radius, direction, ..
            } => {
                let phi = Self::circle_angle(*radius, *direction, s);
                match direction {
                    Direction::Ccw => Vector2::new(-phi.sin(), phi.cos()),
                    Direction::Cw => Vector2::new(phi.sin(), -phi.cos()),
                }
            }
            Geometry::Line { direction, .. } => *direction,
            Geometry::BSpline(b) => {
                if s < 0.0 {
                    b.tangent_at(0.0)
                } else {
                    b.tangent_at(s.min(b.length()))
                }
            }
        }
    }

    pub fn tangent_angle(&self, s: f64) -> f64 {
        let t = self.tangent(s);
        t.y.atan2(t.x)
    }

    /// Signed curvature. Construction already rejects paths whose curvature
    /// reaches `κ₀` or whose spline derivative vanishes, so this cannot fail.
    pub fn curvature_at(&self, s: f64) -> f64 {
        match &self.geometry {
            Geometry::Circle {
                radius, direction, ..
            } => match direction {
                Direction::Ccw => 1.0 / radius,
                Direction::Cw => -1.0 / radius,
            },
            Geometry::Line { .. } => 0.0,
            Geometry::BSpline(b) => b.curvature_at(s),
        }
    }

    /// Forward arc distance on closed paths, signed difference on open ones.
    pub fn arc_distance(&self, s_from: f64, s_to: f64) -> f64 {
        if self.is_closed() {
            let c = self.total_length();
            let d = (s_to - s_from).rem_euclid(c);
            if d >= c {
                0.0
            } else {
                d
            }
        } else {
            s_to - s_from
        }
    }

    fn make_projection(&self, s: f64, q: &Vector2<f64>) -> Projection {
        let point = self.point_at(s);
        let t = self.tangent(s);
        Projection {
            s,
            point,
            tangent_angle: t.y.atan2(t.x),
            curvature: self.curvature_at(s),
            rho: cross(&t, &(q - point)),
        }
    }

    /// Closest projection of `q`. With a hint the search stays local to it,
    /// which keeps the projection continuous along a trajectory.
    pub fn project(&self, q: Vector2<f64>, hint_s: Option<f64>) -> Result<Projection> {
        match &self.geometry {
            Geometry::Circle {
                center,
                radius,
                direction,
            } => {
                let d = q - center;
                let r_q = d.norm();
                if r_q < 1e-12 {
                    return Err(Error::ProjectionAmbiguous {
                        rho: *radius,
                        s_a: 0.0,
                        s_b: PI * radius,
                    });
                }
                let phi = d.y.atan2(d.x);
                let c = 2.0 * PI * radius;
                let s = match direction {
                    Direction::Ccw => (radius * phi).rem_euclid(c),
                    Direction::Cw => (-radius * phi).rem_euclid(c),
                };
                let s = if s >= c { 0.0 } else { s };
                let mut p = self.make_projection(s, &q);
                p.rho = match direction {
                    Direction::Ccw => radius - r_q,
                    Direction::Cw => r_q - radius,
                };
                Ok(p)
            }
            Geometry::Line { origin, direction } => {
                let d = q - origin;
                let s = d.dot(direction);
                let mut p = self.make_projection(s, &q);
                p.rho = cross(direction, &d);
                Ok(p)
            }
            Geometry::BSpline(b) => {
                if let Some(h) = hint_s {
                    let (lo, hi) = (h - HINT_WINDOW, h + HINT_WINDOW);
                    let s = self.refine(&q, lo, hi);
                    if s - lo > 1e-6 && hi - s > 1e-6 {
                        return Ok(self.make_projection(s, &q));
                    }
                }
                self.project_global(b, &q)
            }
        }
    }

    fn dist2(&self, q: &Vector2<f64>, s: f64) -> f64 {
        (q - self.point_at(s)).norm_squared()
    }

    /// Golden-section on `[lo, hi]` followed by a Newton polish of the
    /// orthogonality condition.
    fn refine(&self, q: &Vector2<f64>, mut lo: f64, mut hi: f64) -> f64 {
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let mut x1 = hi - g * (hi - lo);
        let mut x2 = lo + g * (hi - lo);
        let mut f1 = self.dist2(q, x1);
        let mut f2 = self.dist2(q, x2);
        while hi - lo > GOLDEN_TOL {
            if f1 <= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - g * (hi - lo);
                f1 = self.dist2(q, x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + g * (hi - lo);
                f2 = self.dist2(q, x2);
            }
        }
        let mut s = 0.5 * (lo + hi);
        for _ in 0..3 {
            let p = self.point_at(s);
            let t = self.tangent(s);
            let off = q - p;
            let rho = cross(&t, &off);
            let denom = 1.0 - self.curvature_at(s) * rho;
            if denom <= 1e-6 {
                break;
            }
            let step = off.dot(&t) / denom;
            if step.abs() > 1.0 {
                break;
            }
            s += step;
        }
        s
    }

    fn project_global(&self, b: &BSplinePath, q: &Vector2<f64>) -> Result<Projection> {
        let stride = (10.0f64).min(self.r0() / 10.0);
        let len = b.length();
        let ext_start = (q - b.point_at(0.0)).norm() + stride;
        let ext_end = (q - b.point_at(len)).norm() + stride;
        let (s0, s1) = (-ext_start, len + ext_end);
        let n = ((s1 - s0) / stride).ceil() as usize;
        let samples: Vec<f64> = (0..=n)
            .map(|k| self.dist2(q, s0 + k as f64 * stride))
            .collect();

        let mut candidates = Vec::new();
        for k in 0..=n {
            let left = if k == 0 { f64::INFINITY } else { samples[k - 1] };
            let right = if k == n { f64::INFINITY } else { samples[k + 1] };
            if samples[k] <= left && samples[k] <= right {
                let sk = s0 + k as f64 * stride;
                let s = self.refine(q, sk - stride, sk + stride);
                candidates.push((self.dist2(q, s), s));
            }
        }
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        candidates.dedup_by(|a, b| (a.1 - b.1).abs() < 2.0 * stride);
        let (best_d2, best_s) = candidates[0];
        let proj = self.make_projection(best_s, q);
        if proj.rho.abs() >= self.r0() {
            if let Some(&(d2, s)) = candidates
                .iter()
                .skip(1)
                .find(|(_, s)| (s - best_s).abs() >= 2.0 * stride)
            {
                if d2.sqrt() - best_d2.sqrt() <= TIE_TOL {
                    return Err(Error::ProjectionAmbiguous {
                        rho: proj.rho,
                        s_a: best_s,
                        s_b: s,
                    });
                }
            }
        }
        Ok(proj)
    }
}

fn check_kappa0(kappa0: f64) -> Result<()> {
    if kappa0 > 0.0 && kappa0.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("kappa0 must be positive, got {kappa0}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ccw() -> Path {
        Path::circle(Vector2::zeros(), 1000.0, Direction::Ccw, 0.002).unwrap()
    }

    pub(crate) fn table_path() -> Path {
        let wp: Vec<_> = [
            (0.0, 0.0),
            (2006.43, 1996.54),
            (4013.47, 0.0),
            (6019.83, -1997.26),
            (8026.83, 0.0),
            (10033.19, 1997.87),
            (12040.19, 0.0),
        ]
        .iter()
        .map(|&(x, y)| Vector2::new(x, y))
        .collect();
        Path::bspline(&wp, 0.002).unwrap()
    }

    #[test]
    fn circle_anchor_points() {
        let p = ccw();
        assert_abs_diff_eq!(p.point_at(0.0), Vector2::new(1000.0, 0.0), epsilon = 1e-9);
        assert_abs_diff_eq!(p.point_at(500.0 * PI), Vector2::new(0.0, 1000.0), epsilon = 1e-9);
        assert_abs_diff_eq!(p.point_at(1000.0 * PI), Vector2::new(-1000.0, 0.0), epsilon = 1e-9);
        assert_abs_diff_eq!(p.point_at(2000.0 * PI + 10.0), p.point_at(10.0), epsilon = 1e-9);
        assert_eq!(p.curvature_at(123.0), 0.001);
    }

    #[test]
    fn spline_starts_at_first_waypoint() {
        assert_abs_diff_eq!(table_path().point_at(0.0), Vector2::zeros(), epsilon = 1e-9);
    }

    #[test]
    fn circle_interior_is_left() {
        let p = ccw().project(Vector2::new(600.0, 0.0), None).unwrap();
        assert_abs_diff_eq!(p.s, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.rho, 400.0, epsilon = 1e-9);
        let on = ccw().project(Vector2::new(1000.0, 0.0), None).unwrap();
        assert_abs_diff_eq!(on.rho, 0.0, epsilon = 1e-12);

        let cw = Path::circle(Vector2::zeros(), 1000.0, Direction::Cw, 0.002).unwrap();
        let p = cw.project(Vector2::new(600.0, 0.0), None).unwrap();
        assert_abs_diff_eq!(p.rho, -400.0, epsilon = 1e-9);
        assert_eq!(cw.curvature_at(0.0), -0.001);
        assert_abs_diff_eq!(p.tangent_angle, -PI / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn circle_projection_matches_brute_force() {
        let p = ccw();
        let q = Vector2::new(-420.0, 777.0);
        let proj = p.project(q, None).unwrap();
        let c = p.total_length();
        let n = 1_000_000;
        let (mut best, mut best_s) = (f64::INFINITY, 0.0);
        for k in 0..n {
            let s = c * k as f64 / n as f64;
            let d = (q - p.point_at(s)).norm();
            if d < best {
                best = d;
                best_s = s;
            }
        }
        assert!((proj.s - best_s).abs() < c / n as f64 + 1e-9);
        assert!((proj.rho.abs() - best).abs() < 1e-6);
        assert!(proj.rho > 0.0);
    }

    #[test]
    fn line_right_side_is_negative() {
        let l = Path::line(Vector2::zeros(), 0.0, 0.002).unwrap();
        let p = l.project(Vector2::new(3.0, -2.0), None).unwrap();
        assert_eq!(p.rho, -2.0);
        assert_eq!(p.s, 3.0);
        assert_eq!(l.curvature_at(5.0), 0.0);
    }

    #[test]
    fn arc_distance_wraps_forward() {
        let p = ccw();
        let c = p.total_length();
        assert_abs_diff_eq!(p.arc_distance(0.0, 1000.0 * PI / 3.0), 1047.1975511965977, epsilon = 1e-9);
        assert_eq!(p.arc_distance(5.0, 5.0), 0.0);
        assert_abs_diff_eq!(p.arc_distance(c - 1.0, 1.0), 2.0, epsilon = 1e-9);
        let l = Path::line(Vector2::zeros(), 0.0, 0.002).unwrap();
        assert_eq!(l.arc_distance(10.0, 4.0), -6.0);
    }

    #[test]
    fn spline_projection_round_trip_and_orthogonality() {
        let p = table_path();
        let len = p.total_length();
        let mut s = 0.0;
        while s <= len {
            let proj = p.project(p.point_at(s), None).unwrap();
            assert!((proj.s - s).abs() < 1e-6, "s = {s}, got {}", proj.s);
            s += 97.3;
        }
        for (k, s) in [100.0, 2500.0, 6000.0, 9000.0].into_iter().enumerate() {
            let n = Vector2::new(-p.tangent(s).y, p.tangent(s).x);
            let rho = [-300.0, 150.0, 350.0, -50.0][k];
            let q = p.point_at(s) + n * rho;
            for hint in [None, Some(s + 5.0)] {
                let proj = p.project(q, hint).unwrap();
                let t = q - proj.point;
                assert!(t.dot(&p.tangent(proj.s)).abs() <= 1e-9 * t.norm().max(1.0));
                assert!((proj.rho - rho).abs() < 1e-6, "{} vs {rho}", proj.rho);
            }
        }
    }

    #[test]
    fn spline_extension_before_start() {
        let p = table_path();
        let t0 = p.tangent(0.0);
        let q = -t0 * 30.0 + Vector2::new(-t0.y, t0.x) * 10.0;
        let proj = p.project(q, None).unwrap();
        assert_abs_diff_eq!(proj.s, -30.0, epsilon = 1e-6);
        assert_abs_diff_eq!(proj.rho, 10.0, epsilon = 1e-6);
    }

    #[test]
    fn spline_curvature_below_bound() {
        let p = table_path();
        let mut s = 0.0;
        while s <= p.total_length() {
            assert!(p.curvature_at(s).abs() < 0.002);
            s += ARC_TABLE_STEP;
        }
    }

    #[test]
    fn tight_circle_rejected() {
        assert!(matches!(
            Path::circle(Vector2::zeros(), 400.0, Direction::Ccw, 0.002),
            Err(Error::CurvatureBoundExceeded { .. })
        ));
    }

    #[test]
    fn lonlat_matches_waypoint_table() {
        let lon = [113.2167, 113.2371, 113.2167, 113.1963, 113.2167, 113.2371, 113.2167];
        let lat = [28.2029, 28.2209, 28.2390, 28.2570, 28.2751, 28.2931, 28.3112];
        let xy = [
            (0.0, 0.0),
            (2006.43, 1996.54),
            (4013.47, 0.0),
            (6019.83, -1997.26),
            (8026.83, 0.0),
            (10033.19, 1997.87),
            (12040.19, 0.0),
        ];
        for k in 0..7 {
            let p = lonlat_to_local(lon[k], lat[k], lon[0], lat[0]);
            assert!((p - Vector2::new(xy[k].0, xy[k].1)).norm() < 10.0, "waypoint {k}: {p:?}");
        }
    }

    #[test]
    fn wrap_is_half_open() {
        assert_eq!(wrap_angle(PI), -PI);
        assert_eq!(wrap_angle(-PI), -PI);
        assert_abs_diff_eq!(wrap_angle(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-12);
    }
}
