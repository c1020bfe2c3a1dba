//! Pre-neighbor relations and arc distances between UAVs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::paths::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    /// All UAVs share one path; pre-neighbors follow the order of their
    /// projections along it.
    #[default]
    Cyclic,
    /// Each UAV follows its own translated copy of a path and the
    /// pre-neighbor chain is fixed by configuration.
    Tree,
}

/// Where a UAV currently projects onto its path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionInfo {
    pub id: u32,
    pub s: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UavCoordination {
    pub id: u32,
    pub s: f64,
    pub eligible: bool,
    pub pre_neighbor: Option<u32>,
    /// Arc distance to the pre-neighbor; `None` without one.
    pub zeta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoordinationState {
    pub topology: Topology,
    /// Desired arc distance.
    pub l: f64,
    /// Closed-path length, if the relation is cyclic on a closed path.
    pub period: Option<f64>,
    /// One entry per UAV, in the order the projections were supplied.
    pub uavs: Vec<UavCoordination>,
}

fn eligible(p: &ProjectionInfo, r0: f64) -> bool {
    p.rho.abs() < r0
}

/// Orders UAVs sharing `path` by projection (ties by ascending label) and
/// makes each one's pre-neighbor the next in that order.
pub fn update_pre_neighbors(projections: &[ProjectionInfo], path: &Path, l: f64) -> CoordinationState {
    let r0 = path.r0();
    let closed = path.is_closed();
    let period = closed.then(|| path.total_length());
    let key = |s: f64| match period {
        Some(c) => s.rem_euclid(c),
        None => s,
    };
    let mut order: Vec<usize> = (0..projections.len())
        .filter(|&i| eligible(&projections[i], r0))
        .collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (&projections[i], &projections[j]);
        key(a.s).total_cmp(&key(b.s)).then(a.id.cmp(&b.id))
    });

    let mut uavs: Vec<UavCoordination> = projections
        .iter()
        .map(|p| UavCoordination {
            id: p.id,
            s: p.s,
            eligible: eligible(p, r0),
            pre_neighbor: None,
            zeta: None,
        })
        .collect();

    let n = order.len();
    if n >= 2 {
        for k in 0..n {
            let next = if k + 1 < n {
                order[k + 1]
            } else if closed {
                order[0]
            } else {
                continue;
            };
            let (i, j) = (order[k], next);
            let mut zeta = path.arc_distance(projections[i].s, projections[j].s);
            if k + 1 == n && zeta == 0.0 {
                if let Some(c) = period {
                    zeta = c;
                }
            }
            uavs[i].pre_neighbor = Some(projections[j].id);
            uavs[i].zeta = Some(zeta);
        }
    }
    CoordinationState {
        topology: Topology::Cyclic,
        l,
        period,
        uavs,
    }
}

/// Fixed-chain relation for UAVs on translated copies of an open path.
/// `chain` maps a UAV to its configured pre-neighbor; `ζ` is the signed
/// difference of arc positions.
pub fn update_tree(projections: &[ProjectionInfo], chain: &BTreeMap<u32, u32>, r0: f64, l: f64) -> CoordinationState {
    let by_id: BTreeMap<u32, &ProjectionInfo> = projections.iter().map(|p| (p.id, p)).collect();
    let uavs = projections
        .iter()
        .map(|p| {
            let me_ok = eligible(p, r0);
            let pre = chain
                .get(&p.id)
                .and_then(|j| by_id.get(j))
                .filter(|q| me_ok && eligible(q, r0));
            UavCoordination {
                id: p.id,
                s: p.s,
                eligible: me_ok,
                pre_neighbor: pre.map(|q| q.id),
                zeta: pre.map(|q| q.s - p.s),
            }
        })
        .collect();
    CoordinationState {
        topology: Topology::Tree,
        l,
        period: None,
        uavs,
    }
}

impl CoordinationState {
    pub fn get(&self, id: u32) -> Option<&UavCoordination> {
        self.uavs.iter().find(|u| u.id == id)
    }

    /// Arc distance used by the control law: the measured one, or `L` when
    /// the UAV has no pre-neighbor.
    pub fn compute_zeta(&self, id: u32) -> f64 {
        self.get(id).and_then(|u| u.zeta).unwrap_or(self.l)
    }

    fn wrapped_gap(&self, from: f64, to: f64) -> f64 {
        let d = to - from;
        match self.period {
            Some(c) => (d + 0.5 * c).rem_euclid(c) - 0.5 * c,
            None => d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OvertakingKind {
    PreNeighborChanged { from: Option<u32>, to: Option<u32> },
    ZeroCrossing { other: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OvertakingEvent {
    pub uav: u32,
    pub kind: OvertakingKind,
}

/// Sign flips of the gap below this magnitude are treated as jitter.
pub const CROSSING_THRESHOLD: f64 = 1e-6;

/// Events between two consecutive coordination snapshots: a changed
/// pre-neighbor, or the gap to an unchanged pre-neighbor changing sign.
pub fn detect_overtaking(prev: &CoordinationState, curr: &CoordinationState) -> Vec<OvertakingEvent> {
    let mut events = Vec::new();
    for now in &curr.uavs {
        let Some(before) = prev.get(now.id) else {
            continue;
        };
        if before.pre_neighbor != now.pre_neighbor {
            events.push(OvertakingEvent {
                uav: now.id,
                kind: OvertakingKind::PreNeighborChanged {
                    from: before.pre_neighbor,
                    to: now.pre_neighbor,
                },
            });
            continue;
        }
        let Some(j) = now.pre_neighbor else {
            continue;
        };
        let (Some(jb), Some(jn)) = (prev.get(j), curr.get(j)) else {
            continue;
        };
        let g0 = prev.wrapped_gap(before.s, jb.s);
        let g1 = curr.wrapped_gap(now.s, jn.s);
        let flipped = (g0 > CROSSING_THRESHOLD && g1 < -CROSSING_THRESHOLD)
            || (g0 < -CROSSING_THRESHOLD && g1 > CROSSING_THRESHOLD);
        // A jump across half the period is the wrap, not a crossing.
        let continuous = curr.period.is_none_or(|c| (g1 - g0).abs() < 0.25 * c);
        if flipped && continuous {
            events.push(OvertakingEvent {
                uav: now.id,
                kind: OvertakingKind::ZeroCrossing { other: j },
            });
        }
    }
    events
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::Direction;
    use approx::assert_abs_diff_eq;
    use nalgebra::Vector2;
    use std::f64::consts::PI;

    fn circle() -> Path {
        Path::circle(Vector2::zeros(), 1000.0, Direction::Ccw, 0.002).unwrap()
    }

    fn proj(id: u32, s: f64) -> ProjectionInfo {
        ProjectionInfo { id, s, rho: 0.0 }
    }

    #[test]
    fn cyclic_ordering_wraps() {
        let st = update_pre_neighbors(&[proj(0, 0.0), proj(1, 100.0), proj(2, 200.0)], &circle(), 1000.0);
        assert_eq!(st.get(0).unwrap().pre_neighbor, Some(1));
        assert_eq!(st.get(1).unwrap().pre_neighbor, Some(2));
        assert_eq!(st.get(2).unwrap().pre_neighbor, Some(0));
        let total: f64 = st.uavs.iter().map(|u| u.zeta.unwrap()).sum();
        assert_abs_diff_eq!(total, 2000.0 * PI, epsilon = 1e-9);
    }

    #[test]
    fn coincident_projections_order_by_label() {
        let st = update_pre_neighbors(&[proj(5, 300.0), proj(2, 300.0), proj(7, 900.0)], &circle(), 1000.0);
        assert_eq!(st.get(2).unwrap().pre_neighbor, Some(5));
        assert_eq!(st.compute_zeta(2), 0.0);
        assert_eq!(st.get(5).unwrap().pre_neighbor, Some(7));
    }

    #[test]
    fn far_uav_excluded() {
        let far = ProjectionInfo { id: 9, s: 50.0, rho: 600.0 };
        let st = update_pre_neighbors(&[proj(0, 0.0), far, proj(1, 100.0)], &circle(), 1000.0);
        assert_eq!(st.get(0).unwrap().pre_neighbor, Some(1));
        assert_eq!(st.get(9).unwrap().pre_neighbor, None);
        assert_eq!(st.compute_zeta(9), 1000.0);
        assert!(!st.get(9).unwrap().eligible);
    }

    #[test]
    fn zeta_examples() {
        let st = update_pre_neighbors(&[proj(0, 0.0), proj(1, 1047.2)], &circle(), 1000.0 * PI / 3.0);
        assert_abs_diff_eq!(st.compute_zeta(0), 1047.2, epsilon = 1e-9);
        let lone = update_pre_neighbors(&[proj(0, 0.0)], &circle(), 1000.0 * PI / 3.0);
        assert_abs_diff_eq!(lone.compute_zeta(0), 1047.197, epsilon = 1e-3);
    }

    #[test]
    fn open_path_is_a_chain() {
        let line = Path::line(Vector2::zeros(), 0.0, 0.002).unwrap();
        let st = update_pre_neighbors(&[proj(0, 0.0), proj(1, 100.0), proj(2, 50.0)], &line, 0.0);
        assert_eq!(st.get(0).unwrap().pre_neighbor, Some(2));
        assert_eq!(st.get(2).unwrap().pre_neighbor, Some(1));
        assert_eq!(st.get(1).unwrap().pre_neighbor, None);
    }

    #[test]
    fn tree_uses_signed_differences() {
        let chain: BTreeMap<u32, u32> = [(2, 1), (3, 2)].into_iter().collect();
        let st = update_tree(&[proj(1, 100.0), proj(2, 120.0), proj(3, 90.0)], &chain, 500.0, 0.0);
        assert_eq!(st.get(1).unwrap().zeta, None);
        assert_eq!(st.get(2).unwrap().zeta, Some(-20.0));
        assert_eq!(st.get(3).unwrap().zeta, Some(30.0));
    }

    #[test]
    fn overtaking_detection() {
        let c = circle();
        let a = update_pre_neighbors(&[proj(1, 0.0), proj(2, 100.0), proj(3, 200.0)], &c, 1000.0);
        assert!(detect_overtaking(&a, &a).is_empty());
        let b = update_pre_neighbors(&[proj(1, 0.0), proj(2, 100.0), proj(3, 99.0)], &c, 1000.0);
        let ev = detect_overtaking(&a, &b);
        assert!(ev.iter().any(|e| e.uav == 3));
        assert!(ev.iter().all(|e| matches!(e.kind, OvertakingKind::PreNeighborChanged { .. })));

        let chain: BTreeMap<u32, u32> = [(2, 1)].into_iter().collect();
        let t0 = update_tree(&[proj(1, 10.0), proj(2, 5.0)], &chain, 500.0, 0.0);
        let t1 = update_tree(&[proj(1, 10.0), proj(2, 11.0)], &chain, 500.0, 0.0);
        let ev = detect_overtaking(&t0, &t1);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].kind, OvertakingKind::ZeroCrossing { other: 1 });
    }

    #[test]
    fn half_period_gap_is_not_a_crossing() {
        let c = circle();
        let half = 1000.0 * PI;
        let a = update_pre_neighbors(&[proj(1, 0.0), proj(2, half - 0.01)], &c, 1000.0);
        let b = update_pre_neighbors(&[proj(1, 0.0), proj(2, half + 0.01)], &c, 1000.0);
        assert!(detect_overtaking(&a, &b).is_empty());
    }
}
