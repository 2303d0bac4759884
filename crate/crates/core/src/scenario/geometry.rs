//! Movement geometry at an intersection: turn direction and pairwise
//! conflicts between connections. Roads are ordered counterclockwise around
//! the junction; traffic drives on the right.

use std::f64::consts::PI;

use super::network::{ConnectionId, IntersectionId, RoadNetwork};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Turn {
    Left,
    Right,
    Straight,
}

impl Turn {
    /// Higher rank keeps priority when two open movements conflict.
    pub fn rank(self) -> u8 {
        match self {
            Turn::Straight => 2,
            Turn::Right => 1,
            Turn::Left => 0,
        }
    }
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Direction (radians) from `at` towards `other`.
pub fn bearing(net: &RoadNetwork, at: IntersectionId, other: IntersectionId) -> f64 {
    let a = &net.intersections[at.index()];
    let b = &net.intersections[other.index()];
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    if dx == 0.0 && dy == 0.0 {
        0.0
    } else {
        dy.atan2(dx)
    }
}

/// Signed heading change (radians, counterclockwise positive) of a vehicle
/// arriving from `from` and leaving towards `to` through `at`.
pub fn turn_angle(net: &RoadNetwork, at: IntersectionId, from: IntersectionId, to: IntersectionId) -> f64 {
    wrap_angle(bearing(net, at, to) - bearing(net, at, from) - PI)
}

/// Turn made by a vehicle arriving from `from` and leaving towards `to`
/// through junction `at`.
pub fn classify_turn(net: &RoadNetwork, at: IntersectionId, from: IntersectionId, to: IntersectionId) -> Turn {
    let delta = turn_angle(net, at, from, to);
    if delta > PI / 4.0 {
        Turn::Left
    } else if delta < -PI / 4.0 {
        Turn::Right
    } else {
        Turn::Straight
    }
}

pub fn connection_turn(net: &RoadNetwork, conn: ConnectionId) -> Turn {
    let c = &net.connections[conn.index()];
    let from = net.edge_of(c.from_lane).from;
    let to = net.edge_of(c.to_lane).to;
    classify_turn(net, c.intersection, from, to)
}

/// True when the two roads meeting at `at` point in roughly opposite
/// directions.
pub fn opposite(net: &RoadNetwork, at: IntersectionId, a: IntersectionId, b: IntersectionId) -> bool {
    wrap_angle(bearing(net, at, a) - bearing(net, at, b)).abs() >= 0.75 * PI
}

/// Neighbouring junctions of `at` sorted counterclockwise (ties by id).
pub fn sides(net: &RoadNetwork, at: IntersectionId) -> Vec<IntersectionId> {
    let mut ns: Vec<IntersectionId> = net
        .edges
        .iter()
        .filter_map(|e| {
            if e.from == at {
                Some(e.to)
            } else if e.to == at {
                Some(e.from)
            } else {
                None
            }
        })
        .collect();
    ns.sort();
    ns.dedup();
    ns.sort_by(|a, b| {
        let ka = bearing(net, at, *a).rem_euclid(2.0 * PI);
        let kb = bearing(net, at, *b).rem_euclid(2.0 * PI);
        ka.total_cmp(&kb).then(a.cmp(b))
    });
    ns
}

/// Conflict test between connections of one junction. Movements conflict
/// when they merge into the same lane from different lanes, or when their
/// paths cross. Each road contributes an outgoing point followed by an
/// incoming point on a counterclockwise circle; two paths cross when their
/// endpoints interleave.
pub struct ConflictOracle {
    sides: Vec<IntersectionId>,
}

impl ConflictOracle {
    pub fn new(net: &RoadNetwork, at: IntersectionId) -> Self {
        Self { sides: sides(net, at) }
    }

    fn side_index(&self, node: IntersectionId) -> usize {
        self.sides.iter().position(|s| *s == node).unwrap_or(0)
    }

    fn chord(&self, net: &RoadNetwork, conn: ConnectionId) -> (usize, usize) {
        let c = &net.connections[conn.index()];
        let from = net.edge_of(c.from_lane).from;
        let to = net.edge_of(c.to_lane).to;
        (2 * self.side_index(from) + 1, 2 * self.side_index(to))
    }

    pub fn conflict(&self, net: &RoadNetwork, a: ConnectionId, b: ConnectionId) -> bool {
        if a == b {
            return false;
        }
        let ca = &net.connections[a.index()];
        let cb = &net.connections[b.index()];
        if ca.to_lane == cb.to_lane {
            return ca.from_lane != cb.from_lane;
        }
        let (p1, p2) = self.chord(net, a);
        let (q1, q2) = self.chord(net, b);
        if p1 == q1 || p1 == q2 || p2 == q1 || p2 == q2 {
            return false;
        }
        let (lo, hi) = if p1 < p2 { (p1, p2) } else { (p2, p1) };
        let inside = |x: usize| x > lo && x < hi;
        inside(q1) != inside(q2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::network::*;

    /// Four-arm junction at the origin with one lane per direction.
    fn cross() -> RoadNetwork {
        let pos = [(0.0, 0.0), (150.0, 0.0), (0.0, 150.0), (-150.0, 0.0), (0.0, -150.0)];
        let intersections = pos
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| Intersection { id: IntersectionId(i), x, y, tsc: None })
            .collect();
        let mut edges = Vec::new();
        let mut lanes = Vec::new();
        for arm in 1..5 {
            for (from, to) in [(arm, 0), (0, arm)] {
                let id = edges.len();
                edges.push(Edge {
                    id: EdgeId(id),
                    from: IntersectionId(from),
                    to: IntersectionId(to),
                    length: 150.0,
                    lane_count: 1,
                });
                lanes.push(Lane { id: LaneId(id), edge: EdgeId(id), index: 0, length: 150.0, speed_limit: 13.89 });
            }
        }
        let mut net = RoadNetwork { intersections, edges, lanes, connections: vec![], programs: vec![] };
        // incoming lane of arm k is 2(k-1), outgoing is 2(k-1)+1
        for a in 1..5usize {
            for b in 1..5usize {
                if a != b {
                    let id = net.connections.len();
                    net.connections.push(Connection {
                        id: ConnectionId(id),
                        intersection: IntersectionId(0),
                        from_lane: LaneId(2 * (a - 1)),
                        to_lane: LaneId(2 * (b - 1) + 1),
                        tsc: None,
                    });
                }
            }
        }
        net
    }

    fn conn(net: &RoadNetwork, from_arm: usize, to_arm: usize) -> ConnectionId {
        net.find_connection(LaneId(2 * (from_arm - 1)), LaneId(2 * (to_arm - 1) + 1)).unwrap()
    }

    #[test]
    fn turns_for_driving_on_the_right() {
        let net = cross();
        // arms: 1 east, 2 north, 3 west, 4 south
        assert_eq!(connection_turn(&net, conn(&net, 2, 4)), Turn::Straight);
        assert_eq!(connection_turn(&net, conn(&net, 2, 1)), Turn::Left);
        assert_eq!(connection_turn(&net, conn(&net, 2, 3)), Turn::Right);
    }

    #[test]
    fn opposing_straights_do_not_conflict_but_left_turn_does() {
        let net = cross();
        let o = ConflictOracle::new(&net, IntersectionId(0));
        let n_straight = conn(&net, 2, 4);
        let s_straight = conn(&net, 4, 2);
        let n_left = conn(&net, 2, 1);
        let n_right = conn(&net, 2, 3);
        let s_left = conn(&net, 4, 3);
        assert!(!o.conflict(&net, n_straight, s_straight));
        assert!(o.conflict(&net, n_left, s_straight));
        assert!(!o.conflict(&net, n_right, s_straight));
        // both reach the single west-bound lane
        assert!(o.conflict(&net, n_right, s_left));
        // crossing straights from adjacent arms
        assert!(o.conflict(&net, n_straight, conn(&net, 1, 3)));
    }

    #[test]
    fn opposite_arms() {
        let net = cross();
        let at = IntersectionId(0);
        assert!(opposite(&net, at, IntersectionId(1), IntersectionId(3)));
        assert!(!opposite(&net, at, IntersectionId(1), IntersectionId(2)));
    }
}
