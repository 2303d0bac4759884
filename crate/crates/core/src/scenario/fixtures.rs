//! Small hand-built networks for tests and examples.

use super::generate::synthesize_program;
use super::network::*;
use super::DEFAULT_SPEED_LIMIT;

/// Four-arm junction (node 0) with one lane per direction on each arm.
/// Arm `k` in 1..=4 lies east, north, west, south; its inbound lane is
/// `2(k-1)` and its outbound lane `2(k-1)+1`. Every non-U-turn movement has a
/// connection. With `signalized`, node 0 is controller 0 running the
/// synthesized two-approach-group program.
pub fn cross(arm_length: f64, signalized: bool) -> RoadNetwork {
    let pos = [(0.0, 0.0), (arm_length, 0.0), (0.0, arm_length), (-arm_length, 0.0), (0.0, -arm_length)];
    let tsc = signalized.then_some(TscId(0));
    let intersections = pos
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| Intersection { id: IntersectionId(i), x, y, tsc: if i == 0 { tsc } else { None } })
        .collect();
    let mut edges = Vec::new();
    let mut lanes = Vec::new();
    for arm in 1..5 {
        for (from, to) in [(arm, 0), (0, arm)] {
            let id = edges.len();
            edges.push(Edge { id: EdgeId(id), from: IntersectionId(from), to: IntersectionId(to), length: arm_length, lane_count: 1 });
            lanes.push(Lane { id: LaneId(id), edge: EdgeId(id), index: 0, length: arm_length, speed_limit: DEFAULT_SPEED_LIMIT });
        }
    }
    let mut net = RoadNetwork { intersections, edges, lanes, connections: vec![], programs: vec![] };
    for a in 1..5usize {
        for b in 1..5usize {
            if a != b {
                let id = net.connections.len();
                net.connections.push(Connection {
                    id: ConnectionId(id),
                    intersection: IntersectionId(0),
                    from_lane: cross_inbound(a),
                    to_lane: cross_outbound(b),
                    tsc,
                });
            }
        }
    }
    if signalized {
        let phases = synthesize_program(&net, IntersectionId(0), DEFAULT_GREEN_DURATION);
        net.programs.push(PhaseProgram { tsc: TscId(0), phases });
    }
    net
}

pub fn cross_inbound(arm: usize) -> LaneId {
    LaneId(2 * (arm - 1))
}

pub fn cross_outbound(arm: usize) -> LaneId {
    LaneId(2 * (arm - 1) + 1)
}

/// Two lanes in a row joined by one signalized connection at node 1:
/// lane 0 runs from node 0 into node 1, lane 1 from node 1 to node 2.
pub fn single_connection(length: f64) -> RoadNetwork {
    let intersections = (0..3)
        .map(|i| Intersection {
            id: IntersectionId(i),
            x: (i as f64 - 1.0) * length,
            y: 0.0,
            tsc: (i == 1).then_some(TscId(0)),
        })
        .collect();
    let edges = (0..2)
        .map(|i| Edge { id: EdgeId(i), from: IntersectionId(i), to: IntersectionId(i + 1), length, lane_count: 1 })
        .collect();
    let lanes = (0..2)
        .map(|i| Lane { id: LaneId(i), edge: EdgeId(i), index: 0, length, speed_limit: DEFAULT_SPEED_LIMIT })
        .collect();
    let connections = vec![Connection {
        id: ConnectionId(0),
        intersection: IntersectionId(1),
        from_lane: LaneId(0),
        to_lane: LaneId(1),
        tsc: Some(TscId(0)),
    }];
    let open = vec![OpenConnection { connection: ConnectionId(0), priority: true }];
    let programs = vec![PhaseProgram {
        tsc: TscId(0),
        phases: vec![
            Phase { kind: PhaseKind::Green, duration: DEFAULT_GREEN_DURATION, open: open.clone() },
            Phase { kind: PhaseKind::Yellow, duration: YELLOW_DURATION, open },
        ],
    }];
    RoadNetwork { intersections, edges, lanes, connections, programs }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_validates() {
        cross(150.0, true).validate(ValidationProfile::Generated).unwrap();
        cross(150.0, false).validate(ValidationProfile::Structural).unwrap();
        assert_eq!(cross(150.0, true).programs[0].phases.len(), 4);
        single_connection(150.0).validate(ValidationProfile::Structural).unwrap();
    }
}
