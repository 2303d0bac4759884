//! Seeded random road networks: a few signalized junctions on a grid,
//! each with dead-end arms so that traffic can enter and leave.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::geometry::{classify_turn, connection_turn, opposite, sides, turn_angle, ConflictOracle, Turn};
use super::network::*;
use super::ScenarioError;

/// 50 km/h.
pub const DEFAULT_SPEED_LIMIT: f64 = 13.89;

const GRID_SPACING: f64 = 200.0;
const DIRS: [(i32, i32); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

#[derive(Clone, Debug, PartialEq)]
pub struct GenerationParams {
    pub min_intersections: usize,
    pub max_intersections: usize,
    pub min_edge_length: f64,
    pub max_edge_length: f64,
    /// Lanes per directed edge.
    pub min_lanes: usize,
    pub max_lanes: usize,
    /// Probability that two adjacent junctions not joined by the spanning
    /// tree get a road anyway.
    pub extra_road_probability: f64,
    pub green_duration: f64,
    pub speed_limit: f64,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            min_intersections: 2,
            max_intersections: 6,
            min_edge_length: MIN_EDGE_LENGTH,
            max_edge_length: MAX_EDGE_LENGTH,
            min_lanes: 1,
            max_lanes: 2,
            extra_road_probability: 0.5,
            green_duration: DEFAULT_GREEN_DURATION,
            speed_limit: DEFAULT_SPEED_LIMIT,
        }
    }
}

impl GenerationParams {
    pub fn with_intersections(n: usize) -> Self {
        Self { min_intersections: n, max_intersections: n, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: &str| Err(ScenarioError::InvalidParams(m.to_string()));
        if self.min_intersections == 0 {
            return bad("at least one intersection is required");
        }
        if self.max_intersections < self.min_intersections || self.max_intersections > 64 {
            return bad("intersection bounds must satisfy 1 <= min <= max <= 64");
        }
        if !(self.min_edge_length >= MIN_EDGE_LENGTH
            && self.max_edge_length <= MAX_EDGE_LENGTH
            && self.min_edge_length <= self.max_edge_length)
        {
            return bad("edge lengths must lie within [100, 200] m");
        }
        if self.min_lanes < MIN_LANES_PER_EDGE || self.max_lanes > MAX_LANES_PER_EDGE || self.min_lanes > self.max_lanes {
            return bad("lanes per edge must lie within [1, 4]");
        }
        if !(0.0..=1.0).contains(&self.extra_road_probability) {
            return bad("extra road probability must lie in [0, 1]");
        }
        if !(self.green_duration >= MIN_SWITCH_INTERVAL as f64) || !(self.speed_limit > 0.0) {
            return bad("green duration must be at least 5 s and the speed limit positive");
        }
        Ok(())
    }
}

/// Generates a network as a pure function of `seed` and `params`.
pub fn generate_network(seed: u64, params: &GenerationParams) -> Result<RoadNetwork, ScenarioError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(params.min_intersections..=params.max_intersections);

    // Grow a connected set of grid cells, remembering the tree edges.
    let mut cells: Vec<(i32, i32)> = vec![(0, 0)];
    let mut roads: BTreeSet<(usize, usize)> = BTreeSet::new();
    while cells.len() < n {
        let base = rng.random_range(0..cells.len());
        let (dx, dy) = DIRS[rng.random_range(0..4)];
        let cand = (cells[base].0 + dx, cells[base].1 + dy);
        if !cells.contains(&cand) {
            cells.push(cand);
            roads.insert((base, cells.len() - 1));
        }
    }
    for a in 0..n {
        for b in (a + 1)..n {
            let (ca, cb) = (cells[a], cells[b]);
            let adjacent = (ca.0 - cb.0).abs() + (ca.1 - cb.1).abs() == 1;
            if adjacent && !roads.contains(&(a, b)) && rng.random_bool(params.extra_road_probability) {
                roads.insert((a, b));
            }
        }
    }

    let mut intersections: Vec<Intersection> = cells
        .iter()
        .enumerate()
        .map(|(i, &(cx, cy))| Intersection {
            id: IntersectionId(i),
            x: cx as f64 * GRID_SPACING,
            y: cy as f64 * GRID_SPACING,
            tsc: None,
        })
        .collect();
    let mut road_list: Vec<(usize, usize)> = roads.into_iter().collect();

    // Dead-end arms on free sides until each junction has 3 or 4 arms.
    for j in 0..n {
        let degree = road_list.iter().filter(|&&(a, b)| a == j || b == j).count();
        let target = rng.random_range(3..=4usize);
        let mut free: Vec<(i32, i32)> = DIRS
            .iter()
            .copied()
            .filter(|&(dx, dy)| {
                let cell = (cells[j].0 + dx, cells[j].1 + dy);
                !cells.contains(&cell)
            })
            .collect();
        free.shuffle(&mut rng);
        let wanted = target.saturating_sub(degree).min(free.len());
        for &(dx, dy) in free.iter().take(wanted) {
            let id = intersections.len();
            intersections.push(Intersection {
                id: IntersectionId(id),
                x: cells[j].0 as f64 * GRID_SPACING + dx as f64 * GRID_SPACING * 0.5,
                y: cells[j].1 as f64 * GRID_SPACING + dy as f64 * GRID_SPACING * 0.5,
                tsc: None,
            });
            road_list.push((j, id));
        }
    }

    let mut edges = Vec::new();
    let mut lanes = Vec::new();
    for &(a, b) in &road_list {
        let length = round_cm(rng.random_range(params.min_edge_length..=params.max_edge_length));
        for (from, to) in [(a, b), (b, a)] {
            let lane_count = rng.random_range(params.min_lanes..=params.max_lanes);
            let id = EdgeId(edges.len());
            edges.push(Edge { id, from: IntersectionId(from), to: IntersectionId(to), length, lane_count });
            for index in 0..lane_count {
                lanes.push(Lane { id: LaneId(lanes.len()), edge: id, index, length, speed_limit: params.speed_limit });
            }
        }
    }

    let mut net = RoadNetwork { intersections, edges, lanes, connections: vec![], programs: vec![] };
    for j in 0..n {
        let at = IntersectionId(j);
        let approaches = net.edges.iter().filter(|e| e.to == at).count();
        if approaches >= 2 {
            let tsc = TscId(net.programs.len());
            net.intersections[j].tsc = Some(tsc);
            net.programs.push(PhaseProgram { tsc, phases: vec![] });
            add_connections(&mut net, at);
            let phases = synthesize_program(&net, at, params.green_duration);
            net.programs[tsc.index()].phases = phases;
        }
    }
    net.validate(ValidationProfile::Generated)?;
    Ok(net)
}

fn round_cm(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn lanes_of(net: &RoadNetwork, edge: EdgeId) -> Vec<LaneId> {
    let mut v: Vec<&Lane> = net.lanes.iter().filter(|l| l.edge == edge).collect();
    v.sort_by_key(|l| l.index);
    v.into_iter().map(|l| l.id).collect()
}

/// Lane-level movements of a junction: incoming lanes are split among the
/// outgoing directions from rightmost to leftmost; no U-turns.
fn add_connections(net: &mut RoadNetwork, at: IntersectionId) {
    let tsc = net.intersections[at.index()].tsc;
    let incoming: Vec<EdgeId> = net.edges.iter().filter(|e| e.to == at).map(|e| e.id).collect();
    for ein in incoming {
        let origin = net.edges[ein.index()].from;
        let mut outs: Vec<(EdgeId, f64)> = net
            .edges
            .iter()
            .filter(|e| e.from == at && e.to != origin)
            .map(|e| (e.id, turn_angle(net, at, origin, e.to)))
            .collect();
        if outs.is_empty() {
            continue;
        }
        // rightmost (most clockwise) first
        outs.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let in_lanes = lanes_of(net, ein);
        let k = in_lanes.len();
        let m = outs.len();
        for (j, &(eout, _)) in outs.iter().enumerate() {
            let out_lanes = lanes_of(net, eout);
            let group: Vec<usize> = if k >= m {
                (j * k / m..(j + 1) * k / m).collect()
            } else {
                vec![j * k / m]
            };
            let is_left = classify_turn(net, at, origin, net.edges[eout.index()].to) == Turn::Left;
            for (r, &li) in group.iter().enumerate() {
                let r = r.min(out_lanes.len() - 1);
                let target = if is_left { out_lanes[out_lanes.len() - 1 - r] } else { out_lanes[r] };
                let id = ConnectionId(net.connections.len());
                net.connections.push(Connection {
                    id,
                    intersection: at,
                    from_lane: in_lanes[li],
                    to_lane: target,
                    tsc,
                });
            }
        }
    }
}

/// One green phase per group of mutually compatible approaches (greedy
/// colouring in counterclockwise order, opposite approaches share a phase),
/// each followed by a 5 s yellow. Within a phase, the lower-ranked movement
/// of every conflicting pair yields.
pub fn synthesize_program(net: &RoadNetwork, at: IntersectionId, green: f64) -> Vec<Phase> {
    let conns: Vec<ConnectionId> = net.connections.iter().filter(|c| c.intersection == at).map(|c| c.id).collect();
    let mut approaches: Vec<IntersectionId> = conns.iter().map(|&c| net.edge_of(net.connections[c.index()].from_lane).from).collect();
    approaches.sort();
    approaches.dedup();
    let order = sides(net, at);
    approaches.sort_by_key(|a| order.iter().position(|s| s == a).unwrap_or(usize::MAX));

    let mut groups: Vec<Vec<IntersectionId>> = Vec::new();
    for a in approaches {
        match groups.iter_mut().find(|g| g.iter().all(|&b| opposite(net, at, a, b))) {
            Some(g) => g.push(a),
            None => groups.push(vec![a]),
        }
    }

    let oracle = ConflictOracle::new(net, at);
    let mut phases = Vec::new();
    for g in groups {
        let members: Vec<ConnectionId> = conns
            .iter()
            .copied()
            .filter(|&c| g.contains(&net.edge_of(net.connections[c.index()].from_lane).from))
            .collect();
        let open: Vec<OpenConnection> = members
            .iter()
            .map(|&c| {
                let rank = connection_turn(net, c).rank();
                let yields = members.iter().any(|&o| {
                    oracle.conflict(net, c, o) && {
                        let or = connection_turn(net, o).rank();
                        or > rank || (or == rank && o < c)
                    }
                });
                OpenConnection { connection: c, priority: !yields }
            })
            .collect();
        phases.push(Phase { kind: PhaseKind::Green, duration: green, open: open.clone() });
        phases.push(Phase { kind: PhaseKind::Yellow, duration: YELLOW_DURATION, open });
    }
    phases
}
