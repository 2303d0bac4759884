//! Static road network topology and its validator.

use std::collections::HashSet;
use std::fmt;

use super::ScenarioError;

macro_rules! index_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub usize);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

index_id!(
    /// Index of an intersection (junction node) in [`RoadNetwork::intersections`].
    IntersectionId
);
index_id!(
    /// Index of a directed edge in [`RoadNetwork::edges`].
    EdgeId
);
index_id!(
    /// Index of a lane in [`RoadNetwork::lanes`].
    LaneId
);
index_id!(
    /// Index of a lane-to-lane connection in [`RoadNetwork::connections`].
    ConnectionId
);
index_id!(
    /// Index of a traffic signal controller; also its position in
    /// [`RoadNetwork::programs`].
    TscId
);

/// Duration of every yellow phase, in seconds.
pub const YELLOW_DURATION: f64 = 5.0;
/// Minimum number of seconds between two phase switches.
pub const MIN_SWITCH_INTERVAL: u32 = 5;
/// Default green duration used by generated programs and the fixed-time baseline.
pub const DEFAULT_GREEN_DURATION: f64 = 30.0;

#[derive(Clone, Debug, PartialEq)]
pub struct Intersection {
    pub id: IntersectionId,
    pub x: f64,
    pub y: f64,
    pub tsc: Option<TscId>,
}

/// A directed road segment between two intersections.
#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub id: EdgeId,
    pub from: IntersectionId,
    pub to: IntersectionId,
    pub length: f64,
    pub lane_count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Lane {
    pub id: LaneId,
    pub edge: EdgeId,
    /// 0 is the rightmost lane.
    pub index: usize,
    pub length: f64,
    pub speed_limit: f64,
}

/// A permitted movement from the end of `from_lane` to the start of
/// `to_lane` across `intersection`.
#[derive(Clone, Debug, PartialEq)]
pub struct Connection {
    pub id: ConnectionId,
    pub intersection: IntersectionId,
    pub from_lane: LaneId,
    pub to_lane: LaneId,
    pub tsc: Option<TscId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PhaseKind {
    Green,
    Yellow,
}

impl PhaseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PhaseKind::Green => "green",
            PhaseKind::Yellow => "yellow",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OpenConnection {
    pub connection: ConnectionId,
    pub priority: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Phase {
    pub kind: PhaseKind,
    pub duration: f64,
    pub open: Vec<OpenConnection>,
}

impl Phase {
    pub fn opening(&self, conn: ConnectionId) -> Option<OpenConnection> {
        self.open.iter().copied().find(|o| o.connection == conn)
    }
}

/// Cyclic signal program of one controller.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseProgram {
    pub tsc: TscId,
    pub phases: Vec<Phase>,
}

impl PhaseProgram {
    pub fn next_index(&self, phase: usize) -> usize {
        (phase + 1) % self.phases.len()
    }

    /// Number of phase switches until `conn` is next open under a green
    /// phase, starting from `phase`, together with the priority flag of that
    /// opening. Returns `None` when the connection never opens.
    pub fn switches_to_open(&self, phase: usize, conn: ConnectionId) -> Option<(usize, bool)> {
        let n = self.phases.len();
        (0..n).find_map(|k| {
            let p = &self.phases[(phase + k) % n];
            if p.kind == PhaseKind::Green {
                p.opening(conn).map(|o| (k, o.priority))
            } else {
                None
            }
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RoadNetwork {
    pub intersections: Vec<Intersection>,
    pub edges: Vec<Edge>,
    pub lanes: Vec<Lane>,
    pub connections: Vec<Connection>,
    pub programs: Vec<PhaseProgram>,
}

/// Which set of invariants [`RoadNetwork::validate`] enforces.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValidationProfile {
    /// Structural invariants only; used for externally authored networks.
    Structural,
    /// Structural invariants plus the generator's geometric bounds
    /// (edge length in [100, 200] m, 1 to 4 lanes per edge).
    Generated,
}

pub const MIN_EDGE_LENGTH: f64 = 100.0;
pub const MAX_EDGE_LENGTH: f64 = 200.0;
pub const MIN_LANES_PER_EDGE: usize = 1;
pub const MAX_LANES_PER_EDGE: usize = 4;

fn invalid(invariant: &str, detail: String) -> ScenarioError {
    ScenarioError::Validation { invariant: invariant.to_string(), detail }
}

impl RoadNetwork {
    pub fn tsc_count(&self) -> usize {
        self.programs.len()
    }

    pub fn lane(&self, id: LaneId) -> &Lane {
        &self.lanes[id.index()]
    }

    pub fn edge_of(&self, lane: LaneId) -> &Edge {
        &self.edges[self.lanes[lane.index()].edge.index()]
    }

    pub fn program(&self, tsc: TscId) -> &PhaseProgram {
        &self.programs[tsc.index()]
    }

    /// Intersection controlled by `tsc`.
    pub fn tsc_intersection(&self, tsc: TscId) -> Option<IntersectionId> {
        self.intersections.iter().find(|i| i.tsc == Some(tsc)).map(|i| i.id)
    }

    /// Connections controlled by `tsc`, in id order.
    pub fn tsc_connections(&self, tsc: TscId) -> Vec<ConnectionId> {
        self.connections.iter().filter(|c| c.tsc == Some(tsc)).map(|c| c.id).collect()
    }

    /// Lanes leading into the intersection of `tsc` that feed one of its
    /// connections, sorted and deduplicated.
    pub fn inbound_lanes(&self, tsc: TscId) -> Vec<LaneId> {
        let mut lanes: Vec<LaneId> = self
            .connections
            .iter()
            .filter(|c| c.tsc == Some(tsc))
            .map(|c| c.from_lane)
            .collect();
        lanes.sort();
        lanes.dedup();
        lanes
    }

    /// Outgoing connections from each lane, indexed by lane.
    pub fn outgoing_by_lane(&self) -> Vec<Vec<ConnectionId>> {
        let mut out = vec![Vec::new(); self.lanes.len()];
        for c in &self.connections {
            out[c.from_lane.index()].push(c.id);
        }
        out
    }

    pub fn find_connection(&self, from: LaneId, to: LaneId) -> Option<ConnectionId> {
        self.connections
            .iter()
            .find(|c| c.from_lane == from && c.to_lane == to)
            .map(|c| c.id)
    }

    /// Checks every invariant of the given profile and reports the first
    /// violation, naming the invariant.
    pub fn validate(&self, profile: ValidationProfile) -> Result<(), ScenarioError> {
        for (i, it) in self.intersections.iter().enumerate() {
            if it.id.index() != i {
                return Err(invalid("dense-ids", format!("intersection at position {i} has id {}", it.id)));
            }
            if !(it.x.is_finite() && it.y.is_finite()) {
                return Err(invalid("finite-position", format!("intersection {i}")));
            }
        }
        let n_nodes = self.intersections.len();
        for (i, e) in self.edges.iter().enumerate() {
            if e.id.index() != i {
                return Err(invalid("dense-ids", format!("edge at position {i} has id {}", e.id)));
            }
            if e.from.index() >= n_nodes || e.to.index() >= n_nodes {
                return Err(invalid("edge-endpoints-exist", format!("edge {i}")));
            }
            if e.from == e.to {
                return Err(invalid("edge-endpoints-distinct", format!("edge {i}")));
            }
            if !(e.length.is_finite() && e.length > 0.0) {
                return Err(invalid("edge-length-positive", format!("edge {i} length {}", e.length)));
            }
            if e.lane_count == 0 {
                return Err(invalid("edge-has-lanes", format!("edge {i}")));
            }
            if profile == ValidationProfile::Generated {
                if !(MIN_EDGE_LENGTH..=MAX_EDGE_LENGTH).contains(&e.length) {
                    return Err(invalid(
                        "edge-length-bounds",
                        format!("edge {i} length {} outside [100, 200]", e.length),
                    ));
                }
                if !(MIN_LANES_PER_EDGE..=MAX_LANES_PER_EDGE).contains(&e.lane_count) {
                    return Err(invalid(
                        "lanes-per-edge-bounds",
                        format!("edge {i} has {} lanes", e.lane_count),
                    ));
                }
            }
        }
        let mut lane_slots: Vec<Vec<bool>> = self.edges.iter().map(|e| vec![false; e.lane_count]).collect();
        for (i, l) in self.lanes.iter().enumerate() {
            if l.id.index() != i {
                return Err(invalid("dense-ids", format!("lane at position {i} has id {}", l.id)));
            }
            let Some(slots) = lane_slots.get_mut(l.edge.index()) else {
                return Err(invalid("lane-edge-exists", format!("lane {i} references edge {}", l.edge)));
            };
            if l.index >= slots.len() || slots[l.index] {
                return Err(invalid("lane-index-unique", format!("lane {i} index {}", l.index)));
            }
            slots[l.index] = true;
            if !(l.length.is_finite() && l.length > 0.0) {
                return Err(invalid("lane-length-positive", format!("lane {i}")));
            }
            if !(l.speed_limit.is_finite() && l.speed_limit > 0.0) {
                return Err(invalid("lane-speed-positive", format!("lane {i}")));
            }
        }
        if let Some(e) = lane_slots.iter().position(|s| s.iter().any(|x| !x)) {
            return Err(invalid("edge-lanes-complete", format!("edge {e} is missing lanes")));
        }

        let n_tsc = self.programs.len();
        let mut tsc_seen = vec![false; n_tsc];
        for it in &self.intersections {
            if let Some(t) = it.tsc {
                if t.index() >= n_tsc || tsc_seen[t.index()] {
                    return Err(invalid("tsc-program-exists", format!("intersection {} controller {t}", it.id)));
                }
                tsc_seen[t.index()] = true;
            }
        }
        if let Some(t) = tsc_seen.iter().position(|s| !s) {
            return Err(invalid("tsc-program-exists", format!("program {t} has no intersection")));
        }

        let mut pairs = HashSet::new();
        for (i, c) in self.connections.iter().enumerate() {
            if c.id.index() != i {
                return Err(invalid("dense-ids", format!("connection at position {i} has id {}", c.id)));
            }
            if c.from_lane.index() >= self.lanes.len() || c.to_lane.index() >= self.lanes.len() {
                return Err(invalid(
                    "connection-lanes-exist",
                    format!("connection {i} references lanes {} -> {}", c.from_lane, c.to_lane),
                ));
            }
            if c.intersection.index() >= n_nodes {
                return Err(invalid("connection-intersection-exists", format!("connection {i}")));
            }
            let fe = self.edge_of(c.from_lane);
            let te = self.edge_of(c.to_lane);
            if fe.id == te.id {
                return Err(invalid("connection-distinct-edges", format!("connection {i}")));
            }
            if fe.to != c.intersection || te.from != c.intersection {
                return Err(invalid(
                    "connection-edges-meet",
                    format!("connection {i}: edges {} and {} do not meet at {}", fe.id, te.id, c.intersection),
                ));
            }
            if c.tsc != self.intersections[c.intersection.index()].tsc {
                return Err(invalid("connection-controller", format!("connection {i}")));
            }
            if !pairs.insert((c.from_lane, c.to_lane)) {
                return Err(invalid("connection-unique", format!("connection {i} duplicates a lane pair")));
            }
        }

        for (t, prog) in self.programs.iter().enumerate() {
            if prog.tsc.index() != t {
                return Err(invalid("dense-ids", format!("program at position {t} has tsc {}", prog.tsc)));
            }
            if !prog.phases.iter().any(|p| p.kind == PhaseKind::Green) {
                return Err(invalid("program-has-green", format!("tsc {t}")));
            }
            let n = prog.phases.len();
            for (k, p) in prog.phases.iter().enumerate() {
                if !(p.duration.is_finite() && p.duration > 0.0) {
                    return Err(invalid("phase-duration-positive", format!("tsc {t} phase {k}")));
                }
                for o in &p.open {
                    let ok = self
                        .connections
                        .get(o.connection.index())
                        .is_some_and(|c| c.tsc == Some(prog.tsc));
                    if !ok {
                        return Err(invalid(
                            "phase-connections-controlled",
                            format!("tsc {t} phase {k} opens connection {}", o.connection),
                        ));
                    }
                }
                let next = &prog.phases[(k + 1) % n];
                match p.kind {
                    PhaseKind::Green => {
                        if next.kind != PhaseKind::Yellow || n < 2 {
                            return Err(invalid(
                                "green-followed-by-yellow",
                                format!("tsc {t} phase {k} is not followed by a yellow phase"),
                            ));
                        }
                    }
                    PhaseKind::Yellow => {
                        if p.duration != YELLOW_DURATION {
                            return Err(invalid(
                                "yellow-lasts-5s",
                                format!("tsc {t} phase {k} lasts {} s", p.duration),
                            ));
                        }
                        if next.kind != PhaseKind::Green {
                            return Err(invalid(
                                "green-followed-by-yellow",
                                format!("tsc {t} phase {k} is followed by another yellow phase"),
                            ));
                        }
                    }
                }
            }
            for c in self.connections.iter().filter(|c| c.tsc == Some(prog.tsc)) {
                if prog.switches_to_open(0, c.id).is_none() {
                    return Err(invalid(
                        "connection-opens",
                        format!("connection {} is never green under tsc {t}", c.id),
                    ));
                }
            }
        }
        Ok(())
    }
}
