//! Typed observation graph built from a simulation snapshot.
//!
//! Node types: traffic signal controllers, connections, lanes and (in
//! vehicle mode) vehicles. Every node has a self-loop; controllers link to
//! their connections, connections link to their entry and exit lanes, and
//! vehicles link to the lane they are on. All links are bidirectional with
//! one edge type per direction.

use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::Arc;

use crate::nn::{GraphInput, GraphSchema, Matrix};
use crate::scenario::{ConnectionId, PhaseKind, RoadNetwork, TscId};
use crate::sim::SimState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeType {
    Tsc = 0,
    Connection = 1,
    Lane = 2,
    Vehicle = 3,
}

impl NodeType {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeType::Tsc => "tsc",
            NodeType::Connection => "connection",
            NodeType::Lane => "lane",
            NodeType::Vehicle => "vehicle",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EdgeType {
    TscSelf,
    ConnectionSelf,
    LaneSelf,
    VehicleSelf,
    TscToConnection,
    ConnectionToTsc,
    EntryLaneToConnection,
    ConnectionToEntryLane,
    ExitLaneToConnection,
    ConnectionToExitLane,
    LaneToVehicle,
    VehicleToLane,
}

impl EdgeType {
    pub fn endpoints(self) -> (NodeType, NodeType) {
        use EdgeType::*;
        use NodeType as N;
        match self {
            TscSelf => (N::Tsc, N::Tsc),
            ConnectionSelf => (N::Connection, N::Connection),
            LaneSelf => (N::Lane, N::Lane),
            VehicleSelf => (N::Vehicle, N::Vehicle),
            TscToConnection => (N::Tsc, N::Connection),
            ConnectionToTsc => (N::Connection, N::Tsc),
            EntryLaneToConnection | ExitLaneToConnection => (N::Lane, N::Connection),
            ConnectionToEntryLane | ConnectionToExitLane => (N::Connection, N::Lane),
            LaneToVehicle => (N::Lane, N::Vehicle),
            VehicleToLane => (N::Vehicle, N::Lane),
        }
    }
}

const LANE_EDGES: [EdgeType; 9] = [
    EdgeType::TscSelf,
    EdgeType::ConnectionSelf,
    EdgeType::LaneSelf,
    EdgeType::TscToConnection,
    EdgeType::ConnectionToTsc,
    EdgeType::EntryLaneToConnection,
    EdgeType::ConnectionToEntryLane,
    EdgeType::ExitLaneToConnection,
    EdgeType::ConnectionToExitLane,
];

const VEHICLE_EDGES: [EdgeType; 12] = [
    EdgeType::TscSelf,
    EdgeType::ConnectionSelf,
    EdgeType::LaneSelf,
    EdgeType::TscToConnection,
    EdgeType::ConnectionToTsc,
    EdgeType::EntryLaneToConnection,
    EdgeType::ConnectionToEntryLane,
    EdgeType::ExitLaneToConnection,
    EdgeType::ConnectionToExitLane,
    EdgeType::VehicleSelf,
    EdgeType::LaneToVehicle,
    EdgeType::VehicleToLane,
];

/// Lane-level (no vehicle nodes, 2 layers) or vehicle-level (3 layers).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GraphMode {
    Lane,
    Vehicle,
}

impl GraphMode {
    pub fn node_types(self) -> &'static [NodeType] {
        match self {
            GraphMode::Lane => &[NodeType::Tsc, NodeType::Connection, NodeType::Lane],
            GraphMode::Vehicle => &[NodeType::Tsc, NodeType::Connection, NodeType::Lane, NodeType::Vehicle],
        }
    }

    pub fn edge_types(self) -> &'static [EdgeType] {
        match self {
            GraphMode::Lane => &LANE_EDGES,
            GraphMode::Vehicle => &VEHICLE_EDGES,
        }
    }

    pub fn feature_width(self, t: NodeType) -> usize {
        match (self, t) {
            (_, NodeType::Tsc) => 1,
            (_, NodeType::Connection) => 4,
            (GraphMode::Lane, NodeType::Lane) => 3,
            (GraphMode::Vehicle, NodeType::Lane) => 1,
            (_, NodeType::Vehicle) => 2,
        }
    }

    pub fn gcn_layers(self) -> usize {
        match self {
            GraphMode::Lane => 2,
            GraphMode::Vehicle => 3,
        }
    }

    pub fn schema(self) -> GraphSchema {
        GraphSchema {
            node_widths: self.node_types().iter().map(|&t| self.feature_width(t)).collect(),
            edge_types: self
                .edge_types()
                .iter()
                .map(|e| {
                    let (s, d) = e.endpoints();
                    (s as usize, d as usize)
                })
                .collect(),
            readout: NodeType::Tsc as usize,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GraphMode::Lane => "lane",
            GraphMode::Vehicle => "vehicle",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            GraphMode::Lane => 0,
            GraphMode::Vehicle => 1,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(GraphMode::Lane),
            1 => Some(GraphMode::Vehicle),
            _ => None,
        }
    }
}

impl FromStr for GraphMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lane" | "l" => Ok(GraphMode::Lane),
            "vehicle" | "v" => Ok(GraphMode::Vehicle),
            other => Err(format!("unknown graph mode `{other}` (expected lane or vehicle)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureKind {
    Length,
    Speed,
    Count,
    Time,
    Switches,
    /// Already in [0, 1]: booleans and position fractions.
    Unit,
}

/// Divisors applied to raw features.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeatureScaling {
    pub length: f64,
    pub speed: f64,
    pub count: f64,
    pub time: f64,
    pub switches: f64,
}

impl Default for FeatureScaling {
    fn default() -> Self {
        Self { length: 200.0, speed: 15.0, count: 10.0, time: 60.0, switches: 8.0 }
    }
}

impl FeatureScaling {
    fn divisor(&self, kind: FeatureKind) -> f64 {
        match kind {
            FeatureKind::Length => self.length,
            FeatureKind::Speed => self.speed,
            FeatureKind::Count => self.count,
            FeatureKind::Time => self.time,
            FeatureKind::Switches => self.switches,
            FeatureKind::Unit => 1.0,
        }
    }

    pub fn scale(&self, kind: FeatureKind, raw: f64) -> f64 {
        raw / self.divisor(kind)
    }

    pub fn unscale(&self, kind: FeatureKind, scaled: f64) -> f64 {
        scaled * self.divisor(kind)
    }

    pub fn to_array(&self) -> [f64; 5] {
        [self.length, self.speed, self.count, self.time, self.switches]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self { length: a[0], speed: a[1], count: a[2], time: a[3], switches: a[4] }
    }
}

/// One decision step's observation.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationGraph {
    pub mode: GraphMode,
    pub input: GraphInput,
    /// Controller of each TSC node, in node order.
    pub tsc_ids: Vec<TscId>,
    /// Vehicle id of each vehicle node (empty in lane mode).
    pub vehicle_ids: Vec<u64>,
}

impl ObservationGraph {
    pub fn count(&self, t: NodeType) -> usize {
        self.input.features.get(t as usize).map_or(0, |f| f.rows())
    }

    pub fn node_count(&self) -> usize {
        self.input.features.iter().map(|f| f.rows()).sum()
    }

    fn offset(&self, t: NodeType) -> usize {
        self.input.features[..t as usize].iter().map(|f| f.rows()).sum()
    }

    /// `(global id, type, features)` for every node; ids run through the
    /// types in order.
    pub fn nodes(&self) -> Vec<(usize, NodeType, &[f64])> {
        let mut out = Vec::with_capacity(self.node_count());
        for &t in self.mode.node_types() {
            let off = self.offset(t);
            let f = &self.input.features[t as usize];
            for r in 0..f.rows() {
                out.push((off + r, t, f.row(r)));
            }
        }
        out
    }

    /// `(src, dst, type)` with global node ids.
    pub fn edges(&self) -> Vec<(usize, usize, EdgeType)> {
        let mut out = Vec::new();
        for (e, &ty) in self.mode.edge_types().iter().enumerate() {
            let (s, d) = ty.endpoints();
            let (os, od) = (self.offset(s), self.offset(d));
            out.extend(self.input.edges[e].iter().map(|&(a, b)| (os + a as usize, od + b as usize, ty)));
        }
        out
    }

    pub fn edge_count(&self, ty: EdgeType) -> usize {
        self.mode.edge_types().iter().position(|&t| t == ty).map_or(0, |e| self.input.edges[e].len())
    }

    /// Text dump: one `node <id> <type> <features>` line per node, then one
    /// `edge <src> <dst> <type>` line per edge.
    pub fn edge_list_text(&self) -> String {
        let mut s = format!("# observation graph mode={}\n", self.mode.as_str());
        for (id, t, f) in self.nodes() {
            let feats: Vec<String> = f.iter().map(|x| x.to_string()).collect();
            let _ = writeln!(s, "node {id} {} {}", t.as_str(), feats.join(","));
        }
        for (a, b, ty) in self.edges() {
            let _ = writeln!(s, "edge {a} {b} {ty:?}");
        }
        s
    }
}

/// Encoder for one network; the topology-only edges are built once and
/// shared by every graph it produces.
#[derive(Clone, Debug)]
pub struct GraphEncoder {
    mode: GraphMode,
    scaling: FeatureScaling,
    net: Arc<RoadNetwork>,
    static_edges: Vec<Arc<[(u32, u32)]>>,
}

impl GraphEncoder {
    pub fn new(net: Arc<RoadNetwork>, mode: GraphMode, scaling: FeatureScaling) -> Self {
        let pairs = |ty: EdgeType| -> Vec<(u32, u32)> {
            match ty {
                EdgeType::TscSelf => (0..net.tsc_count() as u32).map(|i| (i, i)).collect(),
                EdgeType::ConnectionSelf => (0..net.connections.len() as u32).map(|i| (i, i)).collect(),
                EdgeType::LaneSelf => (0..net.lanes.len() as u32).map(|i| (i, i)).collect(),
                EdgeType::TscToConnection => net
                    .connections
                    .iter()
                    .filter_map(|c| c.tsc.map(|t| (t.index() as u32, c.id.index() as u32)))
                    .collect(),
                EdgeType::EntryLaneToConnection => {
                    net.connections.iter().map(|c| (c.from_lane.index() as u32, c.id.index() as u32)).collect()
                }
                EdgeType::ExitLaneToConnection => {
                    net.connections.iter().map(|c| (c.to_lane.index() as u32, c.id.index() as u32)).collect()
                }
                _ => Vec::new(),
            }
        };
        let static_edges = mode
            .edge_types()
            .iter()
            .map(|&ty| {
                let v = match ty {
                    EdgeType::ConnectionToTsc => swap(pairs(EdgeType::TscToConnection)),
                    EdgeType::ConnectionToEntryLane => swap(pairs(EdgeType::EntryLaneToConnection)),
                    EdgeType::ConnectionToExitLane => swap(pairs(EdgeType::ExitLaneToConnection)),
                    other => pairs(other),
                };
                Arc::from(v)
            })
            .collect();
        Self { mode, scaling, net, static_edges }
    }

    pub fn mode(&self) -> GraphMode {
        self.mode
    }

    pub fn scaling(&self) -> FeatureScaling {
        self.scaling
    }

    pub fn network(&self) -> &Arc<RoadNetwork> {
        &self.net
    }

    pub fn encode(&self, state: &SimState) -> ObservationGraph {
        let net = &*self.net;
        let sc = &self.scaling;
        let mode = self.mode;

        let tsc = Matrix::new(
            net.tsc_count(),
            1,
            state
                .controllers()
                .iter()
                .map(|c| sc.scale(FeatureKind::Time, c.time_since_last_switch as f64))
                .collect(),
        );

        let mut conn = Vec::with_capacity(net.connections.len() * 4);
        for c in &net.connections {
            conn.extend_from_slice(&self.connection_features(state, c.id, c.tsc));
        }
        let conn = Matrix::new(net.connections.len(), 4, conn);

        let lw = mode.feature_width(NodeType::Lane);
        let mut lanes = Vec::with_capacity(net.lanes.len() * lw);
        for l in &net.lanes {
            lanes.push(sc.scale(FeatureKind::Length, l.length));
            if mode == GraphMode::Lane {
                let q = state.lane_vehicles(l.id);
                let n = q.len();
                let avg = if n == 0 { 0.0 } else { q.iter().map(|v| v.speed).sum::<f64>() / n as f64 };
                lanes.push(sc.scale(FeatureKind::Count, n as f64));
                lanes.push(sc.scale(FeatureKind::Speed, avg));
            }
        }
        let lanes = Matrix::new(net.lanes.len(), lw, lanes);

        let mut features = vec![tsc, conn, lanes];
        let mut edges = self.static_edges.clone();
        let mut vehicle_ids = Vec::new();
        if mode == GraphMode::Vehicle {
            let mut feats = Vec::new();
            let mut attach = Vec::new();
            for l in &net.lanes {
                for v in state.lane_vehicles(l.id) {
                    attach.push((l.id.index() as u32, vehicle_ids.len() as u32));
                    vehicle_ids.push(v.id);
                    feats.push(sc.scale(FeatureKind::Speed, v.speed));
                    feats.push(v.position / l.length);
                }
            }
            let n = vehicle_ids.len();
            features.push(Matrix::new(n, 2, feats));
            for (e, &ty) in mode.edge_types().iter().enumerate() {
                edges[e] = match ty {
                    EdgeType::VehicleSelf => Arc::from((0..n as u32).map(|i| (i, i)).collect::<Vec<_>>()),
                    EdgeType::LaneToVehicle => Arc::from(attach.clone()),
                    EdgeType::VehicleToLane => Arc::from(swap(attach.clone())),
                    _ => continue,
                };
            }
        }
        ObservationGraph {
            mode,
            input: GraphInput { features, edges },
            tsc_ids: (0..net.tsc_count()).map(TscId).collect(),
            vehicle_ids,
        }
    }

    /// `[is_open, has_priority, n_switches_to_open, next_opening_has_priority]`.
    fn connection_features(&self, state: &SimState, c: ConnectionId, tsc: Option<TscId>) -> [f64; 4] {
        let Some(t) = tsc else {
            // unsignalized movements are permanently open with priority
            return [1.0, 1.0, 0.0, 1.0];
        };
        let prog = self.net.program(t);
        let phase = state.controllers()[t.index()].phase;
        let current = &prog.phases[phase];
        let opening = if current.kind == PhaseKind::Green { current.opening(c) } else { None };
        let (k, next_priority) = prog.switches_to_open(phase, c).unwrap_or((prog.phases.len(), false));
        [
            f64::from(u8::from(opening.is_some())),
            f64::from(u8::from(opening.is_some_and(|o| o.priority))),
            self.scaling.scale(FeatureKind::Switches, k as f64),
            f64::from(u8::from(next_priority)),
        ]
    }
}

fn swap(v: Vec<(u32, u32)>) -> Vec<(u32, u32)> {
    v.into_iter().map(|(a, b)| (b, a)).collect()
}

/// Encodes `state` with the default feature scaling.
pub fn encode(state: &SimState, mode: GraphMode) -> ObservationGraph {
    GraphEncoder::new(state.network().clone(), mode, FeatureScaling::default()).encode(state)
}

#[cfg(test)]
pub(crate) mod tests;
