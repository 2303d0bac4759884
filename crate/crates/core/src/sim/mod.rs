//! Deterministic 1 Hz traffic microsimulation.
//!
//! Vehicles follow a Krauss-style safe-speed rule: each step
//! `v' = min(v + a, v_vehicle, v_lane, v_safe)` where `v_safe` is the
//! largest speed that still allows a full stop (deceleration `b`) before
//! the nearest obstacle, which is either the leader's rear minus the minimum
//! gap or a closed stop line. Lane changes do not exist; routes are fixed
//! lane sequences. There is no junction interior: crossing a stop line puts
//! the vehicle directly on its next lane.

mod metrics;

pub use metrics::{write_step_log, write_trip_log, StepMetrics};

use std::collections::VecDeque;
use std::sync::Arc;

use thiserror::Error;

use crate::scenario::geometry::ConflictOracle;
use crate::scenario::{ConnectionId, LaneId, PhaseKind, RoadNetwork, TripTable, TscId, MIN_SWITCH_INTERVAL};

pub const STEP_SECONDS: f64 = 1.0;
pub const VEHICLE_LENGTH: f64 = 5.0;
pub const MIN_GAP: f64 = 2.5;
pub const ACCELERATION: f64 = 2.6;
pub const DECELERATION: f64 = 4.5;
/// SUMO's default passenger car top speed.
pub const DEFAULT_VEHICLE_MAX_SPEED: f64 = 55.55;
/// 0.1 km/h.
pub const STOPPED_SPEED: f64 = 0.1 / 3.6;
/// Sensing range of queue detectors, measured back from the stop line.
pub const QUEUE_RANGE: f64 = 50.0;
/// Free space needed at the start of a lane to insert a vehicle.
pub const INSERTION_CLEARANCE: f64 = 10.0;
/// A yielding vehicle waits while a priority vehicle can reach the stop line
/// within this many seconds.
pub const PRIORITY_HORIZON: f64 = 3.0;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("expected {expected} actions, got {got}")]
    ActionCount { expected: usize, got: usize },
    #[error("unknown traffic signal controller {0}")]
    UnknownTsc(usize),
    #[error("invalid input: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TscAction {
    Prolong = 0,
    Switch = 1,
}

impl TscAction {
    pub const ALL: [TscAction; 2] = [TscAction::Prolong, TscAction::Switch];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            TscAction::Prolong
        } else {
            TscAction::Switch
        }
    }
}

/// Legal actions at a controller and whether choosing SWITCH would change
/// the phase. Both actions are always legal; only their effect differs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionLegality {
    pub legal: [TscAction; 2],
    pub switch_effective: bool,
}

impl ActionLegality {
    /// Feasibility mask indexed by [`TscAction::index`].
    pub fn mask(&self) -> [bool; 2] {
        [true, self.switch_effective]
    }
}

/// Safe speed for a full stop within `gap` metres under deceleration `b`,
/// given one step of travel at the chosen speed first.
#[inline]
pub fn safe_speed(gap: f64) -> f64 {
    if gap.is_infinite() {
        return f64::INFINITY;
    }
    let gap = gap.max(0.0);
    let bt = DECELERATION * STEP_SECONDS;
    (-bt + (bt * bt + 2.0 * DECELERATION * gap).sqrt()).max(0.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Vehicle {
    pub id: u64,
    pub depart: f64,
    pub route: Arc<[LaneId]>,
    pub route_index: usize,
    /// Front bumper distance from the start of the current lane.
    pub position: f64,
    pub speed: f64,
    pub max_speed: f64,
}

impl Vehicle {
    pub fn lane(&self) -> LaneId {
        self.route[self.route_index]
    }

    fn next_lane(&self) -> Option<LaneId> {
        self.route.get(self.route_index + 1).copied()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ControllerState {
    pub phase: usize,
    pub time_since_last_switch: u32,
}

impl ControllerState {
    /// Seconds left in a yellow phase of the given duration.
    pub fn yellow_countdown(&self, duration: f64) -> u32 {
        (duration as u32).saturating_sub(self.time_since_last_switch)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompletedTrip {
    pub id: u64,
    pub depart: f64,
    pub arrive: f64,
}

impl CompletedTrip {
    pub fn duration(&self) -> f64 {
        self.arrive - self.depart
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepEvents {
    pub realized: Vec<TscAction>,
    pub inserted: usize,
    pub completed: Vec<CompletedTrip>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Signal {
    Green { priority: bool },
    Yellow,
    Red,
}

/// Static lookup tables derived from a network.
#[derive(Debug)]
struct Topology {
    /// Outgoing `(to_lane, connection)` pairs per lane.
    links: Vec<Vec<(LaneId, ConnectionId)>>,
    conflicts: Vec<Vec<ConnectionId>>,
    inbound: Vec<Vec<LaneId>>,
}

impl Topology {
    fn new(net: &RoadNetwork) -> Self {
        let mut links = vec![Vec::new(); net.lanes.len()];
        for c in &net.connections {
            links[c.from_lane.index()].push((c.to_lane, c.id));
        }
        let mut conflicts = vec![Vec::new(); net.connections.len()];
        for it in &net.intersections {
            let members: Vec<ConnectionId> =
                net.connections.iter().filter(|c| c.intersection == it.id).map(|c| c.id).collect();
            if members.len() < 2 {
                continue;
            }
            let oracle = ConflictOracle::new(net, it.id);
            for &a in &members {
                for &b in &members {
                    if oracle.conflict(net, a, b) {
                        conflicts[a.index()].push(b);
                    }
                }
            }
        }
        let inbound = (0..net.tsc_count()).map(|t| net.inbound_lanes(TscId(t))).collect();
        Self { links, conflicts, inbound }
    }

    fn connection(&self, from: LaneId, to: LaneId) -> Option<ConnectionId> {
        self.links[from.index()].iter().find(|(l, _)| *l == to).map(|(_, c)| *c)
    }
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub vehicle_max_speed: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { vehicle_max_speed: DEFAULT_VEHICLE_MAX_SPEED }
    }
}

/// Complete dynamic state of one simulation.
#[derive(Clone, Debug)]
pub struct SimState {
    net: Arc<RoadNetwork>,
    topo: Arc<Topology>,
    trips: Arc<TripTable>,
    routes: Arc<[Arc<[LaneId]>]>,
    config: SimConfig,
    seed: u64,
    clock: u64,
    lanes: Vec<VecDeque<Vehicle>>,
    controllers: Vec<ControllerState>,
    switch_counts: Vec<u64>,
    next_trip: usize,
    waiting: Vec<VecDeque<usize>>,
    completed: Vec<CompletedTrip>,
    released: usize,
    spawned: u64,
}

impl PartialEq for SimState {
    fn eq(&self, o: &Self) -> bool {
        self.seed == o.seed
            && self.clock == o.clock
            && self.lanes == o.lanes
            && self.controllers == o.controllers
            && self.switch_counts == o.switch_counts
            && self.next_trip == o.next_trip
            && self.waiting == o.waiting
            && self.completed == o.completed
            && self.released == o.released
            && self.spawned == o.spawned
            && (Arc::ptr_eq(&self.net, &o.net) || self.net == o.net)
            && (Arc::ptr_eq(&self.trips, &o.trips) || self.trips == o.trips)
    }
}

/// Counts used by the conservation invariant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VehicleCounts {
    /// Trips whose departure time has passed, plus spawned vehicles.
    pub released: usize,
    pub in_network: usize,
    pub completed: usize,
    pub pending_blocked: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueueReport {
    pub per_lane: Vec<(LaneId, usize)>,
    pub reward: f64,
}

impl SimState {
    /// Fresh simulation: clock 0, empty roads, every controller at phase 0
    /// and immediately switchable. The dynamics are deterministic; `seed` is
    /// recorded for bookkeeping only.
    pub fn reset(net: Arc<RoadNetwork>, trips: Arc<TripTable>, seed: u64) -> Result<Self, SimError> {
        Self::with_config(net, trips, seed, SimConfig::default())
    }

    pub fn with_config(
        net: Arc<RoadNetwork>,
        trips: Arc<TripTable>,
        seed: u64,
        config: SimConfig,
    ) -> Result<Self, SimError> {
        trips.validate(&net).map_err(|e| SimError::Invalid(e.to_string()))?;
        if !(config.vehicle_max_speed > 0.0) {
            return Err(SimError::Invalid("vehicle max speed must be positive".into()));
        }
        let topo = Arc::new(Topology::new(&net));
        let routes: Arc<[Arc<[LaneId]>]> = trips.trips.iter().map(|t| Arc::from(t.route.as_slice())).collect();
        let n_tsc = net.tsc_count();
        Ok(Self {
            lanes: vec![VecDeque::new(); net.lanes.len()],
            waiting: vec![VecDeque::new(); net.lanes.len()],
            controllers: vec![ControllerState { phase: 0, time_since_last_switch: MIN_SWITCH_INTERVAL }; n_tsc],
            switch_counts: vec![0; n_tsc],
            net,
            topo,
            trips,
            routes,
            config,
            seed,
            clock: 0,
            next_trip: 0,
            completed: Vec::new(),
            released: 0,
            spawned: 0,
        })
    }

    pub fn network(&self) -> &Arc<RoadNetwork> {
        &self.net
    }

    pub fn trips(&self) -> &Arc<TripTable> {
        &self.trips
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn lane_vehicles(&self, lane: LaneId) -> &VecDeque<Vehicle> {
        &self.lanes[lane.index()]
    }

    pub fn vehicles(&self) -> impl Iterator<Item = &Vehicle> {
        self.lanes.iter().flat_map(|l| l.iter())
    }

    pub fn controllers(&self) -> &[ControllerState] {
        &self.controllers
    }

    pub fn controller(&self, tsc: TscId) -> Result<&ControllerState, SimError> {
        self.controllers.get(tsc.index()).ok_or(SimError::UnknownTsc(tsc.index()))
    }

    pub fn phase_kind(&self, tsc: TscId) -> Result<PhaseKind, SimError> {
        let c = self.controller(tsc)?;
        Ok(self.net.programs[tsc.index()].phases[c.phase].kind)
    }

    /// Total number of phase changes performed by each controller.
    pub fn switch_counts(&self) -> &[u64] {
        &self.switch_counts
    }

    pub fn completed(&self) -> &[CompletedTrip] {
        &self.completed
    }

    pub fn counts(&self) -> VehicleCounts {
        VehicleCounts {
            released: self.released,
            in_network: self.lanes.iter().map(|l| l.len()).sum(),
            completed: self.completed.len(),
            pending_blocked: self.waiting.iter().map(|w| w.len()).sum(),
        }
    }

    /// True once every trip has departed and arrived.
    pub fn all_trips_done(&self) -> bool {
        let c = self.counts();
        self.next_trip == self.trips.len() && c.in_network == 0 && c.pending_blocked == 0
    }

    /// Overrides a controller's phase and timer; used to construct test
    /// states.
    pub fn set_controller(&mut self, tsc: TscId, phase: usize, time_since_last_switch: u32) -> Result<(), SimError> {
        let n = self.net.programs.get(tsc.index()).ok_or(SimError::UnknownTsc(tsc.index()))?.phases.len();
        if phase >= n {
            return Err(SimError::Invalid(format!("phase {phase} out of range for controller {tsc}")));
        }
        self.controllers[tsc.index()] = ControllerState { phase, time_since_last_switch };
        Ok(())
    }

    /// Places a vehicle outside the trip table, e.g. to build test states.
    /// Fails if it would overlap another vehicle.
    pub fn spawn_vehicle(
        &mut self,
        route: Vec<LaneId>,
        route_index: usize,
        position: f64,
        speed: f64,
    ) -> Result<u64, SimError> {
        let lane = *route.get(route_index).ok_or_else(|| SimError::Invalid("route index out of range".into()))?;
        let len = self.net.lanes.get(lane.index()).ok_or_else(|| SimError::Invalid("unknown lane".into()))?.length;
        if !(0.0..=len).contains(&position) || speed < 0.0 {
            return Err(SimError::Invalid("position or speed out of range".into()));
        }
        for w in route.windows(2) {
            if self.topo.connection(w[0], w[1]).is_none() {
                return Err(SimError::Invalid(format!("no connection {} -> {}", w[0], w[1])));
            }
        }
        let q = &mut self.lanes[lane.index()];
        if q.iter().any(|v| (v.position - position).abs() < VEHICLE_LENGTH) {
            return Err(SimError::Invalid("spawned vehicle overlaps another".into()));
        }
        let id = u64::MAX - self.spawned;
        self.spawned += 1;
        self.released += 1;
        let v = Vehicle {
            id,
            depart: self.clock as f64,
            route: route.into(),
            route_index,
            position,
            speed,
            max_speed: self.config.vehicle_max_speed,
        };
        let at = q.iter().position(|o| o.position < position).unwrap_or(q.len());
        q.insert(at, v);
        Ok(id)
    }

    pub fn legal_actions(&self, tsc: TscId) -> Result<ActionLegality, SimError> {
        let c = self.controller(tsc)?;
        let kind = self.net.programs[tsc.index()].phases[c.phase].kind;
        let switch_effective = kind == PhaseKind::Green && c.time_since_last_switch >= MIN_SWITCH_INTERVAL;
        Ok(ActionLegality { legal: TscAction::ALL, switch_effective })
    }

    /// Feasibility masks for every controller.
    pub fn feasibility_masks(&self) -> Vec<[bool; 2]> {
        (0..self.controllers.len())
            .map(|t| self.legal_actions(TscId(t)).expect("controller exists").mask())
            .collect()
    }

    fn signals(&self) -> Vec<Signal> {
        self.net
            .connections
            .iter()
            .map(|c| match c.tsc {
                None => Signal::Green { priority: true },
                Some(t) => {
                    let phase = &self.net.programs[t.index()].phases[self.controllers[t.index()].phase];
                    match phase.opening(c.id) {
                        None => Signal::Red,
                        Some(o) => match phase.kind {
                            PhaseKind::Green => Signal::Green { priority: o.priority },
                            PhaseKind::Yellow => Signal::Yellow,
                        },
                    }
                }
            })
            .collect()
    }

    /// Non-priority green connections that must yield this step.
    fn yield_flags(&self, signals: &[Signal]) -> Vec<bool> {
        let reach = |v: f64| v * PRIORITY_HORIZON + 0.5 * ACCELERATION * PRIORITY_HORIZON * PRIORITY_HORIZON;
        let max_reach = reach(self.net.lanes.iter().map(|l| l.speed_limit).fold(0.0, f64::max));
        let has_room = |lane: LaneId| self.lanes[lane.index()].back().is_none_or(|v| v.position - VEHICLE_LENGTH - MIN_GAP > 0.0);
        // A vehicle that cannot enter the junction (red or full exit lane)
        // never reaches the conflict point, and neither does anyone behind it.
        let approaching = |conn: ConnectionId| {
            let c = &self.net.connections[conn.index()];
            let len = self.net.lanes[c.from_lane.index()].length;
            for v in &self.lanes[c.from_lane.index()] {
                let dist = len - v.position;
                if dist > max_reach {
                    break;
                }
                let Some(next) = v.next_lane() else { break };
                let enters = self.topo.connection(c.from_lane, next).is_some_and(|k| matches!(signals[k.index()], Signal::Green { .. }));
                if !enters || !has_room(next) {
                    break;
                }
                if next == c.to_lane && dist <= reach(v.speed) {
                    return true;
                }
                // a stopped vehicle on another movement holds back everyone behind it
                if v.speed < STOPPED_SPEED {
                    break;
                }
            }
            false
        };
        signals
            .iter()
            .enumerate()
            .map(|(i, s)| {
                matches!(s, Signal::Green { priority: false })
                    && self.topo.conflicts[i]
                        .iter()
                        .any(|&o| signals[o.index()] == Signal::Green { priority: true } && approaching(o))
            })
            .collect()
    }

    /// Advances the simulation by one second.
    pub fn step(&mut self, actions: &[TscAction]) -> Result<StepEvents, SimError> {
        if actions.len() != self.controllers.len() {
            return Err(SimError::ActionCount { expected: self.controllers.len(), got: actions.len() });
        }
        let mut events = StepEvents { realized: Vec::with_capacity(actions.len()), ..Default::default() };

        for (t, ctl) in self.controllers.iter_mut().enumerate() {
            let prog = &self.net.programs[t];
            let phase = &prog.phases[ctl.phase];
            let mut realized = TscAction::Prolong;
            match phase.kind {
                PhaseKind::Green => {
                    if actions[t] == TscAction::Switch && ctl.time_since_last_switch >= MIN_SWITCH_INTERVAL {
                        ctl.phase = prog.next_index(ctl.phase);
                        ctl.time_since_last_switch = 0;
                        self.switch_counts[t] += 1;
                        realized = TscAction::Switch;
                    }
                }
                PhaseKind::Yellow => {
                    if ctl.time_since_last_switch as f64 >= phase.duration {
                        ctl.phase = prog.next_index(ctl.phase);
                        ctl.time_since_last_switch = 0;
                        self.switch_counts[t] += 1;
                    }
                }
            }
            events.realized.push(realized);
        }

        self.insert_due_trips(&mut events);
        self.move_vehicles(&mut events);

        self.clock += 1;
        for c in &mut self.controllers {
            c.time_since_last_switch = c.time_since_last_switch.saturating_add(1);
        }
        Ok(events)
    }

    fn insert_due_trips(&mut self, events: &mut StepEvents) {
        let now = self.clock as f64;
        while let Some(trip) = self.trips.trips.get(self.next_trip) {
            if trip.depart > now {
                break;
            }
            self.waiting[trip.route[0].index()].push_back(self.next_trip);
            self.next_trip += 1;
            self.released += 1;
        }
        for lane in 0..self.waiting.len() {
            let Some(&ti) = self.waiting[lane].front() else { continue };
            let clear = self.lanes[lane].back().is_none_or(|v| v.position - VEHICLE_LENGTH >= INSERTION_CLEARANCE);
            if !clear {
                continue;
            }
            self.waiting[lane].pop_front();
            let trip = &self.trips.trips[ti];
            self.lanes[lane].push_back(Vehicle {
                id: trip.id,
                depart: trip.depart,
                route: self.routes[ti].clone(),
                route_index: 0,
                position: 0.0,
                speed: 0.0,
                max_speed: self.config.vehicle_max_speed,
            });
            events.inserted += 1;
        }
    }

    fn move_vehicles(&mut self, events: &mut StepEvents) {
        let signals = self.signals();
        let yields = self.yield_flags(&signals);
        let net = &self.net;
        // Furthest admissible front position for a vehicle entering each lane.
        let mut entry_limit: Vec<f64> = self
            .lanes
            .iter()
            .zip(&net.lanes)
            .map(|(q, l)| match q.back() {
                Some(v) => (v.position - VEHICLE_LENGTH - MIN_GAP).min(l.length),
                None => l.length,
            })
            .collect();

        let mut transfers: Vec<(LaneId, Vehicle)> = Vec::new();
        let old = std::mem::take(&mut self.lanes);
        let mut new_lanes: Vec<VecDeque<Vehicle>> = old.iter().map(|q| VecDeque::with_capacity(q.len())).collect();
        let arrive = (self.clock + 1) as f64;

        for (li, queue) in old.into_iter().enumerate() {
            let lane = &net.lanes[li];
            let mut leader: Option<f64> = None;
            for mut v in queue {
                let to_end = lane.length - v.position;
                let mut gap = leader.map_or(f64::INFINITY, |p| p - VEHICLE_LENGTH - MIN_GAP - v.position);
                let mut entering = None;
                if let Some(next) = v.next_lane() {
                    let conn = self.topo.connection(lane.id, next).expect("validated route");
                    let open = match signals[conn.index()] {
                        Signal::Green { priority } => priority || !yields[conn.index()],
                        // proceed on yellow only when a comfortable stop is impossible
                        Signal::Yellow => safe_speed(to_end) < v.speed - DECELERATION * STEP_SECONDS,
                        Signal::Red => false,
                    };
                    if open {
                        gap = gap.min(to_end + entry_limit[next.index()]);
                        entering = Some(next);
                    } else {
                        gap = gap.min(to_end);
                    }
                }
                let mut speed = (v.speed + ACCELERATION * STEP_SECONDS)
                    .min(v.max_speed)
                    .min(lane.speed_limit)
                    .min(safe_speed(gap));
                if let Some(next) = entering {
                    if v.position + speed * STEP_SECONDS > lane.length {
                        speed = speed.min(net.lanes[next.index()].speed_limit);
                    }
                }
                let speed = speed.max(0.0);
                let new_pos = v.position + speed * STEP_SECONDS;
                leader = Some(new_pos);
                v.speed = speed;
                if v.next_lane().is_none() && new_pos >= lane.length {
                    events.completed.push(CompletedTrip { id: v.id, depart: v.depart, arrive });
                } else if let Some(next) = entering.filter(|_| new_pos > lane.length) {
                    let pos = (new_pos - lane.length).min(entry_limit[next.index()]).max(0.0);
                    entry_limit[next.index()] = pos - VEHICLE_LENGTH - MIN_GAP;
                    v.position = pos;
                    v.route_index += 1;
                    transfers.push((next, v));
                } else {
                    v.position = new_pos.min(lane.length);
                    new_lanes[li].push_back(v);
                }
            }
        }
        for (lane, v) in transfers {
            new_lanes[lane.index()].push_back(v);
        }
        self.lanes = new_lanes;
        self.completed.extend_from_slice(&events.completed);
    }

    /// Stopped vehicles within [`QUEUE_RANGE`] of the stop line on every
    /// inbound lane of `tsc`, and the local reward (negative total).
    pub fn queue_lengths(&self, tsc: TscId) -> Result<QueueReport, SimError> {
        let lanes = self.topo.inbound.get(tsc.index()).ok_or(SimError::UnknownTsc(tsc.index()))?;
        let per_lane: Vec<(LaneId, usize)> = lanes.iter().map(|&l| (l, self.queued_on(l))).collect();
        let total: usize = per_lane.iter().map(|(_, q)| q).sum();
        Ok(QueueReport { per_lane, reward: -(total as f64) })
    }

    /// Local reward of every controller.
    pub fn rewards(&self) -> Vec<f64> {
        (0..self.controllers.len()).map(|t| self.queue_lengths(TscId(t)).expect("controller exists").reward).collect()
    }

    pub fn queued_on(&self, lane: LaneId) -> usize {
        let len = self.net.lanes[lane.index()].length;
        self.lanes[lane.index()]
            .iter()
            .filter(|v| v.speed < STOPPED_SPEED && len - v.position <= QUEUE_RANGE)
            .count()
    }

    /// Inbound lanes of `tsc`.
    pub fn inbound_lanes(&self, tsc: TscId) -> &[LaneId] {
        &self.topo.inbound[tsc.index()]
    }

    /// Stopped and moving vehicles within the sensing window on the inbound
    /// lanes of `tsc`.
    pub fn stopped_and_moving(&self, tsc: TscId) -> Result<(usize, usize), SimError> {
        let lanes = self.topo.inbound.get(tsc.index()).ok_or(SimError::UnknownTsc(tsc.index()))?;
        let (mut stopped, mut moving) = (0, 0);
        for &l in lanes {
            let len = self.net.lanes[l.index()].length;
            for v in &self.lanes[l.index()] {
                if len - v.position <= QUEUE_RANGE {
                    if v.speed < STOPPED_SPEED {
                        stopped += 1;
                    } else {
                        moving += 1;
                    }
                }
            }
        }
        Ok((stopped, moving))
    }

    /// Sum over vehicles of `(s* - s) / s*` with `s* = min(vehicle max,
    /// lane limit)`.
    pub fn instantaneous_delay(&self) -> f64 {
        self.lanes
            .iter()
            .zip(&self.net.lanes)
            .flat_map(|(q, l)| {
                q.iter().map(move |v| {
                    let target = v.max_speed.min(l.speed_limit);
                    (target - v.speed) / target
                })
            })
            .sum()
    }

    pub fn metrics(&self) -> StepMetrics {
        StepMetrics {
            t: self.clock,
            total_delay: self.instantaneous_delay(),
            total_queued: self.lanes.iter().enumerate().map(|(l, _)| self.queued_on(LaneId(l))).sum(),
            n_vehicles: self.lanes.iter().map(|q| q.len()).sum(),
        }
    }
}

#[cfg(test)]
mod tests;
