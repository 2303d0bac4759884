use super::*;
use crate::scenario::fixtures::{cross, single_connection};
use crate::scenario::{LaneId, TripTable};

fn sim(net: RoadNetwork) -> SimState {
    SimState::reset(Arc::new(net), Arc::new(TripTable::default()), 0).unwrap()
}

/// One vehicle on the entry lane, two on the exit lane.
pub(crate) fn three_vehicle_state() -> SimState {
    let mut s = sim(single_connection(150.0));
    let route = vec![LaneId(0), LaneId(1)];
    s.spawn_vehicle(route.clone(), 0, 80.0, 6.0).unwrap();
    s.spawn_vehicle(route.clone(), 1, 120.0, 9.0).unwrap();
    s.spawn_vehicle(route, 1, 30.0, 3.0).unwrap();
    s
}

#[test]
fn empty_lane_mode_counts_and_features() {
    let net = cross(150.0, true);
    let (nc, nl) = (net.connections.len(), net.lanes.len());
    let g = encode(&sim(net), GraphMode::Lane);
    assert_eq!((g.count(NodeType::Tsc), g.count(NodeType::Connection), g.count(NodeType::Lane)), (1, nc, nl));
    assert_eq!(g.count(NodeType::Vehicle), 0);
    assert_eq!(g.input.edges.len(), 9);
    for (_, t, f) in g.nodes() {
        if t == NodeType::Lane {
            assert_eq!(f, &[0.75, 0.0, 0.0]);
        }
    }
    assert_eq!(g.input.features[0].data(), &[5.0 / 60.0]);
}

#[test]
fn vehicle_mode_single_connection_fixture() {
    let s = three_vehicle_state();
    let g = encode(&s, GraphMode::Vehicle);
    assert_eq!(g.node_count(), 7);
    assert_eq!(g.input.edges.len(), 12);
    assert_eq!(g.edge_count(EdgeType::LaneToVehicle) + g.edge_count(EdgeType::VehicleToLane), 6);
    assert_eq!(g.edge_count(EdgeType::TscToConnection), 1);
    assert_eq!(g.edge_count(EdgeType::EntryLaneToConnection), 1);
    assert_eq!(g.edge_count(EdgeType::ConnectionToExitLane), 1);
    // lanes carry only their length in vehicle mode
    assert_eq!(g.input.features[2].cols(), 1);
    // front vehicle of the exit lane comes first
    assert_eq!(g.input.features[3].row(1), &[9.0 / 15.0, 0.8]);
    g.input.check(&GraphMode::Vehicle.schema()).unwrap();
}

#[test]
fn open_connection_features() {
    let s = three_vehicle_state();
    let g = encode(&s, GraphMode::Lane);
    assert_eq!(g.input.features[1].row(0), &[1.0, 1.0, 0.0, 1.0]);
    // lane 1 holds two vehicles at 9 and 3 m/s
    assert_eq!(g.input.features[2].row(1), &[0.75, 0.2, 6.0 / 15.0]);
}

#[test]
fn closed_connection_counts_switches_to_open() {
    let mut s = sim(cross(150.0, true));
    s.set_controller(TscId(0), 1, 0).unwrap();
    let net = s.network().clone();
    let g = encode(&s, GraphMode::Lane);
    for c in &net.connections {
        let f = g.input.features[1].row(c.id.index());
        assert_eq!(f[0], 0.0, "yellow never counts as open");
        let (k, _) = net.programs[0].switches_to_open(1, c.id).unwrap();
        assert_eq!(f[2], k as f64 / 8.0);
        assert!(k == 1 || k == 3);
    }
}

#[test]
fn scaling_constants() {
    let sc = FeatureScaling::default();
    assert_eq!(sc.scale(FeatureKind::Length, 150.0), 0.75);
    assert_eq!(sc.scale(FeatureKind::Time, 5.0), 5.0 / 60.0);
    assert_eq!(sc.scale(FeatureKind::Unit, 1.0), 1.0);
    assert_eq!(sc.unscale(FeatureKind::Speed, sc.scale(FeatureKind::Speed, 7.3)), 7.3);
}

#[test]
fn encoding_is_deterministic_and_ids_stable() {
    let mut s = three_vehicle_state();
    let a = encode(&s, GraphMode::Vehicle);
    assert_eq!(a, encode(&s, GraphMode::Vehicle));
    s.step(&[crate::sim::TscAction::Prolong]).unwrap();
    let b = encode(&s, GraphMode::Vehicle);
    assert_eq!(a.input.edges[..9], b.input.edges[..9]);
    assert!(a.edge_list_text().lines().any(|l| l.starts_with("edge 0 1 TscToConnection")));
}
