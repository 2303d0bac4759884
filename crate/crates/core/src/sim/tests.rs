use super::*;
use crate::scenario::fixtures::{cross, cross_inbound, cross_outbound};
use crate::scenario::{generate_demand, generate_network, GenerationParams};

fn empty_sim(signalized: bool) -> SimState {
    SimState::reset(Arc::new(cross(150.0, signalized)), Arc::new(TripTable::default()), 0).unwrap()
}

/// An arm whose straight movement is red in phase 0.
fn red_arm(sim: &SimState) -> usize {
    let net = sim.network();
    (1..5)
        .find(|&a| {
            let c = net.find_connection(cross_inbound(a), cross_outbound((a + 1) % 4 + 1)).unwrap();
            net.programs[0].phases[0].opening(c).is_none()
        })
        .unwrap()
}

#[test]
fn reset_is_empty_and_deterministic() {
    let a = empty_sim(true);
    assert_eq!(a.clock(), 0);
    assert_eq!(a.vehicles().count(), 0);
    assert_eq!(a.instantaneous_delay(), 0.0);
    assert_eq!(a, empty_sim(true));
    assert_eq!(a.controllers()[0], ControllerState { phase: 0, time_since_last_switch: 5 });
}

#[test]
fn switch_needs_five_seconds_since_last_switch() {
    let mut s = empty_sim(true);
    s.set_controller(TscId(0), 0, 3).unwrap();
    assert!(!s.legal_actions(TscId(0)).unwrap().switch_effective);
    let ev = s.step(&[TscAction::Switch]).unwrap();
    assert_eq!(ev.realized, vec![TscAction::Prolong]);
    assert_eq!(s.controllers()[0].phase, 0);

    s.set_controller(TscId(0), 0, 5).unwrap();
    let ev = s.step(&[TscAction::Switch]).unwrap();
    assert_eq!(ev.realized, vec![TscAction::Switch]);
    assert_eq!(s.phase_kind(TscId(0)).unwrap(), PhaseKind::Yellow);
}

#[test]
fn yellow_counts_down_and_lasts_five_steps() {
    let mut s = empty_sim(true);
    s.set_controller(TscId(0), 1, 3).unwrap();
    assert_eq!(s.controllers()[0].yellow_countdown(5.0), 2);
    let ev = s.step(&[TscAction::Switch]).unwrap();
    assert_eq!(ev.realized, vec![TscAction::Prolong]);
    assert_eq!(s.controllers()[0].phase, 1);
    assert_eq!(s.controllers()[0].yellow_countdown(5.0), 1);

    let mut s = empty_sim(true);
    s.step(&[TscAction::Switch]).unwrap();
    let mut yellow_steps = 1;
    while s.phase_kind(TscId(0)).unwrap() == PhaseKind::Yellow {
        s.step(&[TscAction::Switch]).unwrap();
        yellow_steps += 1;
    }
    // the step that entered yellow plus four more; the sixth leaves it
    assert_eq!(yellow_steps, 6);
    assert_eq!(s.controllers()[0].phase, 2);
}

#[test]
fn action_count_and_unknown_tsc_errors() {
    let mut s = empty_sim(true);
    assert_eq!(s.step(&[]), Err(SimError::ActionCount { expected: 1, got: 0 }));
    assert_eq!(s.legal_actions(TscId(4)), Err(SimError::UnknownTsc(4)));
}

#[test]
fn free_flow_accelerates() {
    let mut s = empty_sim(false);
    s.spawn_vehicle(vec![cross_inbound(1), cross_outbound(3)], 0, 10.0, 5.0).unwrap();
    s.step(&[]).unwrap();
    let v = s.vehicles().next().unwrap();
    assert!((v.speed - 7.6).abs() < 1e-12);
    assert!((v.position - 17.6).abs() < 1e-12);
}

#[test]
fn braking_before_red_stop_line() {
    let mut s = empty_sim(true);
    let arm = red_arm(&s);
    let route = vec![cross_inbound(arm), cross_outbound((arm + 1) % 4 + 1)];
    s.spawn_vehicle(route, 0, 147.0, 5.0).unwrap();
    // gap recursion g' = g - v_safe(g) with v_safe(g) = -b + sqrt(b^2 + 2bg)
    let speeds = [2.37386354243376, 0.587752757170513, 0.03822138106566353, 0.000162316402661844];
    for &expected in &speeds {
        s.step(&[TscAction::Prolong]).unwrap();
        let v = s.vehicles().next().unwrap();
        assert!((v.speed - expected).abs() < 1e-9, "{} vs {expected}", v.speed);
        assert!(v.position <= 150.0);
        assert_eq!(v.lane(), cross_inbound(arm));
    }
    assert!(s.vehicles().next().unwrap().speed < STOPPED_SPEED);
}

#[test]
fn queue_counts_and_reward() {
    let mut s = empty_sim(true);
    let r = |a: usize| vec![cross_inbound(a), cross_outbound((a + 1) % 4 + 1)];
    for p in [149.0, 141.0, 133.0] {
        s.spawn_vehicle(r(1), 0, p, 0.0).unwrap();
    }
    for p in [149.0, 141.0] {
        s.spawn_vehicle(r(2), 0, p, 0.0).unwrap();
    }
    // stopped but 60 m upstream, and moving inside the window
    s.spawn_vehicle(r(3), 0, 90.0, 0.0).unwrap();
    s.spawn_vehicle(r(4), 0, 140.0, 2.0).unwrap();
    let q = s.queue_lengths(TscId(0)).unwrap();
    assert_eq!(q.per_lane.iter().map(|(_, n)| *n).collect::<Vec<_>>(), vec![3, 2, 0, 0]);
    assert_eq!(q.reward, -5.0);
    assert_eq!(s.stopped_and_moving(TscId(0)).unwrap(), (5, 1));
}

#[test]
fn delay_relative_to_situational_max_speed() {
    let mut net = cross(150.0, false);
    for l in &mut net.lanes {
        l.speed_limit = 8.33;
    }
    let cfg = SimConfig { vehicle_max_speed: 13.89 };
    let mut s = SimState::with_config(Arc::new(net), Arc::new(TripTable::default()), 0, cfg).unwrap();
    s.spawn_vehicle(vec![cross_inbound(1), cross_outbound(3)], 0, 20.0, 4.165).unwrap();
    assert!((s.instantaneous_delay() - 0.5).abs() < 1e-12);
    s.spawn_vehicle(vec![cross_inbound(2), cross_outbound(4)], 0, 20.0, 0.0).unwrap();
    assert!((s.instantaneous_delay() - 1.5).abs() < 1e-12);
}

#[test]
fn vehicles_cross_green_and_complete() {
    let mut s = empty_sim(false);
    s.spawn_vehicle(vec![cross_inbound(1), cross_outbound(3)], 0, 0.0, 0.0).unwrap();
    let mut steps = 0;
    while s.completed().is_empty() {
        s.step(&[]).unwrap();
        steps += 1;
        assert!(steps < 100);
    }
    // 300 m at up to 13.89 m/s
    assert!(steps >= 22, "{steps}");
    assert_eq!(s.counts().in_network, 0);
}

#[test]
fn spawn_rejects_overlap() {
    let mut s = empty_sim(false);
    let r = vec![cross_inbound(1), cross_outbound(3)];
    s.spawn_vehicle(r.clone(), 0, 20.0, 0.0).unwrap();
    assert!(s.spawn_vehicle(r, 0, 22.0, 0.0).is_err());
}

#[test]
fn trip_log_format() {
    let mut buf = Vec::new();
    write_trip_log(&mut buf, &[CompletedTrip { id: 3, depart: 1.5, arrive: 40.0 }]).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "trip_id,depart_s,arrive_s,duration_s\n3,1.5,40,38.5\n");
}

/// Open connections of phase 0 of the cross: (connection, priority).
fn phase0(s: &SimState) -> Vec<(ConnectionId, bool)> {
    s.network().programs[0].phases[0].open.iter().map(|o| (o.connection, o.priority)).collect()
}

fn conn(s: &SimState, c: ConnectionId) -> (LaneId, LaneId) {
    let c = &s.network().connections[c.index()];
    (c.from_lane, c.to_lane)
}

#[test]
fn blocked_priority_vehicle_does_not_hold_yielding_turn() {
    let mut s = empty_sim(true);
    let open = phase0(&s);
    let (c, o) = open
        .iter()
        .filter(|&&(_, p)| !p)
        .find_map(|&(c, _)| {
            let o = open.iter().find(|&&(o, p)| p && s.topo.conflicts[c.index()].contains(&o) && conn(&s, o).0 != conn(&s, c).0)?;
            Some((c, o.0))
        })
        .expect("a yielding movement with a priority foe");
    let ((cf, ct), (of, ot)) = (conn(&s, c), conn(&s, o));
    // the foe's exit is full right at its start, so the foe cannot cross
    s.spawn_vehicle(vec![ot], 0, 3.0, 0.0).unwrap();
    s.spawn_vehicle(vec![of, ot], 0, 150.0, 0.0).unwrap();
    s.spawn_vehicle(vec![cf, ct], 0, 150.0, 0.0).unwrap();
    s.step(&[TscAction::Prolong]).unwrap();
    assert_eq!(s.lane_vehicles(cf).len(), 0, "yielding vehicle entered its exit lane");
    assert_eq!(s.lane_vehicles(of).len(), 1);
}

#[test]
fn opposing_yielding_turns_do_not_deadlock() {
    let mut s = empty_sim(true);
    let open = phase0(&s);
    let yielding: Vec<ConnectionId> = open.iter().filter(|o| !o.1).map(|o| o.0).collect();
    let foe_from = |c: ConnectionId, lane: LaneId| {
        open.iter().find(|&&(o, p)| p && conn(&s, o).0 == lane && s.topo.conflicts[c.index()].contains(&o)).map(|o| o.0)
    };
    // two yielding turns, each blocked by a priority movement from the other's lane
    let (a, b, pa, pb) = yielding
        .iter()
        .flat_map(|&a| yielding.iter().map(move |&b| (a, b)))
        .find_map(|(a, b)| {
            let (pa, pb) = (foe_from(a, conn(&s, b).0)?, foe_from(b, conn(&s, a).0)?);
            Some((a, b, pa, pb))
        })
        .expect("opposing yielding turns");
    for (turn, behind) in [(a, pb), (b, pa)] {
        let (from, to) = conn(&s, turn);
        s.spawn_vehicle(vec![from, to], 0, 150.0, 0.0).unwrap();
        s.spawn_vehicle(vec![from, conn(&s, behind).1], 0, 150.0 - VEHICLE_LENGTH - MIN_GAP, 0.0).unwrap();
    }
    for _ in 0..10 {
        s.step(&[TscAction::Prolong]).unwrap();
    }
    assert!(s.lane_vehicles(conn(&s, a).0).is_empty() && s.lane_vehicles(conn(&s, b).0).is_empty());
}

fn check_invariants(s: &SimState, prev_switch: &[u64], prev_tsls: &[u32]) {
    let net = s.network();
    for l in &net.lanes {
        let q = s.lane_vehicles(l.id);
        for v in q {
            assert!((0.0..=l.length).contains(&v.position));
            assert!(v.speed <= v.max_speed.min(l.speed_limit) + 1e-9);
        }
        for w in q.iter().collect::<Vec<_>>().windows(2) {
            assert!(w[0].position - VEHICLE_LENGTH - w[1].position >= -1e-9, "overlap on lane {}", l.id);
        }
    }
    let c = s.counts();
    assert_eq!(c.released, c.in_network + c.completed + c.pending_blocked);
    for (t, ctl) in s.controllers().iter().enumerate() {
        if s.switch_counts()[t] > prev_switch[t] {
            let kind_before_was_green = net.programs[t].phases[(ctl.phase + net.programs[t].phases.len() - 1)
                % net.programs[t].phases.len()]
            .kind
                == PhaseKind::Green;
            if kind_before_was_green {
                assert!(prev_tsls[t] >= 5);
            } else {
                assert_eq!(prev_tsls[t], 5);
            }
        }
    }
}

proptest::proptest! {
    #![proptest_config(proptest::prelude::ProptestConfig::with_cases(8))]
    #[test]
    fn invariants_under_random_actions(seed in 0u64..1000, bits in proptest::collection::vec(proptest::bool::ANY, 64)) {
        let net = Arc::new(generate_network(seed, &GenerationParams::default()).unwrap());
        let trips = Arc::new(generate_demand(seed, &net, 1.0, 300.0).unwrap());
        let mut s = SimState::reset(net.clone(), trips.clone(), seed).unwrap();
        let mut replay = SimState::reset(net, trips, seed).unwrap();
        for k in 0..400 {
            let acts: Vec<TscAction> = (0..s.controllers().len())
                .map(|t| TscAction::from_index(bits[(k + 7 * t) % bits.len()] as usize))
                .collect();
            let prev_switch = s.switch_counts().to_vec();
            let prev_tsls: Vec<u32> = s.controllers().iter().map(|c| c.time_since_last_switch).collect();
            s.step(&acts).unwrap();
            replay.step(&acts).unwrap();
            check_invariants(&s, &prev_switch, &prev_tsls);
        }
        proptest::prop_assert!(s == replay);
    }
}
