//! Trip tables and their seeded generation.
//!
//! Arrivals form a Poisson process. Every 120 s block draws fresh
//! Dirichlet(1) weights over origin lanes and, independently, over
//! destination lanes; each trip then follows the free-flow fastest lane path
//! from its origin to its destination.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Exp1};

use super::network::{LaneId, RoadNetwork};
use super::ScenarioError;

/// Length of a demand block whose origin/destination weights are fixed.
pub const DEMAND_BLOCK_SECONDS: f64 = 120.0;

#[derive(Clone, Debug, PartialEq)]
pub struct Trip {
    pub id: u64,
    pub depart: f64,
    pub route: Vec<LaneId>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TripTable {
    pub trips: Vec<Trip>,
}

impl TripTable {
    pub fn len(&self) -> usize {
        self.trips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trips.is_empty()
    }

    pub fn validate(&self, net: &RoadNetwork) -> Result<(), ScenarioError> {
        let bad = |invariant: &str, detail: String| ScenarioError::Validation { invariant: invariant.into(), detail };
        let mut ids = std::collections::HashSet::new();
        let mut last = f64::NEG_INFINITY;
        let links: std::collections::HashSet<(LaneId, LaneId)> =
            net.connections.iter().map(|c| (c.from_lane, c.to_lane)).collect();
        for t in &self.trips {
            if !ids.insert(t.id) {
                return Err(bad("trip-id-unique", format!("trip {}", t.id)));
            }
            if !(t.depart.is_finite() && t.depart >= 0.0) {
                return Err(bad("trip-depart-valid", format!("trip {}", t.id)));
            }
            if t.depart < last {
                return Err(bad("departures-non-decreasing", format!("trip {}", t.id)));
            }
            last = t.depart;
            if t.route.len() < 2 {
                return Err(bad("route-min-two-lanes", format!("trip {}", t.id)));
            }
            if let Some(l) = t.route.iter().find(|l| l.index() >= net.lanes.len()) {
                return Err(bad("route-lanes-exist", format!("trip {} lane {l}", t.id)));
            }
            if let Some(w) = t.route.windows(2).find(|w| !links.contains(&(w[0], w[1]))) {
                return Err(bad(
                    "route-lanes-connected",
                    format!("trip {}: no connection {} -> {}", t.id, w[0], w[1]),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq)]
struct HeapItem {
    cost: f64,
    lane: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then_with(|| other.lane.cmp(&self.lane))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Fastest free-flow lane paths from every lane to every other lane.
pub struct RouteTable {
    /// `pred[o][d]` is the lane preceding `d` on the path from `o`.
    pred: Vec<Vec<Option<usize>>>,
    reachable: Vec<Vec<usize>>,
}

impl RouteTable {
    pub fn new(net: &RoadNetwork) -> Self {
        let n = net.lanes.len();
        let mut succ = vec![Vec::new(); n];
        for c in &net.connections {
            succ[c.from_lane.index()].push(c.to_lane.index());
        }
        for s in &mut succ {
            s.sort_unstable();
        }
        let time: Vec<f64> = net.lanes.iter().map(|l| l.length / l.speed_limit).collect();
        let mut pred = Vec::with_capacity(n);
        let mut reachable = Vec::with_capacity(n);
        for o in 0..n {
            let mut dist = vec![f64::INFINITY; n];
            let mut p = vec![None; n];
            let mut heap = BinaryHeap::new();
            dist[o] = 0.0;
            heap.push(HeapItem { cost: 0.0, lane: o });
            while let Some(HeapItem { cost, lane }) = heap.pop() {
                if cost > dist[lane] {
                    continue;
                }
                for &nx in &succ[lane] {
                    let c = cost + time[nx];
                    if c < dist[nx] {
                        dist[nx] = c;
                        p[nx] = Some(lane);
                        heap.push(HeapItem { cost: c, lane: nx });
                    }
                }
            }
            reachable.push((0..n).filter(|&d| d != o && dist[d].is_finite()).collect());
            pred.push(p);
        }
        Self { pred, reachable }
    }

    pub fn reachable_from(&self, origin: LaneId) -> &[usize] {
        &self.reachable[origin.index()]
    }

    pub fn route(&self, origin: LaneId, dest: LaneId) -> Option<Vec<LaneId>> {
        let (o, d) = (origin.index(), dest.index());
        if o == d || self.pred[o][d].is_none() {
            return None;
        }
        let mut path = vec![d];
        let mut cur = d;
        while cur != o {
            cur = self.pred[o][cur]?;
            path.push(cur);
        }
        path.reverse();
        Some(path.into_iter().map(LaneId).collect())
    }
}

fn dirichlet_weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = w.iter().sum();
    if s > 0.0 {
        w.iter_mut().for_each(|x| *x /= s);
    }
    w
}

fn pick_weighted(rng: &mut ChaCha8Rng, candidates: &[usize], weights: &[f64]) -> usize {
    let total: f64 = candidates.iter().map(|&c| weights[c]).sum();
    if !(total > 0.0) {
        return candidates[rng.random_range(0..candidates.len())];
    }
    let mut u = rng.random::<f64>() * total;
    for &c in candidates {
        u -= weights[c];
        if u < 0.0 {
            return c;
        }
    }
    *candidates.last().expect("non-empty candidates")
}

/// Poisson demand with block-wise re-sampled origin/destination weights.
pub fn generate_demand(seed: u64, net: &RoadNetwork, rate: f64, horizon: f64) -> Result<TripTable, ScenarioError> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(ScenarioError::InvalidParams(format!("trip rate must be positive, got {rate}")));
    }
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(ScenarioError::InvalidParams(format!("horizon must be non-negative, got {horizon}")));
    }
    let routes = RouteTable::new(net);
    let origins: Vec<usize> = (0..net.lanes.len()).filter(|&o| !routes.reachable[o].is_empty()).collect();
    if origins.is_empty() {
        return Err(ScenarioError::NoRoutablePairs);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gap = Exp::new(rate).expect("positive rate");
    let mut trips = Vec::new();
    let mut block: Option<u64> = None;
    let (mut w_origin, mut w_dest) = (Vec::new(), Vec::new());
    let mut t = 0.0;
    loop {
        t += gap.sample(&mut rng);
        if t >= horizon {
            break;
        }
        let b = (t / DEMAND_BLOCK_SECONDS).floor() as u64;
        if block != Some(b) {
            let mut wr = ChaCha8Rng::seed_from_u64(seed);
            wr.set_stream(b + 1);
            w_origin = dirichlet_weights(&mut wr, net.lanes.len());
            w_dest = dirichlet_weights(&mut wr, net.lanes.len());
            block = Some(b);
        }
        let o = pick_weighted(&mut rng, &origins, &w_origin);
        let d = pick_weighted(&mut rng, &routes.reachable[o], &w_dest);
        let route = routes.route(LaneId(o), LaneId(d)).expect("reachable destination has a route");
        let depart = (t * 100.0).floor() / 100.0;
        trips.push(Trip { id: trips.len() as u64, depart, route });
    }
    Ok(TripTable { trips })
}

/// The origin/destination weights in force for `block`; exposed so the
/// block-wise re-sampling can be inspected.
pub fn block_weights(seed: u64, n_lanes: usize, block: u64) -> (Vec<f64>, Vec<f64>) {
    let mut wr = ChaCha8Rng::seed_from_u64(seed);
    wr.set_stream(block + 1);
    let o = dirichlet_weights(&mut wr, n_lanes);
    let d = dirichlet_weights(&mut wr, n_lanes);
    (o, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_network, GenerationParams};

    fn net() -> RoadNetwork {
        generate_network(7, &GenerationParams::default()).unwrap()
    }

    #[test]
    fn zero_horizon_is_empty() {
        assert!(generate_demand(1, &net(), 1.0, 0.0).unwrap().is_empty());
    }

    #[test]
    fn rejects_non_positive_rate() {
        assert!(generate_demand(1, &net(), 0.0, 10.0).is_err());
    }

    #[test]
    fn generated_trips_validate() {
        let n = net();
        let t = generate_demand(3, &n, 1.0, 600.0).unwrap();
        t.validate(&n).unwrap();
        assert!(t.trips.iter().all(|t| t.route.len() >= 2));
    }

    #[test]
    fn deterministic() {
        let n = net();
        assert_eq!(generate_demand(5, &n, 1.0, 900.0).unwrap(), generate_demand(5, &n, 1.0, 900.0).unwrap());
    }

    #[test]
    fn weights_change_between_blocks_only() {
        let (a0, _) = block_weights(4, 20, 0);
        let (a0b, _) = block_weights(4, 20, 0);
        let (a1, _) = block_weights(4, 20, 1);
        assert_eq!(a0, a0b);
        assert_ne!(a0, a1);
    }

    #[test]
    fn network_without_connections_has_no_routable_pairs() {
        let mut n = net();
        n.connections.clear();
        for p in &mut n.programs {
            p.phases.clear();
        }
        assert!(matches!(generate_demand(1, &n, 1.0, 100.0), Err(ScenarioError::NoRoutablePairs)));
    }
}
