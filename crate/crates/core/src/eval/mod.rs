//! Closed-loop evaluation: trips are generated during the first hour and
//! the simulation runs until every trip has completed (or a hard cap),
//! recording per-step delay and per-trip durations.

mod report;

pub use report::{
    emit_report, load_results, read_results, results_to_string, save_results, summarize, write_delay_csv, write_paired_csv,
    write_summary_csv, write_trips_csv, Summary,
};

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::statistics::{Data, OrderStatistics, Statistics};
use thiserror::Error;

use crate::agent::{mix, select_actions};
use crate::graphenc::{GraphEncoder, GraphMode};
use crate::nn::{q_values, ModelParams, Noise, NnError};
use crate::scenario::{generate_demand, RoadNetwork, ScenarioError, TripTable};
use crate::sim::{SimError, SimState, TscAction};

/// Trips are generated during this many seconds.
pub const GENERATION_HORIZON: f64 = 3600.0;
/// Episodes stop here even if trips are still travelling.
pub const HARD_CAP_SECONDS: u64 = 10_800;
pub const DEFAULT_EVAL_SEEDS: usize = 10;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("policy/network mode mismatch: {0}")]
    ModeMismatch(String),
    #[error("MARL parameters are network-specific")]
    NetworkSpecific,
    #[error("trip pairing impossible: {0}")]
    Pairing(String),
    #[error("invalid results file: {0}")]
    Parse(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Regime {
    /// One expected departure per second.
    Default,
    /// Twice the default rate.
    Heavy,
}

impl Regime {
    pub fn rate(self) -> f64 {
        match self {
            Regime::Default => 1.0,
            Regime::Heavy => 2.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Default => "default",
            Regime::Heavy => "heavy",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "default" => Ok(Regime::Default),
            "heavy" => Ok(Regime::Heavy),
            o => Err(format!("unknown regime `{o}` (expected default or heavy)")),
        }
    }
}

/// A controller for every TSC of a network.
pub trait Policy {
    fn name(&self) -> String;

    /// Called before each episode; fails when the policy cannot drive `net`.
    fn prepare(&mut self, _net: &Arc<RoadNetwork>) -> Result<(), EvalError> {
        Ok(())
    }

    /// Requested action of every TSC, in TSC order.
    fn act(&mut self, state: &SimState) -> Result<Vec<TscAction>, EvalError>;
}

/// A trained graph model acting greedily (no exploration noise).
#[derive(Clone, Debug)]
pub struct LearnedPolicy {
    pub label: String,
    pub params: ModelParams,
    encoder: Option<GraphEncoder>,
}

impl LearnedPolicy {
    pub fn new(label: impl Into<String>, params: ModelParams) -> Self {
        Self { label: label.into(), params, encoder: None }
    }

    pub fn mode(&self) -> Option<GraphMode> {
        self.params.config.mode
    }
}

impl Policy for LearnedPolicy {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn prepare(&mut self, net: &Arc<RoadNetwork>) -> Result<(), EvalError> {
        let mode = self.params.config.mode.ok_or_else(|| EvalError::ModeMismatch("model has no encoder mode".into()))?;
        if self.params.config.schema != mode.schema() {
            return Err(EvalError::ModeMismatch(format!("model schema does not match {} graphs", mode.as_str())));
        }
        if !self.encoder.as_ref().is_some_and(|e| Arc::ptr_eq(e.network(), net)) {
            self.encoder = Some(GraphEncoder::new(net.clone(), mode, self.params.config.scaling));
        }
        Ok(())
    }

    fn act(&mut self, state: &SimState) -> Result<Vec<TscAction>, EvalError> {
        let enc = self.encoder.as_ref().ok_or_else(|| EvalError::ModeMismatch("policy not prepared".into()))?;
        let g = enc.encode(state);
        Ok(select_actions(&q_values(&self.params, &g.input, &mut Noise::Zero)?))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TripRecord {
    pub id: u64,
    pub depart: f64,
    /// `None` when the trip had not completed at the hard cap.
    pub duration: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeResult {
    pub policy: String,
    pub seed: u64,
    pub regime: Regime,
    /// Total instantaneous delay after each step (may be empty when loaded
    /// from a results file).
    pub delay: Vec<f64>,
    pub trips: Vec<TripRecord>,
}

impl EpisodeResult {
    pub fn durations(&self) -> Vec<f64> {
        self.trips.iter().filter_map(|t| t.duration).collect()
    }

    pub fn censored(&self) -> usize {
        self.trips.iter().filter(|t| t.duration.is_none()).count()
    }
}

/// Trips of one evaluation scenario; shared by every policy.
pub fn scenario_trips(net: &RoadNetwork, regime: Regime, seed: u64) -> Result<TripTable, EvalError> {
    Ok(generate_demand(mix(seed, 0xE7A1), net, regime.rate(), GENERATION_HORIZON)?)
}

/// Runs one episode until all trips completed or `cap` seconds elapsed.
pub fn run_episode(
    policy: &mut dyn Policy,
    net: &Arc<RoadNetwork>,
    trips: Arc<TripTable>,
    seed: u64,
    regime: Regime,
    cap: u64,
) -> Result<EpisodeResult, EvalError> {
    policy.prepare(net)?;
    let mut state = SimState::reset(net.clone(), trips.clone(), seed)?;
    let mut delay = Vec::new();
    while !state.all_trips_done() && state.clock() < cap {
        let a = policy.act(&state)?;
        state.step(&a)?;
        delay.push(state.instantaneous_delay());
    }
    let done: HashMap<u64, f64> = state.completed().iter().map(|c| (c.id, c.duration())).collect();
    let trips = trips
        .trips
        .iter()
        .map(|t| TripRecord { id: t.id, depart: t.depart, duration: done.get(&t.id).copied() })
        .collect();
    Ok(EpisodeResult { policy: policy.name(), seed, regime, delay, trips })
}

/// One episode per seed on `net`; episodes run on up to `jobs` threads.
pub fn evaluate<P: Policy + Clone + Send + Sync>(
    policy: &P,
    net: &Arc<RoadNetwork>,
    regime: Regime,
    seeds: &[u64],
    jobs: usize,
) -> Result<Vec<EpisodeResult>, EvalError> {
    let run = |seed: u64| -> Result<EpisodeResult, EvalError> {
        let trips = Arc::new(scenario_trips(net, regime, seed)?);
        run_episode(&mut policy.clone(), net, trips, seed, regime, HARD_CAP_SECONDS)
    };
    let jobs = jobs.max(1).min(seeds.len().max(1));
    if jobs == 1 {
        return seeds.iter().map(|&s| run(s)).collect();
    }
    let chunk = seeds.len().div_ceil(jobs);
    std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(|&s| run(s)).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("evaluation thread panicked")).collect()
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairedDelta {
    pub seed: u64,
    pub trip: u64,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairedReport {
    pub a: String,
    pub b: String,
    pub deltas: Vec<PairedDelta>,
    /// Pairs dropped because either side was censored.
    pub excluded: usize,
    pub mean: f64,
    pub median: f64,
    pub sd: f64,
    /// `None` when the deltas have no spread (or fewer than two pairs).
    pub t: Option<f64>,
    /// Two-sided p-value of the t statistic.
    pub p: Option<f64>,
}

/// `duration_a − duration_b` for every trip completed under both.
pub fn paired_differences(a: &[EpisodeResult], b: &[EpisodeResult]) -> Result<PairedReport, EvalError> {
    let mut deltas = Vec::new();
    let mut excluded = 0;
    let by_seed: HashMap<u64, &EpisodeResult> = b.iter().map(|r| (r.seed, r)).collect();
    if a.len() != b.len() || by_seed.len() != b.len() {
        return Err(EvalError::Pairing("result sets cover different seeds".into()));
    }
    for ra in a {
        let rb = by_seed.get(&ra.seed).ok_or_else(|| EvalError::Pairing(format!("seed {} missing", ra.seed)))?;
        if ra.regime != rb.regime || ra.trips.len() != rb.trips.len() {
            return Err(EvalError::Pairing(format!("seed {}: different scenarios", ra.seed)));
        }
        for (ta, tb) in ra.trips.iter().zip(&rb.trips) {
            if ta.id != tb.id {
                return Err(EvalError::Pairing(format!("seed {}: trip {} vs {}", ra.seed, ta.id, tb.id)));
            }
            match (ta.duration, tb.duration) {
                (Some(x), Some(y)) => deltas.push(PairedDelta { seed: ra.seed, trip: ta.id, delta: x - y }),
                _ => excluded += 1,
            }
        }
    }
    let name = |r: &[EpisodeResult]| r.first().map_or_else(String::new, |e| e.policy.clone());
    let d: Vec<f64> = deltas.iter().map(|p| p.delta).collect();
    let n = d.len();
    let (mean, median) = if n == 0 { (f64::NAN, f64::NAN) } else { (d.iter().mean(), Data::new(d.clone()).median()) };
    let sd = if n < 2 { f64::NAN } else { d.iter().std_dev() };
    let (t, p) = if n >= 2 && sd > 0.0 {
        let t = mean / (sd / (n as f64).sqrt());
        let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("positive degrees of freedom");
        (Some(t), Some(2.0 * dist.cdf(-t.abs())))
    } else {
        (None, None)
    };
    Ok(PairedReport { a: name(a), b: name(b), deltas, excluded, mean, median, sd, t, p })
}
