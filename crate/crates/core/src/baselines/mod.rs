//! Reference controllers: fixed-time cycling, a stopped-vs-moving greedy
//! rule and independent per-intersection Q-learners (MARL).

mod marl;

pub use marl::{load_marl, marl_train, save_marl, MarlLearner, MarlParams, MarlPolicy, MARL_HIDDEN};

use crate::eval::{EvalError, Policy};
use crate::scenario::{PhaseKind, TscId};
use crate::sim::{SimState, TscAction};

/// SWITCH once the current green phase has lasted its programmed duration.
pub fn fixed_time_action(state: &SimState, tsc: TscId) -> TscAction {
    let c = &state.controllers()[tsc.index()];
    let phase = &state.network().program(tsc).phases[c.phase];
    if phase.kind == PhaseKind::Green && f64::from(c.time_since_last_switch) >= phase.duration {
        TscAction::Switch
    } else {
        TscAction::Prolong
    }
}

/// SWITCH iff more vehicles are stopped than moving near the stop lines.
pub fn greedy_action(state: &SimState, tsc: TscId) -> TscAction {
    let (stopped, moving) = state.stopped_and_moving(tsc).expect("valid controller");
    greedy_rule(stopped, moving)
}

pub fn greedy_rule(stopped: usize, moving: usize) -> TscAction {
    if stopped > moving {
        TscAction::Switch
    } else {
        TscAction::Prolong
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct FixedTime;

impl Policy for FixedTime {
    fn name(&self) -> String {
        "fixed".into()
    }

    fn act(&mut self, state: &SimState) -> Result<Vec<TscAction>, EvalError> {
        Ok((0..state.network().tsc_count()).map(|t| fixed_time_action(state, TscId(t))).collect())
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Greedy;

impl Policy for Greedy {
    fn name(&self) -> String {
        "greedy".into()
    }

    fn act(&mut self, state: &SimState) -> Result<Vec<TscAction>, EvalError> {
        Ok((0..state.network().tsc_count()).map(|t| greedy_action(state, TscId(t))).collect())
    }
}
