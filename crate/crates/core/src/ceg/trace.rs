use serde::Serialize;
use std::fmt;

use super::{CegEngine, ControlField};
use crate::grid::StrategyGrid;
use crate::payoff::PayoffMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Phase {
    /// Greedy control until nothing changes.
    Step1,
    Step2,
    Step3,
    Step4,
    Step5Expansion,
    /// Frontier expansion from a cooperating square.
    Flood,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Step1 => "step1",
            Phase::Step2 => "step2",
            Phase::Step3 => "step3",
            Phase::Step4 => "step4",
            Phase::Step5Expansion => "step5-expansion",
            Phase::Flood => "flood",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceStep {
    /// Time after this step (the first step yields time 1).
    pub step: usize,
    pub phase: Phase,
    pub controls: ControlField,
    pub state: StrategyGrid,
    pub n_c: usize,
}

/// Time at which phase `index` of a controller finished.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopTime {
    pub index: u8,
    pub time: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlTrace {
    pub initial: StrategyGrid,
    pub steps: Vec<TraceStep>,
    pub stop_times: Vec<StopTime>,
    /// Pairs `(s, t)` with `s < t` where the controller guarantees `n_C(t) < n_C(s)`.
    pub decrease_points: Vec<(usize, usize)>,
    pub frozen: Option<Vec<bool>>,
}

impl ControlTrace {
    pub fn new(initial: StrategyGrid, frozen: Option<Vec<bool>>) -> Self {
        Self { initial, steps: Vec::new(), stop_times: Vec::new(), decrease_points: Vec::new(), frozen }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn final_state(&self) -> &StrategyGrid {
        self.steps.last().map(|s| &s.state).unwrap_or(&self.initial)
    }

    pub fn state_at(&self, t: usize) -> &StrategyGrid {
        if t == 0 {
            &self.initial
        } else {
            &self.steps[t - 1].state
        }
    }

    pub fn stop_time(&self, index: u8) -> Option<usize> {
        self.stop_times.iter().find(|s| s.index == index).map(|s| s.time)
    }

    /// `n_C` at times `0..=len`.
    pub fn n_c_series(&self) -> Vec<usize> {
        std::iter::once(self.initial.n_c()).chain(self.steps.iter().map(|s| s.n_c)).collect()
    }

    pub fn phase_len(&self, phase: Phase) -> usize {
        self.steps.iter().filter(|s| s.phase == phase).count()
    }

    /// Replays every step and checks the recorded states, counts and decrease points.
    pub fn verify(&self, m: &PayoffMatrix) -> Result<(), String> {
        let dims = self.initial.dims();
        let mut eng = CegEngine::new(dims, m);
        if let Some(f) = &self.frozen {
            eng = eng.with_frozen(f.clone()).map_err(|e| e.to_string())?;
        }
        let mut prev = &self.initial;
        for (t, s) in self.steps.iter().enumerate() {
            if s.step != t + 1 {
                return Err(format!("step index {} recorded at position {}", s.step, t + 1));
            }
            let pay = eng.payoffs(prev.cells());
            let next = eng.step(prev.cells(), &pay, &s.controls);
            if next.as_slice() != s.state.cells() {
                return Err(format!("state at time {} does not follow from its controls", t + 1));
            }
            if s.n_c != s.state.n_c() {
                return Err(format!("n_C mismatch at time {}", t + 1));
            }
            prev = &s.state;
        }
        let series = self.n_c_series();
        for &(a, b) in &self.decrease_points {
            if a >= b || b >= series.len() || series[b] >= series[a] {
                return Err(format!("no strict n_C decrease between times {a} and {b}"));
            }
        }
        Ok(())
    }
}
