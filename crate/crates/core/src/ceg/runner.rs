use super::trace::{ControlTrace, Phase, StopTime, TraceStep};
use super::{CegEngine, ControlError, ControlField};
use crate::grid::{Strategy, StrategyGrid};

/// Mutable controller state: the current grid, its payoffs and the trace so far.
pub(crate) struct Runner<'e> {
    pub eng: &'e CegEngine,
    pub cells: Vec<Strategy>,
    pub pay: Vec<i64>,
    pub phase: Phase,
    trace: ControlTrace,
}

impl<'e> Runner<'e> {
    pub fn new(eng: &'e CegEngine, initial: &StrategyGrid) -> Self {
        let frozen = eng.frozen().iter().any(|&f| f).then(|| eng.frozen().to_vec());
        let cells = initial.cells().to_vec();
        let pay = eng.payoffs(&cells);
        Self { eng, cells, pay, phase: Phase::Step1, trace: ControlTrace::new(initial.clone(), frozen) }
    }

    pub fn time(&self) -> usize {
        self.trace.steps.len()
    }

    pub fn n_c(&self) -> usize {
        self.cells.iter().filter(|s| s.is_c()).count()
    }

    pub fn is_c(&self, k: usize) -> bool {
        self.cells[k].is_c()
    }

    pub fn coop(&self, k: usize) -> usize {
        self.eng.coop_count(&self.cells, k)
    }

    pub fn frozen(&self, k: usize) -> bool {
        self.eng.frozen()[k]
    }

    /// Payoff of a cooperator (`c = true`) or defector with `k` cooperating neighbors.
    pub fn value(&self, c: bool, k: usize) -> i64 {
        self.eng.value(if c { Strategy::C } else { Strategy::D }, k)
    }

    pub fn fail(&self, detail: impl Into<String>) -> ControlError {
        ControlError::Integrity { phase: self.phase, step: self.time(), detail: detail.into() }
    }

    pub fn ensure(&self, cond: bool, detail: impl FnOnce() -> String) -> Result<(), ControlError> {
        if cond {
            Ok(())
        } else {
            Err(self.fail(detail()))
        }
    }

    pub fn mark(&mut self, index: u8) {
        if self.trace.stop_time(index).is_none() {
            let time = self.time();
            self.trace.stop_times.push(StopTime { index, time });
        }
    }

    /// Applies one controlled step under `phase` and returns the nodes that changed.
    pub fn apply(&mut self, controls: ControlField, phase: Phase) -> Vec<usize> {
        let next = self.eng.step(&self.cells, &self.pay, &controls);
        let changed: Vec<usize> = (0..next.len()).filter(|&k| next[k] != self.cells[k]).collect();
        self.cells = next;
        self.pay = self.eng.payoffs(&self.cells);
        let state = StrategyGrid::from_cells(self.eng.dims(), self.cells.clone()).expect("size preserved");
        let n_c = state.n_c();
        let step = self.time() + 1;
        self.trace.steps.push(TraceStep { step, phase, controls, state, n_c });
        changed
    }

    /// Greedy control until the state stops changing; `n_C` must fall at every step.
    pub fn greedy_fixpoint(&mut self) -> Result<(), ControlError> {
        loop {
            let controls = self.eng.greedy(&self.cells, &self.pay);
            let next = self.eng.step(&self.cells, &self.pay, &controls);
            if next == self.cells {
                return Ok(());
            }
            let before = self.n_c();
            let t0 = self.time();
            self.apply(controls, Phase::Step1);
            let after = self.n_c();
            if after >= before {
                return Err(ControlError::Integrity {
                    phase: Phase::Step1,
                    step: self.time(),
                    detail: format!("greedy step did not reduce cooperators ({before} -> {after})"),
                });
            }
            self.trace.decrease_points.push((t0, t0 + 1));
        }
    }

    /// A two-step gadget: hold every node except the `overrides` (node, target) pairs,
    /// expect exactly `flips` to change, then take one greedy step and expect every
    /// node in `expect_d` to defect and `n_C` to fall strictly.
    pub fn gadget(
        &mut self,
        overrides: &[(usize, usize)],
        flips: &[usize],
        expect_d: &[usize],
    ) -> Result<(), ControlError> {
        let t0 = self.time();
        let n0 = self.n_c();
        let mut controls = self.eng.holding(&self.cells, &self.pay);
        for &(k, t) in overrides {
            controls.set_target(k, t).map_err(ControlError::Core)?;
        }
        let mut changed = self.apply(controls, self.phase);
        changed.sort_unstable();
        let mut want = flips.to_vec();
        want.sort_unstable();
        want.dedup();
        self.ensure(changed == want, || format!("gadget first step changed {changed:?}, expected {want:?}"))?;

        let controls = self.eng.greedy(&self.cells, &self.pay);
        self.apply(controls, self.phase);
        for &k in expect_d {
            self.ensure(!self.cells[k].is_c(), || format!("node index {k} still cooperates after the gadget"))?;
        }
        let n2 = self.n_c();
        self.ensure(n2 < n0, || format!("gadget did not reduce cooperators ({n0} -> {n2})"))?;
        self.trace.decrease_points.push((t0, t0 + 2));
        Ok(())
    }

    /// Holding controls except for `overrides`; no assertions.
    pub fn hold_step(&mut self, overrides: &[(usize, usize)]) -> Result<Vec<usize>, ControlError> {
        let mut controls = self.eng.holding(&self.cells, &self.pay);
        for &(k, t) in overrides {
            controls.set_target(k, t).map_err(ControlError::Core)?;
        }
        Ok(self.apply(controls, self.phase))
    }

    pub fn finish(self) -> ControlTrace {
        self.trace
    }
}
