//! Stochastic imitation dynamics on the torus.
//!
//! One step is synchronous: payoffs are computed from the current state, then
//! every updating node, in row-major order, draws one neighbor uniformly and
//! (only when that neighbor plays the other strategy, earns strictly more and
//! the switch is not certain) one uniform variate deciding whether to imitate.
//! The RNG consumption order is part of the reproducibility contract.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};
use crate::grid::{Strategy, StrategyGrid};
use crate::payoff::{Payoff, PayoffMatrix};
use crate::rule::ImitationRule;
use crate::torus::{NodeId, TorusDims};

/// Seeded random stream driving one run.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform index in `0..4` from the top two bits of one 32-bit draw.
    #[inline]
    pub fn neighbor_draw(&mut self) -> usize {
        (self.rng.next_u32() >> 30) as usize
    }

    #[inline]
    pub fn coin(&mut self) -> bool {
        self.rng.next_u32() >> 31 == 1
    }

    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

/// A set of strategies, used for one-step positive-probability supports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct StrategySet {
    has_c: bool,
    has_d: bool,
}

impl StrategySet {
    pub fn single(s: Strategy) -> Self {
        let mut set = Self::default();
        set.insert(s);
        set
    }

    pub fn insert(&mut self, s: Strategy) {
        match s {
            Strategy::C => self.has_c = true,
            Strategy::D => self.has_d = true,
        }
    }

    pub fn contains(&self, s: Strategy) -> bool {
        match s {
            Strategy::C => self.has_c,
            Strategy::D => self.has_d,
        }
    }

    pub fn len(&self) -> usize {
        self.has_c as usize + self.has_d as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = Strategy> + '_ {
        [Strategy::C, Strategy::D].into_iter().filter(|s| self.contains(*s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TerminalClass {
    AllC,
    AllD,
    MixedOmegaStar,
    Timeout,
}

impl TerminalClass {
    /// Class of a state already known to be absorbing.
    pub fn of_absorbing(state: &StrategyGrid) -> Self {
        if state.is_all(Strategy::C) {
            TerminalClass::AllC
        } else if state.is_all(Strategy::D) {
            TerminalClass::AllD
        } else {
            TerminalClass::MixedOmegaStar
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            TerminalClass::AllC => "all_c",
            TerminalClass::AllD => "all_d",
            TerminalClass::MixedOmegaStar => "mixed_omega_star",
            TerminalClass::Timeout => "timeout",
        }
    }
}

impl fmt::Display for TerminalClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome of one seeded run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunRecord {
    pub seed: u64,
    pub initial_hash: u64,
    /// Steps to absorption; `None` when the step budget ran out first.
    pub steps: Option<usize>,
    pub steps_run: usize,
    pub terminal: TerminalClass,
    pub n_c_final: usize,
}

impl RunRecord {
    pub fn converged(&self) -> bool {
        self.steps.is_some()
    }
}

/// Precomputed neighbor table and payoff table for fast stepping.
#[derive(Debug, Clone)]
pub struct SegEngine {
    dims: TorusDims,
    table: Vec<[usize; 4]>,
    payoff: [[i64; 5]; 2],
    rule: ImitationRule,
    frozen: Option<Vec<bool>>,
}

impl SegEngine {
    pub fn new(dims: TorusDims, m: &PayoffMatrix, rule: &ImitationRule) -> Result<Self> {
        if rule.matrix() != m {
            return Err(Error::InvalidRule("rule was validated against a different payoff matrix".into()));
        }
        Ok(Self { dims, table: dims.neighbor_table(), payoff: m.payoff_table(), rule: rule.clone(), frozen: None })
    }

    /// Marks nodes that never update (they still earn payoffs and can be imitated).
    pub fn with_frozen(mut self, frozen: Vec<bool>) -> Result<Self> {
        if frozen.len() != self.dims.len() {
            return Err(Error::StateSize { expected: self.dims.len(), got: frozen.len() });
        }
        self.frozen = Some(frozen);
        Ok(self)
    }

    pub fn dims(&self) -> TorusDims {
        self.dims
    }

    pub fn rule(&self) -> &ImitationRule {
        &self.rule
    }

    #[inline]
    fn is_frozen(&self, k: usize) -> bool {
        self.frozen.as_ref().is_some_and(|f| f[k])
    }

    pub fn payoffs_into(&self, cells: &[Strategy], out: &mut Vec<i64>) {
        out.clear();
        out.extend(self.table.iter().zip(cells).map(|(nb, &s)| {
            let d = cells[nb[0]] as usize + cells[nb[1]] as usize + cells[nb[2]] as usize + cells[nb[3]] as usize;
            self.payoff[s as usize][4 - d]
        }));
    }

    /// No updating node has a neighbor of the other strategy earning strictly more.
    pub fn is_absorbing_with(&self, cells: &[Strategy], pay: &[i64]) -> bool {
        for (k, nb) in self.table.iter().enumerate() {
            if self.is_frozen(k) {
                continue;
            }
            let (s, p) = (cells[k], pay[k]);
            for &q in nb {
                if cells[q] != s && pay[q] > p {
                    return false;
                }
            }
        }
        true
    }

    pub fn step_with(&self, cells: &[Strategy], pay: &[i64], next: &mut [Strategy], rng: &mut RngStream) {
        for k in 0..cells.len() {
            let own = cells[k];
            if self.is_frozen(k) {
                next[k] = own;
                continue;
            }
            let q = self.table[k][rng.neighbor_draw()];
            let gap = pay[q] - pay[k];
            next[k] = if gap > 0 && cells[q] != own {
                let gap = Payoff(gap);
                if self.rule.is_certain(gap) || rng.uniform() < self.rule.switch_probability(gap) {
                    cells[q]
                } else {
                    own
                }
            } else {
                own
            };
        }
    }

    pub fn step(&self, state: &StrategyGrid, rng: &mut RngStream) -> StrategyGrid {
        let mut pay = Vec::with_capacity(state.cells().len());
        self.payoffs_into(state.cells(), &mut pay);
        let mut next = state.clone();
        let mut cells = next.cells().to_vec();
        self.step_with(state.cells(), &pay, &mut cells, rng);
        for (k, s) in cells.into_iter().enumerate() {
            next.set_at(k, s);
        }
        next
    }

    pub fn is_absorbing(&self, state: &StrategyGrid) -> bool {
        let mut pay = Vec::new();
        self.payoffs_into(state.cells(), &mut pay);
        self.is_absorbing_with(state.cells(), &pay)
    }

    /// Steps until absorption or `max_steps`, calling `observe(t, state)` on every
    /// visited state (including the initial and final ones).
    pub fn run(
        &self,
        initial: StrategyGrid,
        rng: &mut RngStream,
        max_steps: usize,
        mut observe: impl FnMut(usize, &StrategyGrid),
    ) -> RunRecord {
        let initial_hash = initial.digest();
        let mut cur: Vec<Strategy> = initial.cells().to_vec();
        let mut next = cur.clone();
        let mut pay = Vec::with_capacity(cur.len());
        let mut t = 0usize;
        let grid = |cells: &[Strategy]| StrategyGrid::from_cells(self.dims, cells.to_vec()).expect("sized");
        loop {
            observe(t, &grid(&cur));
            self.payoffs_into(&cur, &mut pay);
            if self.is_absorbing_with(&cur, &pay) {
                let g = grid(&cur);
                return RunRecord {
                    seed: rng.seed(),
                    initial_hash,
                    steps: Some(t),
                    steps_run: t,
                    terminal: TerminalClass::of_absorbing(&g),
                    n_c_final: g.n_c(),
                };
            }
            if t >= max_steps {
                return RunRecord {
                    seed: rng.seed(),
                    initial_hash,
                    steps: None,
                    steps_run: t,
                    terminal: TerminalClass::Timeout,
                    n_c_final: cur.iter().filter(|s| s.is_c()).count(),
                };
            }
            self.step_with(&cur, &pay, &mut next, rng);
            std::mem::swap(&mut cur, &mut next);
            t += 1;
        }
    }

    /// Same as [`SegEngine::run`] without the per-step allocation of observed grids.
    pub fn run_quiet(&self, initial: StrategyGrid, rng: &mut RngStream, max_steps: usize) -> RunRecord {
        let initial_hash = initial.digest();
        let mut cur: Vec<Strategy> = initial.cells().to_vec();
        let mut next = cur.clone();
        let mut pay = Vec::with_capacity(cur.len());
        for t in 0..=max_steps {
            self.payoffs_into(&cur, &mut pay);
            if self.is_absorbing_with(&cur, &pay) {
                let g = StrategyGrid::from_cells(self.dims, cur).expect("sized");
                return RunRecord {
                    seed: rng.seed(),
                    initial_hash,
                    steps: Some(t),
                    steps_run: t,
                    terminal: TerminalClass::of_absorbing(&g),
                    n_c_final: g.n_c(),
                };
            }
            if t == max_steps {
                break;
            }
            self.step_with(&cur, &pay, &mut next, rng);
            std::mem::swap(&mut cur, &mut next);
        }
        RunRecord {
            seed: rng.seed(),
            initial_hash,
            steps: None,
            steps_run: max_steps,
            terminal: TerminalClass::Timeout,
            n_c_final: cur.iter().filter(|s| s.is_c()).count(),
        }
    }

    /// Positive-probability next strategies of node `k`.
    pub fn support_at(&self, cells: &[Strategy], pay: &[i64], k: usize) -> StrategySet {
        let own = cells[k];
        if self.is_frozen(k) {
            return StrategySet::single(own);
        }
        let mut set = StrategySet::default();
        for &q in &self.table[k] {
            let gap = pay[q] - pay[k];
            if gap > 0 && cells[q] != own {
                set.insert(cells[q]);
                if !self.rule.is_certain(Payoff(gap)) {
                    set.insert(own);
                }
            } else {
                set.insert(own);
            }
        }
        set
    }
}

/// One synchronous stochastic step.
pub fn step_seg(state: &StrategyGrid, m: &PayoffMatrix, rule: &ImitationRule, rng: &mut RngStream) -> StrategyGrid {
    SegEngine::new(state.dims(), m, rule).expect("rule matches matrix").step(state, rng)
}

/// Whether every pair of adjacent nodes with different strategies earns exactly equal payoffs.
pub fn is_absorbing(state: &StrategyGrid, m: &PayoffMatrix) -> bool {
    let dims = state.dims();
    let pay = state.payoffs(m);
    (0..dims.len()).all(|k| {
        dims.neighbor_indices(k)
            .iter()
            .all(|&q| state.at(q) == state.at(k) || pay[q] == pay[k])
    })
}

pub fn run_until_absorbing(
    state: StrategyGrid,
    m: &PayoffMatrix,
    rule: &ImitationRule,
    rng: &mut RngStream,
    max_steps: usize,
) -> RunRecord {
    SegEngine::new(state.dims(), m, rule).expect("rule matches matrix").run_quiet(state, rng, max_steps)
}

/// Each cell independently C or D with probability one half.
pub fn random_initial(dims: TorusDims, rng: &mut RngStream) -> StrategyGrid {
    let cells = (0..dims.len()).map(|_| if rng.coin() { Strategy::D } else { Strategy::C }).collect();
    StrategyGrid::from_cells(dims, cells).expect("sized")
}

/// Positive-probability next strategies of `node` under one stochastic step.
pub fn support(state: &StrategyGrid, m: &PayoffMatrix, rule: &ImitationRule, node: NodeId) -> StrategySet {
    let engine = SegEngine::new(state.dims(), m, rule).expect("rule matches matrix");
    let mut pay = Vec::new();
    engine.payoffs_into(state.cells(), &mut pay);
    engine.support_at(state.cells(), &pay, state.dims().to_index(node))
}
