//! The controllable game: the deterministic counterpart of the stochastic
//! dynamics in which each node's compared neighbor is a chosen input.
//!
//! The controllers in this module drive a state to a target set by explicit
//! constructions. Each construction asserts the intermediate facts it relies
//! on; a failed assertion surfaces as [`ControlError::Integrity`] instead of
//! being silently repaired.

mod flood;
mod frame;
mod gadgets;
mod rect;
mod runner;
mod trace;

pub use flood::{find_c_square, run_flood_thm3};
pub use gadgets::{run_controller_thm1, run_controller_thm2, run_gadgets_thm1, run_step1};
pub use rect::run_controller_thm4;
pub use trace::{ControlTrace, Phase, StopTime, TraceStep};

use thiserror::Error;

use crate::error::{Error, Result};
use crate::grid::{Strategy, StrategyGrid};
use crate::payoff::PayoffMatrix;
use crate::torus::{NodeId, TorusDims};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ControlError {
    #[error("trace integrity error in {phase} at step {step}: {detail}")]
    Integrity { phase: Phase, step: usize, detail: String },

    #[error("controller precondition violated: {0}")]
    Precondition(String),

    #[error(transparent)]
    Core(#[from] Error),
}

/// One chosen neighbor per node, stored as a direction (up, down, left, right).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ControlField {
    dims: TorusDims,
    dirs: Vec<u8>,
}

impl ControlField {
    pub fn from_directions(dims: TorusDims, dirs: Vec<u8>) -> Result<Self> {
        if dirs.len() != dims.len() {
            return Err(Error::ControlLength { expected: dims.len(), got: dirs.len() });
        }
        if let Some(k) = dirs.iter().position(|&d| d > 3) {
            let node = dims.from_index(k)?;
            return Err(Error::NonAdjacentControl { node, target: node });
        }
        Ok(Self { dims, dirs })
    }

    /// Builds a field from explicit target nodes; every target must be adjacent.
    pub fn from_targets(dims: TorusDims, targets: &[NodeId]) -> Result<Self> {
        if targets.len() != dims.len() {
            return Err(Error::ControlLength { expected: dims.len(), got: targets.len() });
        }
        let mut dirs = Vec::with_capacity(targets.len());
        for (k, &t) in targets.iter().enumerate() {
            let node = dims.from_index(k)?;
            let pos = dims.neighbors(node).iter().position(|&n| n == t);
            match pos {
                Some(d) => dirs.push(d as u8),
                None => return Err(Error::NonAdjacentControl { node, target: t }),
            }
        }
        Ok(Self { dims, dirs })
    }

    pub fn dims(&self) -> TorusDims {
        self.dims
    }

    pub fn direction(&self, k: usize) -> u8 {
        self.dirs[k]
    }

    /// Row-major index of the neighbor chosen by node `k`.
    pub fn target_index(&self, k: usize) -> usize {
        self.dims.neighbor_indices(k)[self.dirs[k] as usize]
    }

    pub fn target(&self, node: NodeId) -> NodeId {
        self.dims.neighbors(node)[self.dirs[self.dims.to_index(node)] as usize]
    }

    /// Points node `k` at its neighbor `target`.
    pub(crate) fn set_target(&mut self, k: usize, target: usize) -> Result<()> {
        let pos = self.dims.neighbor_indices(k).iter().position(|&q| q == target);
        match pos {
            Some(d) => {
                self.dirs[k] = d as u8;
                Ok(())
            }
            None => Err(Error::NonAdjacentControl {
                node: self.dims.from_index(k)?,
                target: self.dims.from_index(target)?,
            }),
        }
    }
}

/// Neighbor table, payoff table and frozen mask for controlled stepping.
#[derive(Debug, Clone)]
pub struct CegEngine {
    dims: TorusDims,
    matrix: PayoffMatrix,
    table: Vec<[usize; 4]>,
    payoff: [[i64; 5]; 2],
    frozen: Vec<bool>,
}

impl CegEngine {
    pub fn new(dims: TorusDims, m: &PayoffMatrix) -> Self {
        Self {
            dims,
            matrix: *m,
            table: dims.neighbor_table(),
            payoff: m.payoff_table(),
            frozen: vec![false; dims.len()],
        }
    }

    /// Nodes in `frozen` never update.
    pub fn with_frozen(mut self, frozen: Vec<bool>) -> Result<Self> {
        if frozen.len() != self.dims.len() {
            return Err(Error::StateSize { expected: self.dims.len(), got: frozen.len() });
        }
        self.frozen = frozen;
        Ok(self)
    }

    pub fn dims(&self) -> TorusDims {
        self.dims
    }

    pub fn matrix(&self) -> &PayoffMatrix {
        &self.matrix
    }

    pub fn frozen(&self) -> &[bool] {
        &self.frozen
    }

    pub(crate) fn neighbors(&self, k: usize) -> &[usize; 4] {
        &self.table[k]
    }

    /// Payoff of a cooperator (`s = C`) or defector with `k` cooperating neighbors.
    pub(crate) fn value(&self, s: Strategy, k: usize) -> i64 {
        self.payoff[s as usize][k]
    }

    pub fn coop_count(&self, cells: &[Strategy], k: usize) -> usize {
        self.table[k].iter().filter(|&&q| cells[q].is_c()).count()
    }

    pub fn payoffs(&self, cells: &[Strategy]) -> Vec<i64> {
        (0..cells.len()).map(|k| self.payoff[cells[k] as usize][self.coop_count(cells, k)]).collect()
    }

    /// Node adopts its chosen neighbor's strategy iff that neighbor earns strictly more.
    pub fn step(&self, cells: &[Strategy], pay: &[i64], controls: &ControlField) -> Vec<Strategy> {
        (0..cells.len())
            .map(|k| {
                if self.frozen[k] {
                    return cells[k];
                }
                let q = self.table[k][controls.dirs[k] as usize];
                if pay[q] > pay[k] {
                    cells[q]
                } else {
                    cells[k]
                }
            })
            .collect()
    }

    /// Best-paid defecting neighbor if any, otherwise the worst-paid neighbor;
    /// ties go to the lowest row-major index.
    pub fn greedy(&self, cells: &[Strategy], pay: &[i64]) -> ControlField {
        let dirs = (0..cells.len())
            .map(|k| {
                let nb = &self.table[k];
                let pick = |better: &dyn Fn(usize, usize) -> bool, allowed: &dyn Fn(usize) -> bool| {
                    let mut best: Option<usize> = None;
                    for d in 0..4 {
                        if !allowed(nb[d]) {
                            continue;
                        }
                        best = match best {
                            None => Some(d),
                            Some(b) if better(nb[d], nb[b]) => Some(d),
                            Some(b) => Some(b),
                        };
                    }
                    best
                };
                let has_d = nb.iter().any(|&q| !cells[q].is_c());
                let d = if has_d {
                    pick(&|a, b| pay[a] > pay[b] || (pay[a] == pay[b] && a < b), &|q| !cells[q].is_c())
                } else {
                    pick(&|a, b| pay[a] < pay[b] || (pay[a] == pay[b] && a < b), &|_| true)
                };
                d.expect("four neighbors") as u8
            })
            .collect();
        ControlField { dims: self.dims, dirs }
    }

    /// Each node looks at a same-strategy neighbor (lowest index) if it has one,
    /// otherwise at its worst-paid neighbor.
    pub fn holding(&self, cells: &[Strategy], pay: &[i64]) -> ControlField {
        let dirs = (0..cells.len())
            .map(|k| {
                let nb = &self.table[k];
                let mut order: Vec<usize> = (0..4).collect();
                order.sort_by_key(|&d| nb[d]);
                if let Some(&d) = order.iter().find(|&&d| cells[nb[d]] == cells[k]) {
                    return d as u8;
                }
                *order.iter().min_by_key(|&&d| (pay[nb[d]], nb[d])).expect("four neighbors") as u8
            })
            .collect();
        ControlField { dims: self.dims, dirs }
    }

    /// No updating node has a neighbor of the other strategy earning strictly more.
    pub fn is_absorbing(&self, cells: &[Strategy], pay: &[i64]) -> bool {
        (0..cells.len()).all(|k| {
            self.frozen[k] || self.table[k].iter().all(|&q| cells[q] == cells[k] || pay[q] <= pay[k])
        })
    }
}

/// One synchronous controlled step.
pub fn step_ceg(state: &StrategyGrid, m: &PayoffMatrix, controls: &ControlField) -> Result<StrategyGrid> {
    if controls.dims != state.dims() {
        return Err(Error::ControlLength { expected: state.dims().len(), got: controls.dirs.len() });
    }
    let eng = CegEngine::new(state.dims(), m);
    let pay = eng.payoffs(state.cells());
    StrategyGrid::from_cells(state.dims(), eng.step(state.cells(), &pay, controls))
}

/// The greedy control: best-paid defecting neighbor, else worst-paid neighbor.
pub fn greedy_control(state: &StrategyGrid, m: &PayoffMatrix) -> ControlField {
    let eng = CegEngine::new(state.dims(), m);
    let pay = eng.payoffs(state.cells());
    eng.greedy(state.cells(), &pay)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pd() -> PayoffMatrix {
        PayoffMatrix::from_integers(3, 0, 5, 1).unwrap()
    }

    #[test]
    fn non_adjacent_control_rejected() {
        let d = TorusDims::new(4, 4).unwrap();
        let mut targets: Vec<NodeId> = (0..16).map(|k| d.neighbors(d.from_index(k).unwrap())[0]).collect();
        assert!(ControlField::from_targets(d, &targets).is_ok());
        targets[5] = NodeId::new(4, 4);
        assert!(matches!(ControlField::from_targets(d, &targets), Err(Error::NonAdjacentControl { .. })));
    }

    #[test]
    fn same_strategy_controls_hold_state() {
        let m = pd();
        let g = StrategyGrid::from_rows(&["..##", "..##", "####", "####"]).unwrap();
        let eng = CegEngine::new(g.dims(), &m);
        let pay = eng.payoffs(g.cells());
        let hold = eng.holding(g.cells(), &pay);
        assert_eq!(step_ceg(&g, &m, &hold).unwrap(), g);
    }

    #[test]
    fn absorbing_state_ignores_controls() {
        let m = pd();
        let d = TorusDims::new(3, 3).unwrap();
        let g = StrategyGrid::all_c(d);
        for dir in 0..4u8 {
            let f = ControlField::from_directions(d, vec![dir; 9]).unwrap();
            assert_eq!(step_ceg(&g, &m, &f).unwrap(), g);
        }
    }

    #[test]
    fn greedy_prefers_best_defector() {
        let m = pd();
        // node (2,2) is C; up neighbor D with 3 C neighbors, right neighbor D with 2
        let g = StrategyGrid::from_rows(&["...#.", ".#.##", "....#", ".....", "....."]).unwrap();
        let f = greedy_control(&g, &m);
        let pay = g.payoffs(&m);
        let d = g.dims();
        let node = NodeId::new(2, 3);
        let t = f.target(node);
        assert_eq!(g.get(t), Strategy::D);
        for nb in d.neighbors(node) {
            if g.get(nb) == Strategy::D {
                assert!(pay[d.to_index(nb)] <= pay[d.to_index(t)]);
            }
        }
        assert_eq!(t, NodeId::new(2, 2));
    }

    #[test]
    fn greedy_all_cooperating_neighbors_picks_minimum() {
        let m = pd();
        let g = StrategyGrid::from_rows(&[".....", ".....", ".....", "....#", "....."]).unwrap();
        let f = greedy_control(&g, &m);
        let d = g.dims();
        // (3,5) has C neighbors only; (3,4)... choose its worst-paid neighbor
        let node = NodeId::new(2, 5);
        let pay = g.payoffs(&m);
        let t = f.target(node);
        let min = d.neighbors(node).iter().map(|&n| pay[d.to_index(n)]).min().unwrap();
        assert_eq!(pay[d.to_index(t)], min);
    }

    #[test]
    fn greedy_ties_break_to_lowest_index() {
        let m = pd();
        // (2,2) is C with D neighbors (1,2) and (2,1), both isolated-ish with equal payoff
        let g = StrategyGrid::from_rows(&[".#...", "#....", ".....", ".....", "....."]).unwrap();
        let f = greedy_control(&g, &m);
        let d = g.dims();
        let pay = g.payoffs(&m);
        assert_eq!(pay[d.to_index(NodeId::new(1, 2))], pay[d.to_index(NodeId::new(2, 1))]);
        assert_eq!(f.target(NodeId::new(1, 1)), NodeId::new(1, 2));
    }
}
