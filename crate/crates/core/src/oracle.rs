//! Exhaustive support graphs for tiny grids.
//!
//! A state is a bit-per-cell index (bit `k` set means node `k` defects). The
//! successors of a state form a cube: every node's next strategy is either
//! forced or free to take both values, and the successor set is the product.
//! Each state therefore stores a `(base, optional)` pair instead of a list.

use crate::constrained::FixedSet;
use crate::error::{Error, Result};
use crate::grid::{Strategy, StrategyGrid};
use crate::payoff::PayoffMatrix;
use crate::rule::ImitationRule;
use crate::seg::SegEngine;
use crate::torus::TorusDims;

pub const DEFAULT_NODE_CAP: usize = 16;

/// Bit-per-cell state index.
pub type StateIndex = u64;

#[derive(Debug, Clone)]
pub struct SupportGraph {
    dims: TorusDims,
    base: Vec<u32>,
    optional: Vec<u32>,
    /// Fixed-node bits and the values they must hold.
    fixed_mask: u32,
    fixed_bits: u32,
}

pub fn build_support_graph(
    dims: TorusDims,
    m: &PayoffMatrix,
    rule: &ImitationRule,
    fixed: Option<&FixedSet>,
) -> Result<SupportGraph> {
    build_support_graph_capped(dims, m, rule, fixed, DEFAULT_NODE_CAP)
}

pub fn build_support_graph_capped(
    dims: TorusDims,
    m: &PayoffMatrix,
    rule: &ImitationRule,
    fixed: Option<&FixedSet>,
    cap: usize,
) -> Result<SupportGraph> {
    let n = dims.len();
    if n > cap.min(24) {
        return Err(Error::OracleCap { nodes: n, cap: cap.min(24) });
    }
    let mut engine = SegEngine::new(dims, m, rule)?;
    let (mut fixed_mask, mut fixed_bits) = (0u32, 0u32);
    if let Some(f) = fixed {
        let mask = f.mask(dims)?;
        for (k, &on) in mask.iter().enumerate() {
            if on {
                fixed_mask |= 1 << k;
                fixed_bits |= (f.strategy() as u32) << k;
            }
        }
        engine = engine.with_frozen(mask)?;
    }
    let total = 1usize << n;
    let mut base = vec![0u32; total];
    let mut optional = vec![0u32; total];
    let mut cells = vec![Strategy::C; n];
    let mut pay = Vec::with_capacity(n);
    for x in 0..total {
        for (k, c) in cells.iter_mut().enumerate() {
            *c = Strategy::from_bit(((x >> k) & 1) as u8);
        }
        engine.payoffs_into(&cells, &mut pay);
        let (mut b, mut o) = (0u32, 0u32);
        for k in 0..n {
            let s = engine.support_at(&cells, &pay, k);
            if s.len() == 2 {
                o |= 1 << k;
            } else if s.contains(Strategy::D) {
                b |= 1 << k;
            }
        }
        base[x] = b;
        optional[x] = o;
    }
    Ok(SupportGraph { dims, base, optional, fixed_mask, fixed_bits })
}

impl SupportGraph {
    pub fn dims(&self) -> TorusDims {
        self.dims
    }

    /// Number of indices, `2^(NM)`.
    pub fn state_count(&self) -> usize {
        self.base.len()
    }

    /// Whether the fixed nodes of `x` hold their fixed strategy.
    #[inline]
    pub fn in_domain(&self, x: StateIndex) -> bool {
        (x as u32 & self.fixed_mask) == self.fixed_bits
    }

    pub fn domain(&self) -> impl Iterator<Item = StateIndex> + '_ {
        (0..self.state_count() as u64).filter(move |&x| self.in_domain(x))
    }

    #[inline]
    pub fn is_successor(&self, x: StateIndex, y: StateIndex) -> bool {
        let x = x as usize;
        (y as u32 ^ self.base[x]) & !self.optional[x] == 0
    }

    pub fn successor_count(&self, x: StateIndex) -> u64 {
        1u64 << self.optional[x as usize].count_ones()
    }

    /// Successors of `x` in increasing order.
    pub fn successors(&self, x: StateIndex) -> Vec<StateIndex> {
        let mut out = Vec::with_capacity(self.successor_count(x) as usize);
        self.for_each_successor(x, |y| {
            out.push(y);
            false
        });
        out.sort_unstable();
        out
    }

    /// Calls `f` on each successor until it returns `true`; reports whether it did.
    pub fn for_each_successor(&self, x: StateIndex, mut f: impl FnMut(StateIndex) -> bool) -> bool {
        let (b, o) = (self.base[x as usize], self.optional[x as usize]);
        let mut s = o;
        loop {
            if f((b | s) as StateIndex) {
                return true;
            }
            if s == 0 {
                return false;
            }
            s = (s - 1) & o;
        }
    }

    /// The only successor of `x` is `x` itself.
    pub fn is_absorbing(&self, x: StateIndex) -> bool {
        self.optional[x as usize] == 0 && self.base[x as usize] as u64 == x
    }

    pub fn absorbing_states(&self) -> Vec<StateIndex> {
        self.domain().filter(|&x| self.is_absorbing(x)).collect()
    }

    pub fn grid(&self, x: StateIndex) -> StrategyGrid {
        StrategyGrid::from_state_index(self.dims, x)
    }

    /// States that reach some state in `target` with positive probability.
    pub fn can_reach(&self, target: &[bool]) -> Vec<bool> {
        let mut good = target.to_vec();
        loop {
            let mut changed = false;
            for x in 0..self.state_count() {
                if good[x] || !self.in_domain(x as u64) {
                    continue;
                }
                if self.for_each_successor(x as u64, |y| good[y as usize]) {
                    good[x] = true;
                    changed = true;
                }
            }
            if !changed {
                return good;
            }
        }
    }

    /// Every state reachable from `x` with positive probability, as a membership vector.
    pub fn forward_closure(&self, x: StateIndex) -> Vec<bool> {
        let mut seen = vec![false; self.state_count()];
        let mut stack = vec![x];
        seen[x as usize] = true;
        while let Some(z) = stack.pop() {
            self.for_each_successor(z, |y| {
                if !seen[y as usize] {
                    seen[y as usize] = true;
                    stack.push(y);
                }
                false
            });
        }
        seen
    }

    /// Whether every domain state for which `start` holds reaches `target` with probability 1.
    pub fn almost_surely_reaches(&self, target: StateIndex, start: impl Fn(StateIndex) -> bool) -> bool {
        let mut t = vec![false; self.state_count()];
        t[target as usize] = true;
        let reach = self.can_reach(&t);
        let stuck: Vec<bool> = (0..self.state_count()).map(|x| self.in_domain(x as u64) && !reach[x]).collect();
        let doomed = self.can_reach(&stuck);
        self.domain().filter(|&x| start(x)).all(|x| !doomed[x as usize])
    }
}

/// A closed class of states from which no absorbing state is reachable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub states: Vec<StateIndex>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    pub converges: bool,
    pub witness: Option<Witness>,
}

/// Convergence holds iff every state reaches the absorbing set with positive probability.
pub fn certify_as_convergence(graph: &SupportGraph) -> Certificate {
    let n = graph.state_count();
    let target: Vec<bool> = (0..n).map(|x| graph.in_domain(x as u64) && graph.is_absorbing(x as u64)).collect();
    let good = graph.can_reach(&target);
    let bad = graph.domain().find(|&x| !good[x as usize]);
    match bad {
        None => Certificate { converges: true, witness: None },
        Some(x) => Certificate { converges: false, witness: Some(Witness { states: bottom_class(graph, x) }) },
    }
}

/// Shrinks the forward closure of `x` until every member reaches all the others.
fn bottom_class(graph: &SupportGraph, x: StateIndex) -> Vec<StateIndex> {
    let to_list = |v: &[bool]| -> Vec<StateIndex> { (0..v.len()).filter(|&i| v[i]).map(|i| i as u64).collect() };
    let mut class = to_list(&graph.forward_closure(x));
    'outer: loop {
        for &z in &class {
            let f = to_list(&graph.forward_closure(z));
            if f.len() < class.len() {
                class = f;
                continue 'outer;
            }
        }
        return class;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TerminalPartition {
    pub all_c: Vec<StateIndex>,
    pub all_d: Vec<StateIndex>,
    pub mixed: Vec<StateIndex>,
}

pub fn classify_terminals(graph: &SupportGraph) -> TerminalPartition {
    let full = (1u64 << graph.dims().len()) - 1;
    let mut p = TerminalPartition::default();
    for x in graph.absorbing_states() {
        match x {
            0 => p.all_c.push(x),
            _ if x == full => p.all_d.push(x),
            _ => p.mixed.push(x),
        }
    }
    p
}

fn has_c_square(dims: TorusDims, x: StateIndex) -> bool {
    (0..dims.len()).any(|k| {
        [(0, 0), (0, 1), (1, 0), (1, 1)].iter().all(|&(di, dj)| (x >> dims.offset(k, di, dj)) & 1 == 0)
    })
}

/// Every state containing a cooperating 2x2 square reaches all-C with probability 1.
pub fn verify_thm3_basin(graph: &SupportGraph) -> bool {
    let dims = graph.dims();
    graph.almost_surely_reaches(0, |x| has_c_square(dims, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rule::RuleKind;
    use crate::seg::is_absorbing;

    fn pd() -> PayoffMatrix {
        PayoffMatrix::from_integers(3, 0, 5, 1).unwrap()
    }

    fn d33() -> TorusDims {
        TorusDims::new(3, 3).unwrap()
    }

    #[test]
    fn pd_three_by_three() {
        let g = build_support_graph(d33(), &pd(), &ImitationRule::deterministic(&pd()), None).unwrap();
        assert_eq!(g.state_count(), 512);
        assert!(g.is_absorbing(0) && g.is_absorbing(511));
        let cert = certify_as_convergence(&g);
        assert!(cert.converges);
        let p = classify_terminals(&g);
        assert!(p.mixed.is_empty());
        for x in 0..512 {
            assert_eq!(g.is_absorbing(x), is_absorbing(&g.grid(x), &pd()));
            assert!(g.successor_count(x) >= 1);
        }
    }

    #[test]
    fn fermi_keeps_self_loops() {
        let r = ImitationRule::new(RuleKind::Fermi { kappa: 0.1 }, &pd()).unwrap();
        let g = build_support_graph(d33(), &pd(), &r, None).unwrap();
        for x in 0..512 {
            assert!(g.is_successor(x, x));
        }
    }

    #[test]
    fn flat_matrix_everything_absorbs() {
        let m = PayoffMatrix::from_integers(1, 1, 1, 1).unwrap();
        let g = build_support_graph(d33(), &m, &ImitationRule::deterministic(&m), None).unwrap();
        assert!(certify_as_convergence(&g).converges);
        let p = classify_terminals(&g);
        assert_eq!((p.all_c.len(), p.all_d.len(), p.mixed.len()), (1, 1, 510));
    }

    #[test]
    fn cap_enforced() {
        let d = TorusDims::new(5, 4).unwrap();
        assert!(matches!(
            build_support_graph(d, &pd(), &ImitationRule::deterministic(&pd()), None),
            Err(Error::OracleCap { .. })
        ));
    }

    #[test]
    fn successors_sorted_and_consistent() {
        let r = ImitationRule::new(RuleKind::Fermi { kappa: 0.1 }, &pd()).unwrap();
        let g = build_support_graph(d33(), &pd(), &r, None).unwrap();
        for x in [5u64, 100, 300] {
            let s = g.successors(x);
            assert!(s.windows(2).all(|w| w[0] < w[1]));
            assert_eq!(s.len() as u64, g.successor_count(x));
            assert!(s.iter().all(|&y| g.is_successor(x, y)));
        }
    }

    #[test]
    fn non_converging_witness_is_closed() {
        // a two-state cycle: build a graph by hand
        let d = d33();
        let mut g = build_support_graph(d, &pd(), &ImitationRule::deterministic(&pd()), None).unwrap();
        g.base[7] = 8;
        g.optional[7] = 0;
        g.base[8] = 7;
        g.optional[8] = 0;
        let cert = certify_as_convergence(&g);
        assert!(!cert.converges);
        assert_eq!(cert.witness.unwrap().states, vec![7, 8]);
    }
}
