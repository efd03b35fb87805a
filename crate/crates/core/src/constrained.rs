//! Dynamics with a set of nodes frozen at one strategy, and the consensus
//! control experiments built on them.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::grid::{Strategy, StrategyGrid};
use crate::oracle::{build_support_graph, StateIndex};
use crate::payoff::PayoffMatrix;
use crate::rule::ImitationRule;
use crate::seg::{random_initial, RngStream, RunRecord, SegEngine, TerminalClass};
use crate::torus::{NodeId, TorusDims};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixedSet {
    strategy: Strategy,
    members: BTreeSet<NodeId>,
}

impl FixedSet {
    pub fn new(strategy: Strategy, members: impl IntoIterator<Item = NodeId>) -> Self {
        Self { strategy, members: members.into_iter().collect() }
    }

    pub fn fixed_c(members: impl IntoIterator<Item = NodeId>) -> Self {
        Self::new(Strategy::C, members)
    }

    pub fn fixed_d(members: impl IntoIterator<Item = NodeId>) -> Self {
        Self::new(Strategy::D, members)
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn members(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.members.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Per-node membership; every member must lie inside `dims`.
    pub fn mask(&self, dims: TorusDims) -> Result<Vec<bool>> {
        let mut mask = vec![false; dims.len()];
        for &n in &self.members {
            if n.i == 0 || n.j == 0 || n.i > dims.rows() || n.j > dims.cols() {
                return Err(Error::NodeOutOfRange { node: n, rows: dims.rows(), cols: dims.cols() });
            }
            mask[dims.to_index(n)] = true;
        }
        Ok(mask)
    }

    /// Sets every member to the fixed strategy.
    pub fn impose(&self, state: &mut StrategyGrid) -> Result<()> {
        let mask = self.mask(state.dims())?;
        for (k, on) in mask.into_iter().enumerate() {
            if on {
                state.set_at(k, self.strategy);
            }
        }
        Ok(())
    }

    fn check(&self, state: &StrategyGrid) -> Result<Vec<bool>> {
        let mask = self.mask(state.dims())?;
        for &n in &self.members {
            if state.get(n) != self.strategy {
                return Err(Error::FixedMismatch { node: n });
            }
        }
        Ok(mask)
    }
}

/// An `N1 x M1` block of nodes starting at `origin` (wrapping around the torus).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedRect {
    dims: TorusDims,
    origin: NodeId,
    rows: usize,
    cols: usize,
}

impl FixedRect {
    /// Requires `N, M >= 5`, `N1` in `[2, N-3]` or `N1 = N`, and likewise for `M1`.
    pub fn new(dims: TorusDims, origin: NodeId, rows: usize, cols: usize) -> Result<Self> {
        let (n, m) = (dims.rows(), dims.cols());
        if n < 5 || m < 5 {
            return Err(Error::Precondition(format!("rectangle control needs a grid of at least 5x5, got {dims}")));
        }
        let ok = |e: usize, full: usize| (2..=full - 3).contains(&e) || e == full;
        if !ok(rows, n) || !ok(cols, m) {
            return Err(Error::Precondition(format!(
                "rectangle {rows}x{cols} needs height in [2, {}] or {n} and width in [2, {}] or {m}",
                n - 3,
                m - 3
            )));
        }
        if origin.i == 0 || origin.j == 0 || origin.i > n || origin.j > m {
            return Err(Error::NodeOutOfRange { node: origin, rows: n, cols: m });
        }
        Ok(Self { dims, origin, rows, cols })
    }

    pub fn dims(&self) -> TorusDims {
        self.dims
    }

    pub fn origin(&self) -> NodeId {
        self.origin
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn members(&self) -> Vec<usize> {
        let o = self.dims.to_index(self.origin);
        let mut v: Vec<usize> = (0..self.rows)
            .flat_map(|di| (0..self.cols).map(move |dj| (di, dj)))
            .map(|(di, dj)| self.dims.offset(o, di as i64, dj as i64))
            .collect();
        v.sort_unstable();
        v
    }

    pub fn mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.dims.len()];
        for k in self.members() {
            mask[k] = true;
        }
        mask
    }

    pub fn to_fixed_set(&self) -> FixedSet {
        FixedSet::fixed_c(self.members().into_iter().map(|k| self.dims.from_index(k).expect("in range")))
    }
}

/// One stochastic step in which the fixed nodes never update.
pub fn step_constrained(
    state: &StrategyGrid,
    m: &PayoffMatrix,
    rule: &ImitationRule,
    rng: &mut RngStream,
    fixed: &FixedSet,
) -> Result<StrategyGrid> {
    let mask = fixed.check(state)?;
    Ok(SegEngine::new(state.dims(), m, rule)?.with_frozen(mask)?.step(state, rng))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaccSummary {
    pub target: Strategy,
    pub records: Vec<RunRecord>,
}

impl MaccSummary {
    pub fn runs(&self) -> usize {
        self.records.len()
    }

    pub fn successes(&self) -> usize {
        let want = if self.target.is_c() { TerminalClass::AllC } else { TerminalClass::AllD };
        self.records.iter().filter(|r| r.terminal == want).count()
    }

    pub fn success_fraction(&self) -> f64 {
        if self.records.is_empty() {
            0.0
        } else {
            self.successes() as f64 / self.records.len() as f64
        }
    }

    pub fn mean_steps(&self) -> Option<f64> {
        let t: Vec<usize> = self.records.iter().filter_map(|r| r.steps).collect();
        (!t.is_empty()).then(|| t.iter().sum::<usize>() as f64 / t.len() as f64)
    }

    pub fn max_steps(&self) -> Option<usize> {
        self.records.iter().filter_map(|r| r.steps).max()
    }
}

/// Random initial state with the fixed nodes imposed.
pub fn constrained_initial(dims: TorusDims, fixed: &FixedSet, rng: &mut RngStream) -> Result<StrategyGrid> {
    let mut g = random_initial(dims, rng);
    fixed.impose(&mut g)?;
    Ok(g)
}

/// One constrained run per seed from a random initial state.
pub fn run_constrained(
    dims: TorusDims,
    m: &PayoffMatrix,
    rule: &ImitationRule,
    seed: u64,
    max_steps: usize,
    fixed: &FixedSet,
) -> Result<RunRecord> {
    let engine = SegEngine::new(dims, m, rule)?.with_frozen(fixed.mask(dims)?)?;
    let mut rng = RngStream::new(seed);
    let init = constrained_initial(dims, fixed, &mut rng)?;
    Ok(engine.run_quiet(init, &mut rng, max_steps))
}

fn macc(
    dims: TorusDims,
    m: &PayoffMatrix,
    rule: &ImitationRule,
    seeds: &[u64],
    max_steps: usize,
    fixed: &FixedSet,
) -> Result<MaccSummary> {
    let records = seeds.iter().map(|&s| run_constrained(dims, m, rule, s, max_steps, fixed)).collect::<Result<_>>()?;
    Ok(MaccSummary { target: fixed.strategy(), records })
}

/// Runs with a nonempty frozen-defector set; needs the consensus conditions.
pub fn macc_defection(
    dims: TorusDims,
    m: &PayoffMatrix,
    rule: &ImitationRule,
    seeds: &[u64],
    max_steps: usize,
    fixed_d: &FixedSet,
) -> Result<MaccSummary> {
    let rep = m.check_conditions();
    if !rep.consensus_ok() {
        return Err(Error::Precondition(format!("matrix {m} fails the consensus conditions ({rep})")));
    }
    if fixed_d.is_empty() || fixed_d.strategy() != Strategy::D {
        return Err(Error::Precondition("defection control needs a nonempty set of fixed defectors".into()));
    }
    macc(dims, m, rule, seeds, max_steps, fixed_d)
}

/// Runs with a frozen cooperating rectangle; needs the rectangle-control conditions.
pub fn macc_cooperation(
    dims: TorusDims,
    m: &PayoffMatrix,
    rule: &ImitationRule,
    seeds: &[u64],
    max_steps: usize,
    rect: &FixedRect,
) -> Result<MaccSummary> {
    let rep = m.check_conditions();
    if !rep.rect_control_ok() {
        return Err(Error::Precondition(format!("matrix {m} fails the rectangle-control conditions ({rep})")));
    }
    if rect.dims() != dims {
        return Err(Error::Precondition("rectangle was built for different dims".into()));
    }
    macc(dims, m, rule, seeds, max_steps, &rect.to_fixed_set())
}

/// Which case of the non-convergence argument applies to the initial state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prop2Case {
    /// No cooperator has two cooperating neighbors: nothing can change.
    Frozen,
    /// Exactly one cooperator has two cooperating neighbors.
    OnePivot(NodeId),
    /// More than one such cooperator (outside the argument's scope).
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prop2Certificate {
    pub case: Prop2Case,
    pub initial: StateIndex,
    /// Number of states reachable with positive probability from the initial one.
    pub reachable: usize,
    pub all_c_reachable: bool,
    /// Whether the initial state is its own only successor.
    pub initial_frozen: bool,
    /// In the one-pivot case: every node away from the pivot's neighborhood defects in every reachable state.
    pub far_nodes_stay_d: bool,
}

impl Prop2Certificate {
    pub fn all_c_unreachable(&self) -> bool {
        !self.all_c_reachable
    }
}

/// Forward support reachability from the state with fixed cooperators and every
/// free node defecting.
pub fn prop2_unreachability(
    dims: TorusDims,
    m: &PayoffMatrix,
    rule: &ImitationRule,
    fixed_c: &FixedSet,
) -> Result<Prop2Certificate> {
    if dims.rows() < 4 || dims.cols() < 4 {
        return Err(Error::Precondition(format!("needs a grid of at least 4x4, got {dims}")));
    }
    if !m.check_conditions().thm1_ok {
        return Err(Error::Precondition(format!("matrix {m} is not a prisoner's dilemma")));
    }
    if fixed_c.strategy() != Strategy::C || fixed_c.len() > 3 {
        return Err(Error::Precondition("needs at most three fixed cooperators".into()));
    }
    let mut init = StrategyGrid::all_d(dims);
    fixed_c.impose(&mut init)?;
    let graph = build_support_graph(dims, m, rule, Some(fixed_c))?;
    let x0 = init.state_index();

    let pivots: Vec<usize> = (0..dims.len()).filter(|&k| init.at(k).is_c() && init.coop_neighbors(k) == 2).collect();
    let case = match pivots.as_slice() {
        [] => Prop2Case::Frozen,
        [k] => Prop2Case::OnePivot(dims.from_index(*k)?),
        _ => Prop2Case::Other,
    };
    let reach = graph.forward_closure(x0);
    let reachable: Vec<u64> = (0..reach.len()).filter(|&x| reach[x]).map(|x| x as u64).collect();
    let far_nodes_stay_d = match case {
        Prop2Case::OnePivot(p) => {
            let pk = dims.to_index(p);
            let near: Vec<usize> = std::iter::once(pk).chain(dims.neighbor_indices(pk)).collect();
            let mask = fixed_c.mask(dims)?;
            let far: Vec<usize> = (0..dims.len()).filter(|k| !near.contains(k) && !mask[*k]).collect();
            reachable.iter().all(|&x| far.iter().all(|&k| (x >> k) & 1 == 1))
        }
        _ => false,
    };
    Ok(Prop2Certificate {
        case,
        initial: x0,
        reachable: reachable.len(),
        all_c_reachable: reach[0],
        initial_frozen: graph.is_absorbing(x0),
        far_nodes_stay_d,
    })
}

/// All placements of `k` nodes on the grid, one per orbit under translations,
/// rotations and reflections (rotations only when the grid is square).
pub fn placements_up_to_symmetry(dims: TorusDims, k: usize) -> Vec<Vec<NodeId>> {
    let (n, m) = (dims.rows() as i64, dims.cols() as i64);
    let mut maps: Vec<Box<dyn Fn(i64, i64) -> (i64, i64)>> = vec![
        Box::new(|i, j| (i, j)),
        Box::new(move |i, j| (n - 1 - i, j)),
        Box::new(move |i, j| (i, m - 1 - j)),
        Box::new(move |i, j| (n - 1 - i, m - 1 - j)),
    ];
    if n == m {
        maps.push(Box::new(|i, j| (j, i)));
        maps.push(Box::new(move |i, j| (m - 1 - j, i)));
        maps.push(Box::new(move |i, j| (j, n - 1 - i)));
        maps.push(Box::new(move |i, j| (m - 1 - j, n - 1 - i)));
    }
    let canon = |set: &[usize]| -> Vec<usize> {
        let mut best: Option<Vec<usize>> = None;
        for f in &maps {
            for ti in 0..n {
                for tj in 0..m {
                    let mut img: Vec<usize> = set
                        .iter()
                        .map(|&x| {
                            let (i, j) = f(x as i64 / m, x as i64 % m);
                            ((i + ti).rem_euclid(n) * m + (j + tj).rem_euclid(m)) as usize
                        })
                        .collect();
                    img.sort_unstable();
                    if best.as_ref().is_none_or(|b| img < *b) {
                        best = Some(img);
                    }
                }
            }
        }
        best.unwrap_or_default()
    };
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let mut combo: Vec<usize> = (0..k).collect();
    let len = dims.len();
    if k > len {
        return out;
    }
    loop {
        let c = canon(&combo);
        if seen.insert(c.clone()) {
            out.push(c.iter().map(|&x| dims.from_index(x).expect("in range")).collect());
        }
        // next combination
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if combo[i] < len - k + i {
                combo[i] += 1;
                for j in i + 1..k {
                    combo[j] = combo[j - 1] + 1;
                }
                break;
            }
        }
    }
}
