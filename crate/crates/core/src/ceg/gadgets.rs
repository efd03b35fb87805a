//! Controllers that drive any state into the absorbing set for the
//! prisoner's dilemma and snowdrift conditions.

use super::frame::{perpendicular, Frame};
use super::runner::Runner;
use super::trace::{ControlTrace, Phase};
use super::{CegEngine, ControlError};
use crate::grid::StrategyGrid;
use crate::payoff::PayoffMatrix;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Game {
    Dilemma,
    Snowdrift,
}

fn game_of(m: &PayoffMatrix) -> Result<Game, ControlError> {
    let r = m.check_conditions();
    if r.thm1_ok {
        Ok(Game::Dilemma)
    } else if r.thm2_ok {
        Ok(Game::Snowdrift)
    } else {
        Err(ControlError::Precondition(format!(
            "matrix {m} satisfies neither the prisoner's dilemma ordering nor the snowdrift conditions"
        )))
    }
}

/// Greedy control until a fixed point. Requires the dilemma or snowdrift conditions.
pub fn run_step1(state: &StrategyGrid, m: &PayoffMatrix) -> Result<ControlTrace, ControlError> {
    game_of(m)?;
    let eng = CegEngine::new(state.dims(), m);
    let mut r = Runner::new(&eng, state);
    r.greedy_fixpoint()?;
    check_fixpoint(&r)?;
    r.mark(1);
    Ok(r.finish())
}

/// Gadget phase for the prisoner's dilemma, starting from a greedy fixed point.
pub fn run_gadgets_thm1(state: &StrategyGrid, m: &PayoffMatrix) -> Result<ControlTrace, ControlError> {
    if game_of(m)? != Game::Dilemma {
        return Err(ControlError::Precondition(format!("matrix {m} is not a prisoner's dilemma")));
    }
    let eng = CegEngine::new(state.dims(), m);
    let pay = eng.payoffs(state.cells());
    if eng.step(state.cells(), &pay, &eng.greedy(state.cells(), &pay)) != state.cells() {
        return Err(ControlError::Precondition("input is not a fixed point of greedy control".into()));
    }
    drive(&eng, state, Game::Dilemma)
}

/// Full controller (greedy phase plus gadgets) for the prisoner's dilemma.
pub fn run_controller_thm1(state: &StrategyGrid, m: &PayoffMatrix) -> Result<ControlTrace, ControlError> {
    if game_of(m)? != Game::Dilemma {
        return Err(ControlError::Precondition(format!("matrix {m} is not a prisoner's dilemma")));
    }
    drive(&CegEngine::new(state.dims(), m), state, Game::Dilemma)
}

/// Full controller for snowdrift matrices satisfying both inequalities.
pub fn run_controller_thm2(state: &StrategyGrid, m: &PayoffMatrix) -> Result<ControlTrace, ControlError> {
    if !m.check_conditions().thm2_ok {
        return Err(ControlError::Precondition(format!("matrix {m} does not satisfy the snowdrift conditions")));
    }
    drive(&CegEngine::new(state.dims(), m), state, Game::Snowdrift)
}

fn drive(eng: &CegEngine, state: &StrategyGrid, game: Game) -> Result<ControlTrace, ControlError> {
    let mut r = Runner::new(eng, state);
    let bound = 2 * (eng.dims().len() - 1);
    let [p1, p2, p3, p4] = eng.matrix().numerators();
    let skip_pairs = game == Game::Dilemma && p3 + 3 * p4 >= 2 * p1 + 2 * p2;
    loop {
        r.greedy_fixpoint()?;
        check_fixpoint(&r)?;
        r.mark(1);
        if eng.is_absorbing(&r.cells, &r.pay) {
            let last = if game == Game::Dilemma { 3 } else { 4 };
            for i in 2..=last {
                r.mark(i);
            }
            break;
        }
        let applied = match game {
            Game::Dilemma => {
                let pivot = if skip_pairs { None } else { find(&r, 2) };
                if let Some(k) = pivot {
                    r.phase = Phase::Step2;
                    pair_gadget(&mut r, k, Game::Dilemma)?
                } else {
                    r.mark(2);
                    match find(&r, 3) {
                        Some(k) => {
                            r.phase = Phase::Step3;
                            triple_gadget(&mut r, k)?
                        }
                        None => false,
                    }
                }
            }
            Game::Snowdrift => {
                if let Some(k) = find(&r, 1) {
                    r.phase = Phase::Step2;
                    single_gadget(&mut r, k)?
                } else if let Some(k) = find(&r, 2) {
                    r.mark(2);
                    r.phase = Phase::Step3;
                    pair_gadget(&mut r, k, Game::Snowdrift)?
                } else {
                    r.mark(2);
                    r.mark(3);
                    match find(&r, 3) {
                        Some(k) => {
                            r.phase = Phase::Step4;
                            triple_gadget(&mut r, k)?
                        }
                        None => false,
                    }
                }
            }
        };
        if !applied {
            return Err(r.fail("state is a greedy fixed point outside the absorbing set, yet no gadget applies"));
        }
        r.phase = Phase::Step1;
    }
    if r.time() > bound {
        return Err(r.fail(format!("controller used {} steps, bound is {bound}", r.time())));
    }
    Ok(r.finish())
}

/// Facts every greedy fixed point must satisfy: cooperators earn at least as much
/// as adjacent defectors, and no node is isolated.
fn check_fixpoint(r: &Runner<'_>) -> Result<(), ControlError> {
    let n = r.cells.len();
    for k in 0..n {
        let nb = r.eng.neighbors(k);
        let same = nb.iter().filter(|&&q| r.cells[q] == r.cells[k]).count();
        if r.n_c() > 0 && r.n_c() < n {
            r.ensure(same > 0, || format!("node index {k} is isolated at a greedy fixed point"))?;
        }
        if r.is_c(k) {
            for &q in nb {
                if !r.is_c(q) {
                    r.ensure(r.pay[k] >= r.pay[q], || {
                        format!("cooperator {k} earns less than adjacent defector {q} at a greedy fixed point")
                    })?;
                }
            }
        }
    }
    Ok(())
}

/// First cooperator (row-major) with exactly `c` cooperating neighbors whose payoff
/// differs from some defecting neighbor's.
fn find(r: &Runner<'_>, c: usize) -> Option<usize> {
    (0..r.cells.len()).find(|&k| {
        r.is_c(k)
            && r.coop(k) == c
            && r.eng.neighbors(k).iter().any(|&q| !r.is_c(q) && r.pay[q] != r.pay[k])
    })
}

/// Frame with a cooperator at local `(1, 0)` and a differing-payoff defector at `(0, 1)`.
fn pair_frame(r: &Runner<'_>, k: usize) -> Option<Frame> {
    let nb = r.eng.neighbors(k);
    for d in 0..4 {
        if r.is_c(nb[d]) || r.pay[nb[d]] == r.pay[k] {
            continue;
        }
        for c in perpendicular(d) {
            if r.is_c(nb[c]) {
                return Some(Frame::new(r.eng.dims(), k, c, d));
            }
        }
    }
    None
}

/// Cooperator with two cooperating neighbors.
fn pair_gadget(r: &mut Runner<'_>, k: usize, game: Game) -> Result<bool, ControlError> {
    let f = pair_frame(r, k).ok_or_else(|| r.fail("no perpendicular cooperator/defector pair"))?;
    let (o, e, s, se) = (f.at(0, 0), f.at(0, 1), f.at(1, 0), f.at(1, 1));
    let two_c = r.value(true, 2);
    r.ensure(r.pay[o] == two_c && r.pay[o] > r.pay[e], || {
        format!("pivot payoff {} should equal 2p1+2p2 = {two_c} and exceed its defector's {}", r.pay[o], r.pay[e])
    })?;
    r.ensure(r.coop(e) == 1, || "defector beside the pivot should have one cooperating neighbor".into())?;
    r.ensure(!r.is_c(se), || "diagonal node should defect".into())?;
    r.ensure(r.pay[se] <= r.pay[s], || "diagonal defector out-earns its cooperating neighbor".into())?;
    if game == Game::Dilemma {
        let three_c = r.value(true, 3);
        r.ensure(r.pay[s] <= three_c, || "cooperator below the pivot earns more than 3p1+p2".into())?;
    }
    if r.pay[se] == r.pay[s] {
        if game == Game::Dilemma {
            r.ensure(r.pay[s] == r.value(true, 3), || "equal-payoff case requires 3p1+p2".into())?;
        }
        r.gadget(&[(e, o)], &[e], &[se, e, s])?;
    } else {
        let cc = r.coop(se);
        r.ensure(cc == 1 || cc == 2, || format!("diagonal defector has {cc} cooperating neighbors"))?;
        if game == Game::Dilemma && cc == 2 {
            r.gadget(&[(e, o)], &[e], &[se, e, s])?;
        } else {
            r.gadget(&[(se, s)], &[se], &[o, e, se])?;
        }
    }
    Ok(true)
}

/// Snowdrift only: cooperator with a single cooperating neighbor.
fn single_gadget(r: &mut Runner<'_>, k: usize) -> Result<bool, ControlError> {
    let nb = *r.eng.neighbors(k);
    let c = (0..4).find(|&d| r.is_c(nb[d])).ok_or_else(|| r.fail("lone cooperator has no cooperating neighbor"))?;
    let d = perpendicular(c)[0];
    let f = Frame::new(r.eng.dims(), k, c, d);
    let (o, e, s, se, sw) = (f.at(0, 0), f.at(0, 1), f.at(1, 0), f.at(1, 1), f.at(1, -1));
    let one_c = r.value(true, 1);
    r.ensure(r.pay[o] == one_c && r.pay[o] > r.pay[e], || {
        format!("pivot payoff {} should equal p1+3p2 = {one_c} and exceed its defector's {}", r.pay[o], r.pay[e])
    })?;
    r.ensure(!r.is_c(se) && !r.is_c(sw), || "both diagonal nodes should defect".into())?;
    r.ensure(r.pay[s] <= r.value(true, 2), || "partner cooperator earns more than 2p1+2p2".into())?;
    r.ensure(r.pay[se] <= r.pay[s], || "diagonal defector out-earns its cooperating neighbor".into())?;
    if r.pay[se] == r.pay[s] {
        r.gadget(&[(e, o)], &[e], &[se, e, s])?;
    } else {
        r.ensure(r.coop(se) == 1, || "diagonal defector should have one cooperating neighbor".into())?;
        r.gadget(&[(se, s)], &[se], &[o, e, se])?;
    }
    Ok(true)
}

/// Cooperator with three cooperating neighbors.
fn triple_gadget(r: &mut Runner<'_>, k: usize) -> Result<bool, ControlError> {
    let nb = *r.eng.neighbors(k);
    let d = (0..4).find(|&d| !r.is_c(nb[d])).ok_or_else(|| r.fail("pivot has no defecting neighbor"))?;
    let dims = r.eng.dims();
    let case_one = |f: &Frame| !r.is_c(f.at(-1, 1)) && r.pay[f.at(-1, 1)] == r.pay[f.at(-1, 0)];
    let frames = perpendicular(d).map(|a| Frame::new(dims, k, a, d));
    let (f, equal) = match frames.iter().find(|f| case_one(f)) {
        Some(f) => (*f, true),
        None => (frames[0], false),
    };
    let (o, e) = (f.at(0, 0), f.at(0, 1));
    let three_c = r.value(true, 3);
    r.ensure(r.pay[o] == three_c && r.pay[o] > r.pay[e], || {
        format!("pivot payoff {} should equal 3p1+p2 = {three_c} and exceed its defector's {}", r.pay[o], r.pay[e])
    })?;
    r.ensure(r.is_c(f.at(-1, 0)) && r.is_c(f.at(1, 0)), || "pivot's side neighbors should cooperate".into())?;
    if equal {
        let (ne, n) = (f.at(-1, 1), f.at(-1, 0));
        r.gadget(&[(e, o)], &[e], &[ne, e, n])?;
    } else {
        let mut overrides = Vec::new();
        for s in [-1, 1] {
            let (corner, side) = (f.at(s, 1), f.at(s, 0));
            if !r.is_c(corner) {
                r.ensure(r.pay[corner] < r.pay[side], || "corner defector does not earn less than its side cooperator".into())?;
                overrides.push((corner, side));
            }
        }
        let flips: Vec<usize> = overrides.iter().map(|p| p.0).collect();
        r.gadget(&overrides, &flips, &[e, o, f.at(-1, 1), f.at(1, 1)])?;
    }
    Ok(true)
}
