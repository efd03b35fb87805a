//! Drive the free nodes around a frozen cooperating rectangle to all-C.

use super::frame::{perpendicular, Frame};
use super::runner::Runner;
use super::trace::{ControlTrace, Phase};
use super::{CegEngine, ControlError};
use crate::constrained::FixedRect;
use crate::grid::{Strategy, StrategyGrid};
use crate::payoff::PayoffMatrix;

/// Steps 1-4 reach `S*` (C exactly on the rectangle); the expansion phase then
/// grows the rectangle to the whole torus.
pub fn run_controller_thm4(
    state: &StrategyGrid,
    m: &PayoffMatrix,
    rect: &FixedRect,
) -> Result<ControlTrace, ControlError> {
    let rep = m.check_conditions();
    if !rep.rect_control_ok() {
        return Err(ControlError::Precondition(format!(
            "matrix {m} needs one of the two rectangle-control inequality sets together with the disjointness condition"
        )));
    }
    let dims = state.dims();
    if rect.dims() != dims {
        return Err(ControlError::Precondition("rectangle and state dims differ".into()));
    }
    let mask = rect.mask();
    if let Some(k) = (0..dims.len()).find(|&k| mask[k] && !state.at(k).is_c()) {
        return Err(ControlError::Core(crate::Error::FixedMismatch { node: dims.from_index(k)? }));
    }
    let eng = CegEngine::new(dims, m).with_frozen(mask.clone())?;
    let mut r = Runner::new(&eng, state);
    let target: Vec<Strategy> = mask.iter().map(|&f| if f { Strategy::C } else { Strategy::D }).collect();
    let n_free = dims.len() - rect.len();
    let bound = 2 * n_free.saturating_sub(1);

    if r.n_c() < dims.len() {
        loop {
            r.phase = Phase::Step1;
            r.greedy_fixpoint()?;
            check_fixpoint(&r)?;
            r.mark(1);
            if r.n_c() == dims.len() {
                return Ok(r.finish());
            }
            if r.cells == target {
                for i in 2..=4 {
                    r.mark(i);
                }
                break;
            }
            if let Some(k) = find_free(&r, 3) {
                r.phase = Phase::Step2;
                triple(&mut r, k)?;
            } else if let Some(k) = find_free(&r, 2) {
                r.mark(2);
                r.phase = Phase::Step3;
                pair(&mut r, k)?;
            } else if let Some(k) = find_free(&r, 1) {
                r.mark(2);
                r.mark(3);
                r.phase = Phase::Step4;
                single(&mut r, k)?;
            } else {
                return Err(r.fail("free cooperators remain but none has one to three cooperating neighbors"));
            }
        }
        r.ensure(r.time() <= bound, || format!("reaching S* took {} steps, bound is {bound}", r.time()))?;
    }
    expand(&mut r, rect)?;
    Ok(r.finish())
}

fn check_fixpoint(r: &Runner<'_>) -> Result<(), ControlError> {
    for k in 0..r.cells.len() {
        if r.frozen(k) {
            continue;
        }
        let nb = r.eng.neighbors(k);
        let same = nb.iter().filter(|&&q| r.cells[q] == r.cells[k]).count();
        r.ensure(same > 0, || format!("free node index {k} is isolated at a greedy fixed point"))?;
        if r.is_c(k) {
            for &q in nb {
                if !r.is_c(q) {
                    r.ensure(r.pay[k] > r.pay[q], || {
                        format!("free cooperator {k} does not strictly out-earn adjacent defector {q}")
                    })?;
                }
            }
        }
    }
    Ok(())
}

fn find_free(r: &Runner<'_>, c: usize) -> Option<usize> {
    (0..r.cells.len()).find(|&k| !r.frozen(k) && r.is_c(k) && r.coop(k) == c)
}

/// Free cooperator with three cooperating neighbors.
fn triple(r: &mut Runner<'_>, k: usize) -> Result<(), ControlError> {
    let nb = *r.eng.neighbors(k);
    let d = (0..4).find(|&d| !r.is_c(nb[d])).ok_or_else(|| r.fail("pivot has no defecting neighbor"))?;
    let dims = r.eng.dims();
    let frames = perpendicular(d).map(|a| Frame::new(dims, k, a, d));
    let special = |f: &Frame| {
        let (n, ne) = (f.at(-1, 0), f.at(-1, 1));
        r.frozen(n) && !r.is_c(ne) && r.pay[ne] > r.pay[n]
    };
    let (o, e) = (frames[0].at(0, 0), frames[0].at(0, 1));
    let three_c = r.value(true, 3);
    r.ensure(r.pay[o] == three_c && r.pay[o] > r.pay[e], || {
        format!("pivot payoff {} should equal 3p1+p2 = {three_c} and exceed its defector's {}", r.pay[o], r.pay[e])
    })?;
    let fixed_sides = [frames[0].at(-1, 0), frames[0].at(1, 0), frames[0].at(0, -1)]
        .iter()
        .filter(|&&q| r.frozen(q))
        .count();
    r.ensure(fixed_sides <= 1, || format!("{fixed_sides} of the pivot's cooperating neighbors are fixed"))?;

    if let Some(f) = frames.iter().find(|f| special(f)) {
        let (n, up2, right2) = (f.at(-1, 0), f.at(-2, 1), f.at(-1, 2));
        r.ensure(r.pay[n] == three_c, || "fixed corner should earn 3p1+p2".into())?;
        r.ensure(r.is_c(up2) || r.is_c(right2), || "out-earning corner defector lacks a second cooperator".into())?;
        r.ensure(!r.frozen(up2) && !r.frozen(right2), || "nodes beside the corner defector are fixed".into())?;
        r.gadget(&[(e, o)], &[e], &[e, up2, right2])?;
    } else {
        let f = frames[0];
        let mut overrides = Vec::new();
        let mut expect = vec![e, o];
        for s in [-1, 1] {
            let (corner, side) = (f.at(s, 1), f.at(s, 0));
            if !r.is_c(corner) {
                r.ensure(r.pay[corner] < r.pay[side], || "corner defector does not earn less than its side cooperator".into())?;
                overrides.push((corner, side));
            }
            if !r.frozen(corner) {
                expect.push(corner);
            }
        }
        let flips: Vec<usize> = overrides.iter().map(|p| p.0).collect();
        r.gadget(&overrides, &flips, &expect)?;
    }
    Ok(())
}

/// Free cooperator with two cooperating neighbors, at least one of them free.
fn pair(r: &mut Runner<'_>, k: usize) -> Result<(), ControlError> {
    let nb = *r.eng.neighbors(k);
    let c = (0..4)
        .find(|&c| r.is_c(nb[c]) && !r.frozen(nb[c]))
        .ok_or_else(|| r.fail("both cooperating neighbors of the pivot are fixed"))?;
    let d = perpendicular(c)
        .into_iter()
        .find(|&d| !r.is_c(nb[d]))
        .ok_or_else(|| r.fail("no defector perpendicular to the free cooperator"))?;
    let f = Frame::new(r.eng.dims(), k, c, d);
    let (o, e, s, se) = (f.at(0, 0), f.at(0, 1), f.at(1, 0), f.at(1, 1));
    let two_c = r.value(true, 2);
    r.ensure(r.pay[o] == two_c && r.pay[o] > r.pay[e], || "pivot should earn 2p1+2p2 above its defector".into())?;
    r.ensure(r.coop(e) == 1, || "defector beside the pivot should have one cooperating neighbor".into())?;
    r.ensure(!r.is_c(se), || "diagonal node should defect".into())?;
    r.ensure(r.pay[s] <= two_c, || "free cooperator below the pivot earns more than 2p1+2p2".into())?;
    r.ensure(r.pay[se] < r.pay[s], || "diagonal defector does not earn less than its cooperator".into())?;
    r.ensure(r.coop(se) == 1, || "diagonal defector should have one cooperating neighbor".into())?;
    r.gadget(&[(se, s)], &[se], &[e, o, se])
}

/// Free cooperator with a single cooperating neighbor, which must be free.
fn single(r: &mut Runner<'_>, k: usize) -> Result<(), ControlError> {
    let nb = *r.eng.neighbors(k);
    let c = (0..4).find(|&c| r.is_c(nb[c])).ok_or_else(|| r.fail("lone cooperator has no cooperating neighbor"))?;
    r.ensure(!r.frozen(nb[c]), || "lone free cooperator leans on a fixed node".into())?;
    let f = Frame::new(r.eng.dims(), k, c, perpendicular(c)[0]);
    let (o, e, s, se) = (f.at(0, 0), f.at(0, 1), f.at(1, 0), f.at(1, 1));
    r.ensure(r.pay[o] == r.value(true, 1) && r.pay[o] > r.pay[e], || "pivot should earn p1+3p2 above its defector".into())?;
    r.ensure(r.coop(e) == 1, || "defector beside the pivot should have one cooperating neighbor".into())?;
    r.ensure(!r.is_c(se), || "diagonal node should defect".into())?;
    r.ensure(r.pay[se] < r.pay[s], || "diagonal defector does not earn less than its cooperator".into())?;
    r.gadget(&[(se, s)], &[se], &[o, e, se])
}

/// Grow the cooperating rectangle: rows first (one row if the gap is odd, then
/// two per step), then columns the same way.
fn expand(r: &mut Runner<'_>, rect: &FixedRect) -> Result<(), ControlError> {
    r.phase = Phase::Step5Expansion;
    let dims = r.eng.dims();
    let (n, m) = (dims.rows() as i64, dims.cols() as i64);
    let (i0, j0) = (rect.origin().i as i64 - 1, rect.origin().j as i64 - 1);
    let (mut top, mut h) = (i0, rect.rows() as i64);
    let (mut left, mut w) = (j0, rect.cols() as i64);
    let t0 = r.time();
    let expected = (n - h + 1) / 2 + (m - w + 1) / 2;
    let at = |i: i64, j: i64| dims.offset(0, i, j);

    while h < n {
        let mut ov = Vec::new();
        let both = (n - h) % 2 == 0;
        for j in left..left + w {
            ov.push((at(top + h, j), at(top + h - 1, j)));
            if both {
                ov.push((at(top - 1, j), at(top, j)));
            }
        }
        r.hold_step(&ov)?;
        h += if both { 2 } else { 1 };
        if both {
            top -= 1;
        }
        check_rect(r, top, h, left, w)?;
    }
    r.mark(5);
    while w < m {
        let mut ov = Vec::new();
        let both = (m - w) % 2 == 0;
        for i in top..top + h {
            ov.push((at(i, left + w), at(i, left + w - 1)));
            if both {
                ov.push((at(i, left - 1), at(i, left)));
            }
        }
        r.hold_step(&ov)?;
        w += if both { 2 } else { 1 };
        if both {
            left -= 1;
        }
        check_rect(r, top, h, left, w)?;
    }
    let used = (r.time() - t0) as i64;
    r.ensure(used == expected, || format!("expansion took {used} steps, expected {expected}"))
}

fn check_rect(r: &Runner<'_>, top: i64, h: i64, left: i64, w: i64) -> Result<(), ControlError> {
    let dims = r.eng.dims();
    let (n, m) = (dims.rows() as i64, dims.cols() as i64);
    for k in 0..dims.len() {
        let (i, j) = ((k / dims.cols()) as i64, (k % dims.cols()) as i64);
        let inside = (i - top).rem_euclid(n) < h && (j - left).rem_euclid(m) < w;
        r.ensure(r.is_c(k) == inside, || format!("cooperators do not form the {h}x{w} rectangle"))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seg::{random_initial, RngStream};
    use crate::torus::{NodeId, TorusDims};

    fn m4() -> PayoffMatrix {
        PayoffMatrix::parse(["3", "1.5", "4", "1.6"]).unwrap()
    }

    #[test]
    fn star_state_only_expands() {
        let d = TorusDims::new(7, 7).unwrap();
        let rect = FixedRect::new(d, NodeId::new(1, 1), 2, 2).unwrap();
        let mut g = StrategyGrid::all_d(d);
        for k in rect.members() {
            g.set_at(k, Strategy::C);
        }
        let t = run_controller_thm4(&g, &m4(), &rect).unwrap();
        assert_eq!(t.len(), 6);
        assert_eq!(t.phase_len(Phase::Step5Expansion), 6);
        assert!(t.final_state().is_all(Strategy::C));
        t.verify(&m4()).unwrap();
    }

    #[test]
    fn random_free_nodes_reach_all_c() {
        let d = TorusDims::new(7, 7).unwrap();
        let rect = FixedRect::new(d, NodeId::new(3, 4), 2, 2).unwrap();
        for seed in 0..50 {
            let mut g = random_initial(d, &mut RngStream::new(seed));
            for k in rect.members() {
                g.set_at(k, Strategy::C);
            }
            let t = run_controller_thm4(&g, &m4(), &rect).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
            assert!(t.final_state().is_all(Strategy::C));
            t.verify(&m4()).unwrap();
        }
    }

    #[test]
    fn full_width_band() {
        let d = TorusDims::new(8, 8).unwrap();
        let rect = FixedRect::new(d, NodeId::new(2, 1), 2, 8).unwrap();
        for seed in 0..30 {
            let mut g = random_initial(d, &mut RngStream::new(seed));
            for k in rect.members() {
                g.set_at(k, Strategy::C);
            }
            let t = run_controller_thm4(&g, &m4(), &rect).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
            assert!(t.len() <= 2 * (64 - 16 - 1) + 3);
            assert!(t.final_state().is_all(Strategy::C));
        }
    }
}
