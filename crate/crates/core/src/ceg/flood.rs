//! Stag hunt: grow cooperation outward from a cooperating 2x2 square.

use super::runner::Runner;
use super::trace::{ControlTrace, Phase};
use super::{CegEngine, ControlError};
use crate::grid::StrategyGrid;
use crate::payoff::PayoffMatrix;

/// Row-major index of the top-left corner of the first all-C 2x2 block.
pub fn find_c_square(state: &StrategyGrid) -> Option<usize> {
    let d = state.dims();
    (0..d.len()).find(|&k| {
        [(0, 0), (0, 1), (1, 0), (1, 1)].iter().all(|&(di, dj)| state.at(d.offset(k, di, dj)).is_c())
    })
}

/// Flood control: at step `s` every node of `I_s \ I_{s-1}` copies a neighbor in
/// `I_{s-1}`, everyone else holds. Ends at all-C.
pub fn run_flood_thm3(state: &StrategyGrid, m: &PayoffMatrix) -> Result<ControlTrace, ControlError> {
    if !m.check_conditions().thm3_ok {
        return Err(ControlError::Precondition(format!("matrix {m} does not satisfy the stag hunt conditions")));
    }
    let corner = find_c_square(state)
        .ok_or_else(|| ControlError::Precondition("state has no cooperating 2x2 square".into()))?;
    let dims = state.dims();
    let eng = CegEngine::new(dims, m);
    let mut r = Runner::new(&eng, state);
    r.phase = Phase::Flood;
    let bound = dims.rows().div_ceil(2) + dims.cols().div_ceil(2) + 2;

    let mut inside = vec![false; dims.len()];
    for (di, dj) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        inside[dims.offset(corner, di, dj)] = true;
    }
    while r.n_c() < dims.len() {
        let frontier: Vec<(usize, usize)> = (0..dims.len())
            .filter(|&k| !inside[k])
            .filter_map(|k| eng.neighbors(k).iter().find(|&&q| inside[q]).map(|&q| (k, q)))
            .collect();
        r.ensure(!frontier.is_empty(), || "frontier is empty before the grid is covered".into())?;
        for &(k, q) in &frontier {
            r.ensure(r.is_c(q), || format!("node index {q} inside the flooded set defects"))?;
            r.ensure(r.pay[q] > r.pay[k] || r.is_c(k), || {
                format!("flooded node {q} does not out-earn frontier defector {k}")
            })?;
        }
        r.hold_step(&frontier)?;
        for &(k, _) in &frontier {
            inside[k] = true;
        }
        let all = (0..dims.len()).filter(|&k| inside[k]).all(|k| r.is_c(k));
        r.ensure(all, || "flooded set is not entirely cooperating".into())?;
        r.ensure(r.time() <= bound, || format!("flood exceeded {bound} steps"))?;
    }
    Ok(r.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payoff::parse_rational;
    use crate::seg::{random_initial, RngStream};
    use crate::torus::TorusDims;

    fn sh() -> PayoffMatrix {
        PayoffMatrix::stag_hunt(parse_rational("0.3").unwrap()).unwrap()
    }

    #[test]
    fn small_square_floods_quickly() {
        let g = StrategyGrid::from_rows(&["..#", "..#", "###"]).unwrap();
        let t = run_flood_thm3(&g, &sh()).unwrap();
        assert!(t.len() <= 3);
        assert!(t.final_state().is_all(crate::Strategy::C));
        t.verify(&sh()).unwrap();
    }

    #[test]
    fn ten_by_ten_floods_within_eleven() {
        let d = TorusDims::new(10, 10).unwrap();
        let mut g = StrategyGrid::all_d(d);
        for k in [44, 45, 54, 55] {
            g.set_at(k, crate::Strategy::C);
        }
        let t = run_flood_thm3(&g, &sh()).unwrap();
        assert!(t.len() <= 11);
        for seed in 0..20 {
            let mut g = random_initial(d, &mut RngStream::new(seed));
            for k in [0, 1, 10, 11] {
                g.set_at(k, crate::Strategy::C);
            }
            let t = run_flood_thm3(&g, &sh()).unwrap();
            assert!(t.final_state().is_all(crate::Strategy::C));
        }
    }

    #[test]
    fn preconditions() {
        let d = TorusDims::new(4, 4).unwrap();
        assert!(run_flood_thm3(&StrategyGrid::all_d(d), &sh()).is_err());
        let pd = PayoffMatrix::from_integers(3, 0, 5, 1).unwrap();
        assert!(run_flood_thm3(&StrategyGrid::all_c(d), &pd).is_err());
        assert!(run_flood_thm3(&StrategyGrid::all_c(d), &sh()).unwrap().is_empty());
    }
}
