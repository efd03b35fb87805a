//! Shared fixtures for the benchmarks.

use gridgame::seg::random_initial;
use gridgame::{ImitationRule, PayoffMatrix, RngStream, SegEngine, StrategyGrid, TorusDims};

pub fn snowdrift(c: &str) -> PayoffMatrix {
    PayoffMatrix::family("snowdrift", c).expect("valid parameter")
}

/// A deterministic-rule engine and a seeded random state on an `n x n` torus.
pub fn fixture(n: usize, m: &PayoffMatrix, seed: u64) -> (SegEngine, StrategyGrid) {
    let dims = TorusDims::new(n, n).expect("n >= 3");
    let engine = SegEngine::new(dims, m, &ImitationRule::deterministic(m)).expect("rule matches");
    (engine, random_initial(dims, &mut RngStream::new(seed)))
}
