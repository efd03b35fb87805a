//! Strategy states over a torus.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;

use crate::error::{Error, Result};
use crate::payoff::{Payoff, PayoffMatrix};
use crate::torus::{NodeId, TorusDims};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum Strategy {
    C = 0,
    D = 1,
}

impl Strategy {
    #[inline]
    pub fn is_c(self) -> bool {
        self == Strategy::C
    }

    pub fn flip(self) -> Self {
        match self {
            Strategy::C => Strategy::D,
            Strategy::D => Strategy::C,
        }
    }

    #[inline]
    pub fn from_bit(bit: u8) -> Self {
        if bit == 0 {
            Strategy::C
        } else {
            Strategy::D
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.is_c() { "C" } else { "D" })
    }
}

/// The strategy of every node, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StrategyGrid {
    dims: TorusDims,
    cells: Vec<Strategy>,
}

impl StrategyGrid {
    pub fn filled(dims: TorusDims, s: Strategy) -> Self {
        Self { dims, cells: vec![s; dims.len()] }
    }

    pub fn all_c(dims: TorusDims) -> Self {
        Self::filled(dims, Strategy::C)
    }

    pub fn all_d(dims: TorusDims) -> Self {
        Self::filled(dims, Strategy::D)
    }

    pub fn from_cells(dims: TorusDims, cells: Vec<Strategy>) -> Result<Self> {
        if cells.len() != dims.len() {
            return Err(Error::StateSize { expected: dims.len(), got: cells.len() });
        }
        Ok(Self { dims, cells })
    }

    /// Parses rows of `.`/`C` (cooperate) and `#`/`D` (defect).
    pub fn from_rows(rows: &[&str]) -> Result<Self> {
        let bad = || Error::Precondition("grid rows must be equal-length strings of . # C D".into());
        let n = rows.len();
        let m = rows.first().map(|r| r.chars().count()).unwrap_or(0);
        let dims = TorusDims::new(n, m)?;
        let mut cells = Vec::with_capacity(n * m);
        for row in rows {
            if row.chars().count() != m {
                return Err(bad());
            }
            for ch in row.chars() {
                cells.push(match ch {
                    '.' | 'C' | 'c' => Strategy::C,
                    '#' | 'D' | 'd' => Strategy::D,
                    _ => return Err(bad()),
                });
            }
        }
        Ok(Self { dims, cells })
    }

    /// Decodes a bit-per-cell index (bit `k` set means node `k` defects).
    pub fn from_state_index(dims: TorusDims, index: u64) -> Self {
        let cells = (0..dims.len()).map(|k| Strategy::from_bit(((index >> k) & 1) as u8)).collect();
        Self { dims, cells }
    }

    pub fn state_index(&self) -> u64 {
        assert!(self.cells.len() <= 64, "state index needs at most 64 cells");
        self.cells
            .iter()
            .enumerate()
            .fold(0u64, |acc, (k, s)| acc | ((*s as u64) << k))
    }

    pub fn dims(&self) -> TorusDims {
        self.dims
    }

    pub fn cells(&self) -> &[Strategy] {
        &self.cells
    }

    pub fn get(&self, node: NodeId) -> Strategy {
        self.cells[self.dims.to_index(node)]
    }

    #[inline]
    pub fn at(&self, k: usize) -> Strategy {
        self.cells[k]
    }

    pub fn set(&mut self, node: NodeId, s: Strategy) {
        let k = self.dims.to_index(node);
        self.cells[k] = s;
    }

    #[inline]
    pub fn set_at(&mut self, k: usize, s: Strategy) {
        self.cells[k] = s;
    }

    /// Number of cooperating nodes.
    pub fn n_c(&self) -> usize {
        self.cells.iter().filter(|s| s.is_c()).count()
    }

    pub fn is_all(&self, s: Strategy) -> bool {
        self.cells.iter().all(|&c| c == s)
    }

    /// Number of cooperating neighbors of node `k`.
    pub fn coop_neighbors(&self, k: usize) -> u32 {
        self.dims.neighbor_indices(k).iter().filter(|&&q| self.cells[q].is_c()).count() as u32
    }

    /// Payoff of `node` accumulated against its four neighbors.
    pub fn node_payoff(&self, node: NodeId, m: &PayoffMatrix) -> Payoff {
        let k = self.dims.to_index(node);
        m.payoff(self.cells[k].is_c(), self.coop_neighbors(k))
    }

    /// Payoff of every node, row-major.
    pub fn payoffs(&self, m: &PayoffMatrix) -> Vec<Payoff> {
        (0..self.cells.len()).map(|k| m.payoff(self.cells[k].is_c(), self.coop_neighbors(k))).collect()
    }

    /// The grid shifted by `(di, dj)`: the new cell at `x` holds the old cell at `x - (di, dj)`.
    pub fn translate(&self, di: i64, dj: i64) -> Self {
        let cells = (0..self.cells.len()).map(|k| self.cells[self.dims.offset(k, -di, -dj)]).collect();
        Self { dims: self.dims, cells }
    }

    /// Stable 64-bit digest of dims and cells.
    pub fn digest(&self) -> u64 {
        let mut h = Sha256::new();
        h.update((self.dims.rows() as u64).to_le_bytes());
        h.update((self.dims.cols() as u64).to_le_bytes());
        h.update(self.cells.iter().map(|&s| s as u8).collect::<Vec<u8>>());
        let out = h.finalize();
        u64::from_le_bytes(out[..8].try_into().expect("digest has 32 bytes"))
    }

    /// ASCII rendering: one row per line, `.` for C and `#` for D.
    pub fn to_ascii(&self) -> String {
        let mut s = String::with_capacity(self.cells.len() + self.dims.rows());
        for row in self.cells.chunks(self.dims.cols()) {
            s.extend(row.iter().map(|c| if c.is_c() { '.' } else { '#' }));
            s.push('\n');
        }
        s
    }

    /// Plain PGM (P2) rendering, width `M`, height `N`, 0 for C and 255 for D.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut s = format!("P2\n{} {}\n255\n", self.dims.cols(), self.dims.rows());
        for row in self.cells.chunks(self.dims.cols()) {
            let line: Vec<&str> = row.iter().map(|c| if c.is_c() { "0" } else { "255" }).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s.into_bytes()
    }
}

impl fmt::Display for StrategyGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_ascii())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ascii_and_pgm_rendering() {
        let d = TorusDims::new(3, 3).unwrap();
        assert_eq!(StrategyGrid::all_c(d).to_ascii(), "...\n...\n...\n");
        assert_eq!(StrategyGrid::all_d(d).to_ascii(), "###\n###\n###\n");
        let g = StrategyGrid::from_rows(&[".#..", "....", "...#"]).unwrap();
        assert_eq!(
            String::from_utf8(g.to_pgm()).unwrap(),
            "P2\n4 3\n255\n0 255 0 0\n0 0 0 0\n0 0 0 255\n"
        );
    }

    #[test]
    fn state_index_bijection() {
        let d = TorusDims::new(3, 3).unwrap();
        for idx in 0..512u64 {
            assert_eq!(StrategyGrid::from_state_index(d, idx).state_index(), idx);
        }
        assert_eq!(StrategyGrid::all_c(d).state_index(), 0);
        assert_eq!(StrategyGrid::all_d(d).state_index(), 511);
    }

    #[test]
    fn payoff_cases() {
        let m = PayoffMatrix::from_integers(3, 0, 5, 1).unwrap();
        let g = StrategyGrid::from_rows(&["...", ".#.", "..."]).unwrap();
        assert_eq!(g.node_payoff(NodeId::new(2, 2), &m), Payoff(20));
        let c = StrategyGrid::all_c(g.dims());
        assert!(c.payoffs(&m).iter().all(|&p| p == Payoff(12)));
        let dd = StrategyGrid::all_d(g.dims());
        assert!(dd.payoffs(&m).iter().all(|&p| p == Payoff(4)));
    }

    #[test]
    fn translate_moves_cells() {
        let g = StrategyGrid::from_rows(&["#...", "....", "...."]).unwrap();
        let t = g.translate(1, 2);
        assert_eq!(t.get(NodeId::new(2, 3)), Strategy::D);
        assert_eq!(t.n_c(), g.n_c());
    }
}
