//! Toroidal grid topology.
//!
//! Nodes are addressed externally with 1-based `(i, j)` coordinates and
//! internally with 0-based row-major indices. All coordinate arithmetic wraps
//! modulo the grid extents.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// Extents of an `N x M` torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TorusDims {
    rows: usize,
    cols: usize,
}

impl TorusDims {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows < 3 || cols < 3 {
            return Err(Error::InvalidDims { rows, cols });
        }
        Ok(Self { rows, cols })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of nodes, `N * M`.
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn to_index(&self, node: NodeId) -> usize {
        (node.i - 1) * self.cols + (node.j - 1)
    }

    pub fn from_index(&self, k: usize) -> Result<NodeId> {
        if k >= self.len() {
            return Err(Error::IndexOutOfRange { index: k, len: self.len() });
        }
        Ok(NodeId { i: k / self.cols + 1, j: k % self.cols + 1 })
    }

    /// Canonical node for arbitrary (possibly out-of-range) coordinates.
    pub fn node(&self, i: i64, j: i64) -> NodeId {
        NodeId {
            i: i.rem_euclid(self.rows as i64) as usize + 1,
            j: j.rem_euclid(self.cols as i64) as usize + 1,
        }
    }

    /// Row-major index of the node at `k` shifted by `(di, dj)`.
    pub fn offset(&self, k: usize, di: i64, dj: i64) -> usize {
        let r = (k / self.cols) as i64 + di;
        let c = (k % self.cols) as i64 + dj;
        r.rem_euclid(self.rows as i64) as usize * self.cols + c.rem_euclid(self.cols as i64) as usize
    }

    /// The four neighbors of `node` in the fixed order up, down, left, right.
    pub fn neighbors(&self, node: NodeId) -> [NodeId; 4] {
        let (i, j) = (node.i as i64, node.j as i64);
        DIRECTIONS.map(|(di, dj)| self.node(i - 1 + di, j - 1 + dj))
    }

    /// Index form of [`TorusDims::neighbors`].
    pub fn neighbor_indices(&self, k: usize) -> [usize; 4] {
        DIRECTIONS.map(|(di, dj)| self.offset(k, di, dj))
    }

    /// Neighbor table for every node, in row-major order.
    pub fn neighbor_table(&self) -> Vec<[usize; 4]> {
        (0..self.len()).map(|k| self.neighbor_indices(k)).collect()
    }

    /// Toroidal Manhattan distance between two nodes.
    pub fn distance(&self, a: NodeId, b: NodeId) -> usize {
        let wrap = |x: usize, y: usize, n: usize| {
            let d = x.abs_diff(y);
            d.min(n - d)
        };
        wrap(a.i, b.i, self.rows) + wrap(a.j, b.j, self.cols)
    }
}

impl fmt::Display for TorusDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

/// Offsets for the neighbor order up, down, left, right.
pub const DIRECTIONS: [(i64, i64); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

/// Position of `(di, dj)` in [`DIRECTIONS`].
pub fn direction_of(di: i64, dj: i64) -> Option<usize> {
    DIRECTIONS.iter().position(|&d| d == (di, dj))
}

/// A grid node in canonical 1-based coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId {
    pub i: usize,
    pub j: usize,
}

impl NodeId {
    pub fn new(i: usize, j: usize) -> Self {
        Self { i, j }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.i, self.j)
    }
}
