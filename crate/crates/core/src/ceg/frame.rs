use crate::torus::{TorusDims, DIRECTIONS};

/// A local coordinate system anchored at one node: local `(1, 0)` points along
/// direction `a`, local `(0, 1)` along direction `b`. Covers the eight
/// symmetries of the square lattice.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Frame {
    dims: TorusDims,
    origin: usize,
    a: (i64, i64),
    b: (i64, i64),
}

impl Frame {
    pub fn new(dims: TorusDims, origin: usize, a: usize, b: usize) -> Self {
        debug_assert!(perpendicular(a).contains(&b));
        Self { dims, origin, a: DIRECTIONS[a], b: DIRECTIONS[b] }
    }

    /// Row-major index of the node at local `(x, y)`.
    pub fn at(&self, x: i64, y: i64) -> usize {
        let di = x * self.a.0 + y * self.b.0;
        let dj = x * self.a.1 + y * self.b.1;
        self.dims.offset(self.origin, di, dj)
    }
}

pub(crate) fn perpendicular(d: usize) -> [usize; 2] {
    if d < 2 {
        [2, 3]
    } else {
        [0, 1]
    }
}
