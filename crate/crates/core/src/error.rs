use thiserror::Error;

use crate::torus::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("grid must be at least 3x3, got {rows}x{cols}")]
    InvalidDims { rows: usize, cols: usize },

    #[error("node index {index} out of range for {len} nodes")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("cannot parse {input:?} as an exact rational")]
    ParseRational { input: String },

    #[error("arithmetic overflow in exact payoff arithmetic")]
    Overflow,

    #[error("parameter {value} outside the range of the {family} family ({range})")]
    ParameterOutOfRange { family: &'static str, value: String, range: &'static str },

    #[error("unknown game family {0:?}")]
    UnknownFamily(String),

    #[error("invalid imitation rule: {0}")]
    InvalidRule(String),

    #[error("control for node {node} points at non-adjacent node {target}")]
    NonAdjacentControl { node: NodeId, target: NodeId },

    #[error("control field has {got} entries, grid has {expected}")]
    ControlLength { expected: usize, got: usize },

    #[error("fixed node {node} does not play the fixed strategy")]
    FixedMismatch { node: NodeId },

    #[error("node {node} lies outside the {rows}x{cols} grid")]
    NodeOutOfRange { node: NodeId, rows: usize, cols: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("state space of {nodes} nodes exceeds the oracle cap of {cap}")]
    OracleCap { nodes: usize, cap: usize },

    #[error("state size mismatch: expected {expected} cells, got {got}")]
    StateSize { expected: usize, got: usize },
}
