//! Imitation dynamics for symmetric 2x2 games on toroidal grids.

pub mod ceg;
pub mod constrained;
pub mod error;
pub mod grid;
pub mod oracle;
pub mod payoff;
pub mod rule;
pub mod seg;
pub mod torus;

pub use ceg::{step_ceg, greedy_control, ControlError, ControlField, ControlTrace, Phase};
pub use constrained::{FixedRect, FixedSet};
pub use error::{Error, Result};
pub use grid::{Strategy, StrategyGrid};
pub use oracle::{SupportGraph, StateIndex};
pub use payoff::{ConditionReport, GameClass, Payoff, PayoffMatrix, Rational};
pub use rule::{ImitationRule, RuleKind};
pub use seg::{RngStream, RunRecord, SegEngine, StrategySet, TerminalClass};
pub use torus::{NodeId, TorusDims};
