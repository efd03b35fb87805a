//! Conditional switch probabilities for imitating a better-off neighbor.
//!
//! A node only ever considers switching when the sampled neighbor earns
//! strictly more. The rule then gives the probability `phi(gap)` of adopting
//! that neighbor's strategy; every rule here keeps `phi` bounded below by a
//! positive `delta` over all gaps the payoff matrix can produce.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};
use crate::payoff::{format_rational, Payoff, PayoffMatrix, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RuleKind {
    /// Always imitate a strictly better neighbor.
    Deterministic,
    /// `phi = 1 / (1 + exp(-gap / kappa))`.
    Fermi { kappa: f64 },
    /// `phi = gap / (4 (max p - min p))`.
    Proportional,
}

impl Default for RuleKind {
    fn default() -> Self {
        RuleKind::Deterministic
    }
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleKind::Deterministic => f.write_str("deterministic"),
            RuleKind::Fermi { kappa } => write!(f, "fermi(kappa={kappa})"),
            RuleKind::Proportional => f.write_str("proportional"),
        }
    }
}

pub const DEFAULT_FERMI_KAPPA: f64 = 0.1;

/// An imitation rule validated against one payoff matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ImitationRule {
    kind: RuleKind,
    matrix: PayoffMatrix,
    delta: Rational,
    /// Largest achievable gap, in matrix units.
    max_gap: i64,
}

impl ImitationRule {
    pub fn new(kind: RuleKind, matrix: &PayoffMatrix) -> Result<Self> {
        let gaps = matrix.positive_gaps();
        let max_gap = {
            let [a, b, c, d] = matrix.numerators();
            let hi = a.max(b).max(c).max(d);
            let lo = a.min(b).min(c).min(d);
            4 * (hi - lo)
        };
        let delta = match kind {
            RuleKind::Deterministic => Rational::from(1),
            RuleKind::Fermi { kappa } => {
                if !(kappa.is_finite() && kappa > 0.0) {
                    return Err(Error::InvalidRule(format!("Fermi temperature must be positive, got {kappa}")));
                }
                // phi(gap) > 1/2 for every gap > 0
                Rational::new(1, 2)
            }
            RuleKind::Proportional => match gaps.first() {
                Some(min_gap) => Rational::new(min_gap.0, max_gap),
                None => Rational::from(1),
            },
        };
        let rule = Self { kind, matrix: *matrix, delta, max_gap };
        rule.validate(&gaps)?;
        Ok(rule)
    }

    pub fn deterministic(matrix: &PayoffMatrix) -> Self {
        Self::new(RuleKind::Deterministic, matrix).expect("deterministic rule is always valid")
    }

    fn validate(&self, gaps: &[Payoff]) -> Result<()> {
        if self.delta <= Rational::from(0) || self.delta > Rational::from(1) {
            return Err(Error::InvalidRule(format!("delta {} outside (0, 1]", format_rational(&self.delta))));
        }
        for &gap in gaps {
            let ok = match self.kind {
                RuleKind::Deterministic => true,
                RuleKind::Fermi { .. } => {
                    let phi = self.switch_probability(gap);
                    phi >= 0.5 && phi <= 1.0
                }
                RuleKind::Proportional => {
                    let phi = Rational::new(gap.0, self.max_gap);
                    phi >= self.delta && phi <= Rational::from(1)
                }
            };
            if !ok {
                return Err(Error::InvalidRule(format!(
                    "switch probability for gap {} violates the lower bound {}",
                    format_rational(&self.matrix.to_rational(gap)),
                    format_rational(&self.delta)
                )));
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> RuleKind {
        self.kind
    }

    pub fn matrix(&self) -> &PayoffMatrix {
        &self.matrix
    }

    /// Lower bound on the switch probability for any strictly positive gap.
    pub fn delta(&self) -> Rational {
        self.delta
    }

    /// Probability of imitating a neighbor that earns `gap > 0` more.
    pub fn switch_probability(&self, gap: Payoff) -> f64 {
        debug_assert!(gap.0 > 0);
        match self.kind {
            RuleKind::Deterministic => 1.0,
            RuleKind::Fermi { kappa } => {
                let g = self.matrix.to_f64(gap);
                1.0 / (1.0 + (-g / kappa).exp())
            }
            RuleKind::Proportional => gap.0 as f64 / self.max_gap as f64,
        }
    }

    /// Whether imitation at `gap > 0` happens with probability exactly one.
    #[inline]
    pub fn is_certain(&self, gap: Payoff) -> bool {
        match self.kind {
            RuleKind::Deterministic => true,
            RuleKind::Fermi { .. } => false,
            RuleKind::Proportional => gap.0 >= self.max_gap,
        }
    }
}
