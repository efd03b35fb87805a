use std::fmt;
use std::path::Path;
use std::str::FromStr;

use gridgame::payoff::format_rational;
use gridgame::{FixedRect, FixedSet, ImitationRule, NodeId, PayoffMatrix, RuleKind, Strategy, TorusDims};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ConfigError;

pub const CONVERGING_BUDGET: usize = 10_000;
pub const NON_CONVERGING_BUDGET: usize = 1_000_000;

/// One experiment: a grid, one or more payoff points, a rule and a seed list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub game: GameSpec,
    #[serde(default)]
    pub rule: RuleKind,
    pub seeds: SeedSpec,
    /// Per-point budget; when absent it depends on whether the point is expected to converge.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    #[serde(default)]
    pub init: InitKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed: Option<FixedSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshots: Option<SnapshotSchedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

/// Either a family with a list of exact parameters or one explicit matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<[String; 4]>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    List(Vec<u64>),
    Range { start: u64, end: u64 },
}

impl SeedSpec {
    pub fn seeds(&self) -> Vec<u64> {
        match self {
            SeedSpec::List(v) => v.clone(),
            SeedSpec::Range { start, end } => (*start..*end).collect(),
        }
    }
}

impl FromStr for SeedSpec {
    type Err = ConfigError;

    /// `"7"`, `"0..100"` or `"1,5,9"`.
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        let bad = || ConfigError::Invalid(format!("cannot parse seeds {s:?}"));
        if let Some((a, b)) = s.split_once("..") {
            let start = a.trim().parse().map_err(|_| bad())?;
            let end = b.trim().parse().map_err(|_| bad())?;
            if end <= start {
                return Err(bad());
            }
            return Ok(SeedSpec::Range { start, end });
        }
        s.split(',').map(|p| p.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>().map(SeedSpec::List)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    /// Independent fair coin per node.
    #[default]
    Random,
    /// Random, then the 2x2 block at (1,1) set to C.
    CSquare,
    AllD,
}

/// Nodes frozen at one strategy, listed explicitly or as a rectangle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedSpec {
    pub strategy: Strategy,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nodes: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rect: Option<RectSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectSpec {
    pub origin: [usize; 2],
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotSchedule {
    pub every: usize,
}

impl FromStr for SnapshotSchedule {
    type Err = ConfigError;

    /// `"every:K"` with `K >= 1`.
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        s.strip_prefix("every:")
            .and_then(|k| k.parse().ok())
            .filter(|&k: &usize| k > 0)
            .map(|every| SnapshotSchedule { every })
            .ok_or_else(|| ConfigError::Invalid(format!("snapshot schedule must look like every:K, got {s:?}")))
    }
}

/// A payoff point ready to run.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub label: String,
    pub param: Option<String>,
    pub matrix: PayoffMatrix,
    pub rule: ImitationRule,
    pub max_steps: usize,
}

/// A family, its parameter grid and the replications per point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepSpec {
    pub family: String,
    pub params: Vec<String>,
    pub replications: usize,
}

impl SweepSpec {
    pub fn new(family: &str, params: Vec<String>, replications: usize) -> Result<Self, ConfigError> {
        if replications == 0 {
            return Err(ConfigError::Invalid("a sweep needs at least one replication".into()));
        }
        if params.is_empty() {
            return Err(ConfigError::Invalid("a sweep needs at least one parameter".into()));
        }
        for p in &params {
            PayoffMatrix::family(family, p)?;
        }
        Ok(Self { family: family.to_string(), params, replications })
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.display().to_string(), e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.dims()?;
        self.points()?;
        if self.seeds.seeds().is_empty() {
            return Err(ConfigError::Invalid("seed list is empty".into()));
        }
        if let Some(s) = self.snapshots {
            if s.every == 0 {
                return Err(ConfigError::Invalid("snapshot interval must be positive".into()));
            }
        }
        self.fixed_set()?;
        Ok(())
    }

    pub fn dims(&self) -> Result<TorusDims, ConfigError> {
        Ok(TorusDims::new(self.rows, self.cols)?)
    }

    /// Hex SHA-256 prefix of the canonical serialization, ignoring the output path.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.out = None;
        let digest = Sha256::digest(canon.to_toml().as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn points(&self) -> Result<Vec<Point>, ConfigError> {
        let g = &self.game;
        let raw: Vec<(String, Option<String>, PayoffMatrix)> = match (&g.family, &g.matrix) {
            (Some(f), None) => {
                if g.params.is_empty() {
                    return Err(ConfigError::Invalid(format!("family {f} needs at least one parameter")));
                }
                g.params
                    .iter()
                    .map(|p| {
                        let m = PayoffMatrix::family(f, p)?;
                        Ok((format!("{f}-{}", sanitize(p)), Some(p.clone()), m))
                    })
                    .collect::<Result<_, ConfigError>>()?
            }
            (None, Some(entries)) => {
                if !g.params.is_empty() {
                    return Err(ConfigError::Invalid("params only apply to a family".into()));
                }
                let m = PayoffMatrix::parse([&entries[0], &entries[1], &entries[2], &entries[3]].map(|s| s.as_str()))?;
                vec![("matrix".to_string(), None, m)]
            }
            _ => return Err(ConfigError::Invalid("game needs exactly one of family or matrix".into())),
        };
        raw.into_iter()
            .map(|(label, param, matrix)| {
                let rule = ImitationRule::new(self.rule, &matrix)?;
                let max_steps = self.max_steps.unwrap_or_else(|| default_budget(&matrix));
                Ok(Point { label, param, matrix, rule, max_steps })
            })
            .collect()
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec, ConfigError> {
        let family = self.game.family.as_deref().ok_or_else(|| ConfigError::Invalid("a sweep needs a family".into()))?;
        SweepSpec::new(family, self.game.params.clone(), self.seeds.seeds().len())
    }

    pub fn fixed_set(&self) -> Result<Option<FixedSet>, ConfigError> {
        let Some(spec) = &self.fixed else { return Ok(None) };
        let dims = self.dims()?;
        let set = match (&spec.rect, spec.nodes.is_empty()) {
            (Some(r), true) => {
                if spec.strategy != Strategy::C {
                    return Err(ConfigError::Invalid("a fixed rectangle must cooperate".into()));
                }
                FixedRect::new(dims, NodeId::new(r.origin[0], r.origin[1]), r.rows, r.cols)?.to_fixed_set()
            }
            (None, false) => FixedSet::new(spec.strategy, spec.nodes.iter().map(|&[i, j]| NodeId::new(i, j))),
            _ => return Err(ConfigError::Invalid("fixed needs exactly one of nodes or rect".into())),
        };
        set.mask(dims)?;
        Ok(Some(set))
    }

    pub fn fixed_rect(&self) -> Result<Option<FixedRect>, ConfigError> {
        match self.fixed.as_ref().and_then(|f| f.rect) {
            Some(r) => Ok(Some(FixedRect::new(self.dims()?, NodeId::new(r.origin[0], r.origin[1]), r.rows, r.cols)?)),
            None => Ok(None),
        }
    }
}

/// Budget for points whose sufficient convergence conditions hold, and for the rest.
pub fn default_budget(m: &PayoffMatrix) -> usize {
    let r = m.check_conditions();
    if r.thm1_ok || r.thm2_ok || r.thm3_ok {
        CONVERGING_BUDGET
    } else {
        NON_CONVERGING_BUDGET
    }
}

fn sanitize(p: &str) -> String {
    p.chars().map(|c| if c == '/' { '_' } else { c }).collect()
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e = self.matrix.entries().map(|r| format_rational(&r));
        write!(f, "{} ({}, {}, {}, {}) {}", self.label, e[0], e[1], e[2], e[3], self.rule.kind())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
name = "pd"
rows = 6
cols = 5
seeds = { start = 0, end = 4 }

[game]
matrix = ["3", "0", "5", "1"]

[rule]
kind = "fermi"
kappa = 0.5

[fixed]
strategy = "D"
nodes = [[1, 1], [3, 2]]
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(cfg.seeds.seeds(), vec![0, 1, 2, 3]);
        assert_eq!(cfg.rule, RuleKind::Fermi { kappa: 0.5 });
        let again = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.hash(), cfg.hash());
        assert_eq!(cfg.fixed_set().unwrap().unwrap().len(), 2);
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        let mut moved = cfg.clone();
        moved.out = Some("elsewhere".into());
        assert_eq!(moved.hash(), cfg.hash());
        moved.max_steps = Some(5);
        assert_ne!(moved.hash(), cfg.hash());
        assert_eq!(cfg.hash().len(), 16);
    }

    #[test]
    fn default_budget_tracks_conditions() {
        let pts = |f: &str, p: &str| default_budget(&PayoffMatrix::family(f, p).unwrap());
        assert_eq!(pts("snowdrift", "0.76"), CONVERGING_BUDGET);
        assert_eq!(pts("snowdrift", "0.74"), NON_CONVERGING_BUDGET);
        assert_eq!(pts("stag-hunt", "0.32"), CONVERGING_BUDGET);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ExperimentConfig::from_toml("name = 1").is_err());
        let no_game = SAMPLE.replace("matrix = [\"3\", \"0\", \"5\", \"1\"]", "");
        assert!(ExperimentConfig::from_toml(&no_game).is_err());
        let out_of_range = SAMPLE.replace("matrix = [\"3\", \"0\", \"5\", \"1\"]", "family = \"snowdrift\"\nparams = [\"1.5\"]");
        assert!(ExperimentConfig::from_toml(&out_of_range).is_err());
        let stray = format!("{SAMPLE}\nbogus = 3\n");
        assert!(ExperimentConfig::from_toml(&stray).is_err());
        assert!(SweepSpec::new("chicken", vec!["3".into()], 0).is_err());
        assert!(SweepSpec::new("chicken", vec!["-1".into()], 3).is_err());
    }

    #[test]
    fn cli_strings() {
        assert_eq!("3..6".parse::<SeedSpec>().unwrap().seeds(), vec![3, 4, 5]);
        assert_eq!("4,1".parse::<SeedSpec>().unwrap().seeds(), vec![4, 1]);
        assert!("6..3".parse::<SeedSpec>().is_err());
        assert_eq!("every:25".parse::<SnapshotSchedule>().unwrap().every, 25);
        assert!("every:0".parse::<SnapshotSchedule>().is_err());
        assert!("25".parse::<SnapshotSchedule>().is_err());
    }
}
