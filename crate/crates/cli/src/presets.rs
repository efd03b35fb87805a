use gridgame::RuleKind;

use crate::config::{ExperimentConfig, GameSpec, InitKind, SeedSpec};
use crate::ConfigError;

pub const PRESETS: [&str; 4] = ["snowdrift-critical", "hawkdove-critical", "chicken-critical", "staghunt"];

/// Built-in 10x10 parameter scans around the convergence thresholds.
pub fn preset(name: &str) -> Result<ExperimentConfig, ConfigError> {
    let (family, params, init): (&str, &[&str], InitKind) = match name {
        "snowdrift-critical" => ("snowdrift", &["0.74", "0.75", "0.76"], InitKind::Random),
        "hawkdove-critical" => ("hawk-dove", &["0.59", "0.60", "0.61"], InitKind::Random),
        "chicken-critical" => ("chicken", &["2.9", "3.0", "3.1"], InitKind::Random),
        "staghunt" => ("stag-hunt", &["0.32", "1/3", "0.34"], InitKind::CSquare),
        other => {
            return Err(ConfigError::Invalid(format!("unknown preset {other:?}; known: {}", PRESETS.join(", "))))
        }
    };
    Ok(ExperimentConfig {
        name: name.to_string(),
        rows: 10,
        cols: 10,
        game: GameSpec {
            family: Some(family.to_string()),
            params: params.iter().map(|p| p.to_string()).collect(),
            matrix: None,
        },
        rule: RuleKind::Deterministic,
        seeds: SeedSpec::Range { start: 0, end: 100 },
        max_steps: None,
        init,
        fixed: None,
        snapshots: None,
        out: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{CONVERGING_BUDGET, NON_CONVERGING_BUDGET};

    #[test]
    fn all_presets_validate() {
        for name in PRESETS {
            let cfg = preset(name).unwrap();
            cfg.validate().unwrap();
            assert_eq!(cfg.points().unwrap().len(), 3);
            assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        }
        assert!(preset("nope").is_err());
    }

    #[test]
    fn budgets_split_at_threshold() {
        let budgets: Vec<usize> =
            preset("snowdrift-critical").unwrap().points().unwrap().iter().map(|p| p.max_steps).collect();
        assert_eq!(budgets, vec![NON_CONVERGING_BUDGET, NON_CONVERGING_BUDGET, CONVERGING_BUDGET]);
        let stag: Vec<usize> = preset("staghunt").unwrap().points().unwrap().iter().map(|p| p.max_steps).collect();
        assert_eq!(stag, vec![CONVERGING_BUDGET, NON_CONVERGING_BUDGET, NON_CONVERGING_BUDGET]);
    }
}
