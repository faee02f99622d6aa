//! One-parameter sweeps and the built-in presets.
//!
//! A parameter path is a dotted walk through the config as TOML, e.g.
//! `simulator.target_kl` or `detectors.tfidf_knn.k`. Inside an array a segment
//! selects elements: `*` takes every element that has the remaining key, a
//! number matches a scenario `id` and a word matches a detector `name`.

use serde::{Deserialize, Serialize};
use toml::Value;

use super::{BenchError, ExperimentConfig, Scenarios};
use crate::detectors::DetectorKind;
use crate::simulator::scenario_catalog;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: String,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Divergence between the novel topic and its nearest normal topic.
    Kl,
    /// Neighbour count of the kNN-based detectors.
    K,
    /// Slope of the emergent curve.
    Slope,
}

pub const KL_GRID: [f64; 6] = [0.01, 0.05, 0.1, 0.5, 0.9, 0.99];
pub const K_GRID: [i64; 3] = [1, 5, 10];
pub const SLOPE_GRID: [f64; 5] = [0.5, 1.0, 2.0, 5.0, 10.0];

/// Scenario the presets run on: the middle emergent curve.
const PRESET_SCENARIO: u32 = 5;

impl std::str::FromStr for Preset {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "kl" => Ok(Preset::Kl),
            "k" => Ok(Preset::K),
            "slope" => Ok(Preset::Slope),
            _ => Err(BenchError::Config(format!(
                "unknown preset `{s}` (kl, k, slope)"
            ))),
        }
    }
}

impl Preset {
    pub fn sweep(self) -> SweepSpec {
        match self {
            Preset::Kl => SweepSpec {
                parameter: "simulator.target_kl".into(),
                values: KL_GRID.iter().map(|&v| Value::Float(v)).collect(),
            },
            Preset::K => SweepSpec {
                parameter: "detectors.*.k".into(),
                values: K_GRID.iter().map(|&v| Value::Integer(v)).collect(),
            },
            Preset::Slope => SweepSpec {
                parameter: "scenarios.*.slope".into(),
                values: SLOPE_GRID.iter().map(|&v| Value::Float(v)).collect(),
            },
        }
    }

    /// The preset's sweep on top of `base`: scenario 5 only, and for `slope`
    /// the two detectors the slope study compares.
    pub fn apply(self, base: &ExperimentConfig) -> ExperimentConfig {
        let mut cfg = base.clone();
        cfg.scenarios = Scenarios::List(
            scenario_catalog(base.simulator.horizon_days)
                .into_iter()
                .filter(|s| s.id == PRESET_SCENARIO)
                .collect(),
        );
        if self == Preset::Slope {
            cfg.detectors = [DetectorKind::Olda, DetectorKind::Topicsketch]
                .iter()
                .map(|k| {
                    base.detectors
                        .iter()
                        .find(|d| d.kind() == *k)
                        .cloned()
                        .unwrap_or_else(|| k.default_config())
                })
                .collect();
        }
        cfg.sweep = Some(self.sweep());
        cfg
    }
}

/// Short label for a sweep value, used in file names and CSV columns.
pub fn value_label(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// `base` with `parameter` set to `value`. Fails when the path reaches no
/// config key or the result no longer parses.
pub fn apply_sweep(
    base: &ExperimentConfig,
    parameter: &str,
    value: &Value,
) -> Result<ExperimentConfig, BenchError> {
    let mut root = Value::try_from(base).map_err(|e| BenchError::Config(e.to_string()))?;
    let path: Vec<&str> = parameter.split('.').collect();
    if path.iter().any(|s| s.is_empty()) {
        return Err(BenchError::Config(format!(
            "malformed sweep path `{parameter}`"
        )));
    }
    let hits = set_path(&mut root, &path, value, false);
    if hits == 0 {
        return Err(BenchError::Config(format!(
            "sweep path `{parameter}` does not resolve to a config key"
        )));
    }
    root.try_into::<ExperimentConfig>().map_err(|e| {
        BenchError::Config(format!("sweep `{parameter}` = {}: {e}", value_label(value)))
    })
}

/// Sets the value at every match and returns how many keys were set. Under a
/// wildcard, missing leaf keys are skipped instead of inserted.
fn set_path(node: &mut Value, path: &[&str], value: &Value, wildcard: bool) -> usize {
    let (head, rest) = match path.split_first() {
        Some(p) => p,
        None => return 0,
    };
    match node {
        Value::Table(t) if rest.is_empty() => {
            if wildcard && !t.contains_key(*head) {
                0
            } else {
                t.insert(head.to_string(), value.clone());
                1
            }
        }
        Value::Table(t) => match t.get_mut(*head) {
            Some(child) => set_path(child, rest, value, wildcard),
            // Optional sub-tables serialize as absent; create them.
            None if !wildcard => {
                let mut child = Value::Table(Default::default());
                let n = set_path(&mut child, rest, value, wildcard);
                t.insert(head.to_string(), child);
                n
            }
            None => 0,
        },
        Value::Array(items) => {
            if rest.is_empty() {
                return 0;
            }
            let any = *head == "*";
            items
                .iter_mut()
                .filter(|item| any || selects(item, head))
                .map(|item| set_path(item, rest, value, true))
                .sum()
        }
        _ => 0,
    }
}

fn selects(item: &Value, selector: &str) -> bool {
    match (item.get("id"), item.get("name")) {
        (Some(Value::Integer(id)), _) => selector.parse::<i64>() == Ok(*id),
        (_, Some(Value::String(name))) => name == selector,
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::DetectorConfig;
    use crate::simulator::ScenarioKind;

    fn base() -> ExperimentConfig {
        ExperimentConfig {
            scenarios: Scenarios::List(scenario_catalog(100)),
            ..Default::default()
        }
    }

    #[test]
    fn sets_optional_simulator_key() {
        let cfg = apply_sweep(&base(), "simulator.target_kl", &Value::Float(0.5)).unwrap();
        assert_eq!(cfg.simulator.target_kl, Some(0.5));
    }

    #[test]
    fn k_touches_only_knn_detectors() {
        let b = base();
        let cfg = apply_sweep(&b, "detectors.*.k", &Value::Integer(10)).unwrap();
        for (before, after) in b.detectors.iter().zip(&cfg.detectors) {
            match after.knn_k() {
                Some(k) => assert_eq!(k, 10),
                None => assert_eq!(before, after),
            }
        }
        let only_df = apply_sweep(&b, "detectors.df.k", &Value::Integer(2)).unwrap();
        assert_eq!(
            only_df
                .detectors
                .iter()
                .filter_map(DetectorConfig::knn_k)
                .collect::<Vec<_>>(),
            vec![5, 2]
        );
    }

    #[test]
    fn slope_touches_only_emergent_scenarios() {
        let cfg = apply_sweep(&base(), "scenarios.*.slope", &Value::Float(7.0)).unwrap();
        let Scenarios::List(list) = &cfg.scenarios else {
            panic!()
        };
        let slopes: Vec<f64> = list
            .iter()
            .filter_map(|s| match s.kind {
                ScenarioKind::Emergent { slope, .. } => Some(slope),
                _ => None,
            })
            .collect();
        assert_eq!(slopes, vec![7.0; 3]);
        assert_eq!(list[0], scenario_catalog(100)[0]);
        let one = apply_sweep(&base(), "scenarios.6.slope", &Value::Float(7.0)).unwrap();
        let Scenarios::List(list) = &one.scenarios else {
            panic!()
        };
        assert_eq!(list[3], scenario_catalog(100)[3]);
    }

    #[test]
    fn unresolvable_paths_are_config_errors() {
        let b = base();
        for bad in [
            "simulator.nope",
            "detectors.*.nope",
            "nothing",
            "a..b",
            "scenarios.42.slope",
        ] {
            assert!(
                matches!(
                    apply_sweep(&b, bad, &Value::Integer(1)),
                    Err(BenchError::Config(_))
                ),
                "{bad}"
            );
        }
        // Right key, wrong type.
        assert!(apply_sweep(&b, "simulator.vocab_size", &Value::String("x".into())).is_err());
    }

    #[test]
    fn presets() {
        let b = ExperimentConfig::default();
        let kl = Preset::Kl.apply(&b);
        assert_eq!(kl.variants().unwrap().len(), 6);
        let slope = Preset::Slope.apply(&b);
        let kinds: Vec<_> = slope.detectors.iter().map(|d| d.kind()).collect();
        assert_eq!(kinds, vec![DetectorKind::Olda, DetectorKind::Topicsketch]);
        for v in slope.variants().unwrap() {
            assert_eq!(v.config.scenarios.resolve(100).unwrap().len(), 1);
        }
        assert_eq!(Preset::K.apply(&b).variants().unwrap().len(), 3);
        assert!("x".parse::<Preset>().is_err());
    }
}
