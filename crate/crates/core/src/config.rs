//! Benchmark configuration: workloads, ruleset, `r_max` and per-submission search spaces.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{WorkloadKind, WorkloadSpec};
use crate::error::{Error, Result};
use crate::rulesets::RulesetConfig;
use crate::searchspace::SearchSpace;

pub const DEFAULT_R_MAX: f64 = 4.0;

fn default_r_max() -> f64 {
    DEFAULT_R_MAX
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub workloads: Vec<WorkloadSpec>,
    #[serde(default)]
    pub ruleset: RulesetConfig,
    #[serde(default = "default_r_max")]
    pub r_max: f64,
    /// Keyed by submission id.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub search_spaces: BTreeMap<String, SearchSpace>,
}

impl BenchmarkConfig {
    pub fn new(workloads: Vec<WorkloadSpec>, ruleset: RulesetConfig) -> Self {
        BenchmarkConfig {
            workloads,
            ruleset,
            r_max: DEFAULT_R_MAX,
            search_spaces: BTreeMap::new(),
        }
    }

    /// Parses and validates a TOML document.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: BenchmarkConfig =
            toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        validate_benchmark_config(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        BenchmarkConfig::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::ConfigParse(e.to_string()))
    }

    pub fn workload(&self, id: &str) -> Option<&WorkloadSpec> {
        self.workloads.iter().find(|w| w.id == id)
    }

    pub fn fixed_workloads(&self) -> impl Iterator<Item = &WorkloadSpec> {
        self.workloads.iter().filter(|w| w.is_fixed())
    }

    pub fn heldout_workloads(&self) -> impl Iterator<Item = &WorkloadSpec> {
        self.workloads.iter().filter(|w| !w.is_fixed())
    }

    /// Held-out id to fixed id.
    pub fn linkage(&self) -> BTreeMap<String, String> {
        self.heldout_workloads()
            .filter_map(|w| w.base().map(|b| (w.id.clone(), b.to_owned())))
            .collect()
    }
}

/// Checks every workload, linkage, ruleset and search-space invariant.
pub fn validate_benchmark_config(config: BenchmarkConfig) -> Result<BenchmarkConfig> {
    let mut by_id: HashMap<&str, &WorkloadSpec> = HashMap::new();
    for w in &config.workloads {
        if by_id.insert(&w.id, w).is_some() {
            return Err(Error::DuplicateWorkloadId(w.id.clone()));
        }
    }
    for w in &config.workloads {
        if !(w.max_runtime > 0.0 && w.max_runtime.is_finite()) {
            return Err(Error::NonPositiveBudget {
                field: format!("workloads.{}.max_runtime", w.id),
                value: w.max_runtime,
            });
        }
        if w.max_steps == Some(0) {
            return Err(Error::NonPositiveBudget {
                field: format!("workloads.{}.max_steps", w.id),
                value: 0.0,
            });
        }
        for (field, v) in [("validation_target", w.validation_target), ("test_target", w.test_target)] {
            if !v.is_finite() {
                return Err(Error::InvalidValue {
                    field: format!("workloads.{}.{field}", w.id),
                    reason: format!("must be finite, got {v}"),
                });
            }
        }
    }
    let mut heldout_of: HashMap<&str, &str> = HashMap::new();
    for w in &config.workloads {
        let WorkloadKind::HeldOut { base } = &w.kind else {
            continue;
        };
        if !by_id.get(base.as_str()).is_some_and(|b| b.is_fixed()) {
            return Err(Error::DanglingHeldOutBase {
                heldout: w.id.clone(),
                base: base.clone(),
            });
        }
        if let Some(first) = heldout_of.insert(base, &w.id) {
            return Err(Error::DuplicateHeldOut {
                base: base.clone(),
                first: first.to_owned(),
                second: w.id.clone(),
            });
        }
    }
    config.ruleset.validate()?;
    if !(config.r_max > 1.0 && config.r_max.is_finite()) {
        return Err(Error::InvalidRMax(config.r_max));
    }
    for (name, space) in &config.search_spaces {
        space.validate(name)?;
    }
    Ok(config)
}
