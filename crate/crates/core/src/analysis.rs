//! Workload-sensitivity (phi), bootstrap tuning simulation, variant transfer ranks and cost estimates.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::MetricDirection;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::rulesets::RulesetConfig;
use crate::stats;

/// Validation values per (point, workload); `None` marks a failed trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationTable {
    workloads: Vec<String>,
    directions: Vec<MetricDirection>,
    points: Vec<String>,
    /// Row-major by point.
    values: Vec<Option<f64>>,
}

impl ValidationTable {
    pub fn new(
        workloads: Vec<(String, MetricDirection)>,
        points: Vec<String>,
        values: Vec<Option<f64>>,
    ) -> Result<Self> {
        if values.len() != workloads.len() * points.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} points x {} workloads",
                values.len(),
                points.len(),
                workloads.len()
            )));
        }
        let (workloads, directions) = workloads.into_iter().unzip();
        Ok(ValidationTable {
            workloads,
            directions,
            points,
            values,
        })
    }

    pub fn workloads(&self) -> &[String] {
        &self.workloads
    }

    pub fn directions(&self) -> &[MetricDirection] {
        &self.directions
    }

    pub fn points(&self) -> &[String] {
        &self.points
    }

    pub fn get(&self, point: usize, workload: usize) -> Option<f64> {
        self.values[point * self.workloads.len() + workload]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiResult {
    /// Worst relative degradation of each point; infinite for points with a missing value.
    pub per_point: Vec<f64>,
    pub phi: f64,
    pub best_point: String,
    /// Relative degradation of the best point on each workload.
    pub per_workload: Vec<f64>,
}

/// Best achievable worst-case relative degradation from sharing one point across workloads.
pub fn phi_metric(table: &ValidationTable) -> Result<PhiResult> {
    let n_points = table.points.len();
    let mut best = Vec::with_capacity(table.workloads.len());
    for (w, id) in table.workloads.iter().enumerate() {
        let dir = table.directions[w];
        let b = (0..n_points)
            .filter_map(|p| table.get(p, w))
            .reduce(|a, b| dir.best(a, b))
            .ok_or_else(|| Error::EmptyWorkloadColumn(id.clone()))?;
        if b == 0.0 {
            return Err(Error::ZeroBestValue(id.clone()));
        }
        best.push(b);
    }
    let degradation = |p: usize, w: usize| match table.get(p, w) {
        Some(v) => (v - best[w]).abs() / best[w].abs(),
        None => f64::INFINITY,
    };
    let per_point: Vec<f64> = (0..n_points)
        .map(|p| (0..best.len()).map(|w| degradation(p, w)).fold(0.0, f64::max))
        .collect();
    let mut arg: Option<usize> = None;
    for (p, &v) in per_point.iter().enumerate() {
        if v.is_finite() && arg.is_none_or(|a| v < per_point[a]) {
            arg = Some(p);
        }
    }
    let h = arg.ok_or(Error::NoUsablePoint)?;
    Ok(PhiResult {
        phi: per_point[h],
        best_point: table.points[h].clone(),
        per_workload: (0..best.len()).map(|w| degradation(h, w)).collect(),
        per_point,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningSummary {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

/// Bootstrap of best-of-`budget` tuning: each replica draws `budget` values
/// with replacement and keeps the best. Replica `i` uses stream `i` of a
/// ChaCha generator seeded with `seed`, so results do not depend on `exec`.
pub fn simulate_tuning(
    pool: &[f64],
    budget: usize,
    n_sims: usize,
    seed: u64,
    direction: MetricDirection,
    exec: Execution,
) -> Result<TuningSummary> {
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    for (field, v) in [("budget", budget), ("n_sims", n_sims)] {
        if v == 0 {
            return Err(Error::InvalidValue {
                field: field.into(),
                reason: "must be >= 1".into(),
            });
        }
    }
    let mut bests = exec.map_range(n_sims, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        (0..budget)
            .map(|_| pool[rng.random_range(0..pool.len())])
            .reduce(|a, b| direction.best(a, b))
            .unwrap_or(pool[0])
    });
    bests.sort_by(f64::total_cmp);
    Ok(TuningSummary {
        median: stats::quantile_sorted(&bests, 0.5)?,
        q1: stats::quantile_sorted(&bests, 0.25)?,
        q3: stats::quantile_sorted(&bests, 0.75)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferRanks {
    pub base_to_variant: usize,
    pub variant_to_base: usize,
    pub min: usize,
}

/// Number of points strictly better than `point` in `values`.
pub fn rank(values: &BTreeMap<String, f64>, point: &str, direction: MetricDirection) -> Option<usize> {
    let v = *values.get(point)?;
    Some(values.values().filter(|&&x| direction.is_better(x, v)).count())
}

fn argbest(values: &BTreeMap<String, f64>, direction: MetricDirection) -> Option<&str> {
    let mut best: Option<(&str, f64)> = None;
    for (id, &v) in values {
        if best.is_none_or(|(_, b)| direction.is_better(v, b)) {
            best = Some((id, v));
        }
    }
    best.map(|(id, _)| id)
}

/// How well each workload's optimum transfers to the other.
pub fn transfer_ranks(
    base: &BTreeMap<String, f64>,
    variant: &BTreeMap<String, f64>,
    direction: MetricDirection,
) -> Result<TransferRanks> {
    if !base.keys().eq(variant.keys()) {
        let a: BTreeSet<_> = base.keys().collect();
        let b: BTreeSet<_> = variant.keys().collect();
        let diff: Vec<_> = a.symmetric_difference(&b).take(5).map(|s| s.as_str()).collect();
        return Err(Error::MismatchedPointSets(diff.join(", ")));
    }
    let (Some(hb), Some(hv)) = (argbest(base, direction), argbest(variant, direction)) else {
        return Err(Error::EmptyInput);
    };
    let base_to_variant = rank(variant, hb, direction).unwrap_or(0);
    let variant_to_base = rank(base, hv, direction).unwrap_or(0);
    Ok(TransferRanks {
        base_to_variant,
        variant_to_base,
        min: base_to_variant.min(variant_to_base),
    })
}

/// Compute needed to run the benchmark, in hours.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub one_hyperparameter: f64,
    pub scoring: f64,
    /// Only defined for external tuning.
    pub tuning: Option<f64>,
}

pub fn estimate_costs(
    budgets: &[(String, f64)],
    ruleset: &RulesetConfig,
    include_heldout: bool,
    subset: Option<&[String]>,
) -> Result<CostEstimate> {
    for (id, b) in budgets {
        if !(*b > 0.0 && b.is_finite()) {
            return Err(Error::NonPositiveBudget {
                field: format!("workloads.{id}.max_runtime"),
                value: *b,
            });
        }
    }
    let seconds: f64 = match subset {
        None => budgets.iter().map(|(_, b)| b).sum(),
        Some(ids) => ids
            .iter()
            .map(|id| {
                budgets
                    .iter()
                    .find(|(w, _)| w == id)
                    .map(|(_, b)| *b)
                    .ok_or_else(|| Error::UnknownWorkloadInSubset(id.clone()))
            })
            .sum::<Result<f64>>()?,
    };
    let heldout = if include_heldout { 2.0 } else { 1.0 };
    let one = seconds * heldout * ruleset.budget_multiplier() / 3600.0;
    let scoring = one * ruleset.studies() as f64;
    let tuning = match ruleset {
        RulesetConfig::External { trials_per_study, .. } => Some(scoring * *trials_per_study as f64),
        RulesetConfig::SelfTuning { .. } => None,
    };
    Ok(CostEstimate {
        one_hyperparameter: one,
        scoring,
        tuning,
    })
}
