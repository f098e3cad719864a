//! Tuning rulesets: per-study scoring and the median-over-studies aggregation.

use std::borrow::Borrow;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::curves::{time_to_target, MetricKind, TargetQuery};
use crate::domain::{Clock, ExtendedTime, ScoreMatrix, TrialRecord, WorkloadSpec};
use crate::error::{Error, Result};
use crate::exec::Execution;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RulesetConfig {
    External { studies: usize, trials_per_study: usize },
    SelfTuning { studies: usize, budget_multiplier: f64 },
}

impl Default for RulesetConfig {
    fn default() -> Self {
        RulesetConfig::External {
            studies: 5,
            trials_per_study: 20,
        }
    }
}

impl RulesetConfig {
    pub fn self_tuning() -> Self {
        RulesetConfig::SelfTuning {
            studies: 5,
            budget_multiplier: 3.0,
        }
    }

    pub fn studies(&self) -> usize {
        match *self {
            RulesetConfig::External { studies, .. } | RulesetConfig::SelfTuning { studies, .. } => studies,
        }
    }

    pub fn trials_per_study(&self) -> usize {
        match *self {
            RulesetConfig::External { trials_per_study, .. } => trials_per_study,
            RulesetConfig::SelfTuning { .. } => 1,
        }
    }

    pub fn budget_multiplier(&self) -> f64 {
        match *self {
            RulesetConfig::External { .. } => 1.0,
            RulesetConfig::SelfTuning { budget_multiplier, .. } => budget_multiplier,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let studies = self.studies();
        if studies.is_multiple_of(2) {
            return Err(Error::InvalidRuleset(format!(
                "studies must be odd and >= 1, got {studies}"
            )));
        }
        match *self {
            RulesetConfig::External { trials_per_study: 0, .. } => Err(
                Error::InvalidRuleset("trials_per_study must be >= 1".into()),
            ),
            RulesetConfig::SelfTuning { budget_multiplier, .. }
                if !(budget_multiplier >= 1.0 && budget_multiplier.is_finite()) =>
            {
                Err(Error::InvalidRuleset(format!(
                    "budget_multiplier must be >= 1, got {budget_multiplier}"
                )))
            }
            _ => Ok(()),
        }
    }
}

fn query(workload: &WorkloadSpec, metric: MetricKind, clock: Clock, budget: ExtendedTime) -> TargetQuery {
    TargetQuery {
        target: match metric {
            MetricKind::Validation => workload.validation_target,
            MetricKind::Test => workload.test_target,
        },
        direction: workload.direction,
        metric,
        budget,
        clock,
    }
}

/// External tuning on the runtime clock with the workload's own budget.
pub fn score_study_external(trials: &[TrialRecord], workload: &WorkloadSpec) -> Result<ExtendedTime> {
    score_study_external_with(trials, workload, Clock::Runtime, workload.budget(Clock::Runtime, 1.0))
}

/// Selects the trial that reaches the validation target first and returns its
/// time to the test target. Equal validation times go to the lowest trial index.
pub fn score_study_external_with<T: Borrow<TrialRecord>>(
    trials: &[T],
    workload: &WorkloadSpec,
    clock: Clock,
    budget: ExtendedTime,
) -> Result<ExtendedTime> {
    if let Some(first) = trials.first().map(Borrow::borrow) {
        let k = &first.key;
        if let Some(other) = trials.iter().map(Borrow::borrow).find(|t| {
            t.key.submission != k.submission || t.key.workload != k.workload || t.key.study != k.study
        }) {
            return Err(Error::MixedStudies(format!("{} and {}", first.key, other.key)));
        }
    }
    let val_query = query(workload, MetricKind::Validation, clock, budget);
    let mut best: Option<(ExtendedTime, u32, &TrialRecord)> = None;
    for trial in trials.iter().map(Borrow::borrow) {
        let t_val = time_to_target(trial, &val_query)?;
        if !t_val.is_finite() {
            continue;
        }
        let better = match best {
            None => true,
            Some((bt, bi, _)) => (t_val, trial.key.trial) < (bt, bi),
        };
        if better {
            best = Some((t_val, trial.key.trial, trial));
        }
    }
    match best {
        None => Ok(ExtendedTime::Infinite),
        Some((_, _, trial)) => time_to_target(trial, &query(workload, MetricKind::Test, clock, budget)),
    }
}

/// Self-tuning: the single trial's time to the test target under a multiplied budget.
pub fn score_study_selftuning(trial: &TrialRecord, workload: &WorkloadSpec, multiplier: f64) -> Result<ExtendedTime> {
    score_study_selftuning_with(trial, workload, Clock::Runtime, multiplier)
}

pub fn score_study_selftuning_with(
    trial: &TrialRecord,
    workload: &WorkloadSpec,
    clock: Clock,
    multiplier: f64,
) -> Result<ExtendedTime> {
    let budget = workload.budget(clock, multiplier);
    time_to_target(trial, &query(workload, MetricKind::Test, clock, budget))
}

/// Median of an odd number of study scores, with `Infinite` sorting last.
pub fn score_workload(study_scores: &[ExtendedTime]) -> Result<ExtendedTime> {
    if study_scores.len().is_multiple_of(2) {
        return Err(Error::EvenStudyCount(study_scores.len()));
    }
    let mut sorted = study_scores.to_vec();
    sorted.sort();
    Ok(sorted[sorted.len() / 2])
}

/// How logs are turned into per-workload times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoringOptions {
    pub ruleset: RulesetConfig,
    pub clock: Clock,
    /// Overrides the ruleset's budget multiplier when set.
    pub budget_multiplier: Option<f64>,
}

impl ScoringOptions {
    pub fn new(ruleset: RulesetConfig) -> Self {
        ScoringOptions {
            ruleset,
            clock: Clock::Runtime,
            budget_multiplier: None,
        }
    }

    pub fn multiplier(&self) -> f64 {
        self.budget_multiplier.unwrap_or(self.ruleset.budget_multiplier())
    }
}

/// Scores every (submission, workload) pair of `workloads` from the logged trials.
///
/// Submissions are taken from the trials in sorted order unless `submissions`
/// is given. Studies without logged trials count as `Infinite`.
pub fn build_score_matrix(
    workloads: &[&WorkloadSpec],
    submissions: Option<&[String]>,
    trials: &[TrialRecord],
    options: &ScoringOptions,
    exec: Execution,
) -> Result<ScoreMatrix> {
    options.ruleset.validate()?;
    let studies = options.ruleset.studies();
    let mut groups: BTreeMap<(&str, &str), Vec<Vec<&TrialRecord>>> = BTreeMap::new();
    for t in trials {
        let k = &t.key;
        if !workloads.iter().any(|w| w.id == k.workload) {
            continue;
        }
        if k.study as usize >= studies {
            return Err(Error::InvalidValue {
                field: k.to_string(),
                reason: format!("study index outside 0..{studies}"),
            });
        }
        groups
            .entry((&k.submission, &k.workload))
            .or_insert_with(|| vec![Vec::new(); studies])[k.study as usize]
            .push(t);
    }
    let submissions: Vec<String> = match submissions {
        Some(s) => s.to_vec(),
        None => {
            let mut ids: Vec<String> = trials.iter().map(|t| t.key.submission.clone()).collect();
            ids.sort();
            ids.dedup();
            ids
        }
    };
    let cells: Vec<(usize, usize)> = (0..submissions.len())
        .flat_map(|s| (0..workloads.len()).map(move |w| (s, w)))
        .collect();
    let empty = vec![Vec::new(); studies];
    let times = exec.map(&cells, |&(s, w)| {
        let workload = workloads[w];
        let per_study = groups
            .get(&(submissions[s].as_str(), workload.id.as_str()))
            .unwrap_or(&empty);
        let scores = per_study
            .iter()
            .enumerate()
            .map(|(study, trials)| score_one_study(trials, workload, study as u32, options))
            .collect::<Result<Vec<_>>>()?;
        score_workload(&scores)
    });
    let times = times.into_iter().collect::<Result<Vec<_>>>()?;
    ScoreMatrix::new(
        submissions,
        workloads.iter().map(|w| w.id.clone()).collect(),
        times,
    )
}

fn score_one_study(
    trials: &[&TrialRecord],
    workload: &WorkloadSpec,
    study: u32,
    options: &ScoringOptions,
) -> Result<ExtendedTime> {
    match options.ruleset {
        RulesetConfig::External { trials_per_study, .. } => {
            if trials.len() > trials_per_study {
                return Err(Error::InvalidValue {
                    field: format!("{}/{}/study{study}", trials[0].key.submission, workload.id),
                    reason: format!("{} trials exceed the limit of {trials_per_study}", trials.len()),
                });
            }
            let budget = workload.budget(options.clock, options.multiplier());
            score_study_external_with(trials, workload, options.clock, budget)
        }
        RulesetConfig::SelfTuning { .. } => match trials {
            [] => Ok(ExtendedTime::Infinite),
            [trial] => score_study_selftuning_with(trial, workload, options.clock, options.multiplier()),
            many => Err(Error::MultipleSelfTuningTrials {
                submission: many[0].key.submission.clone(),
                workload: workload.id.clone(),
                study,
                count: many.len(),
            }),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{EvalEvent, MetricDirection, TrialKey, TrialStatus};
    use proptest::prelude::*;

    fn workload() -> WorkloadSpec {
        WorkloadSpec::fixed("conformer", MetricDirection::Minimize, 0.5, 0.5, 101_780.0)
    }

    fn key(study: u32, trial: u32) -> TrialKey {
        TrialKey {
            submission: "s".into(),
            workload: "conformer".into(),
            study,
            trial,
        }
    }

    /// A trial that reaches validation at `t_val` and test at `t_test` seconds.
    fn trial(index: u32, t_val: f64, t_test: f64) -> TrialRecord {
        let mut xs: Vec<f64> = [t_val, t_test, 1.0].into_iter().filter(|x| x.is_finite()).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let events = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| EvalEvent {
                step: i as u64 + 1,
                runtime: x,
                validation: if x >= t_val { 0.4 } else { 0.9 },
                test: Some(if x >= t_test { 0.4 } else { 0.9 }),
            })
            .collect();
        TrialRecord::new(key(0, index), Default::default(), events, TrialStatus::Completed).unwrap()
    }

    fn fin(x: f64) -> ExtendedTime {
        ExtendedTime::Finite(x)
    }

    #[test]
    fn selects_by_validation_scores_by_test() {
        let w = workload();
        let inf = f64::INFINITY;
        let trials = [trial(0, 100.0, 120.0), trial(1, 80.0, 200.0), trial(2, inf, inf)];
        assert_eq!(score_study_external(&trials, &w).unwrap(), fin(200.0));
        assert_eq!(score_study_external(&[trial(0, inf, 5.0)], &w).unwrap(), ExtendedTime::Infinite);
        assert_eq!(score_study_external(&[trial(0, 10.0, inf)], &w).unwrap(), ExtendedTime::Infinite);
    }

    #[test]
    fn tie_goes_to_lowest_index() {
        let w = workload();
        let trials = [trial(3, 50.0, 70.0), trial(1, 50.0, 90.0)];
        assert_eq!(score_study_external(&trials, &w).unwrap(), fin(90.0));
    }

    #[test]
    fn mixed_studies_rejected() {
        let mut b = trial(1, 1.0, 1.0);
        b.key.study = 1;
        let err = score_study_external(&[trial(0, 1.0, 1.0), b], &workload()).unwrap_err();
        assert_eq!(err.kind(), "MixedStudies");
    }

    #[test]
    fn self_tuning_tripled_budget() {
        let w = workload();
        let inf = f64::INFINITY;
        assert_eq!(score_study_selftuning(&trial(0, 1.0, 150_000.0), &w, 3.0).unwrap(), fin(150_000.0));
        assert_eq!(score_study_selftuning(&trial(0, 1.0, 310_000.0), &w, 3.0).unwrap(), ExtendedTime::Infinite);
        assert_eq!(score_study_selftuning(&trial(0, 1.0, inf), &w, 3.0).unwrap(), ExtendedTime::Infinite);
    }

    #[test]
    fn median_of_studies() {
        let inf = ExtendedTime::Infinite;
        let s = |v: &[ExtendedTime]| score_workload(v).unwrap();
        assert_eq!(s(&[fin(100.0), fin(120.0), fin(90.0), inf, fin(110.0)]), fin(110.0));
        assert_eq!(s(&[inf, inf, inf, fin(50.0), fin(60.0)]), inf);
        assert_eq!(s(&[fin(7.0); 5]), fin(7.0));
        assert!(matches!(score_workload(&[fin(1.0); 4]), Err(Error::EvenStudyCount(4))));
        assert!(matches!(score_workload(&[]), Err(Error::EvenStudyCount(0))));
    }

    #[test]
    fn ruleset_validation() {
        assert!(RulesetConfig::default().validate().is_ok());
        assert!(RulesetConfig::self_tuning().validate().is_ok());
        assert!(RulesetConfig::External { studies: 2, trials_per_study: 1 }.validate().is_err());
        assert!(RulesetConfig::External { studies: 1, trials_per_study: 0 }.validate().is_err());
        assert!(RulesetConfig::SelfTuning { studies: 1, budget_multiplier: 0.5 }.validate().is_err());
    }

    #[test]
    fn matrix_counts_missing_studies_as_infinite() {
        let w = workload();
        let options = ScoringOptions::new(RulesetConfig::External { studies: 3, trials_per_study: 2 });
        let mut trials = vec![trial(0, 10.0, 20.0)];
        let mut t = trial(0, 12.0, 30.0);
        t.key.study = 1;
        trials.push(t);
        let m = build_score_matrix(&[&w], None, &trials, &options, Execution::Sequential).unwrap();
        assert_eq!(m.get(0, 0), fin(30.0));
        trials.pop();
        let m = build_score_matrix(&[&w], None, &trials, &options, Execution::Sequential).unwrap();
        assert_eq!(m.get(0, 0), ExtendedTime::Infinite);
    }

    #[test]
    fn self_tuning_rejects_extra_trials() {
        let w = workload();
        let options = ScoringOptions::new(RulesetConfig::SelfTuning { studies: 1, budget_multiplier: 3.0 });
        let trials = [trial(0, 1.0, 1.0), trial(1, 1.0, 1.0)];
        let err = build_score_matrix(&[&w], None, &trials, &options, Execution::Sequential).unwrap_err();
        assert_eq!(err.kind(), "MultipleSelfTuningTrials");
    }

    proptest! {
        #[test]
        fn external_is_permutation_invariant(
            times in prop::collection::vec((prop::option::of(1u32..50), prop::option::of(1u32..50)), 1..8),
            seed in any::<u64>(),
        ) {
            let w = workload();
            let conv = |o: Option<u32>| o.map_or(f64::INFINITY, |x| x as f64 * 10.0);
            let trials: Vec<_> = times.iter().enumerate()
                .map(|(i, &(v, t))| trial(i as u32, conv(v), conv(t))).collect();
            let mut shuffled = trials.clone();
            let n = shuffled.len();
            shuffled.rotate_left((seed as usize) % n);
            prop_assert_eq!(score_study_external(&trials, &w).unwrap(), score_study_external(&shuffled, &w).unwrap());
        }

        #[test]
        fn median_is_permutation_invariant(v in prop::collection::vec(prop::option::of(0u32..100), 1..6usize).prop_filter("odd", |v| v.len() % 2 == 1), k in 0usize..6) {
            let xs: Vec<ExtendedTime> = v.iter().map(|o| o.map_or(ExtendedTime::Infinite, |x| fin(x as f64))).collect();
            let mut ys = xs.clone();
            let n = ys.len();
            ys.rotate_right(k % n);
            prop_assert_eq!(score_workload(&xs).unwrap(), score_workload(&ys).unwrap());
        }
    }
}
