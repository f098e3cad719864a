//! Target setting from rerun statistics.

use serde::{Deserialize, Serialize};

use crate::domain::{Clock, ExtendedTime, MetricDirection, TrialKey, TrialRecord, TrialStatus};
use crate::error::{Error, Result};
use crate::stats;

/// Fraction of the maximum runtime granted to target-setting searches.
pub const TARGET_SETTING_FRACTION: f64 = 0.75;

/// Best validation and test values of one seeded rerun.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RerunOutcome {
    pub seed_index: u32,
    pub best_validation: f64,
    pub best_test: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetPair {
    pub validation_target: f64,
    pub test_target: f64,
}

/// The completed trial with the best running validation value, over all events.
pub fn select_best_config(trials: &[TrialRecord], direction: MetricDirection) -> Result<(TrialKey, f64)> {
    select_best_config_within(trials, direction, Clock::Runtime, ExtendedTime::Infinite)
}

/// As [`select_best_config`], ignoring events past `budget` on `clock`.
/// Equal values go to the lowest (study, trial) index.
pub fn select_best_config_within(
    trials: &[TrialRecord],
    direction: MetricDirection,
    clock: Clock,
    budget: ExtendedTime,
) -> Result<(TrialKey, f64)> {
    let mut best: Option<(&TrialKey, f64)> = None;
    for trial in trials.iter().filter(|t| t.status == TrialStatus::Completed) {
        let Some(value) = best_in_budget(trial, direction, clock, budget, |e| Some(e.validation)) else {
            continue;
        };
        let replace = match best {
            None => true,
            Some((key, v)) => {
                direction.is_better(value, v)
                    || (value == v && (trial.key.study, trial.key.trial) < (key.study, key.trial))
            }
        };
        if replace {
            best = Some((&trial.key, value));
        }
    }
    best.map(|(k, v)| (k.clone(), v)).ok_or(Error::NoCompletedTrials)
}

fn best_in_budget(
    trial: &TrialRecord,
    direction: MetricDirection,
    clock: Clock,
    budget: ExtendedTime,
    metric: impl Fn(&crate::domain::EvalEvent) -> Option<f64>,
) -> Option<f64> {
    trial
        .events
        .iter()
        .filter(|e| ExtendedTime::Finite(e.clock(clock)) <= budget)
        .filter_map(metric)
        .reduce(|a, b| direction.best(a, b))
}

/// Summarizes a rerun: best validation and best test value among in-budget events.
/// Returns `None` when the rerun has no usable event.
pub fn rerun_outcome(
    trial: &TrialRecord,
    seed_index: u32,
    direction: MetricDirection,
    clock: Clock,
    budget: ExtendedTime,
) -> Option<RerunOutcome> {
    if trial.status != TrialStatus::Completed {
        return None;
    }
    Some(RerunOutcome {
        seed_index,
        best_validation: best_in_budget(trial, direction, clock, budget, |e| Some(e.validation))?,
        best_test: best_in_budget(trial, direction, clock, budget, |e| e.test)?,
    })
}

/// Median of the reruns' best validation values.
pub fn validation_target(reruns: &[RerunOutcome]) -> Result<f64> {
    if reruns.is_empty() {
        return Err(Error::EmptyReruns);
    }
    let values: Vec<f64> = reruns.iter().map(|r| r.best_validation).collect();
    stats::median(&values)
}

/// Worst best-test value among reruns whose validation meets the target.
pub fn test_target(reruns: &[RerunOutcome], validation_target: f64, direction: MetricDirection) -> Result<f64> {
    reruns
        .iter()
        .filter(|r| direction.meets(r.best_validation, validation_target))
        .map(|r| r.best_test)
        .reduce(|a, b| direction.worst(a, b))
        .ok_or(Error::NoQualifyingReruns(validation_target))
}

pub fn set_targets(reruns: &[RerunOutcome], direction: MetricDirection) -> Result<TargetPair> {
    let validation_target = validation_target(reruns)?;
    Ok(TargetPair {
        validation_target,
        test_target: test_target(reruns, validation_target, direction)?,
    })
}

pub fn target_setting_budget(max_runtime: f64) -> Result<f64> {
    if !(max_runtime > 0.0 && max_runtime.is_finite()) {
        return Err(Error::NonPositiveBudget {
            field: "max_runtime".into(),
            value: max_runtime,
        });
    }
    Ok(TARGET_SETTING_FRACTION * max_runtime)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::EvalEvent;
    use proptest::prelude::*;
    use MetricDirection::{Maximize, Minimize};

    fn reruns(vals: &[f64], tests: &[f64]) -> Vec<RerunOutcome> {
        vals.iter()
            .zip(tests)
            .enumerate()
            .map(|(i, (&v, &t))| RerunOutcome {
                seed_index: i as u32,
                best_validation: v,
                best_test: t,
            })
            .collect()
    }

    fn trial(index: u32, vals: &[f64]) -> TrialRecord {
        let events = vals
            .iter()
            .enumerate()
            .map(|(i, &v)| EvalEvent {
                step: i as u64 + 1,
                runtime: (i + 1) as f64 * 10.0,
                validation: v,
                test: Some(v + 0.1),
            })
            .collect();
        let key = TrialKey {
            submission: "target_setting".into(),
            workload: "resnet".into(),
            study: 0,
            trial: index,
        };
        TrialRecord::new(key, Default::default(), events, TrialStatus::Completed).unwrap()
    }

    #[test]
    fn argmin_over_two_hundred() {
        let trials: Vec<_> = (0..200)
            .map(|i| {
                let best = if i == 37 { 0.22534 } else { 0.2260 + i as f64 * 1e-5 };
                trial(i, &[0.5, best, 0.3])
            })
            .collect();
        let oracle = (0..200)
            .min_by(|&a, &b| {
                let f = |i: usize| trials[i].events.iter().map(|e| e.validation).fold(f64::INFINITY, f64::min);
                f(a).total_cmp(&f(b))
            })
            .unwrap();
        let (key, value) = select_best_config(&trials, Minimize).unwrap();
        assert_eq!(key.trial, 37);
        assert_eq!(key.trial as usize, oracle);
        assert_eq!(value, 0.22534);
    }

    #[test]
    fn single_and_tie() {
        assert_eq!(select_best_config(&[trial(4, &[0.3])], Minimize).unwrap().0.trial, 4);
        let t = [trial(2, &[0.3]), trial(1, &[0.3])];
        assert_eq!(select_best_config(&t, Minimize).unwrap().0.trial, 1);
        let mut failed = trial(0, &[0.1]);
        failed.status = TrialStatus::Diverged;
        assert!(matches!(select_best_config(&[failed], Minimize), Err(Error::NoCompletedTrials)));
    }

    #[test]
    fn budget_limits_selection() {
        let t = [trial(0, &[0.5, 0.1]), trial(1, &[0.3, 0.3])];
        let (key, v) = select_best_config_within(&t, Minimize, Clock::Runtime, ExtendedTime::Finite(10.0)).unwrap();
        assert_eq!((key.trial, v), (1, 0.3));
    }

    #[test]
    fn medians_and_test_targets() {
        assert_eq!(validation_target(&reruns(&[0.4], &[0.5])).unwrap(), 0.4);
        assert!(matches!(validation_target(&[]), Err(Error::EmptyReruns)));
        let r = reruns(&[0.1, 0.1, 0.1, 0.9], &[0.340, 0.344, 0.348, 0.2]);
        assert_eq!(test_target(&r, 0.1, Minimize).unwrap(), 0.348);
        let r = reruns(&[31.0, 31.0, 31.0, 1.0], &[30.65, 30.72, 30.99, 40.0]);
        assert_eq!(test_target(&r, 30.8, Maximize).unwrap(), 30.65);
        assert!(matches!(test_target(&r, 99.0, Maximize), Err(Error::NoQualifyingReruns(_))));
    }

    #[test]
    fn budget_fraction() {
        assert_eq!(target_setting_budget(63_008.0).unwrap(), 47_256.0);
        assert_eq!(target_setting_budget(7_703.0).unwrap(), 5_777.25);
        assert!(target_setting_budget(0.0).is_err());
    }

    #[test]
    fn ten_of_twenty_qualify() {
        // distinct validations, so exactly ten sit at or below the even-count median
        let vals: Vec<f64> = (0..20).map(|i| 0.2 + i as f64 * 0.001).collect();
        let tests: Vec<f64> = (0..20).map(|i| 0.3 + ((i * 7) % 20) as f64 * 0.002).collect();
        let r = reruns(&vals, &tests);
        let vt = validation_target(&r).unwrap();
        let qualifying: Vec<_> = r.iter().filter(|x| x.best_validation <= vt).collect();
        assert_eq!(qualifying.len(), 10);
        let oracle = qualifying.iter().map(|x| x.best_test).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(test_target(&r, vt, Minimize).unwrap(), oracle);
    }

    proptest! {
        #[test]
        fn median_properties(vals in prop::collection::vec(0.0f64..1.0, 1..30), k in 0usize..30) {
            let tests = vec![0.5; vals.len()];
            let r = reruns(&vals, &tests);
            let vt = validation_target(&r).unwrap();
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(lo <= vt && vt <= hi);
            let mut rotated = r.clone();
            let n = rotated.len();
            rotated.rotate_left(k % n);
            prop_assert_eq!(validation_target(&rotated).unwrap(), vt);
            let meeting = vals.iter().filter(|&&v| v <= vt).count();
            prop_assert!(2 * meeting >= vals.len());
        }

        #[test]
        fn relaxing_target_only_worsens(vals in prop::collection::vec(0.0f64..1.0, 1..20), tests in prop::collection::vec(0.0f64..1.0, 20), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let r = reruns(&vals, &tests);
            let (strict, relaxed) = if a <= b { (a, b) } else { (b, a) };
            if let Ok(s) = test_target(&r, strict, Minimize) {
                prop_assert!(test_target(&r, relaxed, Minimize).unwrap() >= s);
            }
        }
    }
}
