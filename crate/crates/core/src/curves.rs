//! Training-curve utilities: running best, time-to-target, and leader changes.
//!
//! Curves are step functions: between evaluations a series holds its last
//! observed value. Nothing is interpolated.

use crate::domain::{Clock, EvalEvent, ExtendedTime, MetricDirection, TrialRecord, TrialStatus};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSeries {
    points: Vec<(f64, f64)>,
    direction: MetricDirection,
}

impl MetricSeries {
    /// `points` are `(x, y)` pairs with strictly increasing `x`.
    pub fn new(points: Vec<(f64, f64)>, direction: MetricDirection) -> Result<Self> {
        for (i, pair) in points.windows(2).enumerate() {
            if pair[1].0.partial_cmp(&pair[0].0) != Some(std::cmp::Ordering::Greater) {
                return Err(Error::NonIncreasingSeries { index: i + 1 });
            }
        }
        Ok(MetricSeries { points, direction })
    }

    /// Validation series of a trial on the given clock.
    pub fn from_trial(trial: &TrialRecord, clock: Clock, direction: MetricDirection) -> Result<Self> {
        let points = trial
            .events
            .iter()
            .map(|e| (e.clock(clock), e.validation))
            .collect();
        MetricSeries::new(points, direction)
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn direction(&self) -> MetricDirection {
        self.direction
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Step-function value at `x`; `None` before the first point.
    pub fn value_at(&self, x: f64) -> Option<f64> {
        let idx = self.points.partition_point(|&(px, _)| px <= x);
        idx.checked_sub(1).map(|i| self.points[i].1)
    }
}

/// Running extremum of `y` under the series direction.
pub fn best_so_far(series: &MetricSeries) -> Result<MetricSeries> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    let dir = series.direction;
    let mut best = series.points[0].1;
    let points = series
        .points
        .iter()
        .map(|&(x, y)| {
            best = dir.best(best, y);
            (x, best)
        })
        .collect();
    Ok(MetricSeries {
        points,
        direction: dir,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Validation,
    Test,
}

/// Parameters of a time-to-target query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetQuery {
    pub target: f64,
    pub direction: MetricDirection,
    pub metric: MetricKind,
    pub budget: ExtendedTime,
    pub clock: Clock,
}

/// Clock value of the first in-budget evaluation whose metric meets the target.
///
/// Events past the budget are ignored. Diverged and crashed trials never
/// reach a target.
pub fn time_to_target(trial: &TrialRecord, query: &TargetQuery) -> Result<ExtendedTime> {
    if trial.status != TrialStatus::Completed {
        return Ok(ExtendedTime::Infinite);
    }
    let in_budget = |e: &&EvalEvent| ExtendedTime::Finite(e.clock(query.clock)) <= query.budget;
    if query.metric == MetricKind::Test {
        if let Some(e) = trial.events.iter().filter(in_budget).find(|e| e.test.is_none()) {
            return Err(Error::MissingTestMetric {
                trial: trial.key.to_string(),
                step: e.step,
            });
        }
    }
    let hit = trial.events.iter().filter(in_budget).find(|e| {
        let value = match query.metric {
            MetricKind::Validation => e.validation,
            MetricKind::Test => e.test.unwrap_or(f64::NAN),
        };
        query.direction.meets(value, query.target)
    });
    Ok(match hit {
        Some(e) => ExtendedTime::Finite(e.clock(query.clock)),
        None => ExtendedTime::Infinite,
    })
}

/// A change of leader between two curves, located in the half-open interval `(after, at]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub after: f64,
    pub at: f64,
}

/// Every point where `sign(a - b)` flips over the shared x-range.
///
/// Ties do not count as a change; a flip across a run of ties is reported in
/// the interval from the last strictly-signed x to the next one.
pub fn crossings(a: &MetricSeries, b: &MetricSeries) -> Result<Vec<Crossing>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySeries);
    }
    let start = a.points[0].0.max(b.points[0].0);
    let end = a.points[a.len() - 1].0.min(b.points[b.len() - 1].0);
    if start > end {
        return Ok(Vec::new());
    }
    let mut xs: Vec<f64> = a
        .points
        .iter()
        .chain(&b.points)
        .map(|&(x, _)| x)
        .filter(|&x| x >= start && x <= end)
        .collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();

    let mut out = Vec::new();
    let mut last: Option<(f64, f64)> = None; // (x, sign)
    for x in xs {
        let (Some(ya), Some(yb)) = (a.value_at(x), b.value_at(x)) else {
            continue;
        };
        let diff = ya - yb;
        if diff == 0.0 {
            continue;
        }
        let sign = diff.signum();
        if let Some((px, ps)) = last {
            if ps != sign {
                out.push(Crossing { after: px, at: x });
            }
        }
        last = Some((x, sign));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::TrialKey;
    use proptest::prelude::*;

    fn series(ys: &[f64], dir: MetricDirection) -> MetricSeries {
        let pts = ys.iter().enumerate().map(|(i, &y)| (i as f64, y)).collect();
        MetricSeries::new(pts, dir).unwrap()
    }

    fn ys(s: &MetricSeries) -> Vec<f64> {
        s.points().iter().map(|p| p.1).collect()
    }

    fn trial(events: &[(u64, f64, f64)]) -> TrialRecord {
        TrialRecord::new(
            TrialKey {
                submission: "s".into(),
                workload: "resnet".into(),
                study: 0,
                trial: 0,
            },
            Default::default(),
            events
                .iter()
                .map(|&(step, runtime, val)| EvalEvent {
                    step,
                    runtime,
                    validation: val,
                    test: Some(val + 0.1),
                })
                .collect(),
            TrialStatus::Completed,
        )
        .unwrap()
    }

    fn val_query(target: f64, budget: ExtendedTime) -> TargetQuery {
        TargetQuery {
            target,
            direction: MetricDirection::Minimize,
            metric: MetricKind::Validation,
            budget,
            clock: Clock::Runtime,
        }
    }

    #[test]
    fn running_min_and_max() {
        let s = series(&[5.0, 3.0, 4.0, 2.0], MetricDirection::Minimize);
        assert_eq!(ys(&best_so_far(&s).unwrap()), vec![5.0, 3.0, 3.0, 2.0]);
        let s = series(&[1.0, 3.0, 2.0], MetricDirection::Maximize);
        assert_eq!(ys(&best_so_far(&s).unwrap()), vec![1.0, 3.0, 3.0]);
        let s = series(&[9.0, 7.0, 1.0], MetricDirection::Minimize);
        assert_eq!(best_so_far(&s).unwrap(), s);
    }

    #[test]
    fn empty_series_errors() {
        let s = MetricSeries::new(vec![], MetricDirection::Minimize).unwrap();
        assert!(matches!(best_so_far(&s), Err(Error::EmptySeries)));
        assert!(matches!(crossings(&s, &s), Err(Error::EmptySeries)));
    }

    #[test]
    fn non_increasing_x_rejected() {
        let err = MetricSeries::new(vec![(1.0, 0.0), (1.0, 1.0)], MetricDirection::Minimize);
        assert!(matches!(err, Err(Error::NonIncreasingSeries { index: 1 })));
    }

    #[test]
    fn first_qualifying_event_in_budget() {
        let t = trial(&[(100, 1000.0, 0.30), (200, 2000.0, 0.22)]);
        let hit = time_to_target(&t, &val_query(0.2257, ExtendedTime::Finite(63008.0))).unwrap();
        assert_eq!(hit, ExtendedTime::Finite(2000.0));
        let miss = time_to_target(&t, &val_query(0.2257, ExtendedTime::Finite(1500.0))).unwrap();
        assert_eq!(miss, ExtendedTime::Infinite);
    }

    #[test]
    fn exact_target_counts() {
        let t = trial(&[(100, 1000.0, 0.30), (200, 2000.0, 0.2257)]);
        let hit = time_to_target(&t, &val_query(0.2257, ExtendedTime::Infinite)).unwrap();
        assert_eq!(hit, ExtendedTime::Finite(2000.0));
    }

    #[test]
    fn steps_clock_and_test_metric() {
        let t = trial(&[(100, 1000.0, 0.30), (200, 2000.0, 0.20)]);
        let q = TargetQuery {
            target: 0.31,
            direction: MetricDirection::Minimize,
            metric: MetricKind::Test,
            budget: ExtendedTime::Infinite,
            clock: Clock::Steps,
        };
        assert_eq!(time_to_target(&t, &q).unwrap(), ExtendedTime::Finite(200.0));
    }

    #[test]
    fn missing_test_metric_errors() {
        let mut t = trial(&[(100, 1000.0, 0.30), (200, 2000.0, 0.20)]);
        t.events[1].test = None;
        let q = TargetQuery {
            metric: MetricKind::Test,
            ..val_query(0.0, ExtendedTime::Infinite)
        };
        assert!(matches!(
            time_to_target(&t, &q),
            Err(Error::MissingTestMetric { step: 200, .. })
        ));
        // out-of-budget events are ignored entirely
        let q = TargetQuery {
            budget: ExtendedTime::Finite(1500.0),
            ..q
        };
        assert_eq!(time_to_target(&t, &q).unwrap(), ExtendedTime::Infinite);
    }

    #[test]
    fn diverged_trial_never_reaches() {
        let mut t = trial(&[(100, 1000.0, 0.1)]);
        t.status = TrialStatus::Diverged;
        assert_eq!(
            time_to_target(&t, &val_query(0.5, ExtendedTime::Infinite)).unwrap(),
            ExtendedTime::Infinite
        );
    }

    #[test]
    fn single_crossing() {
        let a = MetricSeries::new(vec![(1.0, 2.0), (2.0, 0.0)], MetricDirection::Minimize).unwrap();
        let b = MetricSeries::new(vec![(1.0, 1.0), (2.0, 1.0)], MetricDirection::Minimize).unwrap();
        assert_eq!(
            crossings(&a, &b).unwrap(),
            vec![Crossing {
                after: 1.0,
                at: 2.0
            }]
        );
        assert!(crossings(&a, &a).unwrap().is_empty());
    }

    #[test]
    fn dominance_has_no_crossing() {
        let a = series(&[1.0, 0.5, 0.2], MetricDirection::Minimize);
        let b = series(&[2.0, 1.5, 0.3], MetricDirection::Minimize);
        assert!(crossings(&a, &b).unwrap().is_empty());
    }

    #[test]
    fn ties_bridge_a_sign_change() {
        let a = series(&[2.0, 1.0, 0.0], MetricDirection::Minimize);
        let b = series(&[1.0, 1.0, 1.0], MetricDirection::Minimize);
        assert_eq!(
            crossings(&a, &b).unwrap(),
            vec![Crossing {
                after: 0.0,
                at: 2.0
            }]
        );
    }

    #[test]
    fn step_semantics_over_offset_grids() {
        // b is only observed at odd x; it holds its value in between
        let a = MetricSeries::new(
            vec![(0.0, 5.0), (2.0, 3.0), (4.0, 1.0)],
            MetricDirection::Minimize,
        )
        .unwrap();
        let b = MetricSeries::new(vec![(1.0, 4.0), (3.0, 2.0)], MetricDirection::Minimize).unwrap();
        // overlap [1, 3]: x=1 a=5>4, x=2 a=3<4 -> flip, x=3 a=3>2 -> flip
        let c = crossings(&a, &b).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c[0], Crossing { after: 1.0, at: 2.0 });
        assert_eq!(c[1], Crossing { after: 2.0, at: 3.0 });
    }

    fn arb_events() -> impl Strategy<Value = Vec<(u64, f64, f64)>> {
        prop::collection::vec((1u64..50, 0.0f64..100.0, 0.0f64..1.0), 1..30).prop_map(|raw| {
            let mut step = 0;
            let mut rt = 0.0;
            raw.into_iter()
                .map(|(ds, dr, v)| {
                    step += ds;
                    rt += dr;
                    (step, rt, v)
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn best_so_far_idempotent_and_monotone(ys in prop::collection::vec(-10.0f64..10.0, 1..40), max in any::<bool>()) {
            let dir = if max { MetricDirection::Maximize } else { MetricDirection::Minimize };
            let s = series(&ys, dir);
            let b = best_so_far(&s).unwrap();
            prop_assert_eq!(best_so_far(&b).unwrap(), b.clone());
            for w in b.points().windows(2) {
                prop_assert!(!dir.is_better(w[0].1, w[1].1));
            }
        }

        #[test]
        fn time_to_target_invariant_under_running_best(
            events in arb_events(),
            target in 0.0f64..1.0,
            budget in 0.0f64..2000.0,
        ) {
            let t = trial(&events);
            let series = MetricSeries::from_trial(&t, Clock::Steps, MetricDirection::Minimize).unwrap();
            let best = best_so_far(&series).unwrap();
            let mut t2 = t.clone();
            for (e, &(_, y)) in t2.events.iter_mut().zip(best.points()) {
                e.validation = y;
            }
            let q = val_query(target, ExtendedTime::Finite(budget));
            prop_assert_eq!(time_to_target(&t, &q).unwrap(), time_to_target(&t2, &q).unwrap());
        }

        #[test]
        fn shrinking_budget_never_helps(events in arb_events(), target in 0.0f64..1.0, b1 in 0.0f64..2000.0, b2 in 0.0f64..2000.0) {
            let t = trial(&events);
            let (lo, hi) = if b1 < b2 { (b1, b2) } else { (b2, b1) };
            let q_lo = val_query(target, ExtendedTime::Finite(lo));
            let q_hi = val_query(target, ExtendedTime::Finite(hi));
            prop_assert!(time_to_target(&t, &q_lo).unwrap() >= time_to_target(&t, &q_hi).unwrap());
        }

        #[test]
        fn crossings_symmetric(ya in prop::collection::vec(0.0f64..4.0, 1..20), yb in prop::collection::vec(0.0f64..4.0, 1..20)) {
            let a = series(&ya.iter().map(|v| v.round()).collect::<Vec<_>>(), MetricDirection::Minimize);
            let b = series(&yb.iter().map(|v| v.round()).collect::<Vec<_>>(), MetricDirection::Minimize);
            prop_assert_eq!(crossings(&a, &b).unwrap(), crossings(&b, &a).unwrap());
            prop_assert!(crossings(&a, &a).unwrap().is_empty());
        }
    }
}
