//! Domain types shared across the engine.
//!
//! Everything here is immutable once built and `Send + Sync`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Whether lower or higher metric values are better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricDirection {
    Minimize,
    Maximize,
}

impl MetricDirection {
    /// Inclusive target test: `value <= target` when minimizing, `value >= target` when maximizing.
    pub fn meets(self, value: f64, target: f64) -> bool {
        match self {
            MetricDirection::Minimize => value <= target,
            MetricDirection::Maximize => value >= target,
        }
    }

    /// `a` is strictly better than `b`.
    pub fn is_better(self, a: f64, b: f64) -> bool {
        match self {
            MetricDirection::Minimize => a < b,
            MetricDirection::Maximize => a > b,
        }
    }

    pub fn best(self, a: f64, b: f64) -> f64 {
        if self.is_better(b, a) {
            b
        } else {
            a
        }
    }

    pub fn worst(self, a: f64, b: f64) -> f64 {
        if self.is_better(b, a) {
            a
        } else {
            b
        }
    }

    /// Ordering that puts better values first.
    pub fn cmp_better_first(self, a: f64, b: f64) -> Ordering {
        match self {
            MetricDirection::Minimize => a.total_cmp(&b),
            MetricDirection::Maximize => b.total_cmp(&a),
        }
    }
}

impl FromStr for MetricDirection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "min" | "minimize" => Ok(MetricDirection::Minimize),
            "max" | "maximize" => Ok(MetricDirection::Maximize),
            other => Err(Error::InvalidValue {
                field: "direction".into(),
                reason: format!("expected min|max, got `{other}`"),
            }),
        }
    }
}

/// A nonnegative time (seconds or steps) or the distinguished value `Infinite`.
///
/// `Infinite` is strictly greater than every finite value, so the derived
/// ordering is total. Construct finite values through [`ExtendedTime::finite`]
/// to keep the nonnegative, non-NaN invariant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedTime {
    Finite(f64),
    Infinite,
}

impl ExtendedTime {
    pub fn finite(value: f64) -> Result<Self> {
        if value.is_nan() || value < 0.0 {
            return Err(Error::InvalidValue {
                field: "time".into(),
                reason: format!("expected a nonnegative number, got {value}"),
            });
        }
        if value.is_infinite() {
            return Ok(ExtendedTime::Infinite);
        }
        Ok(ExtendedTime::Finite(value))
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedTime::Finite(_))
    }

    pub fn value(self) -> Option<f64> {
        match self {
            ExtendedTime::Finite(v) => Some(v),
            ExtendedTime::Infinite => None,
        }
    }

    /// Lossy conversion where `Infinite` becomes `f64::INFINITY`.
    pub fn as_f64(self) -> f64 {
        self.value().unwrap_or(f64::INFINITY)
    }

    /// `self / denominator`. Infinite numerators and infinite denominators
    /// both give `Infinite`; `0 / 0` is 1 and `t / 0` is `Infinite` for `t > 0`.
    pub fn ratio(self, denominator: ExtendedTime) -> ExtendedTime {
        match (self, denominator) {
            (ExtendedTime::Finite(n), ExtendedTime::Finite(d)) => {
                if d == 0.0 {
                    if n == 0.0 {
                        ExtendedTime::Finite(1.0)
                    } else {
                        ExtendedTime::Infinite
                    }
                } else {
                    ExtendedTime::Finite(n / d)
                }
            }
            _ => ExtendedTime::Infinite,
        }
    }

    pub fn scale(self, factor: f64) -> ExtendedTime {
        match self {
            ExtendedTime::Finite(v) => ExtendedTime::Finite(v * factor),
            ExtendedTime::Infinite => ExtendedTime::Infinite,
        }
    }

    /// Finite and `<= bound`.
    pub fn within(self, bound: ExtendedTime) -> bool {
        self.is_finite() && self <= bound
    }
}

impl Eq for ExtendedTime {}

impl PartialOrd for ExtendedTime {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtendedTime {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ExtendedTime::Finite(a), ExtendedTime::Finite(b)) => a.total_cmp(b),
            (ExtendedTime::Finite(_), ExtendedTime::Infinite) => Ordering::Less,
            (ExtendedTime::Infinite, ExtendedTime::Finite(_)) => Ordering::Greater,
            (ExtendedTime::Infinite, ExtendedTime::Infinite) => Ordering::Equal,
        }
    }
}

impl fmt::Display for ExtendedTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedTime::Finite(v) => write!(f, "{v}"),
            ExtendedTime::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for ExtendedTime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if matches!(t.to_ascii_lowercase().as_str(), "inf" | "infinity" | "+inf") {
            return Ok(ExtendedTime::Infinite);
        }
        let v: f64 = t.parse().map_err(|_| Error::InvalidValue {
            field: "time".into(),
            reason: format!("cannot parse `{t}`"),
        })?;
        ExtendedTime::finite(v)
    }
}

impl Serialize for ExtendedTime {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtendedTime::Finite(v) => serializer.serialize_f64(*v),
            ExtendedTime::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtendedTime {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct TimeVisitor;

        impl Visitor<'_> for TimeVisitor {
            type Value = ExtendedTime;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a nonnegative number or \"inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<ExtendedTime, E> {
                ExtendedTime::finite(v).map_err(E::custom)
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<ExtendedTime, E> {
                Ok(ExtendedTime::Finite(v as f64))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<ExtendedTime, E> {
                ExtendedTime::finite(v as f64).map_err(E::custom)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<ExtendedTime, E> {
                v.parse().map_err(E::custom)
            }
        }

        deserializer.deserialize_any(TimeVisitor)
    }
}

/// A single hyperparameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Integer(i64),
    Real(f64),
    Categorical(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Integer(i) => Some(*i as f64),
            ParamValue::Real(r) => Some(*r),
            ParamValue::Categorical(_) => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Integer(i) => write!(f, "{i}"),
            ParamValue::Real(r) => write!(f, "{r}"),
            ParamValue::Categorical(s) => f.write_str(s),
        }
    }
}

/// A point in hyperparameter space: a flat, name-ordered map.
pub type HyperparameterPoint = BTreeMap<String, ParamValue>;

/// Fixed workloads are timed; held-out workloads only gate their base.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WorkloadKind {
    Fixed,
    HeldOut { base: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "WorkloadRepr", into = "WorkloadRepr")]
pub struct WorkloadSpec {
    pub id: String,
    pub kind: WorkloadKind,
    pub direction: MetricDirection,
    pub validation_target: f64,
    pub test_target: f64,
    /// Seconds.
    pub max_runtime: f64,
    pub max_steps: Option<u64>,
}

impl WorkloadSpec {
    pub fn fixed(
        id: impl Into<String>,
        direction: MetricDirection,
        validation_target: f64,
        test_target: f64,
        max_runtime: f64,
    ) -> Self {
        WorkloadSpec {
            id: id.into(),
            kind: WorkloadKind::Fixed,
            direction,
            validation_target,
            test_target,
            max_runtime,
            max_steps: None,
        }
    }

    pub fn held_out_of(mut self, base: impl Into<String>) -> Self {
        self.kind = WorkloadKind::HeldOut { base: base.into() };
        self
    }

    pub fn with_max_steps(mut self, steps: u64) -> Self {
        self.max_steps = Some(steps);
        self
    }

    pub fn is_fixed(&self) -> bool {
        self.kind == WorkloadKind::Fixed
    }

    pub fn base(&self) -> Option<&str> {
        match &self.kind {
            WorkloadKind::Fixed => None,
            WorkloadKind::HeldOut { base } => Some(base),
        }
    }

    /// Budget on the chosen clock, scaled by `multiplier`. Missing step budgets are unbounded.
    pub fn budget(&self, clock: Clock, multiplier: f64) -> ExtendedTime {
        match clock {
            Clock::Runtime => ExtendedTime::Finite(self.max_runtime * multiplier),
            Clock::Steps => match self.max_steps {
                Some(s) => ExtendedTime::Finite(s as f64 * multiplier),
                None => ExtendedTime::Infinite,
            },
        }
    }
}

#[derive(Serialize, Deserialize)]
struct WorkloadRepr {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    held_out_of: Option<String>,
    direction: MetricDirection,
    validation_target: f64,
    test_target: f64,
    max_runtime: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_steps: Option<u64>,
}

impl From<WorkloadRepr> for WorkloadSpec {
    fn from(r: WorkloadRepr) -> Self {
        WorkloadSpec {
            id: r.id,
            kind: match r.held_out_of {
                Some(base) => WorkloadKind::HeldOut { base },
                None => WorkloadKind::Fixed,
            },
            direction: r.direction,
            validation_target: r.validation_target,
            test_target: r.test_target,
            max_runtime: r.max_runtime,
            max_steps: r.max_steps,
        }
    }
}

impl From<WorkloadSpec> for WorkloadRepr {
    fn from(w: WorkloadSpec) -> Self {
        WorkloadRepr {
            held_out_of: w.base().map(str::to_owned),
            id: w.id,
            direction: w.direction,
            validation_target: w.validation_target,
            test_target: w.test_target,
            max_runtime: w.max_runtime,
            max_steps: w.max_steps,
        }
    }
}

/// Which clock a time-to-target is measured on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clock {
    #[default]
    Runtime,
    Steps,
}

impl FromStr for Clock {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "runtime" => Ok(Clock::Runtime),
            "steps" => Ok(Clock::Steps),
            other => Err(Error::InvalidValue {
                field: "clock".into(),
                reason: format!("expected runtime|steps, got `{other}`"),
            }),
        }
    }
}

/// One evaluation of a running trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalEvent {
    pub step: u64,
    /// Accumulated timed seconds at this evaluation.
    pub runtime: f64,
    pub validation: f64,
    pub test: Option<f64>,
}

impl EvalEvent {
    pub fn clock(&self, clock: Clock) -> f64 {
        match clock {
            Clock::Runtime => self.runtime,
            Clock::Steps => self.step as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    #[default]
    Completed,
    Diverged,
    Crashed,
}

impl FromStr for TrialStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "completed" | "ok" => Ok(TrialStatus::Completed),
            "diverged" => Ok(TrialStatus::Diverged),
            "crashed" => Ok(TrialStatus::Crashed),
            other => Err(Error::InvalidValue {
                field: "status".into(),
                reason: format!("unknown trial status `{other}`"),
            }),
        }
    }
}

impl fmt::Display for TrialStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrialStatus::Completed => "completed",
            TrialStatus::Diverged => "diverged",
            TrialStatus::Crashed => "crashed",
        })
    }
}

/// Identity of a trial within a dataset of logs.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TrialKey {
    pub submission: String,
    pub workload: String,
    pub study: u32,
    pub trial: u32,
}

impl fmt::Display for TrialKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}/study{}/trial{}",
            self.submission, self.workload, self.study, self.trial
        )
    }
}

/// One training run: a hyperparameter point and its ordered evaluation events.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub key: TrialKey,
    pub point: HyperparameterPoint,
    pub events: Vec<EvalEvent>,
    pub status: TrialStatus,
}

impl TrialRecord {
    /// Checks the ordering invariant: steps strictly increasing, runtime nondecreasing,
    /// and a nonempty event list for completed trials.
    pub fn new(
        key: TrialKey,
        point: HyperparameterPoint,
        events: Vec<EvalEvent>,
        status: TrialStatus,
    ) -> Result<Self> {
        if status == TrialStatus::Completed && events.is_empty() {
            return Err(Error::InvalidValue {
                field: key.to_string(),
                reason: "completed trial has no events".into(),
            });
        }
        for pair in events.windows(2) {
            if pair[1].step <= pair[0].step {
                return Err(Error::DuplicateEvent(format!("{key} step {}", pair[1].step)));
            }
            if pair[1].runtime < pair[0].runtime {
                return Err(Error::NonMonotoneRuntime(key.to_string()));
            }
        }
        Ok(TrialRecord {
            key,
            point,
            events,
            status,
        })
    }

    pub fn study(&self) -> u32 {
        self.key.study
    }

    pub fn trial(&self) -> u32 {
        self.key.trial
    }
}

/// Per-(submission, workload) extended times, stored row-major by submission.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    submissions: Vec<String>,
    workloads: Vec<String>,
    cells: Vec<ExtendedTime>,
}

impl ScoreMatrix {
    pub fn new(
        submissions: Vec<String>,
        workloads: Vec<String>,
        cells: Vec<ExtendedTime>,
    ) -> Result<Self> {
        if cells.len() != submissions.len() * workloads.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} cells for {} submissions x {} workloads",
                cells.len(),
                submissions.len(),
                workloads.len()
            )));
        }
        Ok(ScoreMatrix {
            submissions,
            workloads,
            cells,
        })
    }

    /// Builds a matrix from `(submission, row)` pairs; every row must have `workloads.len()` cells.
    pub fn from_rows<S, I>(workloads: Vec<String>, rows: I) -> Result<Self>
    where
        S: Into<String>,
        I: IntoIterator<Item = (S, Vec<ExtendedTime>)>,
    {
        let mut submissions = Vec::new();
        let mut cells = Vec::new();
        for (id, row) in rows {
            let id = id.into();
            if row.len() != workloads.len() {
                return Err(Error::ShapeMismatch(format!(
                    "row `{id}` has {} cells, expected {}",
                    row.len(),
                    workloads.len()
                )));
            }
            submissions.push(id);
            cells.extend(row);
        }
        Ok(ScoreMatrix {
            submissions,
            workloads,
            cells,
        })
    }

    pub fn filled(submissions: Vec<String>, workloads: Vec<String>, value: ExtendedTime) -> Self {
        let cells = vec![value; submissions.len() * workloads.len()];
        ScoreMatrix {
            submissions,
            workloads,
            cells,
        }
    }

    pub fn submissions(&self) -> &[String] {
        &self.submissions
    }

    pub fn workloads(&self) -> &[String] {
        &self.workloads
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn get(&self, submission: usize, workload: usize) -> ExtendedTime {
        self.cells[submission * self.workloads.len() + workload]
    }

    pub fn set(&mut self, submission: usize, workload: usize, value: ExtendedTime) {
        let n = self.workloads.len();
        self.cells[submission * n + workload] = value;
    }

    pub fn row(&self, submission: usize) -> &[ExtendedTime] {
        let n = self.workloads.len();
        &self.cells[submission * n..(submission + 1) * n]
    }

    pub fn column(&self, workload: usize) -> impl Iterator<Item = ExtendedTime> + '_ {
        (0..self.submissions.len()).map(move |s| self.get(s, workload))
    }

    pub fn submission_index(&self, id: &str) -> Option<usize> {
        self.submissions.iter().position(|s| s == id)
    }

    pub fn workload_index(&self, id: &str) -> Option<usize> {
        self.workloads.iter().position(|w| w == id)
    }

    /// Smallest time in a workload column.
    pub fn column_min(&self, workload: usize) -> ExtendedTime {
        self.column(workload).min().unwrap_or(ExtendedTime::Infinite)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn meets_is_inclusive() {
        assert!(MetricDirection::Minimize.meets(0.2257, 0.2257));
        assert!(MetricDirection::Maximize.meets(30.8491, 30.8491));
        assert!(!MetricDirection::Minimize.meets(0.23, 0.2257));
        assert!(!MetricDirection::Maximize.meets(30.0, 30.8491));
    }

    #[test]
    fn infinite_sorts_last() {
        let mut v = vec![
            ExtendedTime::Infinite,
            ExtendedTime::Finite(3.0),
            ExtendedTime::Finite(0.0),
            ExtendedTime::Infinite,
        ];
        v.sort();
        assert_eq!(
            v,
            vec![
                ExtendedTime::Finite(0.0),
                ExtendedTime::Finite(3.0),
                ExtendedTime::Infinite,
                ExtendedTime::Infinite
            ]
        );
    }

    #[test]
    fn ratio_rules() {
        let inf = ExtendedTime::Infinite;
        assert_eq!(inf.ratio(ExtendedTime::Finite(2.0)), inf);
        assert_eq!(inf.ratio(inf), inf);
        assert_eq!(ExtendedTime::Finite(4.0).ratio(inf), inf);
        assert_eq!(
            ExtendedTime::Finite(4.0).ratio(ExtendedTime::Finite(2.0)),
            ExtendedTime::Finite(2.0)
        );
    }

    #[test]
    fn finite_rejects_negative_and_nan() {
        assert!(ExtendedTime::finite(-1.0).is_err());
        assert!(ExtendedTime::finite(f64::NAN).is_err());
        assert_eq!(ExtendedTime::finite(f64::INFINITY).unwrap(), ExtendedTime::Infinite);
    }

    #[test]
    fn serde_writes_inf_string() {
        let json = serde_json::to_string(&vec![ExtendedTime::Finite(1.5), ExtendedTime::Infinite])
            .unwrap();
        assert_eq!(json, r#"[1.5,"inf"]"#);
        let back: Vec<ExtendedTime> = serde_json::from_str(&json).unwrap();
        assert_eq!(back[1], ExtendedTime::Infinite);
    }

    #[test]
    fn trial_record_rejects_out_of_order_events() {
        let key = TrialKey {
            submission: "s".into(),
            workload: "w".into(),
            study: 0,
            trial: 0,
        };
        let ev = |step, runtime| EvalEvent {
            step,
            runtime,
            validation: 0.0,
            test: None,
        };
        let err = TrialRecord::new(
            key.clone(),
            Default::default(),
            vec![ev(10, 5.0), ev(20, 4.0)],
            TrialStatus::Completed,
        )
        .unwrap_err();
        assert_eq!(err.kind(), "NonMonotoneRuntime");
        let err = TrialRecord::new(key, Default::default(), vec![], TrialStatus::Completed)
            .unwrap_err();
        assert_eq!(err.kind(), "InvalidValue");
    }

    #[test]
    fn matrix_shape_is_checked() {
        assert!(ScoreMatrix::new(vec!["a".into()], vec!["w".into(), "v".into()], vec![]).is_err());
        let m = ScoreMatrix::from_rows(
            vec!["w".into(), "v".into()],
            [("a", vec![ExtendedTime::Finite(1.0), ExtendedTime::Infinite])],
        )
        .unwrap();
        assert_eq!(m.get(0, 1), ExtendedTime::Infinite);
        assert_eq!(m.column_min(0), ExtendedTime::Finite(1.0));
    }
}
