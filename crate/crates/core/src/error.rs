use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    // configuration
    #[error("duplicate workload id `{0}`")]
    DuplicateWorkloadId(String),
    #[error("held-out workload `{heldout}` names base `{base}` which is not a fixed workload")]
    DanglingHeldOutBase { heldout: String, base: String },
    #[error("fixed workload `{base}` has more than one held-out variant (`{first}`, `{second}`)")]
    DuplicateHeldOut {
        base: String,
        first: String,
        second: String,
    },
    #[error("non-positive budget in `{field}`: {value}")]
    NonPositiveBudget { field: String, value: f64 },
    #[error("invalid ruleset: {0}")]
    InvalidRuleset(String),
    #[error("invalid search space `{space}`: {reason}")]
    InvalidSearchSpace { space: String, reason: String },
    #[error("invalid value for `{field}`: {reason}")]
    InvalidValue { field: String, reason: String },
    #[error("config parse error: {0}")]
    ConfigParse(String),

    // curves
    #[error("series is empty")]
    EmptySeries,
    #[error("series x values must be strictly increasing (index {index})")]
    NonIncreasingSeries { index: usize },
    #[error("trial {trial} has an in-budget event at step {step} without a test metric")]
    MissingTestMetric { trial: String, step: u64 },

    // schedules
    #[error("step {step} outside schedule range [0, {num_steps}]")]
    OutOfRangeStep { step: u64, num_steps: u64 },
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    // search spaces
    #[error("search space has no dimensions or points")]
    EmptySpace,
    #[error("requested {requested} points from a list of {available}")]
    BudgetExceedsList { requested: usize, available: usize },
    #[error("only {available} distinct candidates for a budget of {requested}")]
    InsufficientCandidates { requested: usize, available: usize },
    #[error("expected a {expected} search space")]
    WrongSpaceKind { expected: &'static str },

    // targets
    #[error("no completed trials")]
    NoCompletedTrials,
    #[error("no rerun outcomes")]
    EmptyReruns,
    #[error("no rerun meets the validation target {0}")]
    NoQualifyingReruns(f64),

    // rulesets
    #[error("trials from more than one study were supplied: {0}")]
    MixedStudies(String),
    #[error("median aggregation needs an odd, nonzero number of studies, got {0}")]
    EvenStudyCount(usize),
    #[error("self-tuning study {study} of `{submission}` on `{workload}` has {count} trials")]
    MultipleSelfTuningTrials {
        submission: String,
        workload: String,
        study: u32,
        count: usize,
    },
    #[error("workload `{0}` is not declared in the config")]
    UnknownWorkload(String),

    // scoring
    #[error("score matrix is empty")]
    EmptyMatrix,
    #[error("score matrix shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("r_max must be finite and > 1, got {0}")]
    InvalidRMax(f64),
    #[error("held-out workload `{heldout}` links to `{fixed}` which is not in the fixed matrix")]
    DanglingLinkage { heldout: String, fixed: String },
    #[error("time must be > 0, got {0}")]
    NonPositiveTime(f64),
    #[error("time is infinite")]
    InfiniteTime,
    #[error("no values supplied")]
    EmptyInput,

    // analysis
    #[error("workload `{0}` has no recorded value")]
    EmptyWorkloadColumn(String),
    #[error("best value on workload `{0}` is zero")]
    ZeroBestValue(String),
    #[error("no point has a value on every workload")]
    NoUsablePoint,
    #[error("tuning pool is empty")]
    EmptyPool,
    #[error("point sets differ: {0}")]
    MismatchedPointSets(String),
    #[error("workload `{0}` in subset is unknown")]
    UnknownWorkloadInSubset(String),

    // io
    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("duplicate event {0}")]
    DuplicateEvent(String),
    #[error("runtime decreases within trial {0}")]
    NonMonotoneRuntime(String),
    #[error("{path}: {source}")]
    IoFailure {
        path: String,
        #[source]
        source: io::Error,
    },
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DuplicateWorkloadId(_) => "DuplicateWorkloadId",
            Error::DanglingHeldOutBase { .. } => "DanglingHeldOutBase",
            Error::DuplicateHeldOut { .. } => "DuplicateHeldOut",
            Error::NonPositiveBudget { .. } => "NonPositiveBudget",
            Error::InvalidRuleset(_) => "InvalidRuleset",
            Error::InvalidSearchSpace { .. } => "InvalidSearchSpace",
            Error::InvalidValue { .. } => "InvalidValue",
            Error::ConfigParse(_) => "ConfigParse",
            Error::EmptySeries => "EmptySeries",
            Error::NonIncreasingSeries { .. } => "NonIncreasingSeries",
            Error::MissingTestMetric { .. } => "MissingTestMetric",
            Error::OutOfRangeStep { .. } => "OutOfRangeStep",
            Error::InvalidSchedule(_) => "InvalidSchedule",
            Error::EmptySpace => "EmptySpace",
            Error::BudgetExceedsList { .. } => "BudgetExceedsList",
            Error::InsufficientCandidates { .. } => "InsufficientCandidates",
            Error::WrongSpaceKind { .. } => "WrongSpaceKind",
            Error::NoCompletedTrials => "NoCompletedTrials",
            Error::EmptyReruns => "EmptyReruns",
            Error::NoQualifyingReruns(_) => "NoQualifyingReruns",
            Error::MixedStudies(_) => "MixedStudies",
            Error::EvenStudyCount(_) => "EvenStudyCount",
            Error::MultipleSelfTuningTrials { .. } => "MultipleSelfTuningTrials",
            Error::UnknownWorkload(_) => "UnknownWorkload",
            Error::EmptyMatrix => "EmptyMatrix",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::InvalidRMax(_) => "InvalidRMax",
            Error::DanglingLinkage { .. } => "DanglingLinkage",
            Error::NonPositiveTime(_) => "NonPositiveTime",
            Error::InfiniteTime => "InfiniteTime",
            Error::EmptyInput => "EmptyInput",
            Error::EmptyWorkloadColumn(_) => "EmptyWorkloadColumn",
            Error::ZeroBestValue(_) => "ZeroBestValue",
            Error::NoUsablePoint => "NoUsablePoint",
            Error::EmptyPool => "EmptyPool",
            Error::MismatchedPointSets(_) => "MismatchedPointSets",
            Error::UnknownWorkloadInSubset(_) => "UnknownWorkloadInSubset",
            Error::MalformedLine { .. } => "MalformedLine",
            Error::DuplicateEvent(_) => "DuplicateEvent",
            Error::NonMonotoneRuntime(_) => "NonMonotoneRuntime",
            Error::IoFailure { .. } => "IoFailure",
        }
    }

    pub(crate) fn io(path: impl Into<String>, source: io::Error) -> Self {
        Error::IoFailure {
            path: path.into(),
            source,
        }
    }
}
