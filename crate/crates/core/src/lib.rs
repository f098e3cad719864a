//! Time-to-result benchmark arbitration.
//!
//! Turns raw training logs into per-workload times under a tuning ruleset,
//! gates them with held-out workloads, and scores submissions by integrating
//! their performance profiles. Also hosts the analysis tools used to set
//! targets and study tuning sensitivity.

pub mod analysis;
pub mod config;
pub mod curves;
pub mod domain;
pub mod error;
pub mod exec;
pub mod io;
pub mod pipeline;
pub mod rulesets;
pub mod schedules;
pub mod scoring;
pub mod searchspace;
pub mod simulate;
pub mod stats;
pub mod targets;

pub use config::BenchmarkConfig;
pub use domain::{
    Clock, EvalEvent, ExtendedTime, HyperparameterPoint, MetricDirection, ParamValue, ScoreMatrix,
    TrialKey, TrialRecord, TrialStatus, WorkloadKind, WorkloadSpec,
};
pub use error::{Error, Result};
pub use exec::Execution;
pub use rulesets::RulesetConfig;
pub use scoring::{BenchmarkScore, Integration, Leaderboard, PerformanceProfile, ScoreReport};
