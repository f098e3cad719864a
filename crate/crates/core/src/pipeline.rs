//! Logs to leaderboard: ruleset scoring, held-out gating, profiles and scores.

use crate::config::BenchmarkConfig;
use crate::domain::{ScoreMatrix, TrialRecord};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::rulesets::{build_score_matrix, ScoringOptions};
use crate::scoring::{apply_heldout_gate, score_matrix, Integration, ScoreReport};

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredLogs {
    pub fixed: ScoreMatrix,
    pub heldout: ScoreMatrix,
    pub gated: ScoreMatrix,
    pub report: ScoreReport,
}

/// Scores trials against every workload of `config`.
///
/// Trials naming a workload that is not declared are rejected.
pub fn score_logs(
    config: &BenchmarkConfig,
    trials: &[TrialRecord],
    options: &ScoringOptions,
    integration: Integration,
    exec: Execution,
) -> Result<ScoredLogs> {
    if let Some(t) = trials.iter().find(|t| config.workload(&t.key.workload).is_none()) {
        return Err(Error::UnknownWorkload(t.key.workload.clone()));
    }
    let mut submissions: Vec<String> = trials.iter().map(|t| t.key.submission.clone()).collect();
    submissions.sort();
    submissions.dedup();
    if submissions.is_empty() {
        return Err(Error::EmptyInput);
    }
    let fixed_specs: Vec<_> = config.fixed_workloads().collect();
    let heldout_specs: Vec<_> = config.heldout_workloads().collect();
    let fixed = build_score_matrix(&fixed_specs, Some(&submissions), trials, options, exec)?;
    let heldout = build_score_matrix(&heldout_specs, Some(&submissions), trials, options, exec)?;
    let gated = apply_heldout_gate(&fixed, &heldout, &config.linkage(), config.r_max)?;
    let report = score_matrix(&gated, config.r_max, integration, exec)?;
    Ok(ScoredLogs {
        fixed,
        heldout,
        gated,
        report,
    })
}
