//! Performance ratios, profiles, benchmark scores and the held-out gate.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{ExtendedTime, ScoreMatrix};
use crate::error::{Error, Result};
use crate::exec::Execution;

/// `r[s][w] = t[s][w] / min_s t[s][w]`.
pub fn performance_ratios(matrix: &ScoreMatrix) -> Result<ScoreMatrix> {
    if matrix.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let mins: Vec<ExtendedTime> = (0..matrix.workloads().len()).map(|w| matrix.column_min(w)).collect();
    let mut out = matrix.clone();
    for s in 0..matrix.submissions().len() {
        for (w, &min) in mins.iter().enumerate() {
            out.set(s, w, matrix.get(s, w).ratio(min));
        }
    }
    Ok(out)
}

/// Right-continuous step function `rho(tau)`, the fraction of workloads with ratio `<= tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceProfile {
    pub submission_id: String,
    /// `(tau, rho)` at each distinct finite ratio, strictly increasing in `tau`.
    pub breakpoints: Vec<(f64, f64)>,
    pub n_workloads: usize,
}

impl PerformanceProfile {
    pub fn rho(&self, tau: f64) -> f64 {
        let idx = self.breakpoints.partition_point(|&(t, _)| t <= tau);
        idx.checked_sub(1).map_or(0.0, |i| self.breakpoints[i].1)
    }
}

/// Builds the profile of one submission from its per-workload ratios.
pub fn performance_profile(submission_id: impl Into<String>, ratios: &[ExtendedTime]) -> PerformanceProfile {
    let n = ratios.len();
    let mut finite: Vec<f64> = ratios.iter().filter_map(|r| r.value()).collect();
    finite.sort_by(f64::total_cmp);
    let mut breakpoints: Vec<(f64, f64)> = Vec::new();
    for (i, &r) in finite.iter().enumerate() {
        let rho = (i + 1) as f64 / n as f64;
        match breakpoints.last_mut() {
            Some(last) if last.0 == r => last.1 = rho,
            _ => breakpoints.push((r, rho)),
        }
    }
    PerformanceProfile {
        submission_id: submission_id.into(),
        breakpoints,
        n_workloads: n,
    }
}

/// How the profile integral is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Integration {
    /// Closed-form sum over breakpoint segments.
    #[default]
    Exact,
    /// Trapezoid rule on `points` evenly spaced values of `tau` in `[1, r_max]`.
    Trapezoid { points: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkScore {
    pub submission_id: String,
    pub value: f64,
    pub r_max: f64,
}

fn check_r_max(r_max: f64) -> Result<()> {
    if r_max > 1.0 && r_max.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidRMax(r_max))
    }
}

/// Normalized integral of the profile over `[1, r_max]`, computed exactly.
pub fn benchmark_score(profile: &PerformanceProfile, r_max: f64) -> Result<BenchmarkScore> {
    benchmark_score_with(profile, r_max, Integration::Exact)
}

pub fn benchmark_score_with(
    profile: &PerformanceProfile,
    r_max: f64,
    integration: Integration,
) -> Result<BenchmarkScore> {
    check_r_max(r_max)?;
    let value = match integration {
        Integration::Exact => {
            let mut area = 0.0;
            let mut prev = 0.0;
            for &(tau, rho) in profile.breakpoints.iter().take_while(|&&(t, _)| t <= r_max) {
                area += (rho - prev) * (r_max - tau.max(1.0));
                prev = rho;
            }
            area / (r_max - 1.0)
        }
        Integration::Trapezoid { points } => {
            if points < 2 {
                return Err(Error::InvalidValue {
                    field: "points".into(),
                    reason: "trapezoid integration needs at least 2 points".into(),
                });
            }
            let step = (r_max - 1.0) / (points - 1) as f64;
            let mut cursor = 0usize;
            let mut rho_at = |tau: f64| {
                while cursor < profile.breakpoints.len() && profile.breakpoints[cursor].0 <= tau {
                    cursor += 1;
                }
                cursor.checked_sub(1).map_or(0.0, |i| profile.breakpoints[i].1)
            };
            let mut area = 0.0;
            let mut prev_tau = 1.0;
            let mut prev_rho = rho_at(1.0);
            for i in 1..points {
                let tau = if i == points - 1 { r_max } else { i as f64 * step + 1.0 };
                let rho = rho_at(tau);
                area += (tau - prev_tau) * (rho + prev_rho) / 2.0;
                prev_tau = tau;
                prev_rho = rho;
            }
            area / (r_max - 1.0)
        }
    };
    Ok(BenchmarkScore {
        submission_id: profile.submission_id.clone(),
        value,
        r_max,
    })
}

/// Voids fixed-workload times that fail the held-out conditions.
///
/// A cell `(s, w)` survives when `s` reached `w` within `r_max` times the
/// fastest fixed time and, if `w` has a held-out variant `h`, also reached `h`
/// within `r_max` times the fastest held-out time among submissions that
/// reached `w`. `linkage` maps held-out ids to fixed ids. Submissions absent
/// from `heldout` count as never reaching it.
pub fn apply_heldout_gate(
    fixed: &ScoreMatrix,
    heldout: &ScoreMatrix,
    linkage: &BTreeMap<String, String>,
    r_max: f64,
) -> Result<ScoreMatrix> {
    check_r_max(r_max)?;
    let mut variant_of: Vec<Option<usize>> = vec![None; fixed.workloads().len()];
    for (h, f) in linkage {
        let dangling = || Error::DanglingLinkage {
            heldout: h.clone(),
            fixed: f.clone(),
        };
        let fw = fixed.workload_index(f).ok_or_else(dangling)?;
        let hw = heldout.workload_index(h).ok_or_else(dangling)?;
        variant_of[fw] = Some(hw);
    }
    let rows: Vec<Option<usize>> = fixed
        .submissions()
        .iter()
        .map(|s| heldout.submission_index(s))
        .collect();
    let held = |s: usize, hw: usize| rows[s].map_or(ExtendedTime::Infinite, |hs| heldout.get(hs, hw));

    let mut out = fixed.clone();
    let n_subs = fixed.submissions().len();
    for (w, variant) in variant_of.iter().enumerate() {
        let fastest = fixed.column_min(w);
        let fixed_bound = fastest.scale(r_max);
        let held_bound = variant.map(|hw| {
            (0..n_subs)
                .filter(|&s| fixed.get(s, w).is_finite())
                .map(|s| held(s, hw))
                .min()
                .unwrap_or(ExtendedTime::Infinite)
                .scale(r_max)
        });
        for s in 0..n_subs {
            let t = fixed.get(s, w);
            let mut ok = t.within(fixed_bound);
            if let (Some(hw), Some(bound)) = (*variant, held_bound) {
                ok = ok && held(s, hw).within(bound);
            }
            if !ok {
                out.set(s, w, ExtendedTime::Infinite);
            }
        }
    }
    Ok(out)
}

/// `exp(mean(ln t))`.
pub fn geometric_mean_time(times: &[f64]) -> Result<f64> {
    if times.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sum = 0.0;
    for &t in times {
        if t.is_infinite() {
            return Err(Error::InfiniteTime);
        }
        if t.is_nan() || t <= 0.0 {
            return Err(Error::NonPositiveTime(t));
        }
        sum += t.ln();
    }
    Ok((sum / times.len() as f64).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardRow {
    pub submission: String,
    pub benchmark_score: f64,
    pub times: Vec<ExtendedTime>,
}

/// Rows sorted by descending score, then ascending submission id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaderboard {
    pub workloads: Vec<String>,
    pub rows: Vec<LeaderboardRow>,
}

impl Leaderboard {
    pub fn score_of(&self, submission: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.submission == submission)
            .map(|r| r.benchmark_score)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub r_max: f64,
    pub integration: Integration,
    pub leaderboard: Leaderboard,
    /// In the submission order of the scored matrix.
    pub profiles: Vec<PerformanceProfile>,
}

/// Ratios, profiles and scores for every submission of `matrix`.
pub fn score_matrix(
    matrix: &ScoreMatrix,
    r_max: f64,
    integration: Integration,
    exec: Execution,
) -> Result<ScoreReport> {
    check_r_max(r_max)?;
    let ratios = performance_ratios(matrix)?;
    let subs: Vec<usize> = (0..matrix.submissions().len()).collect();
    let scored = exec.map(&subs, |&s| {
        let profile = performance_profile(&matrix.submissions()[s], ratios.row(s));
        benchmark_score_with(&profile, r_max, integration).map(|b| (profile, b.value))
    });
    let mut profiles = Vec::with_capacity(subs.len());
    let mut rows = Vec::with_capacity(subs.len());
    for (s, result) in scored.into_iter().enumerate() {
        let (profile, value) = result?;
        rows.push(LeaderboardRow {
            submission: profile.submission_id.clone(),
            benchmark_score: value,
            times: matrix.row(s).to_vec(),
        });
        profiles.push(profile);
    }
    rows.sort_by(|a, b| {
        b.benchmark_score
            .total_cmp(&a.benchmark_score)
            .then_with(|| a.submission.cmp(&b.submission))
    });
    Ok(ScoreReport {
        r_max,
        integration,
        leaderboard: Leaderboard {
            workloads: matrix.workloads().to_vec(),
            rows,
        },
        profiles,
    })
}
