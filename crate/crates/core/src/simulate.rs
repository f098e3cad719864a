//! Synthetic training curves and end-to-end mock competitions.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::BenchmarkConfig;
use crate::domain::{
    EvalEvent, HyperparameterPoint, MetricDirection, TrialKey, TrialRecord, TrialStatus, WorkloadSpec,
};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::pipeline::{score_logs, ScoredLogs};
use crate::rulesets::ScoringOptions;
use crate::scoring::Integration;
use crate::searchspace::SearchSpace;

/// Step count assumed for workloads without a step budget.
pub const DEFAULT_NUM_STEPS: u64 = 1000;

/// `metric(step) = asymptote + amplitude * exp(-rate * step) + noise`.
///
/// The test metric follows the same curve shifted by `test_offset`, with
/// independent noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveModel {
    pub asymptote: f64,
    pub amplitude: f64,
    pub rate: f64,
    pub noise_scale: f64,
    pub direction: MetricDirection,
    #[serde(default)]
    pub test_offset: f64,
}

impl CurveModel {
    pub fn new(asymptote: f64, amplitude: f64, rate: f64, noise_scale: f64, direction: MetricDirection) -> Result<Self> {
        let model = CurveModel {
            asymptote,
            amplitude,
            rate,
            noise_scale,
            direction,
            test_offset: 0.0,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn with_test_offset(mut self, offset: f64) -> Self {
        self.test_offset = offset;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: String| {
            Err(Error::InvalidValue {
                field: field.into(),
                reason,
            })
        };
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return bad("rate", format!("must be > 0, got {}", self.rate));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return bad("noise_scale", format!("must be >= 0, got {}", self.noise_scale));
        }
        if !(self.asymptote.is_finite() && self.amplitude.is_finite() && self.test_offset.is_finite()) {
            return bad("asymptote", "curve parameters must be finite".into());
        }
        Ok(())
    }

    /// Noiseless validation value.
    pub fn mean_at(&self, step: u64) -> f64 {
        self.asymptote + self.amplitude * (-self.rate * step as f64).exp()
    }
}

/// Evaluation cadence of a generated trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalPlan {
    pub eval_interval: u64,
    pub num_steps: u64,
    pub seconds_per_step: f64,
}

/// A trial with events at every multiple of `eval_interval` up to `num_steps`.
pub fn generate_trial(
    model: &CurveModel,
    plan: &EvalPlan,
    key: TrialKey,
    point: HyperparameterPoint,
    seed: u64,
) -> Result<TrialRecord> {
    model.validate()?;
    if plan.eval_interval == 0 || plan.eval_interval > plan.num_steps {
        return Err(Error::InvalidValue {
            field: "eval_interval".into(),
            reason: format!("need 1 <= eval_interval <= num_steps ({})", plan.num_steps),
        });
    }
    if !(plan.seconds_per_step > 0.0 && plan.seconds_per_step.is_finite()) {
        return Err(Error::InvalidValue {
            field: "seconds_per_step".into(),
            reason: format!("must be > 0, got {}", plan.seconds_per_step),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise = |scale: f64| {
        let z: f64 = rng.sample(StandardNormal);
        z * scale
    };
    let events = (1..=plan.num_steps / plan.eval_interval)
        .map(|k| {
            let step = k * plan.eval_interval;
            let mean = model.mean_at(step);
            EvalEvent {
                step,
                runtime: step as f64 * plan.seconds_per_step,
                validation: mean + noise(model.noise_scale),
                test: Some(mean + model.test_offset + noise(model.noise_scale)),
            }
        })
        .collect();
    TrialRecord::new(key, point, events, TrialStatus::Completed)
}

/// Maps a workload and a hyperparameter point to the curve a trial would follow.
pub type CurveFamily = Arc<dyn Fn(&WorkloadSpec, &HyperparameterPoint) -> CurveModel + Send + Sync>;

#[derive(Clone)]
pub struct MockSubmission {
    pub id: String,
    pub space: SearchSpace,
    pub family: CurveFamily,
    /// Multiplies the nominal seconds per step.
    pub time_scale: f64,
}

impl fmt::Debug for MockSubmission {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MockSubmission")
            .field("id", &self.id)
            .field("space", &self.space)
            .field("time_scale", &self.time_scale)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MockSettings {
    pub scoring: ScoringOptions,
    pub integration: Integration,
    /// Evaluations over a nominal run.
    pub evals_per_run: u64,
    pub exec: Execution,
}

impl MockSettings {
    pub fn for_config(config: &BenchmarkConfig) -> Self {
        MockSettings {
            scoring: ScoringOptions::new(config.ruleset),
            integration: Integration::Exact,
            evals_per_run: 50,
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MockOutcome {
    pub trials: Vec<TrialRecord>,
    pub scored: ScoredLogs,
}

/// Independent 64-bit seed for stream `stream` under tag `tag`.
pub fn sub_seed(seed: u64, tag: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ tag.rotate_left(32));
    rng.set_stream(stream);
    rng.next_u64()
}

struct Job<'a> {
    submission: &'a MockSubmission,
    workload: &'a WorkloadSpec,
    key: TrialKey,
    point: HyperparameterPoint,
    seed: u64,
}

/// Samples points, generates every trial, and scores the result through the
/// same path used for real logs.
pub fn run_mock_competition(
    config: &BenchmarkConfig,
    submissions: &[MockSubmission],
    seed: u64,
    settings: &MockSettings,
) -> Result<MockOutcome> {
    let ruleset = settings.scoring.ruleset;
    ruleset.validate()?;
    let per_study = ruleset.trials_per_study();
    let n_studies = ruleset.studies() as u64;

    // seeds depend on (workload, study, trial) only
    let mut jobs = Vec::new();
    for sub in submissions {
        for (w, workload) in config.workloads.iter().enumerate() {
            for study in 0..n_studies {
                let cell = w as u64 * n_studies + study;
                let count = match &sub.space {
                    SearchSpace::OptList { points } => per_study.min(points.len()),
                    SearchSpace::Box { .. } => per_study,
                };
                let points = sub.space.sample(count, sub_seed(seed, 1, cell))?;
                for (t, point) in points.into_iter().enumerate() {
                    jobs.push(Job {
                        submission: sub,
                        workload,
                        key: TrialKey {
                            submission: sub.id.clone(),
                            workload: workload.id.clone(),
                            study: study as u32,
                            trial: t as u32,
                        },
                        point,
                        seed: sub_seed(seed, 2, cell * per_study as u64 + t as u64),
                    });
                }
            }
        }
    }

    let multiplier = settings.scoring.multiplier();
    let generated = settings.exec.map(&jobs, |job| {
        let nominal = job.workload.max_steps.unwrap_or(DEFAULT_NUM_STEPS);
        let plan = EvalPlan {
            eval_interval: (nominal / settings.evals_per_run.max(1)).max(1),
            num_steps: (nominal as f64 * multiplier).ceil() as u64,
            seconds_per_step: job.workload.max_runtime / nominal as f64 * job.submission.time_scale,
        };
        let model = (job.submission.family)(job.workload, &job.point);
        generate_trial(&model, &plan, job.key.clone(), job.point.clone(), job.seed)
    });
    let mut trials = generated.into_iter().collect::<Result<Vec<_>>>()?;
    trials.sort_by(|a, b| a.key.cmp(&b.key));

    let scored = score_logs(config, &trials, &settings.scoring, settings.integration, settings.exec)?;
    Ok(MockOutcome { trials, scored })
}

/// A family whose quality depends on how close `param` is to `optimum` on a log scale.
///
/// Points near the optimum settle `margin` beyond the validation target;
/// far points settle short of it. `speed` scales the convergence rate.
pub fn log_bowl_family(param: &str, optimum: f64, margin: f64, speed: f64, noise: f64) -> CurveFamily {
    let param = param.to_owned();
    Arc::new(move |w: &WorkloadSpec, point: &HyperparameterPoint| {
        let x = point.get(&param).and_then(|v| v.as_f64()).unwrap_or(optimum);
        let distance = (x.log10() - optimum.log10()).abs();
        let quality = (-distance * distance).exp();
        let scale = w.validation_target.abs().max(1e-12);
        let sign = match w.direction {
            MetricDirection::Minimize => 1.0,
            MetricDirection::Maximize => -1.0,
        };
        let settle = margin * (2.0 * quality - 1.0);
        let nominal = w.max_steps.unwrap_or(DEFAULT_NUM_STEPS) as f64;
        CurveModel {
            asymptote: w.validation_target - sign * settle * scale,
            amplitude: sign * scale,
            rate: speed * 5.0 / nominal,
            noise_scale: noise * scale,
            direction: w.direction,
            test_offset: w.test_target - w.validation_target,
        }
    })
}
