//! Learning-rate schedules: warmup + cosine decay, and warmup + linear decay + constant.
//!
//! The absolute-step specs are the source of truth. The `from_relative`
//! constructors accept the usual percentage parameterization and round to
//! whole steps.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarmupCosineSpec {
    pub base_lr: f64,
    pub num_steps: u64,
    pub warmup_steps: u64,
}

impl WarmupCosineSpec {
    pub fn new(base_lr: f64, num_steps: u64, warmup_steps: u64) -> Result<Self> {
        check_base_lr(base_lr)?;
        if !(0 < warmup_steps && warmup_steps < num_steps) {
            return Err(Error::InvalidSchedule(format!(
                "need 0 < warmup_steps ({warmup_steps}) < num_steps ({num_steps})"
            )));
        }
        Ok(WarmupCosineSpec {
            base_lr,
            num_steps,
            warmup_steps,
        })
    }

    /// `warmup_fraction` is a fraction of `num_steps` (0.05 for 5%).
    pub fn from_relative(base_lr: f64, num_steps: u64, warmup_fraction: f64) -> Result<Self> {
        let warmup_steps = round_steps(warmup_fraction * num_steps as f64);
        WarmupCosineSpec::new(base_lr, num_steps, warmup_steps)
    }

    pub fn learning_rate(&self, step: u64) -> Result<f64> {
        check_step(step, self.num_steps)?;
        let t = step as f64;
        let warmup = self.warmup_steps as f64;
        if step <= self.warmup_steps {
            return Ok(self.base_lr * t / warmup);
        }
        let progress = (t - warmup) / (self.num_steps as f64 - warmup);
        Ok(self.base_lr / 2.0 * (1.0 + (PI * progress).cos()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarmupLinearConstantSpec {
    pub base_lr: f64,
    pub num_steps: u64,
    pub warmup_steps: u64,
    pub decay_factor: f64,
    /// Absolute step at which the linear decay ends, counted from step 0.
    pub decay_steps: u64,
}

impl WarmupLinearConstantSpec {
    pub fn new(
        base_lr: f64,
        num_steps: u64,
        warmup_steps: u64,
        decay_factor: f64,
        decay_steps: u64,
    ) -> Result<Self> {
        check_base_lr(base_lr)?;
        if !(decay_factor > 0.0 && decay_factor <= 1.0) {
            return Err(Error::InvalidSchedule(format!(
                "decay_factor must lie in (0, 1], got {decay_factor}"
            )));
        }
        if !(0 < warmup_steps && warmup_steps <= decay_steps && decay_steps <= num_steps) {
            return Err(Error::InvalidSchedule(format!(
                "need 0 < warmup_steps ({warmup_steps}) <= decay_steps ({decay_steps}) <= num_steps ({num_steps})"
            )));
        }
        Ok(WarmupLinearConstantSpec {
            base_lr,
            num_steps,
            warmup_steps,
            decay_factor,
            decay_steps,
        })
    }

    /// `decay_fraction` is relative to the steps after warmup, so the linear
    /// decay ends at `warmup + round(decay_fraction * (num_steps - warmup))`.
    pub fn from_relative(
        base_lr: f64,
        num_steps: u64,
        warmup_fraction: f64,
        decay_factor: f64,
        decay_fraction: f64,
    ) -> Result<Self> {
        let warmup_steps = round_steps(warmup_fraction * num_steps as f64);
        let rest = num_steps.saturating_sub(warmup_steps) as f64;
        let decay_steps = warmup_steps + round_steps(decay_fraction * rest);
        WarmupLinearConstantSpec::new(base_lr, num_steps, warmup_steps, decay_factor, decay_steps)
    }

    pub fn reduced_lr(&self) -> f64 {
        self.base_lr * self.decay_factor
    }

    pub fn learning_rate(&self, step: u64) -> Result<f64> {
        check_step(step, self.num_steps)?;
        let t = step as f64;
        let warmup = self.warmup_steps as f64;
        let decay = self.decay_steps as f64;
        if step <= self.warmup_steps {
            Ok(self.base_lr * t / warmup)
        } else if step <= self.decay_steps {
            let span = decay - warmup;
            Ok(self.base_lr * (decay - t) / span + self.reduced_lr() * (t - warmup) / span)
        } else {
            Ok(self.reduced_lr())
        }
    }
}

pub fn warmup_cosine(step: u64, spec: &WarmupCosineSpec) -> Result<f64> {
    spec.learning_rate(step)
}

pub fn warmup_linear_constant(step: u64, spec: &WarmupLinearConstantSpec) -> Result<f64> {
    spec.learning_rate(step)
}

fn check_base_lr(base_lr: f64) -> Result<()> {
    if base_lr > 0.0 && base_lr.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidSchedule(format!("base_lr must be > 0, got {base_lr}")))
    }
}

fn check_step(step: u64, num_steps: u64) -> Result<()> {
    if step > num_steps {
        Err(Error::OutOfRangeStep { step, num_steps })
    } else {
        Ok(())
    }
}

fn round_steps(x: f64) -> u64 {
    x.round().max(0.0) as u64
}
