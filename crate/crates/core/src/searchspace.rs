//! Search spaces, quasirandom sampling, OptList sampling and the greedy OptList builder.

use std::collections::HashSet;
use std::hash::Hash;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{HyperparameterPoint, ParamValue};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimensionKind {
    LogUniform { lo: f64, hi: f64 },
    LinearUniform { lo: f64, hi: f64 },
    Discrete { values: Vec<ParamValue> },
    Fixed { value: ParamValue },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionSpec {
    pub name: String,
    pub kind: DimensionKind,
}

impl DimensionSpec {
    pub fn new(name: impl Into<String>, kind: DimensionKind) -> Result<Self> {
        let spec = DimensionSpec {
            name: name.into(),
            kind,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| {
            Err(Error::InvalidSearchSpace {
                space: self.name.clone(),
                reason,
            })
        };
        match &self.kind {
            DimensionKind::LogUniform { lo, hi } => {
                if !(*lo > 0.0 && lo < hi && hi.is_finite()) {
                    return bad(format!("log-uniform needs 0 < lo < hi, got [{lo}, {hi}]"));
                }
            }
            DimensionKind::LinearUniform { lo, hi } => {
                if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                    return bad(format!("linear needs lo < hi, got [{lo}, {hi}]"));
                }
            }
            DimensionKind::Discrete { values } => {
                if values.is_empty() {
                    return bad("discrete dimension has no values".into());
                }
                for (i, v) in values.iter().enumerate() {
                    if values[..i].contains(v) {
                        return bad(format!("duplicate discrete value {v}"));
                    }
                }
            }
            DimensionKind::Fixed { .. } => {}
        }
        Ok(())
    }

    /// Maps a unit coordinate `u` in [0, 1] onto this dimension.
    pub fn map_unit(&self, u: f64) -> ParamValue {
        match &self.kind {
            DimensionKind::LogUniform { lo, hi } => ParamValue::Real(lo * (hi / lo).powf(u)),
            DimensionKind::LinearUniform { lo, hi } => ParamValue::Real(lo + u * (hi - lo)),
            DimensionKind::Discrete { values } => {
                let k = values.len();
                let idx = ((u * k as f64).floor() as usize).min(k - 1);
                values[idx].clone()
            }
            DimensionKind::Fixed { value } => value.clone(),
        }
    }

    /// Whether `value` lies inside the dimension's support.
    pub fn contains(&self, value: &ParamValue) -> bool {
        match &self.kind {
            DimensionKind::LogUniform { lo, hi } | DimensionKind::LinearUniform { lo, hi } => {
                value.as_f64().is_some_and(|v| *lo <= v && v <= *hi)
            }
            DimensionKind::Discrete { values } => values.contains(value),
            DimensionKind::Fixed { value: fixed } => fixed == value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SearchSpace {
    Box { dimensions: Vec<DimensionSpec> },
    OptList { points: Vec<HyperparameterPoint> },
}

impl SearchSpace {
    pub fn validate(&self, name: &str) -> Result<()> {
        let bad = |reason: String| {
            Err(Error::InvalidSearchSpace {
                space: name.to_owned(),
                reason,
            })
        };
        match self {
            SearchSpace::Box { dimensions } => {
                let mut seen = HashSet::new();
                for d in dimensions {
                    d.validate()?;
                    if !seen.insert(d.name.as_str()) {
                        return bad(format!("duplicate dimension `{}`", d.name));
                    }
                }
            }
            SearchSpace::OptList { points } => {
                if let Some(first) = points.first() {
                    for (i, p) in points.iter().enumerate() {
                        if !p.keys().eq(first.keys()) {
                            return bad(format!("point {i} has a different key set"));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Membership of a point in this space.
    pub fn contains(&self, point: &HyperparameterPoint) -> bool {
        match self {
            SearchSpace::Box { dimensions } => {
                point.len() == dimensions.len()
                    && dimensions
                        .iter()
                        .all(|d| point.get(&d.name).is_some_and(|v| d.contains(v)))
            }
            SearchSpace::OptList { points } => points.contains(point),
        }
    }

    /// Draws `count` points: quasirandom for boxes, without replacement for lists.
    pub fn sample(&self, count: usize, seed: u64) -> Result<Vec<HyperparameterPoint>> {
        match self {
            SearchSpace::Box { .. } => sample_quasirandom(self, count, seed),
            SearchSpace::OptList { .. } => sample_optlist(self, count, seed),
        }
    }
}

/// Seeded scrambled Halton sequence.
///
/// Dimension `j` uses the `j`-th prime as its base. Every digit position of
/// every dimension gets its own random permutation of `0..base`, drawn from a
/// ChaCha stream seeded by `seed`. A fixed number of digits is used per base,
/// enough to resolve a double.
#[derive(Debug, Clone)]
pub struct ScrambledHalton {
    bases: Vec<u64>,
    // perms[j][k] is the permutation for digit k of dimension j
    perms: Vec<Vec<Vec<u64>>>,
}

impl ScrambledHalton {
    pub fn new(dimensions: usize, seed: u64) -> Self {
        let bases = first_primes(dimensions);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let perms = bases
            .iter()
            .map(|&b| {
                let digits = digits_for_base(b);
                (0..digits)
                    .map(|_| {
                        let mut p: Vec<u64> = (0..b).collect();
                        p.shuffle(&mut rng);
                        p
                    })
                    .collect()
            })
            .collect();
        ScrambledHalton { bases, perms }
    }

    pub fn dimensions(&self) -> usize {
        self.bases.len()
    }

    /// Coordinates of the `index`-th point, each in [0, 1).
    pub fn point(&self, index: u64) -> Vec<f64> {
        self.bases
            .iter()
            .zip(&self.perms)
            .map(|(&base, perms)| {
                let mut n = index;
                let mut scale = 1.0 / base as f64;
                let mut u = 0.0;
                for perm in perms {
                    let digit = n % base;
                    n /= base;
                    u += perm[digit as usize] as f64 * scale;
                    scale /= base as f64;
                }
                u.min(1.0 - f64::EPSILON)
            })
            .collect()
    }
}

fn digits_for_base(base: u64) -> usize {
    (53.0 / (base as f64).log2()).ceil() as usize
}

fn first_primes(n: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(n);
    let mut candidate = 2u64;
    while primes.len() < n {
        if primes.iter().take_while(|&&p| p * p <= candidate).all(|&p| !candidate.is_multiple_of(p)) {
            primes.push(candidate);
        }
        candidate += 1;
    }
    primes
}

/// `count` points from a box space via the scrambled Halton sequence.
pub fn sample_quasirandom(
    space: &SearchSpace,
    count: usize,
    seed: u64,
) -> Result<Vec<HyperparameterPoint>> {
    let SearchSpace::Box { dimensions } = space else {
        return Err(Error::WrongSpaceKind { expected: "box" });
    };
    if dimensions.is_empty() {
        return Err(Error::EmptySpace);
    }
    if count == 0 {
        return Err(Error::InvalidValue {
            field: "count".into(),
            reason: "must be >= 1".into(),
        });
    }
    let seq = ScrambledHalton::new(dimensions.len(), seed);
    Ok((0..count as u64)
        .map(|i| {
            dimensions
                .iter()
                .zip(seq.point(i))
                .map(|(d, u)| (d.name.clone(), d.map_unit(u)))
                .collect()
        })
        .collect())
}

/// A uniformly random `count`-subset of the list, in shuffled order.
pub fn sample_optlist(
    space: &SearchSpace,
    count: usize,
    seed: u64,
) -> Result<Vec<HyperparameterPoint>> {
    let SearchSpace::OptList { points } = space else {
        return Err(Error::WrongSpaceKind { expected: "opt_list" });
    };
    if points.is_empty() {
        return Err(Error::EmptySpace);
    }
    if count > points.len() {
        return Err(Error::BudgetExceedsList {
            requested: count,
            available: points.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..points.len()).collect();
    let (chosen, _) = idx.partial_shuffle(&mut rng, count);
    Ok(chosen.iter().map(|&i| points[i].clone()).collect())
}

/// Greedy round-robin construction of a list of `budget` distinct candidates.
///
/// Workloads are visited in the order given; each visit appends that
/// workload's highest-ranked candidate not yet chosen. Workloads whose
/// rankings are exhausted are skipped.
pub fn build_optlist<T>(rankings: &[Vec<T>], budget: usize) -> Result<Vec<T>>
where
    T: Clone + Eq + Hash,
{
    if budget == 0 {
        return Err(Error::InvalidValue {
            field: "budget".into(),
            reason: "must be >= 1".into(),
        });
    }
    if rankings.is_empty() || rankings.iter().any(Vec::is_empty) {
        return Err(Error::InvalidValue {
            field: "rankings".into(),
            reason: "every workload needs a nonempty ranking".into(),
        });
    }
    let available = rankings.iter().flatten().collect::<HashSet<_>>().len();
    if available < budget {
        return Err(Error::InsufficientCandidates {
            requested: budget,
            available,
        });
    }
    let mut chosen = Vec::with_capacity(budget);
    let mut seen: HashSet<T> = HashSet::with_capacity(budget);
    let mut cursors = vec![0usize; rankings.len()];
    while chosen.len() < budget {
        for (ranking, cursor) in rankings.iter().zip(cursors.iter_mut()) {
            if chosen.len() == budget {
                break;
            }
            while *cursor < ranking.len() && seen.contains(&ranking[*cursor]) {
                *cursor += 1;
            }
            if let Some(candidate) = ranking.get(*cursor) {
                seen.insert(candidate.clone());
                chosen.push(candidate.clone());
                *cursor += 1;
            }
        }
    }
    Ok(chosen)
}
