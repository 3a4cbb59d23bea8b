//! Curriculum samplers.
//!
//! Each sampler maps a training step `t ∈ [0, T]` to a probability
//! distribution over `K` difficulty levels, indexed from zero (level 0 is the
//! easiest). All samplers are pure; randomness only enters through
//! [`LevelDistribution::sample`], which borrows a caller-owned stream.
//!
//! | kind        | unnormalized weight of level `k` at step `t`                          |
//! |-------------|-----------------------------------------------------------------------|
//! | traditional | `1` iff `τ_k ≤ t < τ_{k+1}` (the last stage is closed at `T`)          |
//! | balanced    | `1`                                                                   |
//! | cosine      | `α_t (K−k−1) + (1−α_t) k`, `α_t = (1 + cos(πt/T)) / 2`                 |
//! | gaussian    | `exp(−(x_t − k)² / 2σ²)`, `x_t = (t/T)^β (K−1)`                        |

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    Traditional,
    Balanced,
    Cosine,
    Gaussian,
}

impl std::str::FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "traditional" | "cl" => Ok(ScheduleKind::Traditional),
            "balanced" => Ok(ScheduleKind::Balanced),
            "cosine" => Ok(ScheduleKind::Cosine),
            "gaussian" => Ok(ScheduleKind::Gaussian),
            other => Err(Error::config(format!("unknown schedule kind `{other}`"))),
        }
    }
}

/// The three Gaussian `(beta, sigma)` settings shipped as presets.
pub const GAUSSIAN_PRESETS: [(f64, f64); 3] = [(0.25, 0.75), (0.5, 0.5), (0.75, 0.25)];

fn default_beta() -> f64 {
    0.5
}

fn default_sigma() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub kind: ScheduleKind,
    /// Number of difficulty levels.
    pub levels: usize,
    /// Total number of training steps.
    pub steps: u64,
    /// Stage boundaries `τ_0 = 0 ≤ … ≤ τ_K = T` for the traditional sampler.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<Vec<u64>>,
    /// Gaussian speed exponent.
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Gaussian spread.
    #[serde(default = "default_sigma")]
    pub sigma: f64,
}

impl ScheduleSpec {
    pub fn new(kind: ScheduleKind, levels: usize, steps: u64) -> Self {
        ScheduleSpec {
            kind,
            levels,
            steps,
            thresholds: None,
            beta: default_beta(),
            sigma: default_sigma(),
        }
    }

    pub fn gaussian(levels: usize, steps: u64, beta: f64, sigma: f64) -> Self {
        ScheduleSpec {
            beta,
            sigma,
            ..Self::new(ScheduleKind::Gaussian, levels, steps)
        }
    }

    /// Traditional sampler with explicit stage boundaries.
    pub fn traditional(levels: usize, steps: u64, thresholds: Option<Vec<u64>>) -> Self {
        ScheduleSpec {
            thresholds,
            ..Self::new(ScheduleKind::Traditional, levels, steps)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 {
            return Err(Error::config("schedule.levels must be at least 1"));
        }
        if self.steps == 0 {
            return Err(Error::config("schedule.steps must be at least 1"));
        }
        match self.kind {
            ScheduleKind::Gaussian => {
                if !(self.beta > 0.0 && self.beta.is_finite()) {
                    return Err(Error::config(format!(
                        "schedule.beta must be a positive finite number, got {}",
                        self.beta
                    )));
                }
                if !(self.sigma > 0.0 && self.sigma.is_finite()) {
                    return Err(Error::config(format!(
                        "schedule.sigma must be a positive finite number, got {}",
                        self.sigma
                    )));
                }
            }
            ScheduleKind::Traditional => {
                if let Some(tau) = &self.thresholds {
                    check_thresholds(tau, self.levels, self.steps)?;
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Stage boundaries, falling back to `K` equal-length segments of `[0, T]`.
    pub fn effective_thresholds(&self) -> Vec<u64> {
        match &self.thresholds {
            Some(tau) => tau.clone(),
            None => equal_thresholds(self.levels, self.steps),
        }
    }

    /// The sampling distribution at step `t`.
    pub fn distribution(&self, t: u64) -> Result<LevelDistribution> {
        self.validate()?;
        if t > self.steps {
            return Err(Error::config(format!(
                "step {t} is outside the schedule horizon [0, {}]",
                self.steps
            )));
        }
        Ok(match self.kind {
            ScheduleKind::Traditional => {
                let tau = self.thresholds.as_deref().ok_or_else(|| {
                    Error::config("traditional schedule requires thresholds")
                })?;
                schedule_traditional(tau, self.levels, self.steps, t)
            }
            ScheduleKind::Balanced => schedule_balanced(self.levels),
            ScheduleKind::Cosine => schedule_cosine(self.levels, self.steps, t),
            ScheduleKind::Gaussian => {
                schedule_gaussian(self.levels, self.steps, t, self.beta, self.sigma)
            }
        })
    }

    /// Like [`distribution`](Self::distribution), but a traditional schedule
    /// without explicit thresholds uses equal-length stages.
    pub fn distribution_or_default(&self, t: u64) -> Result<LevelDistribution> {
        if self.kind == ScheduleKind::Traditional && self.thresholds.is_none() {
            let filled = ScheduleSpec {
                thresholds: Some(self.effective_thresholds()),
                ..self.clone()
            };
            return filled.distribution(t);
        }
        self.distribution(t)
    }

    /// The full `(T+1) × K` probability matrix.
    pub fn matrix(&self) -> Result<Vec<LevelDistribution>> {
        (0..=self.steps)
            .map(|t| self.distribution_or_default(t))
            .collect()
    }
}

fn check_thresholds(tau: &[u64], levels: usize, steps: u64) -> Result<()> {
    if tau.len() != levels + 1 {
        return Err(Error::config(format!(
            "schedule.thresholds must have K+1 = {} entries, got {}",
            levels + 1,
            tau.len()
        )));
    }
    if tau[0] != 0 || tau[levels] != steps {
        return Err(Error::config(format!(
            "schedule.thresholds must start at 0 and end at T = {steps}"
        )));
    }
    if tau.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::config("schedule.thresholds must be nondecreasing"));
    }
    Ok(())
}

pub fn equal_thresholds(levels: usize, steps: u64) -> Vec<u64> {
    (0..=levels as u64)
        .map(|k| k * steps / levels as u64)
        .collect()
}

/// A normalized distribution over difficulty levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelDistribution {
    pub probs: Vec<f64>,
}

impl LevelDistribution {
    /// Normalizes nonnegative weights. Panics if every weight is zero.
    pub fn from_weights(weights: Vec<f64>) -> Self {
        let total: f64 = weights.iter().sum();
        assert!(total > 0.0, "level weights must not all be zero");
        LevelDistribution {
            probs: weights.into_iter().map(|w| w / total).collect(),
        }
    }

    pub fn point_mass(levels: usize, k: usize) -> Self {
        let mut probs = vec![0.0; levels];
        probs[k] = 1.0;
        LevelDistribution { probs }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Most likely level, lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (k, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = k;
            }
        }
        best
    }

    /// Draws a level by inverting the cumulative distribution.
    pub fn sample(&self, rng: &mut Rng) -> usize {
        self.quantile(rng.gen())
    }

    /// The level whose cumulative interval contains `u ∈ [0, 1)`.
    pub fn quantile(&self, u: f64) -> usize {
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (k, &p) in self.probs.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            last_positive = k;
            acc += p;
            if u < acc {
                return k;
            }
        }
        last_positive
    }
}

pub fn sample_level(dist: &LevelDistribution, rng: &mut Rng) -> usize {
    dist.sample(rng)
}

/// Randomized golden-ratio sequence `u_t = frac(u_0 + t (√5 − 1)/2)`.
///
/// Each `u_t` is uniform on `[0, 1)` when `u_0` is, so `dist.quantile(u_t)`
/// has law `dist`; consecutive values are evenly spread, which keeps level
/// counts over any window close to the window's mean distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelStream {
    offset: f64,
}

impl LevelStream {
    const STEP: f64 = 0.618_033_988_749_894_9;

    pub fn new(rng: &mut Rng) -> Self {
        LevelStream { offset: rng.gen() }
    }

    pub fn uniform(&self, t: u64) -> f64 {
        let frac = ((t as f64) * Self::STEP).fract();
        (self.offset + frac).fract()
    }

    pub fn level(&self, dist: &LevelDistribution, t: u64) -> usize {
        dist.quantile(self.uniform(t))
    }
}

pub fn schedule_traditional(tau: &[u64], levels: usize, steps: u64, t: u64) -> LevelDistribution {
    let k = if t >= steps {
        levels - 1
    } else {
        // Last stage whose start is at or before t; empty stages are skipped.
        (0..levels).rev().find(|&k| tau[k] <= t && t < tau[k + 1]).unwrap_or(0)
    };
    LevelDistribution::point_mass(levels, k)
}

pub fn schedule_balanced(levels: usize) -> LevelDistribution {
    LevelDistribution {
        probs: vec![1.0 / levels as f64; levels],
    }
}

pub fn cosine_alpha(steps: u64, t: u64) -> f64 {
    0.5 * (1.0 + (std::f64::consts::PI * t as f64 / steps as f64).cos())
}

pub fn schedule_cosine(levels: usize, steps: u64, t: u64) -> LevelDistribution {
    if levels == 1 {
        return LevelDistribution { probs: vec![1.0] };
    }
    let alpha = cosine_alpha(steps, t);
    let k_max = (levels - 1) as f64;
    let weights = (0..levels)
        .map(|k| {
            let k = k as f64;
            alpha * (k_max - k) + (1.0 - alpha) * k
        })
        .collect();
    LevelDistribution::from_weights(weights)
}

/// Moving sampling position `x_t = (t/T)^β (K−1)`.
pub fn gaussian_position(levels: usize, steps: u64, t: u64, beta: f64) -> f64 {
    (t as f64 / steps as f64).powf(beta) * (levels - 1) as f64
}

pub fn schedule_gaussian(
    levels: usize,
    steps: u64,
    t: u64,
    beta: f64,
    sigma: f64,
) -> LevelDistribution {
    let x = gaussian_position(levels, steps, t, beta);
    let exponents: Vec<f64> = (0..levels)
        .map(|k| {
            let d = x - k as f64;
            -d * d / (2.0 * sigma * sigma)
        })
        .collect();
    // Shift by the largest exponent so tiny sigmas cannot underflow every weight.
    let top = exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    LevelDistribution::from_weights(exponents.iter().map(|e| (e - top).exp()).collect())
}
