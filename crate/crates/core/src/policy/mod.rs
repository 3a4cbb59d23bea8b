//! Token-level linear-softmax policies.
//!
//! The next-token distribution is `softmax(Wᵀφ(task, prefix) / τ)` where `φ`
//! is a sparse feature vector produced by a [`FeatureMap`] and `W` is a
//! `feature_dim × |vocab|` matrix stored row-major.

pub mod checkpoint;
pub mod decode;
pub mod features;
pub mod grpo;

pub use decode::{decode, DecodeMode, Rollout};
pub use features::{base_prior, feature_map, BlocksworldFeatures, CountdownFeatures};
pub use grpo::{grpo_advantages, grpo_update, GrpoConfig, LrSchedule, StepDiagnostics};

use crate::envs::{TaskInstance, Token};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Sparse feature vector as `(index, value)` pairs.
pub type SparseFeatures = Vec<(usize, f64)>;

/// Incremental feature computation along one decoded sequence.
pub trait Cursor {
    /// Features of the current prefix, written into `out` (cleared first).
    fn features(&mut self, out: &mut SparseFeatures);
    fn push(&mut self, token: Token);
}

/// Maps `(task, prefix)` to a feature vector.
pub trait FeatureMap: Send + Sync {
    fn dim(&self) -> usize;
    fn vocab_size(&self) -> usize;
    fn cursor<'a>(&'a self, task: &'a TaskInstance) -> Box<dyn Cursor + 'a>;

    /// Dense features of `prefix`, replayed from the start of the sequence.
    fn features(&self, task: &TaskInstance, prefix: &[Token]) -> Vec<f64> {
        let mut cur = self.cursor(task);
        for &t in prefix {
            cur.push(t);
        }
        let mut sparse = SparseFeatures::new();
        cur.features(&mut sparse);
        let mut dense = vec![0.0; self.dim()];
        for (i, v) in sparse {
            dense[i] += v;
        }
        dense
    }
}

/// Anything that can answer a task with a token sequence.
pub trait Policy: Sync {
    fn rollout(&self, task: &TaskInstance, mode: DecodeMode, rng: &mut Rng, max_len: usize) -> Result<Rollout>;
}

/// A parameter set paired with its feature map.
#[derive(Clone, Copy)]
pub struct LinearPolicy<'a> {
    pub params: &'a PolicyParams,
    pub fmap: &'a dyn FeatureMap,
}

impl Policy for LinearPolicy<'_> {
    fn rollout(&self, task: &TaskInstance, mode: DecodeMode, rng: &mut Rng, max_len: usize) -> Result<Rollout> {
        decode(self.params, self.fmap, task, mode, rng, max_len)
    }
}

/// Replays each task's oracle certificate.
#[derive(Debug, Clone, Copy, Default)]
pub struct OraclePolicy;

impl Policy for OraclePolicy {
    fn rollout(&self, task: &TaskInstance, _: DecodeMode, _: &mut Rng, _: usize) -> Result<Rollout> {
        let tokens = task.certificate.tokens();
        Ok(Rollout {
            task_id: task.id.clone(),
            logprobs: vec![0.0; tokens.len()],
            tokens,
            reward: None,
            truncated: false,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub vocab: Vec<String>,
    pub end_token: Token,
    pub feature_dim: usize,
    /// Row-major `feature_dim × vocab.len()`.
    pub weights: Vec<f64>,
    pub temperature_default: f64,
}

impl PolicyParams {
    pub fn zeros(vocab: &[&str], end_token: Token, feature_dim: usize, temperature_default: f64) -> Result<Self> {
        let p = PolicyParams {
            vocab: vocab.iter().map(|s| s.to_string()).collect(),
            end_token,
            feature_dim,
            weights: vec![0.0; feature_dim * vocab.len()],
            temperature_default,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab.len() < 2 {
            return Err(Error::config("vocabulary needs at least two tokens"));
        }
        if self.end_token as usize >= self.vocab.len() {
            return Err(Error::config("end token outside the vocabulary"));
        }
        if self.feature_dim == 0 {
            return Err(Error::config("feature_dim must be positive"));
        }
        if self.weights.len() != self.feature_dim * self.vocab.len() {
            return Err(Error::config(format!(
                "weights have {} entries, expected feature_dim × |vocab| = {}",
                self.weights.len(),
                self.feature_dim * self.vocab.len()
            )));
        }
        if !(self.temperature_default > 0.0 && self.temperature_default.is_finite()) {
            return Err(Error::config("temperature_default must be positive and finite"));
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Numeric("non-finite policy weight".into()));
        }
        Ok(())
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn weight(&self, feature: usize, token: Token) -> f64 {
        self.weights[feature * self.vocab.len() + token as usize]
    }

    pub fn weight_mut(&mut self, feature: usize, token: Token) -> &mut f64 {
        let v = self.vocab.len();
        &mut self.weights[feature * v + token as usize]
    }

    /// `Wᵀφ / temperature`.
    pub fn logits(&self, feats: &[(usize, f64)], temperature: f64) -> Vec<f64> {
        let v = self.vocab.len();
        let mut out = vec![0.0; v];
        for &(f, x) in feats {
            let row = &self.weights[f * v..(f + 1) * v];
            for (o, w) in out.iter_mut().zip(row) {
                *o += w * x;
            }
        }
        for o in &mut out {
            *o /= temperature;
        }
        out
    }

    pub fn distribution(&self, feats: &[(usize, f64)], temperature: f64) -> Vec<f64> {
        softmax(&self.logits(feats, temperature))
    }

    pub fn log_distribution(&self, feats: &[(usize, f64)], temperature: f64) -> Vec<f64> {
        log_softmax(&self.logits(feats, temperature))
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|&x| (x - m).exp()).sum::<f64>().ln();
    logits.iter().map(|&x| x - lse).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_sums_to_one() {
        let p = softmax(&[1000.0, -1000.0, 3.0, 3.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let lp = log_softmax(&[0.5, 0.5]);
        assert!((lp[0] - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn logits_scale_with_temperature() {
        let mut p = PolicyParams::zeros(&["a", "b"], 1, 2, 1.0).unwrap();
        *p.weight_mut(0, 0) = 2.0;
        *p.weight_mut(1, 1) = -1.0;
        assert_eq!(p.logits(&[(0, 1.0), (1, 3.0)], 1.0), vec![2.0, -3.0]);
        assert_eq!(p.logits(&[(0, 1.0), (1, 3.0)], 2.0), vec![1.0, -1.5]);
    }

    #[test]
    fn validation_rejects_bad_shapes() {
        assert!(PolicyParams::zeros(&["a"], 0, 2, 1.0).is_err());
        assert!(PolicyParams::zeros(&["a", "b"], 2, 2, 1.0).is_err());
        assert!(PolicyParams::zeros(&["a", "b"], 1, 2, 0.0).is_err());
    }
}
