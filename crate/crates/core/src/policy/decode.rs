use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{log_softmax, FeatureMap, PolicyParams, SparseFeatures};
use crate::envs::{TaskInstance, Token};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DecodeMode {
    /// Argmax with lowest-index tie-break.
    Greedy,
    /// Temperature, then top-k (0 disables), then nucleus truncation.
    Sample { temperature: f64, top_p: f64, top_k: usize },
}

impl DecodeMode {
    /// Settings used for pass@k curves and difficulty probing.
    pub const PASS_AT_K: DecodeMode = DecodeMode::Sample {
        temperature: 0.7,
        top_p: 0.9,
        top_k: 50,
    };

    /// Untruncated sampling at `temperature`.
    pub fn plain(temperature: f64) -> Self {
        DecodeMode::Sample {
            temperature,
            top_p: 1.0,
            top_k: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let DecodeMode::Sample { temperature, top_p, .. } = *self {
            if !(temperature > 0.0 && temperature.is_finite()) {
                return Err(Error::config("sampling temperature must be positive"));
            }
            if !(top_p > 0.0 && top_p <= 1.0) {
                return Err(Error::config("top_p must lie in (0, 1]"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    pub task_id: String,
    pub tokens: Vec<Token>,
    /// Log-probability of each realized token under the untruncated softmax at
    /// the decode temperature (the default temperature for greedy decoding).
    pub logprobs: Vec<f64>,
    pub reward: Option<f64>,
    /// Set when `max_len` was reached without an end token.
    pub truncated: bool,
}

impl Rollout {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Greedy argmax, lowest index on ties.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Truncated sampling distribution from log-probabilities.
pub fn truncated_probs(logp: &[f64], top_p: f64, top_k: usize) -> Vec<f64> {
    let mut order: Vec<usize> = (0..logp.len()).collect();
    order.sort_by(|&a, &b| logp[b].total_cmp(&logp[a]).then(a.cmp(&b)));
    let k = if top_k == 0 { logp.len() } else { top_k.min(logp.len()) };
    let probs: Vec<f64> = order[..k].iter().map(|&i| logp[i].exp()).collect();
    let total: f64 = probs.iter().sum();
    let mut keep = 0;
    let mut cum = 0.0;
    for p in &probs {
        cum += p / total;
        keep += 1;
        if cum >= top_p {
            break;
        }
    }
    let mut out = vec![0.0; logp.len()];
    let kept: f64 = probs[..keep].iter().sum();
    for (j, &i) in order[..keep].iter().enumerate() {
        out[i] = probs[j] / kept;
    }
    out
}

fn sample_index(probs: &[f64], rng: &mut Rng) -> usize {
    let u: f64 = rng.gen();
    let mut cum = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        cum += p;
        last = i;
        if u < cum {
            return i;
        }
    }
    last
}

/// Autoregressive generation until the end token or `max_len` tokens.
pub fn decode(
    params: &PolicyParams,
    fmap: &dyn FeatureMap,
    task: &TaskInstance,
    mode: DecodeMode,
    rng: &mut Rng,
    max_len: usize,
) -> Result<Rollout> {
    mode.validate()?;
    if max_len == 0 {
        return Err(Error::config("max_len must be positive"));
    }
    if fmap.dim() != params.feature_dim || fmap.vocab_size() != params.vocab_size() {
        return Err(Error::config("feature map does not match the policy shape"));
    }
    let temperature = match mode {
        DecodeMode::Greedy => params.temperature_default,
        DecodeMode::Sample { temperature, .. } => temperature,
    };
    let mut cursor = fmap.cursor(task);
    let mut feats = SparseFeatures::new();
    let mut tokens = Vec::new();
    let mut logprobs = Vec::new();
    let mut truncated = true;
    while tokens.len() < max_len {
        cursor.features(&mut feats);
        let logp = log_softmax(&params.logits(&feats, temperature));
        let tok = match mode {
            DecodeMode::Greedy => argmax(&logp),
            DecodeMode::Sample { top_p, top_k, .. } => sample_index(&truncated_probs(&logp, top_p, top_k), rng),
        };
        tokens.push(tok as Token);
        logprobs.push(logp[tok]);
        if tok as Token == params.end_token {
            truncated = false;
            break;
        }
        cursor.push(tok as Token);
    }
    Ok(Rollout {
        task_id: task.id.clone(),
        tokens,
        logprobs,
        reward: None,
        truncated,
    })
}
