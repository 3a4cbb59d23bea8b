//! Group-relative policy optimization.
//!
//! For a group of `G` rollouts on one task the objective is
//!
//! ```text
//! J(W) = 1/G Σ_i 1/len_i Σ_t [ min(ρ_t A_i, clip(ρ_t, 1-ε, 1+ε) A_i) - κ k3_t ]
//! ```
//!
//! with `ρ_t = π_W(a_t) / π_behavior(a_t)`, group-normalized advantages `A_i`
//! and the non-negative KL estimator `k3 = r - ln r - 1`, `r = π_ref / π_W`.

use serde::{Deserialize, Serialize};

use super::{log_softmax, FeatureMap, PolicyParams, Rollout, SparseFeatures};
use crate::envs::TaskInstance;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrpoConfig {
    pub group_size: usize,
    pub kl_coeff: f64,
    pub clip_eps: f64,
    pub learning_rate: f64,
    pub adv_eps: f64,
    pub max_len: usize,
    /// Rescale the step gradient to at most this norm; `0` disables.
    pub max_grad_norm: f64,
    pub lr_schedule: LrSchedule,
}

/// Learning-rate decay over the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LrSchedule {
    Constant,
    /// `lr · (1 + cos(πt/T)) / 2`.
    Cosine,
}

impl LrSchedule {
    pub fn factor(self, t: u64, steps: u64) -> f64 {
        match self {
            LrSchedule::Constant => 1.0,
            LrSchedule::Cosine => 0.5 * (1.0 + (std::f64::consts::PI * t as f64 / steps.max(1) as f64).cos()),
        }
    }
}

impl Default for GrpoConfig {
    fn default() -> Self {
        GrpoConfig {
            group_size: 8,
            kl_coeff: 0.001,
            clip_eps: 0.2,
            learning_rate: 1.0,
            adv_eps: 1e-8,
            max_len: 64,
            max_grad_norm: 1.0,
            lr_schedule: LrSchedule::Cosine,
        }
    }
}

impl GrpoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.group_size < 2 {
            return Err(Error::config("grpo.group_size must be at least 2"));
        }
        if !(self.kl_coeff >= 0.0 && self.kl_coeff.is_finite()) {
            return Err(Error::config("grpo.kl_coeff must be non-negative"));
        }
        if !(self.clip_eps > 0.0 && self.clip_eps.is_finite()) {
            return Err(Error::config("grpo.clip_eps must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("grpo.learning_rate must be positive"));
        }
        if !(self.adv_eps >= 0.0) {
            return Err(Error::config("grpo.adv_eps must be non-negative"));
        }
        if !(self.max_grad_norm >= 0.0 && self.max_grad_norm.is_finite()) {
            return Err(Error::config("grpo.max_grad_norm must be non-negative"));
        }
        if self.max_len == 0 {
            return Err(Error::config("grpo.max_len must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub mean_reward: f64,
    pub mean_advantage: f64,
    pub kl: f64,
    pub grad_norm: f64,
}

/// `(r_i - mean) / (std + eps)` with the population standard deviation.
/// Groups whose rewards are all equal get exactly zero advantages.
pub fn grpo_advantages(rewards: &[f64], adv_eps: f64) -> Vec<f64> {
    let n = rewards.len() as f64;
    if rewards.iter().all(|&r| r == rewards[0]) {
        return vec![0.0; rewards.len()];
    }
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    rewards.iter().map(|r| (r - mean) / (std + adv_eps)).collect()
}

fn rewards(group: &[Rollout]) -> Result<Vec<f64>> {
    group
        .iter()
        .map(|r| r.reward.ok_or_else(|| Error::Contract(format!("rollout for task `{}` has no reward", r.task_id))))
        .collect()
}

fn check(params: &PolicyParams, fmap: &dyn FeatureMap, task: &TaskInstance, group: &[Rollout], reference: &PolicyParams) -> Result<()> {
    if group.is_empty() {
        return Err(Error::Contract("empty rollout group".into()));
    }
    if fmap.dim() != params.feature_dim || reference.weights.len() != params.weights.len() {
        return Err(Error::Contract("policy, reference and feature map shapes differ".into()));
    }
    for r in group {
        if r.task_id != task.id {
            return Err(Error::Contract(format!("rollout for `{}` in a group for `{}`", r.task_id, task.id)));
        }
        if r.tokens.is_empty() || r.tokens.len() != r.logprobs.len() {
            return Err(Error::Contract("rollout tokens and logprobs differ in length".into()));
        }
    }
    Ok(())
}

/// Objective value and (optionally) its gradient with respect to the weights.
fn evaluate(
    params: &PolicyParams,
    fmap: &dyn FeatureMap,
    task: &TaskInstance,
    group: &[Rollout],
    config: &GrpoConfig,
    reference: &PolicyParams,
    mut grad: Option<&mut [f64]>,
) -> Result<(f64, StepDiagnostics)> {
    check(params, fmap, task, group, reference)?;
    let rs = rewards(group)?;
    let adv = grpo_advantages(&rs, config.adv_eps);
    let g = group.len() as f64;
    let v = params.vocab_size();
    let tau = params.temperature_default;
    let tau_ref = reference.temperature_default;
    let mut objective = 0.0;
    let mut kl_total = 0.0;
    let mut kl_count = 0usize;
    let mut feats = SparseFeatures::new();
    for (rollout, &a) in group.iter().zip(&adv) {
        let len = rollout.tokens.len() as f64;
        let mut cursor = fmap.cursor(task);
        for (t, (&tok, &old_lp)) in rollout.tokens.iter().zip(&rollout.logprobs).enumerate() {
            if t > 0 {
                cursor.push(rollout.tokens[t - 1]);
            }
            cursor.features(&mut feats);
            let logits = params.logits(&feats, tau);
            let lp_all = log_softmax(&logits);
            let lp = lp_all[tok as usize];
            let ref_lp = log_softmax(&reference.logits(&feats, tau_ref))[tok as usize];
            let rho = (lp - old_lp).exp();
            let clipped = rho.clamp(1.0 - config.clip_eps, 1.0 + config.clip_eps);
            let unclipped_active = rho * a <= clipped * a;
            let surr = if unclipped_active { rho * a } else { clipped * a };
            let log_r = ref_lp - lp;
            let r = log_r.exp();
            let k3 = r - log_r - 1.0;
            kl_total += k3;
            kl_count += 1;
            objective += (surr - config.kl_coeff * k3) / (g * len);
            if let Some(grad) = grad.as_deref_mut() {
                // d/d(lp) of the per-token term.
                let mut coeff = -config.kl_coeff * (1.0 - r);
                if unclipped_active {
                    coeff += a * rho;
                }
                coeff /= g * len;
                if coeff == 0.0 {
                    continue;
                }
                // d lp / d W[f, u] = φ_f (1[u = tok] - π(u)) / τ
                let probs: Vec<f64> = lp_all.iter().map(|x| x.exp()).collect();
                for &(f, x) in &feats {
                    let row = &mut grad[f * v..(f + 1) * v];
                    let s = coeff * x / tau;
                    for (u, gr) in row.iter_mut().enumerate() {
                        let ind = if u == tok as usize { 1.0 } else { 0.0 };
                        *gr += s * (ind - probs[u]);
                    }
                }
            }
        }
    }
    let diag = StepDiagnostics {
        mean_reward: rs.iter().sum::<f64>() / g,
        mean_advantage: adv.iter().sum::<f64>() / g,
        kl: if kl_count > 0 { kl_total / kl_count as f64 } else { 0.0 },
        grad_norm: 0.0,
    };
    Ok((objective, diag))
}

/// Value of the surrogate objective at `params`.
pub fn surrogate(
    params: &PolicyParams,
    fmap: &dyn FeatureMap,
    task: &TaskInstance,
    group: &[Rollout],
    config: &GrpoConfig,
    reference: &PolicyParams,
) -> Result<f64> {
    Ok(evaluate(params, fmap, task, group, config, reference, None)?.0)
}

/// Analytic gradient of [`surrogate`] plus step diagnostics.
pub fn gradient(
    params: &PolicyParams,
    fmap: &dyn FeatureMap,
    task: &TaskInstance,
    group: &[Rollout],
    config: &GrpoConfig,
    reference: &PolicyParams,
) -> Result<(Vec<f64>, StepDiagnostics)> {
    let mut grad = vec![0.0; params.weights.len()];
    let (_, mut diag) = evaluate(params, fmap, task, group, config, reference, Some(&mut grad))?;
    diag.grad_norm = grad.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok((grad, diag))
}

/// Plain gradient ascent: `W + lr · grad`.
pub fn ascend(params: &PolicyParams, grad: &[f64], learning_rate: f64) -> PolicyParams {
    let mut next = params.clone();
    for (w, g) in next.weights.iter_mut().zip(grad) {
        *w += learning_rate * g;
    }
    next
}

/// Scales `grad` in place so its norm is at most `max_norm` (`0` disables).
pub fn clip_grad_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|x| x * x).sum::<f64>().sqrt();
    if max_norm > 0.0 && norm > max_norm {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

/// One ascent step on a single group.
pub fn grpo_update(
    params: &PolicyParams,
    fmap: &dyn FeatureMap,
    task: &TaskInstance,
    group: &[Rollout],
    config: &GrpoConfig,
    reference: &PolicyParams,
) -> Result<(PolicyParams, StepDiagnostics)> {
    let (grad, diag) = gradient(params, fmap, task, group, config, reference)?;
    Ok((ascend(params, &grad, config.learning_rate), diag))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn advantage_examples() {
        assert_eq!(grpo_advantages(&[1.0; 4], 1e-8), vec![0.0; 4]);
        let a = grpo_advantages(&[1.0, 0.0, 0.0, 0.0], 1e-8);
        let expect = [3.0f64.sqrt(), -1.0 / 3.0f64.sqrt(), -1.0 / 3.0f64.sqrt(), -1.0 / 3.0f64.sqrt()];
        for (x, y) in a.iter().zip(expect) {
            assert!((x - y).abs() < 1e-6, "{x} vs {y}");
        }
        let a = grpo_advantages(&[1.0, 0.0], 1e-8);
        assert!((a[0] - 1.0).abs() < 1e-7 && (a[1] + 1.0).abs() < 1e-7);
        assert_eq!(grpo_advantages(&[0.1; 8], 1e-8), vec![0.0; 8]);
    }

    #[test]
    fn config_validation() {
        assert!(GrpoConfig::default().validate().is_ok());
        let bad = GrpoConfig {
            group_size: 1,
            ..GrpoConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
