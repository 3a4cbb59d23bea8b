//! Closed-form bound and sample-count evaluators.
//!
//! Per-stage API bound, summed over `K` stages:
//!
//! ```text
//! L_K ≤ Σ_k [ γ^T η_k + 2γ(1 − γ^T)/(1 − γ)² δ_k + 2γ/(β(1 − γ)²) ] + Σ_{k<K} ‖Q*_K − Q*_k‖_{d_K}
//! ```
//!
//! Curriculum versus direct learning, with `x = e·l`:
//!
//! ```text
//! M_CRL < M_Direct  ⟺  (x^{2(1−K)} − 1) / (1 − x²) < m − 1
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::config(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    Ok(())
}

fn check_nonneg(xs: &[f64], what: &str) -> Result<()> {
    if xs.iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::config(format!("{what} must be non-negative")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundParamsThm1 {
    pub gamma: f64,
    /// API updates per stage `T`.
    pub updates: u32,
    /// Soft-improvement stepsize `β`; infinity removes its term.
    pub beta: f64,
    /// Per-stage initial gaps `η_k`.
    pub eta: Vec<f64>,
    /// Per-stage evaluation errors `δ_k`.
    pub delta: Vec<f64>,
    /// `‖Q*_K − Q*_k‖_{d_K}` for `k < K`.
    pub drift: Vec<f64>,
}

impl BoundParamsThm1 {
    pub fn stages(&self) -> usize {
        self.eta.len()
    }
}

/// Right-hand side of the multi-stage API bound.
pub fn bound_thm1(p: &BoundParamsThm1) -> Result<f64> {
    check_gamma(p.gamma)?;
    let k = p.stages();
    if k == 0 || p.delta.len() != k {
        return Err(Error::config("eta and delta need one entry per stage"));
    }
    if p.drift.len() + 1 != k {
        return Err(Error::config(format!("drift needs {} entries for {k} stages", k - 1)));
    }
    if !(p.beta > 0.0) {
        return Err(Error::config("beta must be positive"));
    }
    check_nonneg(&p.eta, "eta")?;
    check_nonneg(&p.delta, "delta")?;
    check_nonneg(&p.drift, "drift")?;
    let g = p.gamma;
    let gt = g.powi(p.updates as i32);
    let c_delta = 2.0 * g * (1.0 - gt) / (1.0 - g).powi(2);
    let c_beta = 2.0 * g / (p.beta * (1.0 - g).powi(2));
    let per_stage: f64 = p.eta.iter().zip(&p.delta).map(|(e, d)| gt * e + c_delta * d + c_beta).sum();
    Ok(per_stage + p.drift.iter().sum::<f64>())
}

/// Inputs of the finite-sample bound. Constants the bench cannot observe are
/// supplied by the caller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundParamsThm2 {
    pub gamma: f64,
    /// Policy updates per stage `T`.
    pub updates: u32,
    pub beta: f64,
    /// `‖Q*_K − Q^{π_0}‖∞`.
    pub initial_gap: f64,
    pub e_approx: Vec<f64>,
    pub e_bias: Vec<f64>,
    /// Critic updates per stage `J_k`.
    pub critic_steps: Vec<f64>,
    /// `L_k = 1 + (γ ρ_max,k)^n`.
    pub l: Vec<f64>,
    /// `γ_c = γ^n / sqrt(K_SA,min)`.
    pub gamma_c: f64,
    pub lambda_min: f64,
    pub alpha: f64,
    pub t_alpha: f64,
    pub n: u32,
    pub drift: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thm2Terms {
    pub n1: f64,
    pub n2_1: f64,
    pub n2_2: f64,
    pub n2_3: f64,
    pub n2_4: f64,
    pub n3: f64,
    pub drift: f64,
}

impl Thm2Terms {
    pub fn total(&self) -> f64 {
        self.n1 + self.n2_1 + self.n2_2 + self.n2_3 + self.n2_4 + self.n3 + self.drift
    }
}

/// Evaluates each term of the finite-sample bound. The stepsize must satisfy
/// `α(t_α + n + 1) ≤ (1 − γ_c) λ_min / (130 L²)` with `L = max_k L_k`, and
/// every `J_k ≥ t_α + n + 1`.
pub fn bound_thm2_terms(p: &BoundParamsThm2) -> Result<Thm2Terms> {
    check_gamma(p.gamma)?;
    let k = p.e_approx.len();
    if k == 0 || p.e_bias.len() != k || p.critic_steps.len() != k || p.l.len() != k || p.drift.len() + 1 != k {
        return Err(Error::config("per-stage inputs need K entries and drift K − 1"));
    }
    if !(p.gamma_c > 0.0 && p.gamma_c < 1.0) {
        return Err(Error::config(format!("gamma_c must lie in (0, 1), got {}", p.gamma_c)));
    }
    if !(p.lambda_min > 0.0) || !(p.alpha > 0.0) || !(p.beta > 0.0) || !(p.t_alpha >= 0.0) {
        return Err(Error::config("lambda_min, alpha and beta must be positive and t_alpha non-negative"));
    }
    check_nonneg(&p.e_approx, "e_approx")?;
    check_nonneg(&p.e_bias, "e_bias")?;
    check_nonneg(&p.drift, "drift")?;
    check_nonneg(&[p.initial_gap], "initial_gap")?;
    let burn = p.t_alpha + p.n as f64 + 1.0;
    let l_max = p.l.iter().copied().fold(0.0, f64::max);
    let limit = (1.0 - p.gamma_c) * p.lambda_min / (130.0 * l_max * l_max);
    if p.alpha * burn > limit {
        return Err(Error::config(format!(
            "stepsize condition α(t_α + n + 1) ≤ (1 − γ_c) λ_min / (130 L²) violated: {} > {limit}",
            p.alpha * burn
        )));
    }
    if let Some(j) = p.critic_steps.iter().find(|&&j| j < burn) {
        return Err(Error::config(format!("condition J_k ≥ t_α + n + 1 violated: {j} < {burn}")));
    }
    let g = p.gamma;
    let one = 1.0 - g;
    let kk = k as f64;
    let rate = 1.0 - (1.0 - p.gamma_c) * p.lambda_min * p.alpha;
    Ok(Thm2Terms {
        n1: g.powf(p.updates as f64 * kk) * p.initial_gap,
        n2_1: p.e_approx.iter().map(|e| 2.0 * g * e / one.powi(2)).sum(),
        n2_2: p.e_bias.iter().map(|e| 2.0 * g * g * e / one.powi(4)).sum(),
        n2_3: p
            .critic_steps
            .iter()
            .map(|&j| 6.0 * rate.powf(0.5 * (j - burn)) / (one.powi(3) * (1.0 - p.gamma_c).sqrt() * p.lambda_min.sqrt()))
            .sum(),
        n2_4: p
            .l
            .iter()
            .map(|&l| 70.0 * l * (p.alpha * burn).sqrt() / (p.lambda_min * (1.0 - p.gamma_c) * one.powi(3)))
            .sum(),
        n3: 2.0 * g * kk / (p.beta * one.powi(2)),
        drift: p.drift.iter().sum(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thm3Condition {
    pub lhs: f64,
    pub rhs: f64,
    pub crl_wins: bool,
}

impl std::fmt::Display for Thm3Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "lhs={:.6} rhs={:.6} crl_wins={}", self.lhs, self.rhs, self.crl_wins)
    }
}

/// Compares `(x^{2(1−K)} − 1)/(1 − x²)` against `m − 1` for `x = e·l`.
pub fn crl_vs_direct_condition(k: u32, el: f64, m: f64) -> Result<Thm3Condition> {
    if k < 2 {
        return Err(Error::config(format!("K must be at least 2, got {k}")));
    }
    if !(el > 0.0 && el.is_finite()) {
        return Err(Error::config("e·l must be positive and finite"));
    }
    if el == 1.0 {
        return Err(Error::config("e·l = 1 makes the condition undefined"));
    }
    if !m.is_finite() {
        return Err(Error::config("m must be finite"));
    }
    let lhs = (el.powf(2.0 * (1.0 - k as f64)) - 1.0) / (1.0 - el * el);
    let rhs = m - 1.0;
    Ok(Thm3Condition {
        lhs,
        rhs,
        crl_wins: lhs < rhs,
    })
}

/// Constants of the sample-count expression; the result is in relative units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleConstants {
    pub scale: f64,
    pub gamma: f64,
    pub gamma_c: f64,
    pub lambda_min: f64,
    pub n: u32,
}

/// Per-stage `C log³(1/ε_k)/ε_k² · L_k² n / ((1−γ)⁷ (1−γ_c)³ λ_min³)` and the total.
pub fn sample_count_thm3(eps: &[f64], l: &[f64], c: &SampleConstants) -> Result<(Vec<f64>, f64)> {
    check_gamma(c.gamma)?;
    if eps.is_empty() || eps.len() != l.len() {
        return Err(Error::config("eps and L need one entry per stage"));
    }
    if eps.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::config("every eps_k must be positive"));
    }
    if !(c.gamma_c > 0.0 && c.gamma_c < 1.0) || !(c.lambda_min > 0.0) {
        return Err(Error::config("gamma_c must lie in (0, 1) and lambda_min be positive"));
    }
    let denom = (1.0 - c.gamma).powi(7) * (1.0 - c.gamma_c).powi(3) * c.lambda_min.powi(3);
    let per: Vec<f64> = eps
        .iter()
        .zip(l)
        .map(|(&e, &lk)| c.scale * (1.0 / e).ln().powi(3) / (e * e) * lk * lk * c.n as f64 / denom)
        .collect();
    let total = per.iter().sum();
    Ok((per, total))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn thm1(eta: f64, delta: f64, beta: f64, updates: u32) -> BoundParamsThm1 {
        BoundParamsThm1 {
            gamma: 0.9,
            updates,
            beta,
            eta: vec![eta],
            delta: vec![delta],
            drift: vec![],
        }
    }

    #[test]
    fn thm1_worked_example() {
        let b = bound_thm1(&thm1(1.0, 0.1, 100.0, 10)).unwrap();
        let parts = [0.9f64.powi(10), 1.8 * (1.0 - 0.9f64.powi(10)) / 0.01 * 0.1, 1.8];
        assert!((b - parts.iter().sum::<f64>()).abs() < 1e-12);
        assert!((b - 13.87247).abs() < 5e-6, "{b}");
    }

    #[test]
    fn thm1_limits_and_errors() {
        assert_eq!(bound_thm1(&thm1(1.0, 0.0, f64::INFINITY, 100_000)).unwrap(), 0.0);
        let mut p = thm1(1.0, 0.1, 10.0, 5);
        p.gamma = 1.0;
        assert!(bound_thm1(&p).is_err());
    }

    #[test]
    fn thm3_examples() {
        let c = crl_vs_direct_condition(3, 1.4, 1.8).unwrap();
        assert!((c.lhs - 0.770513).abs() < 1e-6);
        assert!((c.rhs - 0.8).abs() < 1e-15);
        assert!(c.crl_wins);
        assert_eq!(c.to_string(), "lhs=0.770512 rhs=0.800000 crl_wins=true");
        let big = crl_vs_direct_condition(400, 1.4, 1.8).unwrap();
        assert!((big.lhs - 1.0 / (1.96 - 1.0)).abs() < 1e-12);
        assert!(!crl_vs_direct_condition(3, 1.4, 1.0 + 1e-12).unwrap().crl_wins);
        assert!(crl_vs_direct_condition(3, 1.0, 2.0).is_err());
        assert!(crl_vs_direct_condition(1, 1.4, 2.0).is_err());
    }

    fn thm2() -> BoundParamsThm2 {
        BoundParamsThm2 {
            gamma: 0.9,
            updates: 10,
            beta: 100.0,
            initial_gap: 5.0,
            e_approx: vec![0.0, 0.0],
            e_bias: vec![0.0, 0.0],
            critic_steps: vec![1e4, 1e4],
            l: vec![1.5, 1.5],
            gamma_c: 0.5,
            lambda_min: 0.2,
            alpha: 1e-6,
            t_alpha: 10.0,
            n: 2,
            drift: vec![0.0],
        }
    }

    #[test]
    fn thm2_terms() {
        let p = thm2();
        let t = bound_thm2_terms(&p).unwrap();
        assert_eq!(t.n2_1, 0.0);
        assert_eq!(t.n2_2, 0.0);
        assert!((t.n1 - 0.9f64.powi(20) * 5.0).abs() < 1e-12);
        assert!((t.n3 - 2.0 * 0.9 * 2.0 / (100.0 * 0.01)).abs() < 1e-12);

        // N2,3 halves after 2 ln 2 / (−ln q) more critic steps.
        let q: f64 = 1.0 - 0.5 * 0.2 * 1e-6;
        let dj = 2.0 * 2f64.ln() / -q.ln();
        let mut later = p.clone();
        later.critic_steps = vec![1e4 + dj, 1e4 + dj];
        let t2 = bound_thm2_terms(&later).unwrap();
        assert!((t2.n2_3 / t.n2_3 - 0.5).abs() < 1e-9);

        let mut bad = p.clone();
        bad.alpha = 1.0;
        let e = bound_thm2_terms(&bad).unwrap_err().to_string();
        assert!(e.contains("stepsize condition"), "{e}");
        let mut bad = p;
        bad.critic_steps = vec![5.0, 1e4];
        assert!(bound_thm2_terms(&bad).unwrap_err().to_string().contains("J_k"));
    }

    #[test]
    fn sample_counts() {
        let c = SampleConstants {
            scale: 1.0,
            gamma: 0.9,
            gamma_c: 0.5,
            lambda_min: 0.5,
            n: 2,
        };
        let (a, _) = sample_count_thm3(&[0.1, 0.05], &[1.0, 1.0], &c).unwrap();
        let (b, _) = sample_count_thm3(&[0.05, 0.025], &[1.0, 1.0], &c).unwrap();
        for (i, e) in [0.1f64, 0.05].iter().enumerate() {
            let factor = 4.0 * ((2.0 / e).ln() / (1.0 / e).ln()).powi(3);
            assert!((b[i] / a[i] - factor).abs() < 1e-9 * factor);
        }
        let (single, total) = sample_count_thm3(&[0.1], &[1.0], &c).unwrap();
        assert_eq!(single[0], total);
        assert_eq!(total, a[0]);
        assert!(sample_count_thm3(&[0.0], &[1.0], &c).is_err());
    }
}
