//! Chain-MDP curricula, the bound soundness suite and the CRL-versus-direct
//! crossover experiment.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::api::{api_stage, curriculum_run, Critic, CurriculumSequence, StageConfig};
use super::bounds::{bound_thm1, crl_vs_direct_condition, BoundParamsThm1, Thm3Condition};
use super::mdp::{greedy_policy, occupancy, policy_q_exact, uniform_policy, value_iteration, weighted_norm, QTable, TabularMdp};
use super::td::TdConfig;
use crate::error::{Error, Result};
use crate::rng;

pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;

const VI_TOL: f64 = 1e-10;

/// Where chain episodes begin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainStart {
    /// Uniform over `0..=goal`.
    Uniform,
    /// Always state 0.
    Origin,
}

/// Chain of `n_states` states with actions [`LEFT`] and [`RIGHT`]; a move
/// succeeds with probability `1 − slip` and otherwise stays put. Pushing
/// [`RIGHT`] at `goal` pays 1 and stays there. States past the goal are
/// unreachable padding with no reward.
pub fn chain_mdp(n_states: usize, goal: usize, slip: f64, gamma: f64, start: ChainStart) -> Result<TabularMdp> {
    if goal == 0 || goal >= n_states {
        return Err(Error::config(format!("goal {goal} must lie in 1..{n_states}")));
    }
    if !(0.0..1.0).contains(&slip) {
        return Err(Error::config("slip must lie in [0, 1)"));
    }
    let (ns, na) = (n_states, 2);
    let mut p = vec![0.0; ns * na * ns];
    let mut r = vec![0.0; ns * na];
    for s in 0..ns {
        for a in 0..na {
            let row = &mut p[(s * na + a) * ns..(s * na + a + 1) * ns];
            if s > goal || (s == goal && a == RIGHT) {
                row[s] = 1.0;
                if s == goal {
                    r[s * na + a] = 1.0;
                }
                continue;
            }
            let to = if a == RIGHT { s + 1 } else { s.saturating_sub(1) };
            row[to] += 1.0 - slip;
            row[s] += slip;
        }
    }
    let mut d0 = vec![0.0; ns];
    match start {
        ChainStart::Uniform => d0[..=goal].fill(1.0 / (goal + 1) as f64),
        ChainStart::Origin => d0[0] = 1.0,
    }
    TabularMdp::new(ns, na, p, r, gamma, d0, 1.0)
}

/// One chain per goal, all on `n_states` states.
pub fn chain_curriculum(
    n_states: usize,
    goals: &[usize],
    slip: f64,
    gamma: f64,
    start: ChainStart,
) -> Result<CurriculumSequence> {
    CurriculumSequence::new(
        goals
            .iter()
            .map(|&g| chain_mdp(n_states, g, slip, gamma, start))
            .collect::<Result<_>>()?,
    )
}

/// `Q*` and the discounted occupancy of the greedy optimal policy.
pub fn optimal_occupancy(mdp: &TabularMdp) -> Result<(QTable, Vec<f64>)> {
    let q = value_iteration(mdp, VI_TOL)?.q;
    let d = occupancy(mdp, &greedy_policy(&q))?;
    Ok((q, d))
}

/// One randomized curriculum of the soundness suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoundnessRow {
    pub seed: u64,
    pub n_states: usize,
    pub goals: Vec<usize>,
    pub slip: f64,
    pub gamma: f64,
    pub beta: f64,
    pub updates: u32,
    pub deltas: Vec<f64>,
    /// `‖Q*_K − Q^{π_K}_K‖_{d_K}` after the run.
    pub measured: f64,
    pub bound: f64,
}

impl SoundnessRow {
    pub fn holds(&self) -> bool {
        self.measured <= self.bound
    }
}

/// Draws a chain curriculum with at most `max_states` states, runs noisy
/// exact-critic API on it and evaluates the single-run bound.
pub fn soundness_case(seed: u64, max_states: usize) -> Result<SoundnessRow> {
    if max_states < 4 {
        return Err(Error::config("soundness chains need at least 4 states"));
    }
    let mut r = rng::derived(seed, &[0]);
    let n_states = r.gen_range(4..=max_states);
    let k = r.gen_range(2..=4usize.min(n_states - 1));
    let mut goals: Vec<usize> = rand::seq::index::sample(&mut r, n_states - 1, k).into_iter().map(|g| g + 1).collect();
    goals.sort_unstable();
    let slip = r.gen_range(0.0..0.5);
    let gamma = r.gen_range(0.5..0.95);
    let beta = if r.gen_bool(0.2) { f64::INFINITY } else { r.gen_range(0.5..50.0) };
    let updates = r.gen_range(1..=8u32);
    let deltas: Vec<f64> = (0..k).map(|_| if r.gen_bool(0.2) { 0.0 } else { r.gen_range(0.0..1.0) }).collect();

    let seq = chain_curriculum(n_states, &goals, slip, gamma, ChainStart::Uniform)?;
    let configs: Vec<StageConfig> = deltas.iter().map(|&d| StageConfig::exact(updates as usize, beta, d)).collect();
    let run = curriculum_run(&seq, &uniform_policy(n_states, 2), &configs, &mut rng::derived(seed, &[1]))?;

    let last = seq.last();
    let (q_star_k, d_k) = optimal_occupancy(last)?;
    let measured = weighted_norm(&(&q_star_k - policy_q_exact(last, run.final_policy())?), &d_k)?;
    let mut drift = Vec::with_capacity(k - 1);
    for trace in &run.stages[..k - 1] {
        drift.push(weighted_norm(&(&q_star_k - &trace.q_star), &d_k)?);
    }
    let bound = bound_thm1(&BoundParamsThm1 {
        gamma,
        updates,
        beta,
        eta: run.stages.iter().map(|t| t.gaps[0]).collect(),
        delta: deltas.clone(),
        drift,
    })?;
    Ok(SoundnessRow {
        seed,
        n_states,
        goals,
        slip,
        gamma,
        beta,
        updates,
        deltas,
        measured,
        bound,
    })
}

/// `runs` independent cases seeded from `master`, in seed order.
pub fn soundness_suite(master: u64, runs: usize, max_states: usize) -> Result<Vec<SoundnessRow>> {
    (0..runs as u64)
        .into_par_iter()
        .map(|i| soundness_case(rng::derive_seed(master, &[i]), max_states))
        .collect()
}

/// Parameters of one crossover regime. Stage `k` of `K` must reach
/// `ε·e^{K−k}` in sup norm; direct learning must reach `ε` on the last stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossoverRegime {
    pub name: String,
    pub n_states: usize,
    pub goals: Vec<usize>,
    pub slip: f64,
    pub start: ChainStart,
    pub gamma: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub e: f64,
    pub l: f64,
    pub td_n: usize,
    pub td_alpha: f64,
    pub td_steps: usize,
    /// Update cap per stage and for direct learning.
    pub max_iterations: usize,
}

impl CrossoverRegime {
    /// Long chain with a sparse goal reward; the short stages teach the
    /// prefix of the final path.
    pub fn long_chain() -> Self {
        CrossoverRegime {
            name: "long-chain".into(),
            n_states: 20,
            goals: vec![6, 13, 19],
            slip: 0.2,
            start: ChainStart::Origin,
            gamma: 0.95,
            beta: f64::INFINITY,
            epsilon: 0.5,
            e: 1.4,
            l: 1.0,
            td_n: 3,
            td_alpha: 0.05,
            td_steps: 2000,
            max_iterations: 60,
        }
    }

    /// Short final chain that direct learning already solves quickly.
    pub fn short_chain() -> Self {
        CrossoverRegime {
            name: "short-chain".into(),
            n_states: 20,
            goals: vec![1, 2, 3],
            ..Self::long_chain()
        }
    }

    pub fn tolerances(&self) -> Vec<f64> {
        let k = self.goals.len();
        (1..=k).map(|i| self.epsilon * self.e.powi((k - i) as i32)).collect()
    }

    fn td(&self) -> TdConfig {
        TdConfig {
            n: self.td_n,
            alpha: self.td_alpha,
            steps: self.td_steps,
            restart: 1.0 - self.gamma,
        }
    }

    fn stage(&self, tolerance: f64) -> StageConfig {
        StageConfig {
            iterations: self.max_iterations,
            beta: self.beta,
            delta: 0.0,
            critic: Critic::Td {
                config: self.td(),
                basis: None,
            },
            stop_gap: Some(tolerance),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossoverRow {
    pub regime: String,
    pub seed: u64,
    pub crl_stage_samples: Vec<u64>,
    pub crl_samples: u64,
    pub crl_reached: bool,
    pub direct_samples: u64,
    pub direct_reached: bool,
    /// `M_direct / M_K`, direct samples over final-stage CRL samples; a lower
    /// bound when direct learning hit the update cap.
    pub m: f64,
    pub predicted: Thm3Condition,
}

impl CrossoverRow {
    /// CRL reached the target with strictly fewer samples than direct learning.
    pub fn crl_wins(&self) -> bool {
        self.crl_reached && (!self.direct_reached || self.crl_samples < self.direct_samples)
    }
}

pub fn crossover_run(regime: &CrossoverRegime, seed: u64) -> Result<CrossoverRow> {
    let k = regime.goals.len();
    if k < 2 {
        return Err(Error::config("the crossover needs at least two stages"));
    }
    let seq = chain_curriculum(regime.n_states, &regime.goals, regime.slip, regime.gamma, regime.start)?;
    let tol = regime.tolerances();
    let configs: Vec<StageConfig> = tol.iter().map(|&t| regime.stage(t)).collect();
    let pi0 = uniform_policy(regime.n_states, 2);
    let crl = curriculum_run(&seq, &pi0, &configs, &mut rng::derived(seed, &[0]))?;
    let direct = api_stage(seq.last(), &pi0, &configs[k - 1], &mut rng::derived(seed, &[1]))?;

    let crl_stage_samples: Vec<u64> = crl.stages.iter().map(|t| t.samples).collect();
    let m = direct.samples as f64 / crl_stage_samples[k - 1] as f64;
    Ok(CrossoverRow {
        regime: regime.name.clone(),
        seed,
        crl_samples: crl.total_samples,
        crl_reached: crl.stages[k - 1].final_gap() <= regime.epsilon,
        direct_samples: direct.samples,
        direct_reached: direct.final_gap() <= regime.epsilon,
        m,
        predicted: crl_vs_direct_condition(k as u32, regime.e * regime.l, m)?,
        crl_stage_samples,
    })
}

/// Runs every regime on seeds `1..=seeds`.
pub fn crossover_suite(regimes: &[CrossoverRegime], seeds: u64) -> Result<Vec<CrossoverRow>> {
    let jobs: Vec<(&CrossoverRegime, u64)> = regimes.iter().flat_map(|r| (1..=seeds).map(move |s| (r, s))).collect();
    jobs.into_par_iter().map(|(r, s)| crossover_run(r, s)).collect()
}

pub fn crossover_csv(rows: &[CrossoverRow]) -> String {
    let mut out = String::from("regime,seed,crl_samples,direct_samples,crl_reached,direct_reached,m,lhs,rhs,predicted_crl_wins,crl_wins\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{:.6},{:.6},{:.6},{},{}\n",
            r.regime,
            r.seed,
            r.crl_samples,
            r.direct_samples,
            r.crl_reached,
            r.direct_reached,
            r.m,
            r.predicted.lhs,
            r.predicted.rhs,
            r.predicted.crl_wins,
            r.crl_wins()
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_values_match_closed_form() {
        // Deterministic chain: Q*(s, right) = γ^{g−s}/(1−γ) below the goal.
        let m = chain_mdp(6, 4, 0.0, 0.9, ChainStart::Uniform).unwrap();
        let q = value_iteration(&m, 1e-12).unwrap().q;
        for s in 0..4 {
            let want = 0.9f64.powi((4 - s) as i32) / 0.1;
            assert!((q[(s, RIGHT)] - want).abs() < 1e-9, "{s}");
        }
        assert!((q[(4, RIGHT)] - 10.0).abs() < 1e-9);
        assert!((q[(4, LEFT)] - 8.1).abs() < 1e-9);
        assert_eq!(q[(5, LEFT)], 0.0);
        assert_eq!(m.start()[5], 0.0);
    }

    #[test]
    fn padding_is_unvisited_by_the_optimal_policy() {
        let m = chain_mdp(8, 3, 0.3, 0.8, ChainStart::Origin).unwrap();
        let (_, d) = optimal_occupancy(&m).unwrap();
        assert!(d[4..].iter().all(|&x| x == 0.0));
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bad_chains_are_rejected() {
        let u = ChainStart::Uniform;
        assert!(chain_mdp(5, 5, 0.1, 0.9, u).is_err());
        assert!(chain_mdp(5, 0, 0.1, 0.9, u).is_err());
        assert!(chain_mdp(5, 2, 1.0, 0.9, u).is_err());
    }

    #[test]
    fn soundness_cases_are_reproducible() {
        let a = soundness_suite(3, 4, 12).unwrap();
        let b = soundness_suite(3, 4, 12).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|r| r.n_states <= 12 && r.goals.windows(2).all(|w| w[0] < w[1])));
    }

    #[test]
    fn tolerances_grow_geometrically_toward_early_stages() {
        let t = CrossoverRegime::long_chain().tolerances();
        assert!((t[2] - 0.5).abs() < 1e-15);
        assert!((t[0] - 0.5 * 1.96).abs() < 1e-12);
    }
}
