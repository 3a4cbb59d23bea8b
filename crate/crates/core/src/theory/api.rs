use nalgebra::DMatrix;
use rand::Rng as _;

use super::mdp::{policy_q_exact, softmax_policy, sup_norm, value_iteration, QTable, TabularMdp, TabularPolicy};
use super::td::{td_evaluate, TdConfig};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// How each API iteration estimates `Q^π`.
#[derive(Debug, Clone, PartialEq)]
pub enum Critic {
    Exact,
    /// n-step linear TD on the given basis (`None` is the one-hot basis).
    Td { config: TdConfig, basis: Option<DMatrix<f64>> },
}

impl Critic {
    fn samples(&self) -> u64 {
        match self {
            Critic::Exact => 0,
            Critic::Td { config, .. } => config.steps as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageConfig {
    /// Maximum number of policy updates `T`.
    pub iterations: usize,
    /// Soft-improvement inverse temperature `β`; infinity is greedy.
    pub beta: f64,
    /// Sup-norm bound of uniform noise added to each estimate.
    pub delta: f64,
    pub critic: Critic,
    /// Stop once `η_t` falls to this level, after at least one update.
    pub stop_gap: Option<f64>,
}

impl StageConfig {
    pub fn exact(iterations: usize, beta: f64, delta: f64) -> Self {
        StageConfig {
            iterations,
            beta,
            delta,
            critic: Critic::Exact,
            stop_gap: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) {
            return Err(Error::config("api beta must be positive"));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::config("injected error must be non-negative"));
        }
        if let Critic::Td { config, .. } = &self.critic {
            config.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct StageTrace {
    /// `π_0, …, π_T'` where `T'` is the number of updates performed.
    pub policies: Vec<TabularPolicy>,
    /// `η_t = ‖Q* − Q^{π_t}‖∞` for each policy above.
    pub gaps: Vec<f64>,
    pub q_star: QTable,
    /// TD samples consumed.
    pub samples: u64,
}

impl StageTrace {
    pub fn final_policy(&self) -> &TabularPolicy {
        self.policies.last().expect("trace holds the initial policy")
    }

    pub fn final_gap(&self) -> f64 {
        *self.gaps.last().expect("trace holds the initial gap")
    }

    pub fn updates(&self) -> usize {
        self.policies.len() - 1
    }
}

const VI_TOL: f64 = 1e-10;

/// Approximate policy iteration on one MDP: estimate `Q^{π_t}`, optionally
/// corrupt it, then set `π_{t+1} = softmax(β Q̂)`.
pub fn api_stage(mdp: &TabularMdp, initial: &TabularPolicy, config: &StageConfig, rng: &mut Rng) -> Result<StageTrace> {
    config.validate()?;
    mdp.check_policy(initial)?;
    let q_star = value_iteration(mdp, VI_TOL)?.q;
    let gap = |pi: &TabularPolicy| -> Result<f64> { Ok(sup_norm(&(&q_star - policy_q_exact(mdp, pi)?))) };
    let mut policies = vec![initial.clone()];
    let mut gaps = vec![gap(initial)?];
    let mut samples = 0;
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    for t in 0..config.iterations {
        if t > 0 && config.stop_gap.is_some_and(|g| gaps.last().is_some_and(|&x| x <= g)) {
            break;
        }
        let pi = policies.last().unwrap();
        let mut q_hat = match &config.critic {
            Critic::Exact => policy_q_exact(mdp, pi)?,
            Critic::Td { config: td, basis } => {
                let basis = basis.clone().unwrap_or_else(|| DMatrix::identity(ns * na, ns * na));
                td_evaluate(mdp, pi, basis, td, rng)?.table(ns, na)
            }
        };
        samples += config.critic.samples();
        if config.delta > 0.0 {
            for x in q_hat.iter_mut() {
                *x += rng.gen_range(-config.delta..=config.delta);
            }
        }
        let next = softmax_policy(&q_hat, config.beta);
        gaps.push(gap(&next)?);
        policies.push(next);
    }
    Ok(StageTrace {
        policies,
        gaps,
        q_star,
        samples,
    })
}

/// Stages sharing state and action spaces, ordered easy to hard.
#[derive(Debug, Clone)]
pub struct CurriculumSequence {
    stages: Vec<TabularMdp>,
}

impl CurriculumSequence {
    pub fn new(stages: Vec<TabularMdp>) -> Result<Self> {
        let first = stages.first().ok_or_else(|| Error::config("a curriculum needs at least one stage"))?;
        let (s, a) = (first.n_states(), first.n_actions());
        if stages.iter().any(|m| m.n_states() != s || m.n_actions() != a) {
            return Err(Error::config("curriculum stages must share state and action spaces"));
        }
        Ok(CurriculumSequence { stages })
    }

    pub fn stages(&self) -> &[TabularMdp] {
        &self.stages
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn last(&self) -> &TabularMdp {
        self.stages.last().expect("non-empty by construction")
    }
}

#[derive(Debug, Clone)]
pub struct CurriculumRun {
    pub stages: Vec<StageTrace>,
    pub total_samples: u64,
}

impl CurriculumRun {
    pub fn final_policy(&self) -> &TabularPolicy {
        self.stages.last().expect("at least one stage").final_policy()
    }
}

/// Runs [`api_stage`] on each stage in order, warm-starting every stage from
/// the previous stage's final policy. `configs` holds one entry per stage.
pub fn curriculum_run(
    seq: &CurriculumSequence,
    initial: &TabularPolicy,
    configs: &[StageConfig],
    rng: &mut Rng,
) -> Result<CurriculumRun> {
    if configs.len() != seq.len() {
        return Err(Error::config(format!("{} stage configs for {} stages", configs.len(), seq.len())));
    }
    let mut pi = initial.clone();
    let mut stages = Vec::with_capacity(seq.len());
    let mut total = 0;
    for (mdp, cfg) in seq.stages().iter().zip(configs) {
        let trace = api_stage(mdp, &pi, cfg, rng)?;
        pi = trace.final_policy().clone();
        total += trace.samples;
        stages.push(trace);
    }
    Ok(CurriculumRun {
        stages,
        total_samples: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::theory::mdp::{policy_q_exact, uniform_policy};

    #[test]
    fn greedy_exact_api_reaches_the_optimum() {
        let mut r = rng::seeded(11);
        for _ in 0..5 {
            let m = TabularMdp::random(6, 3, 0.9, &mut r).unwrap();
            let t = api_stage(&m, &uniform_policy(6, 3), &StageConfig::exact(25, f64::INFINITY, 0.0), &mut r).unwrap();
            assert!(t.final_gap() < 1e-8, "{}", t.final_gap());
            for w in t.gaps.windows(2) {
                assert!(w[1] <= w[0] + 1e-9);
            }
        }
    }

    #[test]
    fn zero_iterations_keep_the_policy() {
        let mut r = rng::seeded(1);
        let m = TabularMdp::random(4, 2, 0.9, &mut r).unwrap();
        let pi = uniform_policy(4, 2);
        let t = api_stage(&m, &pi, &StageConfig::exact(0, 5.0, 0.0), &mut r).unwrap();
        assert_eq!(t.policies, vec![pi]);
        assert_eq!(t.updates(), 0);
    }

    #[test]
    fn single_stage_curriculum_is_api_stage() {
        let mut r = rng::seeded(2);
        let m = TabularMdp::random(5, 2, 0.8, &mut r).unwrap();
        let cfg = StageConfig::exact(6, 4.0, 0.3);
        let pi = uniform_policy(5, 2);
        let a = api_stage(&m, &pi, &cfg, &mut rng::seeded(9)).unwrap();
        let seq = CurriculumSequence::new(vec![m]).unwrap();
        let b = curriculum_run(&seq, &pi, &[cfg], &mut rng::seeded(9)).unwrap();
        assert_eq!(a.gaps, b.stages[0].gaps);
        assert_eq!(a.final_policy(), b.final_policy());
    }

    #[test]
    fn identical_stages_match_one_long_stage() {
        let mut r = rng::seeded(3);
        let m = TabularMdp::random(5, 2, 0.8, &mut r).unwrap();
        let td = TdConfig {
            n: 2,
            alpha: 0.05,
            steps: 500,
            restart: 0.2,
        };
        let cfg = |t| StageConfig {
            iterations: t,
            beta: 3.0,
            delta: 0.0,
            critic: Critic::Td { config: td, basis: None },
            stop_gap: None,
        };
        let pi = uniform_policy(5, 2);
        let long = api_stage(&m, &pi, &cfg(9), &mut rng::seeded(4)).unwrap();
        let seq = CurriculumSequence::new(vec![m.clone(), m.clone(), m]).unwrap();
        let run = curriculum_run(&seq, &pi, &[cfg(3), cfg(3), cfg(3)], &mut rng::seeded(4)).unwrap();
        assert_eq!(run.total_samples, 3 * 3 * 500);
        assert_eq!(run.total_samples, long.samples);
        assert_eq!(run.stages[2].final_gap(), long.final_gap());
        let q = policy_q_exact(seq.last(), run.final_policy()).unwrap();
        assert_eq!(q, policy_q_exact(seq.last(), long.final_policy()).unwrap());
    }

    #[test]
    fn mismatched_stages_are_rejected() {
        let mut r = rng::seeded(5);
        let a = TabularMdp::random(3, 2, 0.9, &mut r).unwrap();
        let b = TabularMdp::random(4, 2, 0.9, &mut r).unwrap();
        assert!(CurriculumSequence::new(vec![a, b]).is_err());
    }
}
