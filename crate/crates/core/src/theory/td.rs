use nalgebra::{DMatrix, DVector};
use rand::Rng as _;

use super::mdp::{QTable, TabularMdp, TabularPolicy};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Linear action-value model `Q = Φ w` with `Φ` of shape `(S·A) × d`; row
/// `s·A + a` holds the features of `(s, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearQ {
    pub basis: DMatrix<f64>,
    pub weights: DVector<f64>,
}

impl LinearQ {
    /// Zero weights on `basis`; fails if `basis` lacks full column rank.
    pub fn new(basis: DMatrix<f64>) -> Result<Self> {
        let d = basis.ncols();
        if d == 0 || basis.nrows() < d {
            return Err(Error::config("basis must have at least one column and no more columns than rows"));
        }
        let rank = basis.clone().svd(false, false).rank(1e-10);
        if rank < d {
            return Err(Error::config(format!("basis has rank {rank} < {d} columns")));
        }
        Ok(LinearQ {
            weights: DVector::zeros(d),
            basis,
        })
    }

    pub fn one_hot(n_states: usize, n_actions: usize) -> Self {
        let n = n_states * n_actions;
        LinearQ {
            basis: DMatrix::identity(n, n),
            weights: DVector::zeros(n),
        }
    }

    pub fn value(&self, row: usize) -> f64 {
        self.basis.row(row).iter().zip(self.weights.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn table(&self, n_states: usize, n_actions: usize) -> QTable {
        let q = &self.basis * &self.weights;
        QTable::from_fn(n_states, n_actions, |s, a| q[s * n_actions + a])
    }
}

/// Settings for n-step linear TD evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdConfig {
    /// Bootstrapping horizon `n`.
    pub n: usize,
    /// Constant stepsize `α`.
    pub alpha: f64,
    /// Number of updates `J`.
    pub steps: usize,
    /// Per-step probability of restarting from the start distribution with a
    /// uniformly drawn first action.
    pub restart: f64,
}

impl TdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("td.n must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config("td.alpha must lie in (0, 1)"));
        }
        if !(self.restart > 0.0 && self.restart <= 1.0) {
            return Err(Error::config("td.restart must lie in (0, 1]"));
        }
        Ok(())
    }
}

struct Transition {
    row: usize,
    reward: f64,
    next_state: usize,
    /// Last transition before a restart.
    ends: bool,
}

/// Estimates `Q^π` with `J` steps of n-step linear TD along one sampled
/// trajectory. The trajectory follows `π` and restarts with probability
/// `restart` per step; the first action after each restart is uniform, which
/// keeps every pair visited without changing the targets. Bootstraps use the
/// expected next value `Σ_a' π(a'|s') Q̂(s', a')` and truncate at restarts.
pub fn td_evaluate(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    basis: DMatrix<f64>,
    config: &TdConfig,
    rng: &mut Rng,
) -> Result<LinearQ> {
    mdp.check_policy(policy)?;
    config.validate()?;
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    if basis.nrows() != ns * na {
        return Err(Error::config("basis rows must equal S·A"));
    }
    let mut model = LinearQ::new(basis)?;
    let gamma = mdp.gamma();
    let pick = |s: usize, rng: &mut Rng| -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for a in 0..na {
            acc += policy[(s, a)];
            if u < acc {
                return a;
            }
        }
        (0..na).rev().find(|&a| policy[(s, a)] > 0.0).unwrap_or(na - 1)
    };

    let mut s = mdp.sample_start(rng);
    let mut a = rng.gen_range(0..na);
    let mut generate = |rng: &mut Rng| {
        let next = mdp.sample_next(s, a, rng);
        let t = Transition {
            row: s * na + a,
            reward: mdp.reward(s, a),
            next_state: next,
            ends: rng.gen::<f64>() < config.restart,
        };
        if t.ends {
            s = mdp.sample_start(rng);
            a = rng.gen_range(0..na);
        } else {
            s = next;
            a = pick(s, rng);
        }
        t
    };

    let mut window: std::collections::VecDeque<Transition> = (0..config.n).map(|_| generate(rng)).collect();
    for _ in 0..config.steps {
        let mut g = 0.0;
        let mut disc = 1.0;
        let mut last = 0;
        for (i, t) in window.iter().enumerate() {
            g += disc * t.reward;
            disc *= gamma;
            last = i;
            if t.ends {
                break;
            }
        }
        let boot = window[last].next_state;
        let v_next: f64 = (0..na).map(|a2| policy[(boot, a2)] * model.value(boot * na + a2)).sum();
        g += disc * v_next;
        let row = window[0].row;
        let err = g - model.value(row);
        let phi = model.basis.row(row).transpose();
        model.weights.axpy(config.alpha * err, &phi, 1.0);
        window.pop_front();
        window.push_back(generate(rng));
    }
    if model.weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::Numeric("TD weights diverged".into()));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::theory::mdp::{policy_q_exact, softmax_policy, sup_norm};

    #[test]
    fn rank_deficient_basis_is_rejected() {
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        assert!(LinearQ::new(b).is_err());
        assert!(LinearQ::new(DMatrix::identity(4, 4)).is_ok());
    }

    #[test]
    fn zero_reward_gives_zero_weights() {
        let mut r = rng::seeded(1);
        let p = vec![0.5, 0.5, 0.0, 0.0, 1.0, 0.0, 0.0, 0.2, 0.8, 1.0, 0.0, 0.0, 0.3, 0.3, 0.4, 0.0, 0.0, 1.0];
        let m = TabularMdp::new(3, 2, p, vec![0.0; 6], 0.9, vec![1.0 / 3.0; 3], 1.0).unwrap();
        let cfg = TdConfig {
            n: 2,
            alpha: 0.05,
            steps: 1000,
            restart: 0.1,
        };
        let q = td_evaluate(&m, &crate::theory::mdp::uniform_policy(3, 2), DMatrix::identity(6, 6), &cfg, &mut r).unwrap();
        assert!(q.weights.iter().all(|&w| w == 0.0));
    }

    #[test]
    fn one_hot_td_tracks_exact_solution() {
        let mut r = rng::seeded(2);
        let m = TabularMdp::random(4, 2, 0.7, &mut r).unwrap();
        let pi = softmax_policy(&QTable::from_fn(4, 2, |s, a| ((s * 3 + a) % 4) as f64), 1.0);
        let exact = policy_q_exact(&m, &pi).unwrap();
        let cfg = TdConfig {
            n: 2,
            alpha: 0.01,
            steps: 40_000,
            restart: 0.3,
        };
        let td = td_evaluate(&m, &pi, DMatrix::identity(8, 8), &cfg, &mut r).unwrap();
        assert!(sup_norm(&(td.table(4, 2) - exact)) < 0.15);
    }
}
