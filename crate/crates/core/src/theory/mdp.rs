use nalgebra::{DMatrix, DVector};
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;

/// `S × A` table of action values.
pub type QTable = DMatrix<f64>;
/// `S × A` table of action probabilities; rows sum to one.
pub type TabularPolicy = DMatrix<f64>;

const ROW_TOL: f64 = 1e-12;

/// Finite discounted MDP.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    /// `p[(s * A + a) * S + s']`.
    p: Vec<f64>,
    /// `r[s * A + a]`.
    r: Vec<f64>,
    gamma: f64,
    start: Vec<f64>,
    r_max: f64,
}

impl TabularMdp {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        p: Vec<f64>,
        r: Vec<f64>,
        gamma: f64,
        start: Vec<f64>,
        r_max: f64,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::config("MDP needs at least one state and one action"));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::config(format!("gamma must lie in (0, 1), got {gamma}")));
        }
        let sa = n_states * n_actions;
        if p.len() != sa * n_states || r.len() != sa || start.len() != n_states {
            return Err(Error::config("transition, reward or start shape mismatch"));
        }
        for (i, row) in p.chunks(n_states).enumerate() {
            check_distribution(row, &format!("transition row (s={}, a={})", i / n_actions, i % n_actions))?;
        }
        check_distribution(&start, "start distribution")?;
        if !(r_max >= 0.0 && r_max.is_finite()) {
            return Err(Error::config("r_max must be non-negative"));
        }
        if let Some(x) = r.iter().find(|&&x| !(0.0..=r_max).contains(&x)) {
            return Err(Error::config(format!("reward {x} outside [0, {r_max}]")));
        }
        Ok(TabularMdp {
            n_states,
            n_actions,
            p,
            r,
            gamma,
            start,
            r_max,
        })
    }

    /// Dense random MDP with rewards in `[0, 1]` and a uniform start.
    pub fn random(n_states: usize, n_actions: usize, gamma: f64, rng: &mut Rng) -> Result<Self> {
        let mut p = Vec::with_capacity(n_states * n_actions * n_states);
        for _ in 0..n_states * n_actions {
            let w: Vec<f64> = (0..n_states).map(|_| rng.gen::<f64>() + 1e-3).collect();
            let s: f64 = w.iter().sum();
            p.extend(w.into_iter().map(|x| x / s));
        }
        let r = (0..n_states * n_actions).map(|_| rng.gen::<f64>()).collect();
        Self::new(n_states, n_actions, p, r, gamma, vec![1.0 / n_states as f64; n_states], 1.0)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn start(&self) -> &[f64] {
        &self.start
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.r[s * self.n_actions + a]
    }

    pub fn transition(&self, s: usize, a: usize) -> &[f64] {
        let i = (s * self.n_actions + a) * self.n_states;
        &self.p[i..i + self.n_states]
    }

    pub fn sample_next(&self, s: usize, a: usize, rng: &mut Rng) -> usize {
        sample_index(self.transition(s, a), rng)
    }

    pub fn sample_start(&self, rng: &mut Rng) -> usize {
        sample_index(&self.start, rng)
    }

    pub fn with_start(mut self, start: Vec<f64>) -> Result<Self> {
        if start.len() != self.n_states {
            return Err(Error::config("start distribution has the wrong length"));
        }
        check_distribution(&start, "start distribution")?;
        self.start = start;
        Ok(self)
    }

    /// Optimal Bellman operator `(TQ)(s,a) = r(s,a) + γ Σ_s' P(s'|s,a) max_a' Q(s',a')`.
    pub fn bellman_optimal(&self, q: &QTable) -> QTable {
        let v: Vec<f64> = (0..self.n_states).map(|s| row_max(q, s)).collect();
        self.backup(&v)
    }

    /// `r + γ P v` for a state-value vector `v`.
    fn backup(&self, v: &[f64]) -> QTable {
        QTable::from_fn(self.n_states, self.n_actions, |s, a| {
            let next: f64 = self.transition(s, a).iter().zip(v).map(|(p, v)| p * v).sum();
            self.reward(s, a) + self.gamma * next
        })
    }

    /// State-to-state transition matrix under `policy`.
    pub fn state_transition(&self, policy: &TabularPolicy) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_states, self.n_states, |s, s2| {
            (0..self.n_actions).map(|a| policy[(s, a)] * self.transition(s, a)[s2]).sum()
        })
    }

    pub fn check_policy(&self, policy: &TabularPolicy) -> Result<()> {
        if policy.nrows() != self.n_states || policy.ncols() != self.n_actions {
            return Err(Error::config("policy shape does not match the MDP"));
        }
        for s in 0..self.n_states {
            let row: Vec<f64> = policy.row(s).iter().copied().collect();
            check_distribution(&row, &format!("policy row {s}"))?;
        }
        Ok(())
    }
}

fn check_distribution(row: &[f64], what: &str) -> Result<()> {
    if row.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::config(format!("{what} has a negative or non-finite entry")));
    }
    let s: f64 = row.iter().sum();
    if (s - 1.0).abs() > ROW_TOL * row.len().max(1) as f64 {
        return Err(Error::config(format!("{what} sums to {s}, not 1")));
    }
    Ok(())
}

fn sample_index(probs: &[f64], rng: &mut Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

pub(crate) fn row_max(q: &QTable, s: usize) -> f64 {
    q.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

pub fn sup_norm(q: &DMatrix<f64>) -> f64 {
    q.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn uniform_policy(n_states: usize, n_actions: usize) -> TabularPolicy {
    TabularPolicy::from_element(n_states, n_actions, 1.0 / n_actions as f64)
}

/// Uniform over each state's maximizing actions.
pub fn greedy_policy(q: &QTable) -> TabularPolicy {
    let mut pi = TabularPolicy::zeros(q.nrows(), q.ncols());
    for s in 0..q.nrows() {
        let m = row_max(q, s);
        let best: Vec<usize> = (0..q.ncols()).filter(|&a| q[(s, a)] == m).collect();
        for &a in &best {
            pi[(s, a)] = 1.0 / best.len() as f64;
        }
    }
    pi
}

/// `softmax(β Q(s, ·))` per state; `β = ∞` gives [`greedy_policy`].
pub fn softmax_policy(q: &QTable, beta: f64) -> TabularPolicy {
    if beta.is_infinite() {
        return greedy_policy(q);
    }
    let mut pi = TabularPolicy::zeros(q.nrows(), q.ncols());
    for s in 0..q.nrows() {
        let m = row_max(q, s);
        let w: Vec<f64> = (0..q.ncols()).map(|a| (beta * (q[(s, a)] - m)).exp()).collect();
        let z: f64 = w.iter().sum();
        for (a, x) in w.into_iter().enumerate() {
            pi[(s, a)] = x / z;
        }
    }
    pi
}

#[derive(Debug, Clone)]
pub struct ViResult {
    pub q: QTable,
    pub iterations: usize,
    /// `‖Q_{i+1} − Q_i‖∞` for every iterate.
    pub deltas: Vec<f64>,
}

/// Iterates the optimal Bellman operator from zero until successive iterates
/// differ by less than `tol (1 − γ) / γ`, so the returned table has Bellman
/// residual below `tol`.
pub fn value_iteration(mdp: &TabularMdp, tol: f64) -> Result<ViResult> {
    if !(tol > 0.0) {
        return Err(Error::config("value iteration tolerance must be positive"));
    }
    let stop = tol * (1.0 - mdp.gamma) / mdp.gamma;
    let mut q = QTable::zeros(mdp.n_states, mdp.n_actions);
    let mut deltas = Vec::new();
    loop {
        let next = mdp.bellman_optimal(&q);
        let d = sup_norm(&(&next - &q));
        deltas.push(d);
        q = next;
        if d < stop {
            break;
        }
    }
    Ok(ViResult {
        iterations: deltas.len(),
        q,
        deltas,
    })
}

/// Solves `Q = r + γ P Π Q` exactly.
pub fn policy_q_exact(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<QTable> {
    mdp.check_policy(policy)?;
    let (ns, na) = (mdp.n_states, mdp.n_actions);
    let sa = ns * na;
    let mut m = DMatrix::<f64>::identity(sa, sa);
    for s in 0..ns {
        for a in 0..na {
            let row = s * na + a;
            for (s2, &p) in mdp.transition(s, a).iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                for a2 in 0..na {
                    m[(row, s2 * na + a2)] -= mdp.gamma * p * policy[(s2, a2)];
                }
            }
        }
    }
    let rhs = DVector::from_vec(mdp.r.clone());
    let x = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numeric("policy evaluation system is singular".into()))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("policy evaluation produced non-finite values".into()));
    }
    Ok(QTable::from_fn(ns, na, |s, a| x[s * na + a]))
}

/// Normalized discounted state occupancy `(1 − γ) μᵀ (I − γ P_π)⁻¹`.
pub fn occupancy(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<Vec<f64>> {
    mdp.check_policy(policy)?;
    let n = mdp.n_states;
    let pp = mdp.state_transition(policy);
    let m = (DMatrix::<f64>::identity(n, n) - pp * mdp.gamma).transpose();
    let mu = DVector::from_column_slice(&mdp.start) * (1.0 - mdp.gamma);
    let d = m
        .lu()
        .solve(&mu)
        .ok_or_else(|| Error::Numeric("occupancy system is singular".into()))?;
    let total: f64 = d.iter().sum();
    Ok(d.iter().map(|x| x.max(0.0) / total).collect())
}

/// `sqrt(Σ_s d(s) (max_a Q(s,a))²)`.
pub fn weighted_norm(q: &QTable, d: &[f64]) -> Result<f64> {
    if d.len() != q.nrows() {
        return Err(Error::config("distribution length does not match the table"));
    }
    check_distribution(d, "weighting distribution")?;
    Ok(d.iter()
        .enumerate()
        .map(|(s, w)| w * row_max(q, s).powi(2))
        .sum::<f64>()
        .sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn single(r: f64, gamma: f64) -> TabularMdp {
        TabularMdp::new(1, 1, vec![1.0], vec![r], gamma, vec![1.0], 1.0).unwrap()
    }

    /// Two states, two actions: action 0 stays, action 1 flips.
    fn flip(r: [f64; 4], gamma: f64) -> TabularMdp {
        let p = vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0];
        TabularMdp::new(2, 2, p, r.to_vec(), gamma, vec![1.0, 0.0], 1.0).unwrap()
    }

    #[test]
    fn vi_examples() {
        let v = value_iteration(&single(1.0, 0.9), 1e-10).unwrap();
        assert!((v.q[(0, 0)] - 10.0).abs() < 1e-9);
        let v = value_iteration(&single(0.0, 0.9), 1e-10).unwrap();
        assert_eq!(v.q[(0, 0)], 0.0);

        // State 1 pays 1 for staying, so the optimal policy flips once then stays.
        let m = flip([0.0, 0.0, 1.0, 0.0], 0.5);
        let v = value_iteration(&m, 1e-12).unwrap();
        // V(1) = 1 / (1 − γ) = 2, Q(0, flip) = 0 + γ·2 = 1, Q(0, stay) = γ·Q(0, flip) = 0.5.
        let want = [[0.5, 1.0], [2.0, 0.5]];
        for s in 0..2 {
            for a in 0..2 {
                assert!((v.q[(s, a)] - want[s][a]).abs() < 1e-12, "{s} {a}");
            }
        }
    }

    #[test]
    fn vi_contracts_and_meets_residual() {
        let mut r = rng::seeded(3);
        for _ in 0..10 {
            let m = TabularMdp::random(6, 3, 0.9, &mut r).unwrap();
            let v = value_iteration(&m, 1e-9).unwrap();
            for w in v.deltas.windows(2) {
                assert!(w[1] <= m.gamma() * w[0] + 1e-12);
            }
            assert!(sup_norm(&(m.bellman_optimal(&v.q) - &v.q)) < 1e-9);
        }
    }

    #[test]
    fn exact_evaluation_matches_bellman_equation() {
        let mut r = rng::seeded(4);
        let m = TabularMdp::random(5, 2, 0.8, &mut r).unwrap();
        let pi = softmax_policy(&QTable::from_fn(5, 2, |s, a| (s + 2 * a) as f64 * 0.3), 1.0);
        let q = policy_q_exact(&m, &pi).unwrap();
        for s in 0..5 {
            for a in 0..2 {
                let next: f64 = (0..5)
                    .map(|s2| m.transition(s, a)[s2] * (0..2).map(|a2| pi[(s2, a2)] * q[(s2, a2)]).sum::<f64>())
                    .sum();
                assert!((q[(s, a)] - m.reward(s, a) - 0.8 * next).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn occupancy_examples() {
        let m = single(0.5, 0.9);
        assert_eq!(occupancy(&m, &uniform_policy(1, 1)).unwrap(), vec![1.0]);
        // Always flip from s0: d = (1 − γ) Σ γ^t 1[t even] = 1 / (1 + γ) on s0.
        let m = flip([0.0; 4], 0.9);
        let pi = TabularPolicy::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 1.0]);
        let d = occupancy(&m, &pi).unwrap();
        assert!((d[0] - 1.0 / 1.9).abs() < 1e-12 && (d[1] - 0.9 / 1.9).abs() < 1e-12);
        let mut r = rng::seeded(5);
        for _ in 0..10 {
            let m = TabularMdp::random(7, 3, 0.95, &mut r).unwrap();
            let d = occupancy(&m, &uniform_policy(7, 3)).unwrap();
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn weighted_norm_examples() {
        assert_eq!(weighted_norm(&QTable::zeros(2, 2), &[0.5, 0.5]).unwrap(), 0.0);
        let q = QTable::from_row_slice(2, 2, &[3.0, -4.0, 0.0, 0.0]);
        assert_eq!(weighted_norm(&q, &[1.0, 0.0]).unwrap(), 3.0);
        let q = QTable::from_row_slice(2, 2, &[3.0, 1.0, 4.0, 2.0]);
        assert!((weighted_norm(&q, &[0.5, 0.5]).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
        assert!(weighted_norm(&q, &[0.5, 0.6]).is_err());
    }

    #[test]
    fn constructor_rejects_bad_rows() {
        assert!(TabularMdp::new(1, 1, vec![0.9], vec![0.0], 0.9, vec![1.0], 1.0).is_err());
        assert!(TabularMdp::new(1, 1, vec![1.0], vec![2.0], 0.9, vec![1.0], 1.0).is_err());
        assert!(TabularMdp::new(1, 1, vec![1.0], vec![0.0], 1.0, vec![1.0], 1.0).is_err());
    }
}
