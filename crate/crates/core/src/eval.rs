//! Accuracy tables and pass@k.
//!
//! pass@k is estimated without bias from `n` samples with `c` correct:
//!
//! ```text
//! pass@k = 1 - C(n-c, k) / C(n, k) = 1 - Π_{i=n-c+1}^{n} (1 - k/i)
//! ```
//!
//! The product form never builds large binomials.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envs::{Level, TaskInstance};
use crate::error::{Error, Result};
use crate::policy::{DecodeMode, Policy};
use crate::rng::{self, Rng};

pub const DEFAULT_PASS_AT_K_SAMPLES: usize = 64;

pub fn pass_at_k(n: usize, c: usize, k: usize) -> Result<f64> {
    if c > n {
        return Err(Error::config(format!("correct count {c} exceeds sample count {n}")));
    }
    if k == 0 || k > n {
        return Err(Error::config(format!("k = {k} must lie in 1..={n}")));
    }
    if n - c < k {
        return Ok(1.0);
    }
    let prod: f64 = ((n - c + 1)..=n).map(|i| 1.0 - k as f64 / i as f64).product();
    Ok(1.0 - prod)
}

/// Monte-Carlo pass@k: the fraction of random `k`-subsets (without
/// replacement) of `outcomes` that contain a success.
pub fn pass_at_k_monte_carlo(outcomes: &[bool], k: usize, trials: usize, rng: &mut Rng) -> Result<f64> {
    if k == 0 || k > outcomes.len() {
        return Err(Error::config(format!("k = {k} must lie in 1..={}", outcomes.len())));
    }
    let mut hits = 0usize;
    for _ in 0..trials {
        hits += sample(rng, outcomes.len(), k).iter().any(|i| outcomes[i]) as usize;
    }
    Ok(hits as f64 / trials as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskCount {
    pub task_id: String,
    pub n: usize,
    pub c: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassAtKCurve {
    pub points: Vec<(usize, f64)>,
    pub counts: Vec<TaskCount>,
}

impl PassAtKCurve {
    pub fn value(&self, k: usize) -> Option<f64> {
        self.points.iter().find(|p| p.0 == k).map(|p| p.1)
    }

    /// Two-column `k,value` CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,value\n");
        for (k, v) in &self.points {
            out.push_str(&format!("{k},{v:.6}\n"));
        }
        out
    }
}

/// Correct-answer counts from `n` sampled answers per task.
pub fn sample_counts(
    policy: &dyn Policy,
    pool: &[TaskInstance],
    n: usize,
    mode: DecodeMode,
    seed: u64,
    max_len: usize,
) -> Result<Vec<TaskCount>> {
    pool.par_iter()
        .enumerate()
        .map(|(i, task)| {
            let mut rng = rng::derived(seed, &[i as u64]);
            let mut c = 0;
            for _ in 0..n {
                let r = policy.rollout(task, mode, &mut rng, max_len)?;
                c += task.is_correct(&r.tokens) as usize;
            }
            Ok(TaskCount {
                task_id: task.id.clone(),
                n,
                c,
            })
        })
        .collect()
}

/// Curve from precomputed counts, averaging the estimator over tasks.
pub fn curve_from_counts(counts: Vec<TaskCount>, k_list: &[usize]) -> Result<PassAtKCurve> {
    if counts.is_empty() {
        return Err(Error::config("pass@k needs a non-empty pool"));
    }
    let mut points = Vec::new();
    for &k in k_list {
        let mut total = 0.0;
        for tc in &counts {
            total += pass_at_k(tc.n, tc.c, k)?;
        }
        points.push((k, total / counts.len() as f64));
    }
    Ok(PassAtKCurve { points, counts })
}

pub fn pass_at_k_curve(
    policy: &dyn Policy,
    pool: &[TaskInstance],
    n: usize,
    k_list: &[usize],
    mode: DecodeMode,
    seed: u64,
    max_len: usize,
) -> Result<PassAtKCurve> {
    if let Some(&k) = k_list.iter().find(|&&k| k == 0 || k > n) {
        return Err(Error::config(format!("k = {k} must lie in 1..={n}")));
    }
    curve_from_counts(sample_counts(policy, pool, n, mode, seed, max_len)?, k_list)
}

/// Percent of tasks answered correctly with greedy decoding.
pub fn accuracy(policy: &dyn Policy, pool: &[TaskInstance], max_len: usize) -> Result<f64> {
    if pool.is_empty() {
        return Err(Error::config("accuracy needs a non-empty pool"));
    }
    let correct: usize = pool
        .par_iter()
        .map(|task| {
            let r = policy.rollout(task, DecodeMode::Greedy, &mut rng::seeded(0), max_len)?;
            Ok(task.is_correct(&r.tokens) as usize)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    Ok(100.0 * correct as f64 / pool.len() as f64)
}

/// Per-level greedy accuracy, in percent.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: BTreeMap<Level, f64>,
}

impl EvalReport {
    pub fn get(&self, level: Level) -> Option<f64> {
        self.accuracy.get(&level).copied()
    }
}

pub fn accuracy_table(policy: &dyn Policy, pools: &BTreeMap<Level, Vec<TaskInstance>>, max_len: usize) -> Result<EvalReport> {
    let mut table = BTreeMap::new();
    for (&level, pool) in pools {
        table.insert(level, accuracy(policy, pool, max_len)?);
    }
    Ok(EvalReport { accuracy: table })
}

/// Quotes a CSV field when it contains a comma, quote or newline.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Accuracy grid with one row per variant and a shared pool hash column.
pub fn table_csv(rows: &[(String, EvalReport)], pool_hash: &str) -> String {
    let mut out = String::from("variant");
    for l in Level::ALL {
        out.push(',');
        out.push_str(l.heading());
    }
    out.push_str(",pool_hash\n");
    for (name, report) in rows {
        out.push_str(&csv_field(name));
        for l in Level::ALL {
            out.push(',');
            if let Some(a) = report.get(l) {
                out.push_str(&format!("{a:.1}"));
            }
        }
        out.push(',');
        out.push_str(pool_hash);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binom(n: u64, k: u64) -> f64 {
        if k > n {
            return 0.0;
        }
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    #[test]
    fn pass_at_k_examples() {
        assert_eq!(pass_at_k(10, 10, 3).unwrap(), 1.0);
        assert_eq!(pass_at_k(10, 0, 3).unwrap(), 0.0);
        assert!((pass_at_k(10, 3, 2).unwrap() - (1.0 - 21.0 / 45.0)).abs() < 1e-12);
        assert!(pass_at_k(5, 1, 6).is_err());
        assert!(pass_at_k(5, 6, 1).is_err());
    }

    #[test]
    fn product_form_matches_binomials() {
        for n in 1..=30u64 {
            for c in 0..=n {
                for k in 1..=n {
                    let want = 1.0 - binom(n - c, k) / binom(n, k);
                    let got = pass_at_k(n as usize, c as usize, k as usize).unwrap();
                    assert!((got - want).abs() < 1e-9, "n={n} c={c} k={k}");
                }
            }
        }
    }

    #[test]
    fn table_layout() {
        let mut r = EvalReport::default();
        for l in Level::ALL {
            r.accuracy.insert(l, 100.0 / 3.0);
        }
        let csv = table_csv(&[("Base".into(), r)], "abc");
        assert_eq!(csv, "variant,Trivial,Easy,Med,Hard,OOD,pool_hash\nBase,33.3,33.3,33.3,33.3,33.3,abc\n");
        assert_eq!(csv_field("E2H-G (0.5, 0.5)"), "\"E2H-G (0.5, 0.5)\"");
        assert_eq!(csv_field("a\"b,"), "\"a\"\"b,\"");
    }
}
