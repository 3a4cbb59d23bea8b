//! Difficulty from observed error rates.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envs::pool::relabel;
use crate::envs::{Level, TaskInstance};
use crate::error::{Error, Result};
use crate::policy::{DecodeMode, Policy};
use crate::rng::{self, Rng};

pub const DEFAULT_SAMPLES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRateRecord {
    pub task_id: String,
    pub n_samples: usize,
    pub n_correct: usize,
    pub error_rate: f64,
}

impl ErrorRateRecord {
    pub fn new(task_id: impl Into<String>, n_samples: usize, n_correct: usize) -> Result<Self> {
        if n_samples == 0 || n_correct > n_samples {
            return Err(Error::config(format!("invalid counts {n_correct}/{n_samples}")));
        }
        Ok(ErrorRateRecord {
            task_id: task_id.into(),
            n_samples,
            n_correct,
            error_rate: 1.0 - n_correct as f64 / n_samples as f64,
        })
    }
}

/// Samples `n_samples` answers (sampling decode) and counts correct ones.
pub fn estimate_error_rate(
    task: &TaskInstance,
    policy: &dyn Policy,
    n_samples: usize,
    mode: DecodeMode,
    rng: &mut Rng,
    max_len: usize,
) -> Result<ErrorRateRecord> {
    if n_samples == 0 {
        return Err(Error::config("n_samples must be at least 1"));
    }
    let mut correct = 0;
    for _ in 0..n_samples {
        let r = policy.rollout(task, mode, rng, max_len)?;
        correct += task.is_correct(&r.tokens) as usize;
    }
    ErrorRateRecord::new(task.id.clone(), n_samples, correct)
}

/// Error rates for a whole pool; task `i` uses a stream derived from
/// `(seed, i)`, so results do not depend on thread scheduling.
pub fn estimate_pool(
    tasks: &[TaskInstance],
    policy: &dyn Policy,
    n_samples: usize,
    mode: DecodeMode,
    seed: u64,
    max_len: usize,
) -> Result<Vec<ErrorRateRecord>> {
    tasks
        .par_iter()
        .enumerate()
        .map(|(i, t)| estimate_error_rate(t, policy, n_samples, mode, &mut rng::derived(seed, &[i as u64]), max_len))
        .collect()
}

/// Equal-count quartiles of the records sorted by `(error_rate, task_id)`.
/// Remainders go to the easier groups.
pub fn bucket_quartiles(records: &[ErrorRateRecord]) -> Result<BTreeMap<String, Level>> {
    if records.len() < 4 {
        return Err(Error::config(format!("bucketing needs at least 4 records, got {}", records.len())));
    }
    let mut sorted: Vec<&ErrorRateRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.error_rate.total_cmp(&b.error_rate).then_with(|| a.task_id.cmp(&b.task_id)));
    let n = sorted.len();
    let (base, extra) = (n / 4, n % 4);
    let mut out = BTreeMap::new();
    let mut idx = 0;
    for (g, level) in Level::TRAINING.into_iter().enumerate() {
        let size = base + usize::from(g < extra);
        for r in &sorted[idx..idx + size] {
            if out.insert(r.task_id.clone(), level).is_some() {
                return Err(Error::config(format!("duplicate task id `{}`", r.task_id)));
            }
        }
        idx += size;
    }
    Ok(out)
}

/// Copies of the tasks with their levels replaced by the bucket labels.
pub fn apply_buckets(tasks: &[TaskInstance], buckets: &BTreeMap<String, Level>) -> Result<Vec<TaskInstance>> {
    tasks
        .iter()
        .map(|t| {
            let level = *buckets
                .get(&t.id)
                .ok_or_else(|| Error::config(format!("no bucket for task `{}`", t.id)))?;
            let mut t = t.clone();
            relabel(&mut t, level);
            Ok(t)
        })
        .collect()
}

/// `error_rate,count` rows over the distinct observed rates.
pub fn histogram_csv(records: &[ErrorRateRecord]) -> String {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for r in records {
        *counts.entry(format!("{:.4}", r.error_rate)).or_default() += 1;
    }
    let mut out = String::from("error_rate,count\n");
    for (k, v) in counts {
        out.push_str(&format!("{k},{v}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn recs(rates: &[f64]) -> Vec<ErrorRateRecord> {
        rates
            .iter()
            .enumerate()
            .map(|(i, &r)| ErrorRateRecord {
                task_id: format!("t{i}"),
                n_samples: 20,
                n_correct: ((1.0 - r) * 20.0).round() as usize,
                error_rate: r,
            })
            .collect()
    }

    #[test]
    fn bucket_examples() {
        use Level::*;
        let b = bucket_quartiles(&recs(&[0.0, 0.05, 0.2, 0.3, 0.55, 0.6, 0.9, 1.0])).unwrap();
        let got: Vec<Level> = (0..8).map(|i| b[&format!("t{i}")]).collect();
        assert_eq!(got, vec![Trivial, Trivial, Easy, Easy, Medium, Medium, Hard, Hard]);

        let b = bucket_quartiles(&recs(&[0.5; 5])).unwrap();
        let sizes: Vec<usize> = Level::TRAINING.iter().map(|l| b.values().filter(|v| *v == l).count()).collect();
        assert_eq!(sizes, vec![2, 1, 1, 1]);
        assert!(bucket_quartiles(&recs(&[0.1, 0.2, 0.3])).is_err());
    }

    #[test]
    fn histogram_counts() {
        let csv = histogram_csv(&recs(&[0.0, 0.0, 0.5]));
        assert_eq!(csv, "error_rate,count\n0.0000,2\n0.5000,1\n");
    }
}
