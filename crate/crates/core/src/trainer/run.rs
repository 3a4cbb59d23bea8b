use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ExperimentConfig;
use crate::envs::pool::{self, pool_file_name};
use crate::envs::{self, Family, Level, TaskInstance};
use crate::error::{Error, Result};
use crate::eval::{accuracy_table, EvalReport};
use crate::policy::grpo::{ascend, clip_grad_norm, gradient};
use crate::policy::{base_prior, decode, feature_map, DecodeMode, FeatureMap, LinearPolicy, PolicyParams, StepDiagnostics};
use crate::rng;
use crate::sched::LevelStream;

/// Train and eval task pools keyed by level.
#[derive(Debug, Clone, PartialEq)]
pub struct Pools {
    pub train: BTreeMap<Level, Vec<TaskInstance>>,
    pub eval: BTreeMap<Level, Vec<TaskInstance>>,
}

impl Pools {
    /// Hash over every eval pool, in level order.
    pub fn eval_hash(&self) -> String {
        let text: String = self.eval.values().map(|p| pool::to_text(p)).collect();
        pool::sha256_hex(text.as_bytes())
    }
}

fn load_dir(dir: &Path, family: Family, levels: &[Level]) -> Result<BTreeMap<Level, Vec<TaskInstance>>> {
    levels
        .iter()
        .map(|&l| Ok((l, pool::load(&dir.join(pool_file_name(family, l)))?)))
        .collect()
}

/// Loads or generates the pools named by `config`. Training pools cover the
/// configured levels; eval pools cover every level including OOD.
pub fn build_pools(config: &ExperimentConfig) -> Result<Pools> {
    let gp = config.pools.gen_params();
    let seed = config.pool_seed();
    let generate = |split: u64, count: usize, levels: &[Level]| {
        levels
            .iter()
            .map(|&l| {
                let mut r = rng::derived(seed, &[split, l.index() as u64]);
                (l, envs::generate(config.family, l, count, &gp, &mut r))
            })
            .collect::<BTreeMap<_, _>>()
    };
    let train_levels = config.levels();
    let train = match &config.pools.train_dir {
        Some(d) => load_dir(d, config.family, &train_levels)?,
        None => generate(0, config.pools.train_per_level, &train_levels),
    };
    let eval = match &config.pools.eval_dir {
        Some(d) => load_dir(d, config.family, &Level::ALL)?,
        None => generate(1, config.pools.eval_per_level, &Level::ALL),
    };
    for (split, pools) in [("train", &train), ("eval", &eval)] {
        for (l, p) in pools {
            if p.is_empty() {
                return Err(Error::config(format!("{split} pool for level {} is empty", l.name())));
            }
            if let Some(t) = p.iter().find(|t| t.family() != config.family) {
                return Err(Error::config(format!("{split} pool task `{}` is not a {} task", t.id, config.family)));
            }
        }
    }
    Ok(Pools { train, eval })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub sampled_level: Level,
    /// Per-prompt levels, present only with per-prompt sampling.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub prompt_levels: Vec<Level>,
    pub task_ids: Vec<String>,
    pub mean_reward: f64,
    pub mean_advantage: f64,
    pub kl: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSnapshot {
    /// Number of updates applied before this snapshot.
    pub step: u64,
    pub accuracy: BTreeMap<Level, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LogRecord {
    Step(StepRecord),
    Eval(EvalSnapshot),
}

/// Append-only training log. Contains no wallclock data, so identical runs
/// serialize to identical bytes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub records: Vec<LogRecord>,
}

impl RunLog {
    pub fn steps(&self) -> impl Iterator<Item = &StepRecord> {
        self.records.iter().filter_map(|r| match r {
            LogRecord::Step(s) => Some(s),
            LogRecord::Eval(_) => None,
        })
    }

    pub fn evals(&self) -> impl Iterator<Item = &EvalSnapshot> {
        self.records.iter().filter_map(|r| match r {
            LogRecord::Eval(e) => Some(e),
            LogRecord::Step(_) => None,
        })
    }

    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("log record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str, origin: &str) -> Result<Self> {
        let records = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::parse(format!("{origin}:{}", i + 1), e.to_string())))
            .collect::<Result<_>>()?;
        Ok(RunLog { records })
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: PolicyParams,
    pub log: RunLog,
    pub final_report: EvalReport,
    /// Environment rollouts consumed, always `T × B × G`.
    pub total_rollouts: u64,
    /// Parameters after each post-start evaluation, keyed by step.
    pub checkpoints: Vec<(u64, PolicyParams)>,
    /// Seconds spent in each step, kept out of the log.
    pub step_seconds: Vec<f64>,
}

fn snapshot(params: &PolicyParams, fmap: &dyn FeatureMap, pools: &Pools, max_len: usize) -> Result<EvalReport> {
    accuracy_table(&LinearPolicy { params, fmap }, &pools.eval, max_len)
}

/// Runs one curriculum training job on prepared pools.
pub fn train(config: &ExperimentConfig, pools: &Pools) -> Result<TrainOutcome> {
    config.validate()?;
    let levels = config.levels();
    for l in &levels {
        if pools.train.get(l).is_none_or(|p| p.is_empty()) {
            return Err(Error::config(format!("no training tasks for level {}", l.name())));
        }
    }
    let spec = config.schedule_spec();
    let fmap = feature_map(config.family);
    let fmap = fmap.as_ref();
    let reference = base_prior(config.family);
    let mut params = reference.clone();
    let grpo = config.grpo;
    let (b_size, g_size) = (config.batch_size, grpo.group_size);
    let mut log = RunLog::default();
    let mut step_seconds = Vec::with_capacity(config.steps as usize);

    let report = snapshot(&params, fmap, pools, grpo.max_len)?;
    log.records.push(LogRecord::Eval(EvalSnapshot {
        step: 0,
        accuracy: report.accuracy,
    }));

    let mut final_report = None;
    let mut checkpoints = Vec::new();
    let stream = LevelStream::new(&mut rng::derived(config.seed, &[3]));
    for t in 0..config.steps {
        let started = Instant::now();
        let dist = spec.distribution_or_default(t)?;
        let mut draw = rng::derived(config.seed, &[1, t]);
        let k_step = stream.level(&dist, t);
        let mut prompts = Vec::with_capacity(b_size);
        for _ in 0..b_size {
            let k = if config.per_prompt_levels { dist.sample(&mut draw) } else { k_step };
            let pool = &pools.train[&levels[k]];
            prompts.push((levels[k], &pool[draw.gen_range(0..pool.len())]));
        }

        let mode = DecodeMode::plain(params.temperature_default);
        let current = &params;
        let results = prompts
            .par_iter()
            .enumerate()
            .map(|(b, &(_, task))| {
                let group = (0..g_size)
                    .map(|g| {
                        let mut r = rng::derived(config.seed, &[2, t, b as u64, g as u64]);
                        let mut ro = decode(current, fmap, task, mode, &mut r, grpo.max_len)?;
                        ro.reward = Some(envs::reward(task, &ro.tokens, config.r_fmt));
                        Ok(ro)
                    })
                    .collect::<Result<Vec<_>>>()?;
                gradient(current, fmap, task, &group, &grpo, &reference)
            })
            .collect::<Result<Vec<(Vec<f64>, StepDiagnostics)>>>()?;

        let mut grad = vec![0.0; params.weights.len()];
        let mut diag = StepDiagnostics::default();
        let scale = 1.0 / b_size as f64;
        for (g, d) in &results {
            for (acc, x) in grad.iter_mut().zip(g) {
                *acc += x * scale;
            }
            diag.mean_reward += d.mean_reward * scale;
            diag.mean_advantage += d.mean_advantage * scale;
            diag.kl += d.kl * scale;
        }
        diag.grad_norm = clip_grad_norm(&mut grad, grpo.max_grad_norm);
        let lr = grpo.learning_rate * grpo.lr_schedule.factor(t, config.steps);
        params = ascend(&params, &grad, lr);
        if params.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Numeric(format!("non-finite weights after step {t}")));
        }

        log.records.push(LogRecord::Step(StepRecord {
            step: t,
            sampled_level: levels[k_step],
            prompt_levels: if config.per_prompt_levels { prompts.iter().map(|p| p.0).collect() } else { Vec::new() },
            task_ids: prompts.iter().map(|p| p.1.id.clone()).collect(),
            mean_reward: diag.mean_reward,
            mean_advantage: diag.mean_advantage,
            kl: diag.kl,
            grad_norm: diag.grad_norm,
        }));
        step_seconds.push(started.elapsed().as_secs_f64());

        let done = t + 1;
        if done % config.eval_every == 0 || done == config.steps {
            let report = snapshot(&params, fmap, pools, grpo.max_len)?;
            log.records.push(LogRecord::Eval(EvalSnapshot {
                step: done,
                accuracy: report.accuracy.clone(),
            }));
            checkpoints.push((done, params.clone()));
            if done == config.steps {
                final_report = Some(report);
            }
        }
    }

    Ok(TrainOutcome {
        params,
        log,
        final_report: final_report.expect("final snapshot is always taken"),
        total_rollouts: config.steps * (b_size * g_size) as u64,
        checkpoints,
        step_seconds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sched::ScheduleKind;

    fn small(kind: ScheduleKind) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(Family::Countdown);
        c.steps = 40;
        c.eval_every = 20;
        c.schedule.kind = kind;
        c.pools.train_per_level = 16;
        c.pools.eval_per_level = 8;
        c.pools.max_number = 25;
        c
    }

    #[test]
    fn log_shape_and_accounting() {
        let c = small(ScheduleKind::Gaussian);
        let pools = build_pools(&c).unwrap();
        let out = train(&c, &pools).unwrap();
        let steps: Vec<u64> = out.log.steps().map(|s| s.step).collect();
        assert_eq!(steps, (0..40).collect::<Vec<_>>());
        let evals: Vec<u64> = out.log.evals().map(|e| e.step).collect();
        assert_eq!(evals, vec![0, 20, 40]);
        assert_eq!(out.checkpoints.iter().map(|c| c.0).collect::<Vec<_>>(), vec![20, 40]);
        assert_eq!(out.checkpoints[1].1, out.params);
        assert_eq!(out.total_rollouts, 40 * 2 * 8);
        assert_eq!(out.final_report.accuracy.len(), 5);
        assert_eq!(RunLog::from_jsonl(&out.log.to_jsonl(), "log").unwrap(), out.log);
        assert_eq!(build_pools(&c).unwrap(), pools);
    }

    #[test]
    fn traditional_follows_quartiles() {
        let c = small(ScheduleKind::Traditional);
        let out = train(&c, &build_pools(&c).unwrap()).unwrap();
        for s in out.log.steps() {
            assert_eq!(s.sampled_level, Level::TRAINING[(s.step / 10) as usize]);
        }
    }

    #[test]
    fn subset_draws_only_from_subset() {
        let mut c = small(ScheduleKind::Balanced);
        c.level_subset = Some(vec![Level::Hard]);
        let out = train(&c, &build_pools(&c).unwrap()).unwrap();
        assert!(out.log.steps().all(|s| s.sampled_level == Level::Hard && s.task_ids.iter().all(|id| id.contains("-hard-"))));
    }
}
