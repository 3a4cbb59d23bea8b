use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::envs::countdown::CountdownParams;
use crate::envs::{Family, GenParams, Level, R_FMT};
use crate::error::{Error, Result};
use crate::policy::GrpoConfig;
use crate::sched::{ScheduleKind, ScheduleSpec};

pub const CONFIG_VERSION: u32 = 1;

fn d_seed() -> u64 {
    1
}
fn d_steps() -> u64 {
    1600
}
fn d_batch() -> usize {
    2
}
fn d_eval_every() -> u64 {
    100
}
fn d_r_fmt() -> f64 {
    R_FMT
}

/// Sampler choice; `K` and `T` come from the enclosing experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub kind: ScheduleKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<Vec<u64>>,
    pub beta: f64,
    pub sigma: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            kind: ScheduleKind::Gaussian,
            thresholds: None,
            beta: 0.5,
            sigma: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolConfig {
    pub train_per_level: usize,
    pub eval_per_level: usize,
    /// Countdown numbers are drawn from `[1, max_number]`.
    pub max_number: u64,
    pub max_target: u64,
    /// Load `<family>-<level>.pool` files from here instead of generating.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval_dir: Option<PathBuf>,
}

impl Default for PoolConfig {
    fn default() -> Self {
        PoolConfig {
            train_per_level: 512,
            eval_per_level: 256,
            max_number: 99,
            max_target: 999,
            train_dir: None,
            eval_dir: None,
        }
    }
}

impl PoolConfig {
    pub fn gen_params(&self) -> GenParams {
        GenParams {
            countdown: CountdownParams {
                max_number: self.max_number,
                max_target: self.max_target,
            },
        }
    }
}

/// One training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub family: Family,
    #[serde(default = "d_seed")]
    pub seed: u64,
    /// Seed for pool generation; defaults to `seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pool_seed: Option<u64>,
    /// Total training steps `T`.
    #[serde(default = "d_steps")]
    pub steps: u64,
    /// Prompts per step `B`.
    #[serde(default = "d_batch")]
    pub batch_size: usize,
    /// Draw a level per prompt instead of once per step.
    #[serde(default)]
    pub per_prompt_levels: bool,
    #[serde(default = "d_eval_every")]
    pub eval_every: u64,
    /// Train only on these levels; the schedule then runs over them in order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level_subset: Option<Vec<Level>>,
    /// Reward for a well-formed but wrong answer.
    #[serde(default = "d_r_fmt")]
    pub r_fmt: f64,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub pools: PoolConfig,
    #[serde(default)]
    pub grpo: GrpoConfig,
}

impl ExperimentConfig {
    pub fn new(family: Family) -> Self {
        ExperimentConfig {
            version: CONFIG_VERSION,
            family,
            seed: d_seed(),
            pool_seed: None,
            steps: d_steps(),
            batch_size: d_batch(),
            per_prompt_levels: false,
            eval_every: d_eval_every(),
            level_subset: None,
            r_fmt: d_r_fmt(),
            schedule: ScheduleConfig::default(),
            pools: PoolConfig::default(),
            grpo: GrpoConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: ExperimentConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Training levels in schedule order.
    pub fn levels(&self) -> Vec<Level> {
        self.level_subset.clone().unwrap_or_else(|| Level::TRAINING.to_vec())
    }

    pub fn pool_seed(&self) -> u64 {
        self.pool_seed.unwrap_or(self.seed)
    }

    pub fn schedule_spec(&self) -> ScheduleSpec {
        let levels = self.levels().len();
        let mut spec = ScheduleSpec::new(self.schedule.kind, levels, self.steps);
        spec.beta = self.schedule.beta;
        spec.sigma = self.schedule.sigma;
        spec.thresholds = match self.schedule.kind {
            ScheduleKind::Traditional => Some(self.schedule.thresholds.clone().unwrap_or_else(|| spec.effective_thresholds())),
            _ => self.schedule.thresholds.clone(),
        };
        spec
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::config(format!(
                "version: unsupported config version {}, expected {CONFIG_VERSION}",
                self.version
            )));
        }
        if self.steps == 0 {
            return Err(Error::config("steps must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if self.eval_every == 0 {
            return Err(Error::config("eval_every must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.r_fmt) {
            return Err(Error::config("r_fmt must lie in [0, 1]"));
        }
        if let Some(sub) = &self.level_subset {
            if sub.is_empty() {
                return Err(Error::config("level_subset must not be empty"));
            }
            let mut seen = sub.clone();
            seen.sort();
            seen.dedup();
            if seen.len() != sub.len() {
                return Err(Error::config("level_subset contains a level twice"));
            }
        }
        if self.pools.train_dir.is_none() && self.pools.train_per_level == 0 {
            return Err(Error::config("pools.train_per_level must be at least 1"));
        }
        if self.pools.eval_dir.is_none() && self.pools.eval_per_level == 0 {
            return Err(Error::config("pools.eval_per_level must be at least 1"));
        }
        if self.pools.max_number == 0 || self.pools.max_target == 0 {
            return Err(Error::config("pools.max_number and pools.max_target must be positive"));
        }
        self.grpo.validate()?;
        self.schedule_spec().validate()
    }
}
