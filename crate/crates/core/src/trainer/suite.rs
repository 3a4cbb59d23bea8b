use super::{build_pools, train, ExperimentConfig, TrainOutcome};
use crate::error::Result;
use crate::eval::{accuracy_table, table_csv, EvalReport};
use crate::policy::{base_prior, feature_map, LinearPolicy};
use crate::sched::{ScheduleKind, GAUSSIAN_PRESETS};

/// One row of the scheduler comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub name: String,
    /// `None` is the untrained base policy.
    pub schedule: Option<(ScheduleKind, f64, f64)>,
}

/// Rows in table order: base, balanced, traditional, the Gaussian presets,
/// cosine.
pub fn suite_variants() -> Vec<Variant> {
    let mut v = vec![
        Variant {
            name: "Base".into(),
            schedule: None,
        },
        Variant {
            name: "Balanced".into(),
            schedule: Some((ScheduleKind::Balanced, 0.5, 0.5)),
        },
        Variant {
            name: "CL".into(),
            schedule: Some((ScheduleKind::Traditional, 0.5, 0.5)),
        },
    ];
    for (beta, sigma) in GAUSSIAN_PRESETS {
        v.push(Variant {
            name: format!("E2H-G ({beta}, {sigma})"),
            schedule: Some((ScheduleKind::Gaussian, beta, sigma)),
        });
    }
    v.push(Variant {
        name: "E2H-C".into(),
        schedule: Some((ScheduleKind::Cosine, 0.5, 0.5)),
    });
    v
}

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub rows: Vec<(String, EvalReport)>,
    pub runs: Vec<(String, TrainOutcome)>,
    /// Shared eval pool hash.
    pub pool_hash: String,
}

impl SuiteResult {
    pub fn to_csv(&self) -> String {
        table_csv(&self.rows, &self.pool_hash)
    }
}

/// Trains every variant from `template` on one shared set of pools.
pub fn run_baseline_suite(template: &ExperimentConfig) -> Result<SuiteResult> {
    template.validate()?;
    let pools = build_pools(template)?;
    let pool_hash = pools.eval_hash();
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for v in suite_variants() {
        match v.schedule {
            None => {
                let params = base_prior(template.family);
                let fmap = feature_map(template.family);
                let policy = LinearPolicy {
                    params: &params,
                    fmap: fmap.as_ref(),
                };
                rows.push((v.name, accuracy_table(&policy, &pools.eval, template.grpo.max_len)?));
            }
            Some((kind, beta, sigma)) => {
                let mut c = template.clone();
                c.schedule.kind = kind;
                c.schedule.beta = beta;
                c.schedule.sigma = sigma;
                if kind != ScheduleKind::Traditional {
                    c.schedule.thresholds = None;
                }
                let out = train(&c, &pools)?;
                rows.push((v.name.clone(), out.final_report.clone()));
                runs.push((v.name, out));
            }
        }
    }
    Ok(SuiteResult { rows, runs, pool_hash })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::Family;

    #[test]
    fn variant_order() {
        let names: Vec<String> = suite_variants().into_iter().map(|v| v.name).collect();
        assert_eq!(
            names,
            ["Base", "Balanced", "CL", "E2H-G (0.25, 0.75)", "E2H-G (0.5, 0.5)", "E2H-G (0.75, 0.25)", "E2H-C"]
        );
    }

    #[test]
    fn tiny_suite_emits_a_full_grid() {
        let mut c = ExperimentConfig::new(Family::Blocksworld);
        c.steps = 8;
        c.eval_every = 8;
        c.pools.train_per_level = 4;
        c.pools.eval_per_level = 4;
        let s = run_baseline_suite(&c).unwrap();
        let csv = s.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 8);
        assert!(lines[4].starts_with("\"E2H-G (0.25, 0.75)\","));
        assert!(lines[1..].iter().all(|l| l.ends_with(&s.pool_hash)));
    }
}
