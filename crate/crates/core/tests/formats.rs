//! Golden tests for every on-disk format.

use std::collections::BTreeMap;

use crlab::cli::schedule_csv;
use crlab::envs::countdown::{CountdownAnswer, CountdownTask};
use crlab::envs::{pool, Certificate, Level, Payload, Verdict};
use crlab::policy::{checkpoint, PolicyParams};
use crlab::sched::{ScheduleKind, ScheduleSpec};
use crlab::trainer::{EvalSnapshot, LogRecord, RunLog, StepRecord};

const POOL_COUNTDOWN: &str = include_str!("golden/pool-countdown.pool");
const POOL_BLOCKSWORLD: &str = include_str!("golden/pool-blocksworld.pool");
const CHECKPOINT: &str = include_str!("golden/policy.ckpt");
const LOG: &str = include_str!("golden/log.jsonl");
const SCHEDULE: &str = include_str!("golden/schedule-cosine-k4-t4.csv");

#[test]
fn countdown_pool_matches_golden() {
    let tasks = pool::from_text(POOL_COUNTDOWN, "golden").unwrap();
    assert_eq!(tasks.len(), 2);
    assert_eq!(
        tasks[0].payload,
        Payload::Countdown(CountdownTask {
            numbers: vec![2, 3, 5],
            target: 17,
            level: Level::Easy,
        })
    );
    assert_eq!(
        tasks[0].certificate,
        Certificate::Countdown("3*5=15;15+2=17".parse::<CountdownAnswer>().unwrap())
    );
    for t in &tasks {
        assert_eq!(t.verdict(&t.certificate.tokens()), Verdict::Correct);
    }
    assert_eq!(pool::to_text(&tasks), POOL_COUNTDOWN);
}

#[test]
fn blocksworld_pool_matches_golden() {
    let tasks = pool::from_text(POOL_BLOCKSWORLD, "golden").unwrap();
    let Payload::Blocksworld(bt) = &tasks[0].payload else { panic!("wrong family") };
    assert_eq!(bt.optimal_len, 2);
    assert_eq!(tasks[0].verdict(&tasks[0].certificate.tokens()), Verdict::Correct);
    assert_eq!(pool::to_text(&tasks), POOL_BLOCKSWORLD);
}

#[test]
fn pool_rejects_a_wrong_certificate() {
    let bad = POOL_COUNTDOWN.replace("3*4=12", "3+4=7");
    assert!(pool::from_text(&bad, "bad").is_err());
    assert!(pool::from_text("# crlab task pool v9\n", "bad").is_err());
}

#[test]
fn checkpoint_matches_golden() {
    let vocab = crlab::envs::countdown::VOCAB;
    let mut p = PolicyParams::zeros(&vocab, 16, 2, 1.0).unwrap();
    p.weights[0] = 0.5;
    p.weights[16] = -1.25;
    p.weights[17] = 1e-300;
    p.weights[33] = 3.0;
    assert_eq!(checkpoint::to_text(&p), CHECKPOINT);
    let back = checkpoint::from_text(CHECKPOINT, "golden").unwrap();
    assert_eq!(back, p);
    assert_eq!(back.weights[17].to_bits(), 1e-300f64.to_bits());
    assert!(checkpoint::from_text(&CHECKPOINT.replace("feature_dim 2", "feature_dim 3"), "bad").is_err());
}

#[test]
fn run_log_matches_golden() {
    let log = RunLog {
        records: vec![
            LogRecord::Eval(EvalSnapshot {
                step: 0,
                accuracy: BTreeMap::from([(Level::Trivial, 50.0), (Level::Hard, 0.0)]),
            }),
            LogRecord::Step(StepRecord {
                step: 0,
                sampled_level: Level::Easy,
                prompt_levels: vec![],
                task_ids: vec!["countdown-easy-00000".into(), "countdown-easy-00001".into()],
                mean_reward: 0.55,
                mean_advantage: 0.0,
                kl: 0.001,
                grad_norm: 0.25,
            }),
        ],
    };
    assert_eq!(log.to_jsonl(), LOG);
    assert_eq!(RunLog::from_jsonl(LOG, "golden").unwrap(), log);
}

#[test]
fn schedule_dump_matches_golden() {
    let spec = ScheduleSpec::new(ScheduleKind::Cosine, 4, 4);
    assert_eq!(schedule_csv(&spec).unwrap(), SCHEDULE);
}
