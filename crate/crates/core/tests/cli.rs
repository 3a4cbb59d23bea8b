use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use crlab::cli::manifest::RunManifest;

const TINY: &str = r#"version = 1
family = "countdown"
seed = 5
steps = 20
eval_every = 10

[pools]
train_per_level = 8
eval_per_level = 4

[grpo]
group_size = 4
max_len = 16
"#;

fn crlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crlab"))
        .args(args)
        .current_dir(dir)
        .env_remove("CRLAB_OUT")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn read(p: PathBuf) -> Vec<u8> {
    std::fs::read(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn entries(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

#[test]
fn gen_is_deterministic_and_inventoried() {
    let tmp = tempfile::tempdir().unwrap();
    for run in ["a", "b"] {
        let o = crlab(tmp.path(), &["--run-dir", run, "gen", "blocksworld", "--count", "5", "--seed", "9"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = tmp.path().join("a");
    let m = RunManifest::load(&a).unwrap();
    assert_eq!(m.command, "gen");
    assert_eq!(m.seed, Some(9));
    assert_eq!(m.files.len(), 5);
    assert!(m.verify(&a).unwrap().is_empty());
    for f in &m.files {
        assert_eq!(read(a.join(&f.path)), read(tmp.path().join("b").join(&f.path)));
    }
    assert_eq!(entries(tmp.path()), ["a", "b"]);
}

#[test]
fn validation_failures_exit_one_and_write_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("c.toml"), TINY).unwrap();
    let cases: [&[&str]; 5] = [
        &["--run-dir", "r", "gen", "countdown", "--count", "0"],
        &["--run-dir", "r", "gen", "chess", "--count", "3"],
        &["--run-dir", "r", "train", "--config", "c.toml", "--schedule.sigma", "0"],
        &["--run-dir", "r", "train", "--config", "c.toml", "--set", "nonsense=1"],
        &["--run-dir", "r", "no-such-command"],
    ];
    for args in cases {
        let o = crlab(tmp.path(), args);
        assert_eq!(code(&o), 1, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!tmp.path().join("r").exists(), "{args:?} created a run directory");
    }
    let o = crlab(tmp.path(), &["--run-dir", "r", "train", "--config", "c.toml", "--schedule.sigma", "0"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("sigma"));
    assert_eq!(code(&crlab(tmp.path(), &["--help"])), 0);
    assert_eq!(code(&crlab(tmp.path(), &["--version"])), 0);
}

#[test]
fn runtime_failures_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let o = crlab(tmp.path(), &["--run-dir", "r", "bucket", "--pool", "missing.pool"]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    let o = crlab(tmp.path(), &["--run-dir", "r", "train", "--config", "missing.toml"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn train_reproduces_from_its_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("c.toml"), TINY).unwrap();
    let o = crlab(tmp.path(), &["--run-dir", "one", "train", "--config", "c.toml", "--schedule.kind", "cosine"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let one = tmp.path().join("one");
    let m = RunManifest::load(&one).unwrap();
    assert_eq!(m.overrides, [("schedule.kind".to_string(), "cosine".to_string())]);
    assert_eq!(m.config_source.as_deref(), Some(TINY));
    assert!(m.config.as_deref().unwrap().contains("kind = \"cosine\""));
    assert!(m.verify(&one).unwrap().is_empty());
    let paths: Vec<&str> = m.files.iter().map(|f| f.path.as_str()).collect();
    assert_eq!(
        paths,
        ["checkpoints/step-000010.ckpt", "checkpoints/step-000020.ckpt", "config.toml", "log.jsonl", "report.csv"]
    );

    // Replaying the recorded source and overrides reproduces every byte.
    std::fs::write(tmp.path().join("replay.toml"), m.config_source.unwrap()).unwrap();
    let mut args = vec!["--run-dir", "two", "train", "--config", "replay.toml"];
    let sets: Vec<String> = m.overrides.iter().map(|(k, v)| format!("{k}={v}")).collect();
    for s in &sets {
        args.push("--set");
        args.push(s);
    }
    assert_eq!(code(&crlab(tmp.path(), &args)), 0);
    let again = RunManifest::load(&tmp.path().join("two")).unwrap();
    assert_eq!(
        m.files.iter().map(|f| &f.sha256).collect::<Vec<_>>(),
        again.files.iter().map(|f| &f.sha256).collect::<Vec<_>>()
    );

    // The resolved config alone also reproduces the run.
    let o = crlab(tmp.path(), &["--run-dir", "three", "train", "--config", "one/config.toml"]);
    assert_eq!(code(&o), 0);
    assert_eq!(read(one.join("log.jsonl")), read(tmp.path().join("three/log.jsonl")));
}

#[test]
fn eval_reads_checkpoints_and_writes_curves() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("c.toml"), TINY).unwrap();
    assert_eq!(code(&crlab(tmp.path(), &["--run-dir", "t", "train", "--config", "c.toml"])), 0);
    let o = crlab(
        tmp.path(),
        &[
            "--run-dir", "e", "eval", "--config", "c.toml", "--checkpoint", "t/checkpoints/step-000020.ckpt",
            "--pass-at-k", "hard", "--n", "8", "--k", "1,2,8",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let curve = String::from_utf8(read(tmp.path().join("e/pass_at_k-hard.csv"))).unwrap();
    let rows: Vec<&str> = curve.lines().collect();
    assert_eq!(rows[0], "k,value");
    assert_eq!(rows.len(), 4);
    let acc = String::from_utf8(read(tmp.path().join("e/accuracy.csv"))).unwrap();
    assert!(acc.lines().count() >= 2);
}

#[test]
fn schedule_dump_rows_sum_to_one() {
    let tmp = tempfile::tempdir().unwrap();
    let o = crlab(tmp.path(), &["--run-dir", "s", "schedule-dump", "--kind", "gaussian", "--beta", "0.5", "--sigma", "0.5"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(read(tmp.path().join("s/schedule.csv"))).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,p0,p1,p2,p3"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 1601);
    for (t, row) in rows.iter().enumerate() {
        let cells: Vec<f64> = row.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cells[0] as usize, t);
        assert!((cells[1..].iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn theory_prints_the_condition() {
    let tmp = tempfile::tempdir().unwrap();
    let o = crlab(tmp.path(), &["--run-dir", "th", "theory", "--suite", "thm3", "--K", "3", "--el", "1.4", "--m", "1.8"]);
    assert_eq!(code(&o), 0);
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("lhs=0.770512 rhs=0.800000 crl_wins=true"), "{out}");
}

#[test]
fn default_run_directories_live_under_the_output_root() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_crlab"))
        .args(["schedule-dump", "--kind", "balanced", "--steps", "10"])
        .current_dir(tmp.path())
        .env("CRLAB_OUT", "runs")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert_eq!(entries(tmp.path()), ["runs"]);
    let runs = entries(&tmp.path().join("runs"));
    assert_eq!(runs.len(), 1);
    assert!(runs[0].starts_with("schedule-dump-"), "{runs:?}");
}
