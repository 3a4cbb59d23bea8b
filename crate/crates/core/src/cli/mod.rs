//! The `crlab` command line.
//!
//! Every command writes into one run directory (`--run-dir`, or a fresh
//! timestamped directory under `--out` / `$CRLAB_OUT`) and finishes by writing
//! `manifest.json` with the file inventory. Exit codes: 0 success, 1 invalid
//! arguments or config, 2 runtime failure.

pub mod manifest;
pub mod overrides;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::difficulty::{apply_buckets, bucket_quartiles, estimate_pool, histogram_csv, DEFAULT_SAMPLES};
use crate::envs::pool::{self, pool_file_name};
use crate::envs::countdown::CountdownParams;
use crate::envs::{self, Family, GenParams, Level};
use crate::error::{Error, Result};
use crate::eval::{accuracy_table, csv_field, pass_at_k_curve, table_csv, DEFAULT_PASS_AT_K_SAMPLES};
use crate::policy::{base_prior, checkpoint, feature_map, DecodeMode, LinearPolicy, PolicyParams};
use crate::rng;
use crate::sched::{ScheduleKind, ScheduleSpec};
use crate::theory::{crl_vs_direct_condition, crossover_csv, crossover_suite, soundness_suite, CrossoverRegime};
use crate::trainer::{build_pools, run_baseline_suite, train, ExperimentConfig};
use manifest::{now, RunDir, RunManifest};

pub const OUT_ENV: &str = "CRLAB_OUT";

#[derive(Debug, Parser)]
#[command(name = "crlab", version, about = "Curriculum reinforcement learning lab")]
pub struct Cli {
    /// Root for timestamped run directories.
    #[arg(long, global = true, env = OUT_ENV, default_value = "crlab-out")]
    pub out: PathBuf,
    /// Exact run directory; overrides `--out`.
    #[arg(long, global = true)]
    pub run_dir: Option<PathBuf>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate certified task pools.
    Gen(GenArgs),
    /// Relabel pools into quartile levels by observed error rate.
    Bucket(BucketArgs),
    /// Train one policy from a config file.
    Train(ConfigArgs),
    /// Train every scheduler variant on shared pools.
    Suite(ConfigArgs),
    /// Run a tabular bench suite.
    Theory(TheoryArgs),
    /// Evaluate a checkpoint (or the base policy) on the config's pools.
    Eval(EvalArgs),
    /// Write the level-probability matrix of a schedule.
    ScheduleDump(DumpArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(value_parser = parse_with::<Family>)]
    pub family: Family,
    /// A level name or `all`.
    #[arg(long, default_value = "all")]
    pub level: String,
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// 0 for training pools, 1 for evaluation pools.
    #[arg(long, default_value_t = 0)]
    pub split: u64,
    #[arg(long, default_value_t = CountdownParams::default().max_number)]
    pub max_number: u64,
    #[arg(long, default_value_t = CountdownParams::default().max_target)]
    pub max_target: u64,
}

#[derive(Debug, Args)]
pub struct BucketArgs {
    /// Pool files of one family.
    #[arg(long = "pool", required = true)]
    pub pools: Vec<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Policy checkpoint; the base policy when omitted.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    pub max_len: usize,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// `key=value` override; `--a.b value` is accepted as a shorthand.
    #[arg(long = "set", value_parser = parse_assignment)]
    pub overrides: Vec<(String, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Thm1,
    Thm3,
    Crossover,
}

#[derive(Debug, Args)]
pub struct TheoryArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
    #[arg(long = "K")]
    pub k: Option<u32>,
    #[arg(long)]
    pub el: Option<f64>,
    #[arg(long)]
    pub m: Option<f64>,
    #[arg(long, default_value_t = 50)]
    pub runs: usize,
    #[arg(long, default_value_t = 12)]
    pub max_states: usize,
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Also emit a pass@k curve on this level's pool.
    #[arg(long, value_parser = parse_with::<Level>)]
    pub pass_at_k: Option<Level>,
    #[arg(long, default_value_t = DEFAULT_PASS_AT_K_SAMPLES)]
    pub n: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 4, 8, 16])]
    pub k: Vec<usize>,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct DumpArgs {
    #[arg(long, value_parser = parse_with::<ScheduleKind>, default_value = "gaussian")]
    pub kind: ScheduleKind,
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.5)]
    pub sigma: f64,
    #[arg(long = "levels", default_value_t = 4)]
    pub levels: usize,
    #[arg(long, default_value_t = 1600)]
    pub steps: u64,
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Option<Vec<u64>>,
}

fn parse_with<T: std::str::FromStr<Err = Error>>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_assignment(s: &str) -> std::result::Result<(String, String), String> {
    overrides::parse_assignment(s).map_err(|e| e.to_string())
}

/// What a command reports on success.
#[derive(Debug)]
pub struct Outcome {
    pub run_dir: PathBuf,
    pub summary: String,
}

struct Session {
    dir: RunDir,
    manifest: RunManifest,
}

impl Session {
    fn open(cli: &Cli, command: &str, argv: &[String]) -> Result<Self> {
        let root = match &cli.run_dir {
            Some(p) => p.clone(),
            None => fresh_dir(&cli.out, command),
        };
        Ok(Session {
            dir: RunDir::create(root)?,
            manifest: RunManifest {
                command: command.into(),
                argv: argv.to_vec(),
                version: env!("CARGO_PKG_VERSION").into(),
                seed: None,
                config_source: None,
                overrides: Vec::new(),
                config: None,
                started: now(),
                finished: String::new(),
                files: Vec::new(),
            },
        })
    }

    fn with_config(&mut self, source: String, overrides: &[(String, String)], config: &ExperimentConfig) {
        self.manifest.seed = Some(config.seed);
        self.manifest.config_source = Some(source);
        self.manifest.overrides = overrides.to_vec();
        self.manifest.config = Some(config.to_toml());
    }

    fn finish(self, summary: String) -> Result<Outcome> {
        let run_dir = self.dir.path().to_path_buf();
        self.dir.finish(self.manifest)?;
        Ok(Outcome { run_dir, summary })
    }
}

fn fresh_dir(out: &Path, command: &str) -> PathBuf {
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S").to_string();
    let base = out.join(format!("{command}-{stamp}"));
    let mut p = base.clone();
    let mut i = 2;
    while p.exists() {
        p = PathBuf::from(format!("{}-{i}", base.display()));
        i += 1;
    }
    p
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn load_config(args: &ConfigArgs) -> Result<(String, ExperimentConfig)> {
    let source = read_text(&args.config)?;
    let config = overrides::resolve_config(&source, &args.overrides)?;
    Ok((source, config))
}

fn slug(name: &str) -> String {
    let s: String = name.chars().map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '-' }).collect();
    s.split('-').filter(|p| !p.is_empty()).collect::<Vec<_>>().join("-")
}

fn cmd_gen(cli: &Cli, a: &GenArgs, argv: &[String]) -> Result<Outcome> {
    if a.count == 0 {
        return Err(Error::config("--count must be at least 1"));
    }
    let levels: Vec<Level> = if a.level.eq_ignore_ascii_case("all") { Level::ALL.to_vec() } else { vec![a.level.parse()?] };
    let params = GenParams {
        countdown: CountdownParams {
            max_number: a.max_number,
            max_target: a.max_target,
        },
    };
    let mut s = Session::open(cli, "gen", argv)?;
    s.manifest.seed = Some(a.seed);
    for &level in &levels {
        let tasks = envs::generate(a.family, level, a.count, &params, &mut rng::derived(a.seed, &[a.split, level.index() as u64]));
        s.dir.write(&pool_file_name(a.family, level), pool::to_text(&tasks).as_bytes())?;
    }
    s.finish(format!("wrote {} pool file(s) of {} tasks", levels.len(), a.count))
}

fn load_policy(family: Family, checkpoint_path: Option<&Path>) -> Result<PolicyParams> {
    match checkpoint_path {
        Some(p) => {
            let params = checkpoint::load(p)?;
            if params.vocab != family.vocab() {
                return Err(Error::config(format!("checkpoint {} does not match the {family} vocabulary", p.display())));
            }
            Ok(params)
        }
        None => Ok(base_prior(family)),
    }
}

fn cmd_bucket(cli: &Cli, a: &BucketArgs, argv: &[String]) -> Result<Outcome> {
    if a.samples == 0 {
        return Err(Error::config("--samples must be at least 1"));
    }
    let mut tasks = Vec::new();
    for p in &a.pools {
        tasks.extend(pool::load(p)?);
    }
    let family = tasks.first().map(|t| t.family()).ok_or_else(|| Error::config("the given pools are empty"))?;
    if tasks.iter().any(|t| t.family() != family) {
        return Err(Error::config("bucketing needs pools of a single family"));
    }
    let params = load_policy(family, a.checkpoint.as_deref())?;
    let fmap = feature_map(family);
    let policy = LinearPolicy {
        params: &params,
        fmap: fmap.as_ref(),
    };
    let records = estimate_pool(&tasks, &policy, a.samples, DecodeMode::PASS_AT_K, a.seed, a.max_len)?;
    let buckets = bucket_quartiles(&records)?;
    let relabeled = apply_buckets(&tasks, &buckets)?;

    let mut s = Session::open(cli, "bucket", argv)?;
    s.manifest.seed = Some(a.seed);
    let mut rates = String::from("task_id,n_samples,n_correct,error_rate,level\n");
    for r in &records {
        rates.push_str(&format!("{},{},{},{:.4},{}\n", csv_field(&r.task_id), r.n_samples, r.n_correct, r.error_rate, buckets[&r.task_id]));
    }
    s.dir.write("error_rates.csv", rates.as_bytes())?;
    s.dir.write("histogram.csv", histogram_csv(&records).as_bytes())?;
    for level in Level::TRAINING {
        let group: Vec<_> = relabeled.iter().filter(|t| t.level == level).cloned().collect();
        s.dir.write(&pool_file_name(family, level), pool::to_text(&group).as_bytes())?;
    }
    s.finish(format!("bucketed {} tasks into 4 levels", tasks.len()))
}

fn cmd_train(cli: &Cli, a: &ConfigArgs, argv: &[String]) -> Result<Outcome> {
    let (source, config) = load_config(a)?;
    let pools = build_pools(&config)?;
    let mut s = Session::open(cli, "train", argv)?;
    s.with_config(source, &a.overrides, &config);
    let out = train(&config, &pools)?;
    s.dir.write("config.toml", config.to_toml().as_bytes())?;
    s.dir.write("log.jsonl", out.log.to_jsonl().as_bytes())?;
    for (step, params) in &out.checkpoints {
        s.dir.write(&format!("checkpoints/step-{step:06}.ckpt"), checkpoint::to_text(params).as_bytes())?;
    }
    let name = format!("{:?}", config.schedule.kind).to_lowercase();
    let table = table_csv(&[(name, out.final_report.clone())], &pools.eval_hash());
    s.dir.write("report.csv", table.as_bytes())?;
    s.finish(format!("trained {} steps, {} rollouts\n{}", config.steps, out.total_rollouts, table.trim_end()))
}

fn cmd_suite(cli: &Cli, a: &ConfigArgs, argv: &[String]) -> Result<Outcome> {
    let (source, config) = load_config(a)?;
    build_pools(&config)?;
    let mut s = Session::open(cli, "suite", argv)?;
    s.with_config(source, &a.overrides, &config);
    let result = run_baseline_suite(&config)?;
    let table = result.to_csv();
    s.dir.write("table.csv", table.as_bytes())?;
    for (name, run) in &result.runs {
        s.dir.write(&format!("logs/{}.jsonl", slug(name)), run.log.to_jsonl().as_bytes())?;
    }
    s.finish(table.trim_end().to_string())
}

fn cmd_theory(cli: &Cli, a: &TheoryArgs, argv: &[String]) -> Result<Outcome> {
    match a.suite {
        Suite::Thm3 => {
            let (Some(k), Some(el), Some(m)) = (a.k, a.el, a.m) else {
                return Err(Error::config("the thm3 suite needs --K, --el and --m"));
            };
            let cond = crl_vs_direct_condition(k, el, m)?;
            let mut s = Session::open(cli, "theory", argv)?;
            s.dir.write("thm3.txt", format!("{cond}\n").as_bytes())?;
            s.finish(cond.to_string())
        }
        Suite::Thm1 => {
            if a.runs == 0 {
                return Err(Error::config("--runs must be at least 1"));
            }
            let rows = soundness_suite(a.seed, a.runs, a.max_states)?;
            let mut csv = String::from("seed,n_states,stages,gamma,beta,updates,measured,bound,holds\n");
            for r in &rows {
                csv.push_str(&format!(
                    "{},{},{},{:.6},{},{},{:.9},{:.9},{}\n",
                    r.seed,
                    r.n_states,
                    r.goals.len(),
                    r.gamma,
                    r.beta,
                    r.updates,
                    r.measured,
                    r.bound,
                    r.holds()
                ));
            }
            let violations = rows.iter().filter(|r| !r.holds()).count();
            let mut s = Session::open(cli, "theory", argv)?;
            s.manifest.seed = Some(a.seed);
            s.dir.write("thm1.csv", csv.as_bytes())?;
            s.finish(format!("runs={} violations={violations}", rows.len()))
        }
        Suite::Crossover => {
            if a.seeds == 0 {
                return Err(Error::config("--seeds must be at least 1"));
            }
            let regimes = [CrossoverRegime::long_chain(), CrossoverRegime::short_chain()];
            let rows = crossover_suite(&regimes, a.seeds)?;
            let mut summary = Vec::new();
            for r in &regimes {
                let mine: Vec<_> = rows.iter().filter(|x| x.regime == r.name).collect();
                let wins = mine.iter().filter(|x| x.crl_wins()).count();
                let predicted = mine.iter().filter(|x| x.predicted.crl_wins).count();
                summary.push(format!("{}: crl_wins={wins}/{} predicted={predicted}/{}", r.name, mine.len(), mine.len()));
            }
            let mut s = Session::open(cli, "theory", argv)?;
            s.dir.write("crossover.csv", crossover_csv(&rows).as_bytes())?;
            s.finish(summary.join("\n"))
        }
    }
}

fn cmd_eval(cli: &Cli, a: &EvalArgs, argv: &[String]) -> Result<Outcome> {
    let (source, config) = load_config(&a.config)?;
    if let Some(&k) = a.k.iter().find(|&&k| k == 0 || k > a.n) {
        return Err(Error::config(format!("--k {k} must lie in 1..={}", a.n)));
    }
    let params = load_policy(config.family, a.checkpoint.as_deref())?;
    let pools = build_pools(&config)?;
    let mut s = Session::open(cli, "eval", argv)?;
    s.with_config(source, &a.config.overrides, &config);
    let fmap = feature_map(config.family);
    let policy = LinearPolicy {
        params: &params,
        fmap: fmap.as_ref(),
    };
    let report = accuracy_table(&policy, &pools.eval, config.grpo.max_len)?;
    let name = if a.checkpoint.is_some() { "checkpoint" } else { "base" };
    let table = table_csv(&[(name.to_string(), report)], &pools.eval_hash());
    s.dir.write("accuracy.csv", table.as_bytes())?;
    if let Some(level) = a.pass_at_k {
        let pool = pools
            .eval
            .get(&level)
            .ok_or_else(|| Error::config(format!("no eval pool for level {level}")))?;
        let curve = pass_at_k_curve(&policy, pool, a.n, &a.k, DecodeMode::PASS_AT_K, a.seed, config.grpo.max_len)?;
        s.dir.write(&format!("pass_at_k-{}.csv", level.name()), curve.to_csv().as_bytes())?;
    }
    s.finish(table.trim_end().to_string())
}

/// `t,<level 0>,…` rows of the `(T+1) × K` matrix.
pub fn schedule_csv(spec: &ScheduleSpec) -> Result<String> {
    let mut out = String::from("t");
    for k in 0..spec.levels {
        out.push_str(&format!(",p{k}"));
    }
    out.push('\n');
    for (t, d) in spec.matrix()?.iter().enumerate() {
        out.push_str(&t.to_string());
        for p in &d.probs {
            out.push(',');
            out.push_str(&p.to_string());
        }
        out.push('\n');
    }
    Ok(out)
}

fn cmd_dump(cli: &Cli, a: &DumpArgs, argv: &[String]) -> Result<Outcome> {
    let mut spec = ScheduleSpec::new(a.kind, a.levels, a.steps);
    spec.beta = a.beta;
    spec.sigma = a.sigma;
    spec.thresholds = a.thresholds.clone();
    spec.validate()?;
    let csv = schedule_csv(&spec)?;
    let mut s = Session::open(cli, "schedule-dump", argv)?;
    s.dir.write("schedule.csv", csv.as_bytes())?;
    s.finish(format!("{} rows x {} levels", spec.steps + 1, spec.levels))
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run(argv: Vec<String>) -> std::result::Result<Outcome, CliError> {
    let expanded = overrides::expand_dotted(argv.clone());
    let cli = Cli::try_parse_from(expanded.iter().map(OsString::from)).map_err(CliError::Usage)?;
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::Run(Error::config("--workers must be at least 1")));
        }
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let args = &argv[1.min(argv.len())..];
    let r = match &cli.command {
        Command::Gen(a) => cmd_gen(&cli, a, args),
        Command::Bucket(a) => cmd_bucket(&cli, a, args),
        Command::Train(a) => cmd_train(&cli, a, args),
        Command::Suite(a) => cmd_suite(&cli, a, args),
        Command::Theory(a) => cmd_theory(&cli, a, args),
        Command::Eval(a) => cmd_eval(&cli, a, args),
        Command::ScheduleDump(a) => cmd_dump(&cli, a, args),
    };
    r.map_err(CliError::Run)
}

#[derive(Debug)]
pub enum CliError {
    Usage(clap::Error),
    Run(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(e) if !e.use_stderr() => 0,
            CliError::Usage(_) => 1,
            CliError::Run(e) => e.exit_code(),
        }
    }
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with(argv: Vec<String>) -> i32 {
    match run(argv) {
        Ok(o) => {
            println!("{}", o.summary);
            eprintln!("run directory: {}", o.run_dir.display());
            0
        }
        Err(e) => {
            match &e {
                CliError::Usage(c) => {
                    let _ = c.print();
                }
                CliError::Run(err) => eprintln!("error: {err}"),
            }
            e.exit_code()
        }
    }
}
