//! Line-delimited task pool files.
//!
//! ```text
//! # crlab task pool v1
//! countdown-easy-00000	countdown	easy	numbers=3,5,2;target=17	3*5=15;15+2=17
//! blocksworld-trivial-00000	blocksworld	trivial	init=A;hold=B;goal=ontable(B);opt=1	putdown(B)
//! ```
//!
//! Each record has five tab-separated fields: id, family, level, payload and
//! the oracle certificate. Lines starting with `#` after the header are
//! comments. Loading re-verifies every certificate.

use std::io::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::blocksworld::{self, Atom, BlocksworldPlan, BlocksworldTask, World};
use super::countdown::{self, CountdownAnswer, CountdownTask};
use super::{Certificate, Family, Level, Payload, TaskInstance, Verdict};
use crate::error::{Error, Result};

pub const HEADER: &str = "# crlab task pool v1";

fn payload_text(task: &TaskInstance) -> String {
    match &task.payload {
        Payload::Countdown(t) => {
            let nums: Vec<String> = t.numbers.iter().map(u64::to_string).collect();
            format!("numbers={};target={}", nums.join(","), t.target)
        }
        Payload::Blocksworld(t) => {
            let stacks = World::new(t.initial.stacks.clone(), None).to_string();
            let hold = t.initial.held.map_or('-', blocksworld::block_name);
            let goal: Vec<String> = t.goal.iter().map(Atom::to_string).collect();
            format!("init={stacks};hold={hold};goal={};opt={}", goal.join(","), t.optimal_len)
        }
    }
}

fn certificate_text(c: &Certificate) -> String {
    match c {
        Certificate::Countdown(a) => a.to_string(),
        Certificate::Blocksworld(p) => p.to_string(),
    }
}

/// One record as a line (without trailing newline).
pub fn format_record(task: &TaskInstance) -> String {
    format!(
        "{}\t{}\t{}\t{}\t{}",
        task.id,
        task.family(),
        task.level,
        payload_text(task),
        certificate_text(&task.certificate)
    )
}

pub fn to_text(tasks: &[TaskInstance]) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    for t in tasks {
        out.push_str(&format_record(t));
        out.push('\n');
    }
    out
}

fn fields(payload: &str) -> std::result::Result<Vec<(&str, &str)>, String> {
    payload
        .split(';')
        .map(|kv| kv.split_once('=').ok_or_else(|| format!("field `{kv}` has no `=`")))
        .collect()
}

fn field<'a>(fs: &[(&str, &'a str)], key: &str) -> std::result::Result<&'a str, String> {
    fs.iter().find(|(k, _)| *k == key).map(|(_, v)| *v).ok_or_else(|| format!("missing field `{key}`"))
}

fn parse_record(line: &str) -> std::result::Result<TaskInstance, String> {
    let cols: Vec<&str> = line.split('\t').collect();
    let [id, family, level, payload, cert] = cols.as_slice() else {
        return Err(format!("expected 5 tab-separated fields, found {}", cols.len()));
    };
    if id.is_empty() {
        return Err("empty id".into());
    }
    let family: Family = family.parse().map_err(|e: Error| e.to_string())?;
    let level: Level = level.parse().map_err(|e: Error| e.to_string())?;
    let fs = fields(payload)?;
    let (payload, certificate) = match family {
        Family::Countdown => {
            let numbers = field(&fs, "numbers")?
                .split(',')
                .map(|n| n.parse::<u64>().map_err(|e| format!("number `{n}`: {e}")))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            if numbers.iter().any(|&n| n == 0) {
                return Err("numbers must be positive".into());
            }
            let target = field(&fs, "target")?.parse::<u64>().map_err(|e| format!("target: {e}"))?;
            let task = CountdownTask { numbers, target, level };
            let answer: CountdownAnswer = cert.parse()?;
            if countdown::verify(&task, &answer) != Verdict::Correct {
                return Err("certificate does not solve the task".into());
            }
            (Payload::Countdown(task), Certificate::Countdown(answer))
        }
        Family::Blocksworld => {
            let init = field(&fs, "init")?;
            let initial: World = match field(&fs, "hold")? {
                "-" => init.parse()?,
                h => format!("{init}+{h}").parse()?,
            };
            let goal = field(&fs, "goal")?
                .split("),")
                .map(|a| if a.ends_with(')') { a.parse() } else { format!("{a})").parse() })
                .collect::<std::result::Result<Vec<Atom>, _>>()?;
            let optimal_len = field(&fs, "opt")?.parse::<usize>().map_err(|e| format!("opt: {e}"))?;
            let task = BlocksworldTask {
                initial,
                goal,
                level,
                optimal_len,
            };
            let plan: BlocksworldPlan = cert.parse()?;
            if blocksworld::verify(&task, &plan) != Verdict::Correct {
                return Err("certificate does not solve the task".into());
            }
            (Payload::Blocksworld(task), Certificate::Blocksworld(plan))
        }
    };
    Ok(TaskInstance {
        id: id.to_string(),
        level,
        payload,
        certificate,
    })
}

/// Parses pool text; `origin` names the source in error messages.
pub fn from_text(text: &str, origin: &str) -> Result<Vec<TaskInstance>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == HEADER => {}
        _ => return Err(Error::parse(format!("{origin}:1"), format!("missing header `{HEADER}`"))),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        out.push(parse_record(line).map_err(|m| Error::parse(format!("{origin}:{}", i + 1), m))?);
    }
    Ok(out)
}

/// Sets a new level on a task, keeping the embedded payload label in sync.
pub fn relabel(task: &mut TaskInstance, level: Level) {
    task.level = level;
    match &mut task.payload {
        Payload::Countdown(t) => t.level = level,
        Payload::Blocksworld(t) => t.level = level,
    }
}

/// File name used for a stored pool, e.g. `countdown-hard.pool`.
pub fn pool_file_name(family: Family, level: Level) -> String {
    format!("{}-{}.pool", family.name(), level.name())
}

pub fn load(path: &Path) -> Result<Vec<TaskInstance>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_text(&text, &path.display().to_string())
}

/// Writes via a temporary sibling and rename.
pub fn save(path: &Path, tasks: &[TaskInstance]) -> Result<()> {
    write_atomic(path, to_text(tasks).as_bytes())
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// SHA-256 of the canonical text form, hex encoded.
pub fn pool_hash(tasks: &[TaskInstance]) -> String {
    sha256_hex(to_text(tasks).as_bytes())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{generate, GenParams};

    #[test]
    fn round_trip_both_families() {
        let mut rng = crate::rng::seeded(3);
        for family in [Family::Countdown, Family::Blocksworld] {
            for level in Level::ALL {
                let tasks = generate(family, level, 3, &GenParams::default(), &mut rng);
                let text = to_text(&tasks);
                assert_eq!(from_text(&text, "mem").unwrap(), tasks);
            }
        }
    }

    #[test]
    fn rejects_bad_certificate_and_header() {
        let good = format!("{HEADER}\nx\tcountdown\ttrivial\tnumbers=3,4;target=7\t3+4=7\n");
        assert_eq!(from_text(&good, "mem").unwrap().len(), 1);
        let bad = good.replace("3+4=7", "3*4=12");
        assert!(from_text(&bad, "mem").is_err());
        assert!(from_text("x\tcountdown", "mem").is_err());
        let short = format!("{HEADER}\nx\tcountdown\ttrivial\n");
        let err = from_text(&short, "f.pool").unwrap_err().to_string();
        assert!(err.contains("f.pool:2"), "{err}");
    }
}
