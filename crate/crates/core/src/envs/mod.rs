//! Exactly verifiable task families with oracle solvers and sparse rewards.

pub mod blocksworld;
pub mod countdown;
mod level;
pub mod pool;

use serde::{Deserialize, Serialize};

pub use level::Level;

use crate::error::{Error, Result};
use crate::rng::Rng;
use blocksworld::{BlocksworldPlan, BlocksworldTask};
use countdown::{CountdownAnswer, CountdownParams, CountdownTask};

/// Index into a family vocabulary.
pub type Token = u16;

/// Default reward for a well-formed but wrong answer.
pub const R_FMT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Correct,
    WrongAnswer,
    Malformed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Countdown,
    Blocksworld,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Countdown => "countdown",
            Family::Blocksworld => "blocksworld",
        }
    }

    pub fn vocab(self) -> &'static [&'static str] {
        match self {
            Family::Countdown => &countdown::VOCAB,
            Family::Blocksworld => &blocksworld::VOCAB,
        }
    }

    pub fn end_token(self) -> Token {
        match self {
            Family::Countdown => countdown::TOK_END,
            Family::Blocksworld => blocksworld::TOK_END,
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "countdown" => Ok(Family::Countdown),
            "blocksworld" => Ok(Family::Blocksworld),
            other => Err(Error::config(format!("unknown task family `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Payload {
    Countdown(CountdownTask),
    Blocksworld(BlocksworldTask),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Certificate {
    Countdown(CountdownAnswer),
    Blocksworld(BlocksworldPlan),
}

impl Certificate {
    pub fn tokens(&self) -> Vec<Token> {
        match self {
            Certificate::Countdown(a) => countdown::render(a),
            Certificate::Blocksworld(p) => blocksworld::render(p),
        }
    }
}

/// A generated problem with its difficulty label and oracle solution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub id: String,
    pub level: Level,
    pub payload: Payload,
    pub certificate: Certificate,
}

impl TaskInstance {
    pub fn family(&self) -> Family {
        match self.payload {
            Payload::Countdown(_) => Family::Countdown,
            Payload::Blocksworld(_) => Family::Blocksworld,
        }
    }

    /// Classifies a decoded token stream. Unparseable streams are `Malformed`.
    pub fn verdict(&self, tokens: &[Token]) -> Verdict {
        match &self.payload {
            Payload::Countdown(t) => match countdown::parse(tokens) {
                Some(a) => countdown::verify(t, &a),
                None => Verdict::Malformed,
            },
            Payload::Blocksworld(t) => match blocksworld::parse(tokens) {
                Some(p) => blocksworld::verify(t, &p),
                None => Verdict::Malformed,
            },
        }
    }

    pub fn is_correct(&self, tokens: &[Token]) -> bool {
        self.verdict(tokens) == Verdict::Correct
    }
}

/// Terminal reward: 1 for a correct answer, `r_fmt` for a well-formed wrong
/// one, 0 otherwise.
pub fn reward(task: &TaskInstance, tokens: &[Token], r_fmt: f64) -> f64 {
    match task.verdict(tokens) {
        Verdict::Correct => 1.0,
        Verdict::WrongAnswer => r_fmt,
        Verdict::Malformed => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GenParams {
    pub countdown: CountdownParams,
}

/// Generates `count` certified instances with ids `<family>-<level>-<index>`.
pub fn generate(family: Family, level: Level, count: usize, params: &GenParams, rng: &mut Rng) -> Vec<TaskInstance> {
    let id = |i: usize| format!("{}-{}-{:05}", family.name(), level.name(), i);
    match family {
        Family::Countdown => countdown::generate(level, count, &params.countdown, rng)
            .into_iter()
            .enumerate()
            .map(|(i, (t, a))| TaskInstance {
                id: id(i),
                level,
                payload: Payload::Countdown(t),
                certificate: Certificate::Countdown(a),
            })
            .collect(),
        Family::Blocksworld => blocksworld::generate(level, count, rng)
            .into_iter()
            .enumerate()
            .map(|(i, (t, p))| TaskInstance {
                id: id(i),
                level,
                payload: Payload::Blocksworld(t),
                certificate: Certificate::Blocksworld(p),
            })
            .collect(),
    }
}
