use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Difficulty label. The first four are training levels; `Ood` is held out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Trivial,
    Easy,
    Medium,
    Hard,
    Ood,
}

impl Level {
    pub const ALL: [Level; 5] = [Level::Trivial, Level::Easy, Level::Medium, Level::Hard, Level::Ood];
    pub const TRAINING: [Level; 4] = [Level::Trivial, Level::Easy, Level::Medium, Level::Hard];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Level> {
        Level::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Level::Trivial => "trivial",
            Level::Easy => "easy",
            Level::Medium => "medium",
            Level::Hard => "hard",
            Level::Ood => "ood",
        }
    }

    /// Column heading used in accuracy tables.
    pub fn heading(self) -> &'static str {
        match self {
            Level::Trivial => "Trivial",
            Level::Easy => "Easy",
            Level::Medium => "Med",
            Level::Hard => "Hard",
            Level::Ood => "OOD",
        }
    }

    /// Number of Countdown operands at this level.
    pub fn countdown_operands(self) -> usize {
        self.index() + 2
    }

    /// Optimal Blocksworld plan length at this level.
    pub fn blocksworld_plan_len(self) -> usize {
        match self {
            Level::Trivial => 1,
            Level::Easy => 2,
            Level::Medium => 4,
            Level::Hard => 6,
            Level::Ood => 8,
        }
    }
}

impl std::fmt::Display for Level {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "trivial" | "t" => Ok(Level::Trivial),
            "easy" | "e" => Ok(Level::Easy),
            "medium" | "med" | "m" => Ok(Level::Medium),
            "hard" | "h" => Ok(Level::Hard),
            "ood" => Ok(Level::Ood),
            other => Err(Error::config(format!("unknown level `{other}`"))),
        }
    }
}
