//! Curriculum reinforcement learning at desk scale.

pub mod cli;
pub mod difficulty;
pub mod envs;
pub mod error;
pub mod eval;
pub mod policy;
pub mod rng;
pub mod sched;
pub mod theory;
pub mod trainer;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/schedulers.md")]
    mod schedulers {}
    #[doc = include_str!("../../../book/src/tasks.md")]
    mod tasks {}
    #[doc = include_str!("../../../book/src/policy.md")]
    mod policy {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/theory.md")]
    mod theory {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
