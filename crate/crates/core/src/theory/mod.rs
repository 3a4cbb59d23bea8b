//! Tabular curriculum-MDP bench.

pub mod api;
pub mod bench;
pub mod bounds;
pub mod mdp;
pub mod td;

pub use api::{api_stage, curriculum_run, Critic, CurriculumRun, CurriculumSequence, StageConfig, StageTrace};
pub use bench::{
    chain_curriculum, chain_mdp, crossover_csv, crossover_run, crossover_suite, optimal_occupancy, soundness_case, soundness_suite,
    ChainStart, CrossoverRegime, CrossoverRow, SoundnessRow,
};
pub use bounds::{
    bound_thm1, bound_thm2_terms, crl_vs_direct_condition, sample_count_thm3, BoundParamsThm1, BoundParamsThm2, SampleConstants,
    Thm2Terms, Thm3Condition,
};
pub use mdp::{
    greedy_policy, occupancy, policy_q_exact, softmax_policy, sup_norm, uniform_policy, value_iteration, weighted_norm, QTable,
    TabularMdp, TabularPolicy, ViResult,
};
pub use td::{td_evaluate, LinearQ, TdConfig};
