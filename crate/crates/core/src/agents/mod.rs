//! Agents that act on the environments: a greedy bonus-following explorer,
//! tabular Q-learning, exact value iteration, and exploration baselines.

pub mod baselines;
pub mod dp;
pub mod explorer;
pub mod qlearn;

pub use baselines::{baseline_bonus, BaselineBonus, BaselineConfig, BaselineKind, RunningMeanStd, Transition};
pub use dp::{
    deterministic_policy, evaluate_policy, value_iteration, verify_invariance, InvarianceReport, RewardChannel,
    StochasticPolicy, ValueSolution,
};
pub use explorer::{greedy_intrinsic_explore, BonusSource, ConstantBonus, ExplorerTrace, MoeBonus};
pub use qlearn::{greedy_rollout, q_learn, EpisodeStats, EpsilonSchedule, QLearnConfig, QLearnOutcome, QTable};
