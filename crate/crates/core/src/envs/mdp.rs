//! Finite MDPs with separate extrinsic and intrinsic reward channels.
//!
//! Rewards are attached to states and paid on *entering* a state: the
//! transition `s --a--> s'` earns `r_env[s']` and `r_int[s']`. Terminal
//! states are absorbing and have value zero.

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TabularMDP {
    pub n_states: usize,
    pub n_actions: usize,
    /// `transitions[s * n_actions + a]` lists `(next_state, probability)`.
    pub transitions: Vec<Vec<(usize, f64)>>,
    pub r_env: Vec<f64>,
    pub r_int: Vec<f64>,
    pub terminal: Vec<bool>,
    pub gamma: f64,
    pub start: usize,
}

impl TabularMDP {
    /// Deterministic MDP from a successor table `next[s][a]`.
    pub fn deterministic(
        next: Vec<Vec<usize>>,
        r_env: Vec<f64>,
        r_int: Vec<f64>,
        terminal: Vec<bool>,
        gamma: f64,
        start: usize,
    ) -> Result<Self> {
        let n_states = next.len();
        let n_actions = next.first().map_or(0, Vec::len);
        let transitions = next
            .into_iter()
            .flat_map(|row| row.into_iter().map(|s| vec![(s, 1.0)]).collect::<Vec<_>>())
            .collect();
        let mdp = Self {
            n_states,
            n_actions,
            transitions,
            r_env,
            r_int,
            terminal,
            gamma,
            start,
        };
        mdp.validate()?;
        Ok(mdp)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_states == 0 || self.n_actions == 0 {
            return Err(Error::config("mdp", "needs at least one state and one action"));
        }
        check_len(
            "transition table",
            self.n_states * self.n_actions,
            self.transitions.len(),
        )?;
        check_len("r_env", self.n_states, self.r_env.len())?;
        check_len("r_int", self.n_states, self.r_int.len())?;
        check_len("terminal", self.n_states, self.terminal.len())?;
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::config("gamma", "must lie in [0, 1)"));
        }
        if self.start >= self.n_states {
            return Err(Error::config("start", "out of range"));
        }
        for (i, dist) in self.transitions.iter().enumerate() {
            if dist.is_empty() || dist.iter().any(|&(s, p)| s >= self.n_states || p.is_nan() || p < 0.0) {
                return Err(Error::config(
                    format!("transitions[{i}]"),
                    "targets must be in range with non-negative probability",
                ));
            }
            let total: f64 = dist.iter().map(|&(_, p)| p).sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::config(
                    format!("transitions[{i}]"),
                    format!("probabilities sum to {total}"),
                ));
            }
        }
        Ok(())
    }

    pub fn successors(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.transitions[s * self.n_actions + a]
    }

    /// Deterministic successor, or the most likely one for stochastic rows.
    pub fn next_state(&self, s: usize, a: usize) -> usize {
        self.successors(s, a)
            .iter()
            .copied()
            .fold(
                (s, f64::NEG_INFINITY),
                |best, (n, p)| if p > best.1 { (n, p) } else { best },
            )
            .0
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    /// Copy with the intrinsic channel replaced.
    pub fn with_r_int(mut self, r_int: Vec<f64>) -> Result<Self> {
        check_len("r_int", self.n_states, r_int.len())?;
        self.r_int = r_int;
        Ok(self)
    }
}

/// Which intrinsic-reward table to use for the six-state chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChainVariant {
    /// +1 at S1, S2, S3 and S6.
    #[default]
    Table,
    /// +1 at S1, S2 and S6 only.
    Prose,
}

pub const CHAIN_RIGHT: usize = 0;
pub const CHAIN_LEFT: usize = 1;

/// The six-state chain S1..S6 (indices 0..5). Action 0 moves right, action 1
/// moves left; moving left from S1 stays in S1. S6 is terminal with an
/// extrinsic reward of 10. Discount defaults to 0.99.
pub fn chain_mdp() -> TabularMDP {
    chain_mdp_variant(ChainVariant::Table)
}

pub fn chain_mdp_variant(variant: ChainVariant) -> TabularMDP {
    let next = (0..6)
        .map(|s: usize| vec![(s + 1).min(5), s.saturating_sub(1)])
        .collect();
    let r_int = match variant {
        ChainVariant::Table => vec![1.0, 1.0, 1.0, 0.0, 0.0, 1.0],
        ChainVariant::Prose => vec![1.0, 1.0, 0.0, 0.0, 0.0, 1.0],
    };
    let r_env = vec![0.0, 0.0, 0.0, 0.0, 0.0, 10.0];
    let terminal = vec![false, false, false, false, false, true];
    TabularMDP::deterministic(next, r_env, r_int, terminal, 0.99, 0).expect("chain is well formed")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Terminal,
    MaxSteps,
    /// The action sequence ran out before either of the above.
    Exhausted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryStep {
    pub state: usize,
    pub action: usize,
    pub r_env: f64,
    pub r_int: f64,
    pub next_state: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<TrajectoryStep>,
    pub seed: u64,
    pub termination: Termination,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn final_state(&self) -> Option<usize> {
        self.steps.last().map(|s| s.next_state)
    }

    pub fn r_env_sum(&self) -> f64 {
        self.steps.iter().map(|s| s.r_env).sum()
    }

    pub fn r_int_sum(&self) -> f64 {
        self.steps.iter().map(|s| s.r_int).sum()
    }
}

/// Plays a fixed action sequence through the most-likely successors,
/// stopping at a terminal state or after `max_steps`.
pub fn rollout(mdp: &TabularMDP, start: usize, actions: &[usize], max_steps: usize) -> Result<Trajectory> {
    let mut steps = Vec::new();
    let mut s = start;
    let mut termination = Termination::Exhausted;
    for &a in actions {
        if mdp.terminal[s] {
            termination = Termination::Terminal;
            break;
        }
        if steps.len() >= max_steps {
            termination = Termination::MaxSteps;
            break;
        }
        if a >= mdp.n_actions {
            return Err(Error::InvalidAction {
                action: a,
                available: mdp.n_actions,
            });
        }
        let next = mdp.next_state(s, a);
        steps.push(TrajectoryStep {
            state: s,
            action: a,
            r_env: mdp.r_env[next],
            r_int: mdp.r_int[next],
            next_state: next,
        });
        s = next;
    }
    if mdp.terminal[s] {
        termination = Termination::Terminal;
    }
    Ok(Trajectory {
        steps,
        seed: 0,
        termination,
    })
}
