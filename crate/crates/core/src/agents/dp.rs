//! Exact dynamic programming on finite MDPs: value iteration with full
//! argmax sets, linear-solve policy evaluation, and a per-instance check of
//! whether adding a state-only bonus changes the set of optimal policies.

use nalgebra::{DMatrix, DVector};

use crate::envs::TabularMDP;
use crate::error::{check_len, Error, Result};

/// Which reward a solver sees on entering a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RewardChannel {
    EnvOnly,
    /// `r_env + beta * r_int`.
    Total(f64),
}

impl RewardChannel {
    pub fn rewards(self, mdp: &TabularMDP) -> Vec<f64> {
        match self {
            RewardChannel::EnvOnly => mdp.r_env.clone(),
            RewardChannel::Total(beta) => mdp.r_env.iter().zip(&mdp.r_int).map(|(e, i)| e + beta * i).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueSolution {
    pub values: Vec<f64>,
    /// Every action within the tie tolerance of the best one; empty for
    /// terminal states.
    pub greedy: Vec<Vec<usize>>,
    pub iterations: usize,
    /// Sup-norm change of the final sweep.
    pub residual: f64,
}

impl ValueSolution {
    /// Deterministic policy taking the lowest-indexed greedy action.
    pub fn first_greedy_policy(&self) -> Vec<usize> {
        self.greedy.iter().map(|g| g.first().copied().unwrap_or(0)).collect()
    }
}

const MAX_SWEEPS: usize = 10_000_000;

/// Action value of `a` in `s` under entry rewards `r` and state values `v`.
pub fn q_value(mdp: &TabularMDP, r: &[f64], v: &[f64], s: usize, a: usize) -> f64 {
    mdp.successors(s, a)
        .iter()
        .map(|&(n, p)| {
            let cont = if mdp.terminal[n] { 0.0 } else { mdp.gamma * v[n] };
            p * (r[n] + cont)
        })
        .sum()
}

/// Synchronous Bellman backups until the sup-norm change drops below `tol`.
pub fn value_iteration(mdp: &TabularMDP, channel: RewardChannel, tol: f64) -> ValueSolution {
    let tol = if tol > 0.0 { tol } else { f64::EPSILON };
    let r = channel.rewards(mdp);
    let mut v = vec![0.0; mdp.n_states];
    let mut next = v.clone();
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    while residual >= tol && iterations < MAX_SWEEPS {
        residual = 0.0;
        for s in 0..mdp.n_states {
            next[s] = if mdp.terminal[s] {
                0.0
            } else {
                (0..mdp.n_actions)
                    .map(|a| q_value(mdp, &r, &v, s, a))
                    .fold(f64::NEG_INFINITY, f64::max)
            };
            residual = residual.max((next[s] - v[s]).abs());
        }
        std::mem::swap(&mut v, &mut next);
        iterations += 1;
    }

    // Values are within tol * gamma / (1 - gamma) of optimal, so action
    // values carry errors of the same order; anything closer is a tie.
    let scale = v.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let tie = (10.0 * tol / (1.0 - mdp.gamma)).max(1e-12 * scale);
    let greedy = (0..mdp.n_states)
        .map(|s| {
            if mdp.terminal[s] {
                return Vec::new();
            }
            let q: Vec<f64> = (0..mdp.n_actions).map(|a| q_value(mdp, &r, &v, s, a)).collect();
            let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (0..mdp.n_actions).filter(|&a| q[a] >= best - tie).collect()
        })
        .collect();
    ValueSolution {
        values: v,
        greedy,
        iterations,
        residual,
    }
}

/// `policy[s][a]` is the probability of taking `a` in `s`.
pub type StochasticPolicy = Vec<Vec<f64>>;

pub fn deterministic_policy(actions: &[usize], n_actions: usize) -> StochasticPolicy {
    actions
        .iter()
        .map(|&a| (0..n_actions).map(|b| if a == b { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// Exact value of `policy` under entry rewards `r`, solving
/// `(I - gamma P_pi) V = P_pi r` with terminal states pinned to zero.
pub fn evaluate_policy(mdp: &TabularMDP, policy: &StochasticPolicy, r: &[f64]) -> Result<Vec<f64>> {
    let n = mdp.n_states;
    check_len("policy", n, policy.len())?;
    check_len("rewards", n, r.len())?;
    let mut a_mat = DMatrix::<f64>::identity(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for s in (0..n).filter(|&s| !mdp.terminal[s]) {
        check_len("policy row", mdp.n_actions, policy[s].len())?;
        for (a, &pa) in policy[s].iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            for &(nx, p) in mdp.successors(s, a) {
                let w = pa * p;
                b[s] += w * r[nx];
                if !mdp.terminal[nx] {
                    a_mat[(s, nx)] -= mdp.gamma * w;
                }
            }
        }
    }
    let v = a_mat
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::config("policy", "evaluation system is singular"))?;
    Ok(v.iter().copied().collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceReport {
    pub policies_equal: bool,
    /// Non-terminal states whose greedy sets differ.
    pub diff_states: Vec<usize>,
    pub env: ValueSolution,
    pub total: ValueSolution,
    /// Extrinsic value lost per state by following the total-reward greedy
    /// policy (lowest-index tie-break) instead of the extrinsic optimum.
    pub v_env_gap: Vec<f64>,
    pub max_gap: f64,
}

/// Solves the MDP with and without `beta * r_int` and compares the greedy
/// action sets state by state.
pub fn verify_invariance(mdp: &TabularMDP, r_int: &[f64], beta: f64, gamma: f64, tol: f64) -> Result<InvarianceReport> {
    let m = mdp.clone().with_r_int(r_int.to_vec())?.with_gamma(gamma);
    m.validate()?;
    let env = value_iteration(&m, RewardChannel::EnvOnly, tol);
    let total = value_iteration(&m, RewardChannel::Total(beta), tol);
    let diff_states: Vec<usize> = (0..m.n_states).filter(|&s| env.greedy[s] != total.greedy[s]).collect();

    let env_opt = evaluate_policy(
        &m,
        &deterministic_policy(&env.first_greedy_policy(), m.n_actions),
        &m.r_env,
    )?;
    let env_under_total = evaluate_policy(
        &m,
        &deterministic_policy(&total.first_greedy_policy(), m.n_actions),
        &m.r_env,
    )?;
    let v_env_gap: Vec<f64> = env_opt.iter().zip(&env_under_total).map(|(a, b)| a - b).collect();
    let max_gap = v_env_gap.iter().copied().fold(0.0, f64::max);
    Ok(InvarianceReport {
        policies_equal: diff_states.is_empty(),
        diff_states,
        env,
        total,
        v_env_gap,
        max_gap,
    })
}
