//! Epsilon-greedy tabular Q-learning with a decaying state-only bonus.
//!
//! The bonus channel is the MDP's `r_int` table, already mapped into reward
//! units (for example through [`crate::shaping::map_loss`]). At global step
//! `t` it is weighted by `beta_t` from the decay schedule.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::envs::TabularMDP;
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::shaping::{combine_reward, q_update, DecaySchedule, IntegrationMode};
use crate::textio::{join_f64, write_file};

pub const QTABLE_HEADER: &str = "moe-guide-qtable v1";

#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
    pub alpha: f64,
    pub gamma: f64,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize, alpha: f64, gamma: f64) -> Self {
        Self {
            n_states,
            n_actions,
            values: vec![0.0; n_states * n_actions],
            alpha,
            gamma,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.values[s * self.n_actions + a] = v;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn max(&self, s: usize) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// All actions attaining the row maximum exactly.
    pub fn greedy_actions(&self, s: usize) -> Vec<usize> {
        let best = self.max(s);
        (0..self.n_actions).filter(|&a| self.get(s, a) == best).collect()
    }

    /// Lowest-index greedy action per state.
    pub fn greedy_policy(&self) -> Vec<usize> {
        (0..self.n_states).map(|s| self.greedy_actions(s)[0]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Values plus the greedy action, one state per line.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{QTABLE_HEADER}\nstates={} actions={} alpha={:?} gamma={:?}\n",
            self.n_states, self.n_actions, self.alpha, self.gamma
        );
        for s in 0..self.n_states {
            let _ = writeln!(out, "{s} {} {}", self.greedy_actions(s)[0], join_f64(self.row(s), " "));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_text())
    }
}

/// Linear anneal from `start` to `end` over the first `fraction` of episodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub fraction: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self {
            start: 1.0,
            end: 0.05,
            fraction: 0.5,
        }
    }
}

impl EpsilonSchedule {
    pub fn at(&self, episode: usize, episodes: usize) -> f64 {
        let horizon = self.fraction * episodes as f64;
        if horizon <= 0.0 || episode as f64 >= horizon {
            return self.end;
        }
        self.start + (self.end - self.start) * episode as f64 / horizon
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QLearnConfig {
    pub episodes: usize,
    pub alpha: f64,
    pub epsilon: EpsilonSchedule,
    pub max_episode_steps: usize,
    pub mode: IntegrationMode,
    pub schedule: DecaySchedule,
    /// Pay the bonus of each state at most once per episode.
    pub once_per_episode: bool,
    pub seed: u64,
}

impl Default for QLearnConfig {
    fn default() -> Self {
        Self {
            episodes: 500,
            alpha: 0.1,
            epsilon: EpsilonSchedule::default(),
            max_episode_steps: 100,
            mode: IntegrationMode::RewardSum,
            schedule: DecaySchedule::constant(0.0),
            once_per_episode: false,
            seed: 0,
        }
    }
}

impl QLearnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::config("episodes", "must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::config("alpha", "must lie in (0, 1]"));
        }
        let e = self.epsilon;
        if !((0.0..=1.0).contains(&e.start) && (0.0..=1.0).contains(&e.end) && e.fraction >= 0.0) {
            return Err(Error::config("epsilon", "rates must lie in [0, 1]"));
        }
        if self.max_episode_steps == 0 {
            return Err(Error::config("max_episode_steps", "must be positive"));
        }
        self.schedule.validate()
    }
}

/// One learning-curve row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeStats {
    /// Environment steps taken so far, this episode included.
    pub step: u64,
    pub episode: usize,
    pub r_env_sum: f64,
    /// Weighted bonus actually paid.
    pub r_int_sum: f64,
    /// Bonus weight at the end of the episode.
    pub beta: f64,
    /// Fraction of states visited during the episode.
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QLearnOutcome {
    pub table: QTable,
    pub curve: Vec<EpisodeStats>,
}

fn sample_next(mdp: &TabularMDP, s: usize, a: usize, rng: &mut SeededRng) -> usize {
    let dist = mdp.successors(s, a);
    if dist.len() == 1 {
        return dist[0].0;
    }
    let u = rng.uniform();
    let mut acc = 0.0;
    for &(n, p) in dist {
        acc += p;
        if u < acc {
            return n;
        }
    }
    dist[dist.len() - 1].0
}

/// Learns from `mdp.start` for `cfg.episodes` episodes. In reward-sum mode
/// the bonus of the entered state joins the TD target; in additive mode the
/// bonus of the departed state is added after the TD step.
pub fn q_learn(mdp: &TabularMDP, cfg: &QLearnConfig) -> Result<QLearnOutcome> {
    mdp.validate()?;
    cfg.validate()?;
    let mut table = QTable::zeros(mdp.n_states, mdp.n_actions, cfg.alpha, mdp.gamma);
    let mut rng = SeededRng::new(cfg.seed);
    let mut curve = Vec::with_capacity(cfg.episodes);
    let mut t: u64 = 0;
    let mut paid: HashSet<usize> = HashSet::new();
    let mut visited: HashSet<usize> = HashSet::new();

    for episode in 0..cfg.episodes {
        let eps = cfg.epsilon.at(episode, cfg.episodes);
        let mut s = mdp.start;
        paid.clear();
        visited.clear();
        visited.insert(s);
        if cfg.once_per_episode {
            paid.insert(s);
        }
        let (mut r_env_sum, mut r_int_sum) = (0.0, 0.0);
        for _ in 0..cfg.max_episode_steps {
            if mdp.terminal[s] {
                break;
            }
            let a = if rng.uniform() < eps {
                rng.below(mdp.n_actions)
            } else {
                *rng.choose(&table.greedy_actions(s))
            };
            let next = sample_next(mdp, s, a, &mut rng);
            let beta = cfg.schedule.beta_at(t);
            let bonus_state = match cfg.mode {
                IntegrationMode::RewardSum => next,
                IntegrationMode::TdAdditive => s,
            };
            let fresh = !cfg.once_per_episode || paid.insert(bonus_state);
            let bonus = if fresh { beta * mdp.r_int[bonus_state] } else { 0.0 };
            let reward = combine_reward(mdp.r_env[next], bonus, cfg.mode);
            let max_next = if mdp.terminal[next] { 0.0 } else { table.max(next) };
            let q = q_update(table.get(s, a), cfg.alpha, mdp.gamma, max_next, &reward);
            if !q.is_finite() {
                return Err(Error::NonFiniteQ { step: t });
            }
            table.set(s, a, q);
            r_env_sum += reward.r_env;
            r_int_sum += bonus;
            t += 1;
            s = next;
            visited.insert(s);
        }
        curve.push(EpisodeStats {
            step: t,
            episode,
            r_env_sum,
            r_int_sum,
            beta: cfg.schedule.beta_at(t),
            coverage: visited.len() as f64 / mdp.n_states as f64,
        });
    }
    Ok(QLearnOutcome { table, curve })
}

/// Follows the lowest-index greedy action from `start` until a terminal
/// state or `max_steps`; returns the visited states.
pub fn greedy_rollout(mdp: &TabularMDP, table: &QTable, start: usize, max_steps: usize) -> Vec<usize> {
    let mut path = vec![start];
    let mut s = start;
    for _ in 0..max_steps {
        if mdp.terminal[s] {
            break;
        }
        s = mdp.next_state(s, table.greedy_actions(s)[0]);
        path.push(s);
    }
    path
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{chain_mdp, CHAIN_RIGHT};

    #[test]
    fn epsilon_schedule_endpoints() {
        let e = EpsilonSchedule::default();
        assert_eq!(e.at(0, 100), 1.0);
        assert!((e.at(25, 100) - 0.525).abs() < 1e-12);
        assert_eq!(e.at(50, 100), 0.05);
        assert_eq!(e.at(99, 100), 0.05);
    }

    #[test]
    fn extrinsic_only_learns_right() {
        let cfg = QLearnConfig {
            episodes: 400,
            ..QLearnConfig::default()
        };
        let out = q_learn(&chain_mdp(), &cfg).unwrap();
        for s in 0..5 {
            assert_eq!(out.table.greedy_actions(s), vec![CHAIN_RIGHT], "state {s}");
        }
        assert_eq!(out.curve.len(), 400);
    }

    #[test]
    fn curve_steps_accumulate() {
        let out = q_learn(&chain_mdp(), &QLearnConfig::default()).unwrap();
        for w in out.curve.windows(2) {
            assert!(w[1].step > w[0].step);
            assert!((0.0..=1.0).contains(&w[1].coverage));
        }
    }

    #[test]
    fn same_seed_same_table() {
        let cfg = QLearnConfig {
            schedule: DecaySchedule::per_step(2.0, 0.999),
            ..QLearnConfig::default()
        };
        let m = chain_mdp();
        assert_eq!(q_learn(&m, &cfg).unwrap(), q_learn(&m, &cfg).unwrap());
    }

    #[test]
    fn overflow_reports_step() {
        let mut m = chain_mdp();
        m.r_int = vec![f64::MAX; 6];
        let cfg = QLearnConfig {
            schedule: DecaySchedule::constant(10.0),
            ..QLearnConfig::default()
        };
        assert!(matches!(q_learn(&m, &cfg), Err(Error::NonFiniteQ { .. })));
    }

    #[test]
    fn additive_mode_runs() {
        let cfg = QLearnConfig {
            mode: IntegrationMode::TdAdditive,
            schedule: DecaySchedule::per_step(1.0, 0.99),
            ..QLearnConfig::default()
        };
        let out = q_learn(&chain_mdp(), &cfg).unwrap();
        assert!(out.table.is_finite());
    }

    #[test]
    fn text_lists_every_state() {
        let t = QTable::zeros(3, 2, 0.1, 0.9);
        let text = t.to_text();
        assert!(text.starts_with(QTABLE_HEADER));
        assert_eq!(text.lines().count(), 5);
    }
}
