//! Loss-to-reward mapping, bonus decay, and episodic novelty gating.
//!
//! A reconstruction loss `L` becomes an intrinsic reward
//!
//! ```text
//! r = scale * clip(f((L - l_min) / (l_max - l_min)), 0, 1)
//! ```
//!
//! with `f(x) = exp(-steepness * x)` (exponential falloff) or `f(x) = 1 - x`
//! (linear). Losses at or below `l_min` earn the full `scale` and losses at or
//! above `l_max` earn exactly zero.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moe::MoEModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Falloff {
    Exponential,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MappingConfig {
    pub l_min: f64,
    pub l_max: f64,
    pub steepness: f64,
    pub scale: f64,
    pub falloff: Falloff,
}

impl Default for MappingConfig {
    fn default() -> Self {
        Self {
            l_min: 0.01,
            l_max: 0.1,
            steepness: 20.0,
            scale: 1.0,
            falloff: Falloff::Exponential,
        }
    }
}

impl MappingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.l_min >= 0.0 && self.l_min.is_finite()) {
            return Err(Error::config("l_min", "must be a finite non-negative number"));
        }
        if !(self.l_max > self.l_min && self.l_max.is_finite()) {
            return Err(Error::config("l_max", "must be finite and greater than l_min"));
        }
        if !(self.steepness > 0.0 && self.steepness.is_finite()) {
            return Err(Error::config("steepness", "must be positive"));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::config("scale", "must be positive"));
        }
        Ok(())
    }
}

/// Maps a reconstruction loss to an intrinsic reward in `[0, scale]`.
pub fn map_loss(loss: f64, cfg: &MappingConfig) -> Result<f64> {
    cfg.validate()?;
    Ok(map_loss_unchecked(loss, cfg))
}

pub(crate) fn map_loss_unchecked(loss: f64, cfg: &MappingConfig) -> f64 {
    // NaN losses (diverged model) earn nothing.
    if loss.is_nan() || loss >= cfg.l_max {
        return 0.0;
    }
    if loss <= cfg.l_min {
        return cfg.scale;
    }
    let x = (loss - cfg.l_min) / (cfg.l_max - cfg.l_min);
    let f = match cfg.falloff {
        Falloff::Exponential => (-cfg.steepness * x).exp(),
        Falloff::Linear => 1.0 - x,
    };
    cfg.scale * f.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecayMode {
    /// `beta_t = beta0 * d^t`, with `d` in `(0, 1]`.
    PerStepMultiplicative(f64),
    /// `beta_t = beta0 * exp(-lambda t)`, with `lambda >= 0`.
    ExponentialRate(f64),
}

/// Schedule for the weight applied to the intrinsic bonus. The two modes
/// coincide when `d = exp(-lambda)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecaySchedule {
    pub beta0: f64,
    pub mode: DecayMode,
}

impl DecaySchedule {
    pub fn per_step(beta0: f64, d: f64) -> Self {
        Self {
            beta0,
            mode: DecayMode::PerStepMultiplicative(d),
        }
    }

    pub fn constant(beta0: f64) -> Self {
        Self::per_step(beta0, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta0 >= 0.0 && self.beta0.is_finite()) {
            return Err(Error::config("beta0", "must be a finite non-negative number"));
        }
        match self.mode {
            DecayMode::PerStepMultiplicative(d) if !(d > 0.0 && d <= 1.0) => {
                Err(Error::config("decay", "must lie in (0, 1]"))
            }
            DecayMode::ExponentialRate(l) if !(l >= 0.0 && l.is_finite()) => {
                Err(Error::config("decay", "rate must be non-negative"))
            }
            _ => Ok(()),
        }
    }

    pub fn beta_at(&self, t: u64) -> f64 {
        match self.mode {
            DecayMode::PerStepMultiplicative(d) => self.beta0 * d.powf(t as f64),
            DecayMode::ExponentialRate(lambda) => self.beta0 * (-lambda * t as f64).exp(),
        }
    }
}

/// Discretizes a state into a hashable key for the novelty mask.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Discretizer {
    /// Rounds every coordinate to the nearest multiple of `pitch`.
    Grid { pitch: f64 },
    /// Separate pitch for the first three axes; later axes reuse the third.
    PerAxis([f64; 3]),
}

impl Default for Discretizer {
    fn default() -> Self {
        Discretizer::Grid { pitch: 0.1 }
    }
}

impl Discretizer {
    pub fn key(&self, s: &[f64]) -> Vec<i64> {
        match *self {
            Discretizer::Grid { pitch } => s.iter().map(|v| (v / pitch).round() as i64).collect(),
            Discretizer::PerAxis(pitch) => s
                .iter()
                .enumerate()
                .map(|(k, v)| (v / pitch[k.min(2)]).round() as i64)
                .collect(),
        }
    }

    /// One key per cell of a grid whose states are scaled to `[0, 1]`.
    pub fn cells(dims: &[usize]) -> Self {
        let mut pitch = [1.0; 3];
        for (k, &d) in dims.iter().take(3).enumerate() {
            pitch[k] = 1.0 / d.saturating_sub(1).max(1) as f64;
        }
        Discretizer::PerAxis(pitch)
    }
}

/// Episodic once-per-state gate: a state earns its bonus only on the first
/// query of the episode.
#[derive(Debug, Clone, Default)]
pub struct NoveltyMask {
    discretizer: Discretizer,
    visited: HashSet<Vec<i64>>,
}

impl NoveltyMask {
    pub fn new(discretizer: Discretizer) -> Self {
        Self {
            discretizer,
            visited: HashSet::new(),
        }
    }

    pub fn contains(&self, s: &[f64]) -> bool {
        self.visited.contains(&self.discretizer.key(s))
    }

    /// Marks `s`; returns true if it had not been seen this episode.
    pub fn insert(&mut self, s: &[f64]) -> bool {
        self.visited.insert(self.discretizer.key(s))
    }

    pub fn len(&self) -> usize {
        self.visited.len()
    }

    pub fn is_empty(&self) -> bool {
        self.visited.is_empty()
    }

    pub fn reset(&mut self) {
        self.visited.clear();
    }
}

/// Scaled similarity bonus `beta_t * g(L(s))`. With a mask, a state already
/// rewarded this episode gets 0 and a new state is marked as visited.
pub fn shaped_bonus(
    model: &MoEModel,
    cfg: &MappingConfig,
    schedule: &DecaySchedule,
    mask: Option<&mut NoveltyMask>,
    s: &[f64],
    t: u64,
) -> Result<f64> {
    if let Some(mask) = mask {
        if !mask.insert(s) {
            return Ok(0.0);
        }
    }
    let beta = schedule.beta_at(t);
    if beta == 0.0 {
        return Ok(0.0);
    }
    Ok(beta * map_loss(model.loss(s)?, cfg)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum IntegrationMode {
    /// The bonus is folded into the transition reward before the TD update.
    #[default]
    RewardSum,
    /// The bonus is added to Q after the TD update, outside the TD error.
    TdAdditive,
}

/// Reward carried by a transition once the bonus has been attached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapedReward {
    /// Reward entering the TD target.
    pub td_reward: f64,
    /// Amount added to `Q(s, a)` after the TD step.
    pub post_td_bonus: f64,
    pub r_env: f64,
    pub bonus: f64,
}

pub fn combine_reward(r_env: f64, bonus: f64, mode: IntegrationMode) -> ShapedReward {
    match mode {
        IntegrationMode::RewardSum => ShapedReward {
            td_reward: r_env + bonus,
            post_td_bonus: 0.0,
            r_env,
            bonus,
        },
        IntegrationMode::TdAdditive => ShapedReward {
            td_reward: r_env,
            post_td_bonus: bonus,
            r_env,
            bonus,
        },
    }
}

/// `Q + alpha (r + gamma max_next - Q) + post_td_bonus`.
pub fn q_update(q: f64, alpha: f64, gamma: f64, max_next: f64, reward: &ShapedReward) -> f64 {
    q + alpha * (reward.td_reward + gamma * max_next - q) + reward.post_td_bonus
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moe::{MoeArch, Normalizer};
    use crate::rng::SeededRng;

    fn swimmer() -> MappingConfig {
        MappingConfig::default()
    }

    #[test]
    fn below_min_gives_full_reward() {
        assert_eq!(map_loss(0.005, &swimmer()).unwrap(), 1.0);
        assert_eq!(map_loss(0.01, &swimmer()).unwrap(), 1.0);
    }

    #[test]
    fn above_max_gives_zero() {
        assert_eq!(map_loss(0.2, &swimmer()).unwrap(), 0.0);
        assert_eq!(map_loss(0.1, &swimmer()).unwrap(), 0.0);
    }

    #[test]
    fn midpoint_is_exp_minus_ten() {
        let r = map_loss(0.055, &swimmer()).unwrap();
        assert!((r - (-10.0f64).exp()).abs() < 1e-15, "{r}");
    }

    #[test]
    fn linear_falloff_midpoint() {
        let cfg = MappingConfig {
            falloff: Falloff::Linear,
            ..swimmer()
        };
        assert!((map_loss(0.055, &cfg).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn invalid_thresholds_rejected() {
        let cfg = MappingConfig {
            l_min: 0.2,
            l_max: 0.1,
            ..swimmer()
        };
        assert!(map_loss(0.1, &cfg).is_err());
    }

    #[test]
    fn decay_examples() {
        let s = DecaySchedule::per_step(1.0, 0.999999);
        assert_eq!(s.beta_at(0), 1.0);
        assert_eq!(s.beta_at(1), 0.999999);
        let s = DecaySchedule::per_step(1.0, 0.999995);
        let expected = 0.999995f64.powi(1_000_000);
        assert!((s.beta_at(1_000_000) - expected).abs() / expected < 1e-12);
        assert!((s.beta_at(1_000_000) - (-5.0f64).exp()).abs() < 1e-4);
    }

    #[test]
    fn decay_modes_agree() {
        let lambda: f64 = 0.01;
        let a = DecaySchedule::per_step(2.0, (-lambda).exp());
        let b = DecaySchedule {
            beta0: 2.0,
            mode: DecayMode::ExponentialRate(lambda),
        };
        for t in [0, 1, 10, 1000] {
            assert!((a.beta_at(t) - b.beta_at(t)).abs() < 1e-12);
        }
    }

    #[test]
    fn combine_reward_modes() {
        let a = combine_reward(1.0, 0.0, IntegrationMode::RewardSum);
        let b = combine_reward(1.0, 0.0, IntegrationMode::TdAdditive);
        assert_eq!(q_update(0.3, 0.5, 0.9, 1.0, &a), q_update(0.3, 0.5, 0.9, 1.0, &b));
        assert!((combine_reward(1.0, 0.2, IntegrationMode::RewardSum).td_reward - 1.2).abs() < 1e-15);
        let td = combine_reward(1.0, 0.2, IntegrationMode::TdAdditive);
        assert!((q_update(0.0, 0.5, 0.9, 0.0, &td) - 0.7).abs() < 1e-15);
    }

    fn model() -> MoEModel {
        let mut m = MoEModel::init(2, &MoeArch::default(), &mut SeededRng::new(4)).unwrap();
        m.set_normalizer(Normalizer {
            mean: vec![0.0; 2],
            std: vec![1.0; 2],
        })
        .unwrap();
        m
    }

    #[test]
    fn zero_beta_gives_zero_bonus() {
        let m = model();
        let sched = DecaySchedule::constant(0.0);
        let cfg = MappingConfig {
            l_max: 1e6,
            ..swimmer()
        };
        assert_eq!(shaped_bonus(&m, &cfg, &sched, None, &[0.3, 0.1], 0).unwrap(), 0.0);
    }

    #[test]
    fn mask_rewards_state_once() {
        let m = model();
        let cfg = MappingConfig {
            l_min: 1e3,
            l_max: 1e4,
            ..swimmer()
        };
        let sched = DecaySchedule::constant(1.0);
        let mut mask = NoveltyMask::new(Discretizer::Grid { pitch: 1.0 });
        let s = [2.0, 3.0];
        assert_eq!(shaped_bonus(&m, &cfg, &sched, Some(&mut mask), &s, 0).unwrap(), 1.0);
        assert_eq!(shaped_bonus(&m, &cfg, &sched, Some(&mut mask), &s, 1).unwrap(), 0.0);
        mask.reset();
        assert_eq!(shaped_bonus(&m, &cfg, &sched, Some(&mut mask), &s, 2).unwrap(), 1.0);
    }

    #[test]
    fn discretizer_rounds_to_pitch() {
        let d = Discretizer::Grid { pitch: 0.1 };
        assert_eq!(d.key(&[0.04, 0.26]), d.key(&[0.0, 0.3]));
        assert_ne!(d.key(&[0.0]), d.key(&[0.1]));
    }

    #[test]
    fn cell_discretizer_keys_each_cell() {
        let dims = [5, 3, 4];
        let d = Discretizer::cells(&dims);
        let mut keys = std::collections::HashSet::new();
        for x in 0..5 {
            for y in 0..3 {
                for z in 0..4 {
                    let s = [x as f64 / 4.0, y as f64 / 2.0, z as f64 / 3.0];
                    assert_eq!(d.key(&s), vec![x as i64, y as i64, z as i64]);
                    keys.insert(d.key(&s));
                }
            }
        }
        assert_eq!(keys.len(), 60);
        assert_eq!(Discretizer::cells(&[1, 2]).key(&[0.0, 1.0]), vec![0, 1]);
    }
}
