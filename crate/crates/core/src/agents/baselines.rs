//! Exploration baselines: uniform noise, visit counts, random network
//! distillation, and a forward-dynamics curiosity model.
//!
//! RND and the forward model report a squared prediction error divided by
//! the running standard deviation of past errors; the running statistics and
//! the trained network both move only when a transition is observed.

use std::collections::HashMap;

use crate::error::{check_len, Error, Result};
use crate::nn::{mse, mse_grad, Activation, AdamConfig, AdamState, DenseNet, InitScheme};
use crate::rng::SeededRng;
use crate::shaping::Discretizer;

pub const FEATURE_DIM: usize = 16;
pub const HIDDEN_DIM: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineKind {
    Random,
    CountBased,
    Rnd,
    IcmForward,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Random => "random",
            BaselineKind::CountBased => "count",
            BaselineKind::Rnd => "rnd",
            BaselineKind::IcmForward => "icm",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [Self::Random, Self::CountBased, Self::Rnd, Self::IcmForward]
            .into_iter()
            .find(|k| k.name() == name)
    }
}

/// Streaming mean and variance with a tiny pseudo-count prior (mean 0,
/// variance 1), so the first observation effectively seeds the estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningMeanStd {
    pub mean: f64,
    pub var: f64,
    pub count: f64,
}

impl Default for RunningMeanStd {
    fn default() -> Self {
        Self {
            mean: 0.0,
            var: 1.0,
            count: 1e-4,
        }
    }
}

impl RunningMeanStd {
    pub fn update(&mut self, x: f64) {
        let total = self.count + 1.0;
        let delta = x - self.mean;
        let m2 = self.var * self.count + delta * delta * self.count / total;
        self.mean += delta / total;
        self.var = m2 / total;
        self.count = total;
    }

    pub fn std(&self) -> f64 {
        self.var.sqrt().max(1e-8)
    }
}

/// One environment transition as seen by a bonus.
#[derive(Debug, Clone, Copy)]
pub struct Transition<'a> {
    pub state: &'a [f64],
    pub action: usize,
    pub next_state: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub state_dim: usize,
    pub n_actions: usize,
    /// Per-axis bounds used to map states affinely onto `[-1, 1]`.
    pub state_low: Vec<f64>,
    pub state_high: Vec<f64>,
    /// Keys states for visit counting.
    pub discretizer: Discretizer,
    pub learning_rate: f64,
    pub seed: u64,
}

impl BaselineConfig {
    /// States in the unit box, counted per grid cell.
    pub fn for_grid(dims: &[usize], seed: u64) -> Self {
        Self {
            state_dim: dims.len(),
            n_actions: 2 * dims.len(),
            state_low: vec![0.0; dims.len()],
            state_high: vec![1.0; dims.len()],
            discretizer: Discretizer::cells(dims),
            learning_rate: 1e-3,
            seed,
        }
    }

    fn normalize(&self, s: &[f64]) -> Result<Vec<f64>> {
        check_len("baseline state", self.state_dim, s.len())?;
        Ok(s.iter()
            .zip(self.state_low.iter().zip(&self.state_high))
            .map(|(v, (lo, hi))| {
                let span = (hi - lo).max(1e-12);
                2.0 * (v - lo) / span - 1.0
            })
            .collect())
    }
}

#[derive(Debug, Clone)]
struct Predictor {
    net: DenseNet,
    adam: AdamState,
    stats: RunningMeanStd,
}

impl Predictor {
    fn new(dims: &[usize], lr: f64, rng: &mut SeededRng) -> Result<Self> {
        let net = feature_net(dims, rng)?;
        let adam = AdamState::new(&net, AdamConfig::with_lr(lr));
        Ok(Self {
            net,
            adam,
            stats: RunningMeanStd::default(),
        })
    }

    /// Raw error, normalized bonus, and one training step toward `target`.
    fn observe(&mut self, input: &[f64], target: &[f64]) -> Result<(f64, f64)> {
        let trace = self.net.forward_trace(input)?;
        let raw = mse(&trace.output, target)?;
        self.stats.update(raw);
        let bonus = raw / self.stats.std();
        let (grads, _) = self.net.backward_trace(&trace, &mse_grad(&trace.output, target))?;
        self.adam.apply(&mut self.net, &grads)?;
        Ok((raw, bonus))
    }

    fn peek(&self, input: &[f64], target: &[f64]) -> Result<f64> {
        let out = self.net.forward(input)?;
        Ok(mse(&out, target)? / self.stats.std())
    }
}

fn feature_net(dims: &[usize], rng: &mut SeededRng) -> Result<DenseNet> {
    DenseNet::new(
        dims,
        &[Activation::Relu, Activation::Identity],
        InitScheme::Orthogonal,
        rng,
    )
}

fn icm_input(config: &BaselineConfig, features: &DenseNet, t: &Transition) -> Result<(Vec<f64>, Vec<f64>)> {
    if t.action >= config.n_actions {
        return Err(Error::InvalidAction {
            action: t.action,
            available: config.n_actions,
        });
    }
    let mut input = features.forward(&config.normalize(t.state)?)?;
    input.extend((0..config.n_actions).map(|a| if a == t.action { 1.0 } else { 0.0 }));
    let target = features.forward(&config.normalize(t.next_state)?)?;
    Ok((input, target))
}

#[derive(Debug, Clone)]
enum State {
    Random(SeededRng),
    Count(HashMap<Vec<i64>, u64>),
    Rnd { target: DenseNet, predictor: Predictor },
    Icm { features: DenseNet, forward: Predictor },
}

/// An initialized exploration baseline.
#[derive(Debug, Clone)]
pub struct BaselineBonus {
    kind: BaselineKind,
    config: BaselineConfig,
    state: State,
    last_raw: Option<f64>,
}

impl BaselineBonus {
    pub fn new(kind: BaselineKind, config: BaselineConfig) -> Result<Self> {
        if config.state_low.len() != config.state_dim || config.state_high.len() != config.state_dim {
            return Err(Error::config("state bounds", "need one bound per state dimension"));
        }
        if config.n_actions == 0 {
            return Err(Error::config("n_actions", "must be positive"));
        }
        let mut rng = SeededRng::new(config.seed);
        let d = config.state_dim;
        let lr = config.learning_rate;
        let state = match kind {
            BaselineKind::Random => State::Random(rng),
            BaselineKind::CountBased => State::Count(HashMap::new()),
            BaselineKind::Rnd => State::Rnd {
                target: feature_net(&[d, HIDDEN_DIM, FEATURE_DIM], &mut rng)?,
                predictor: Predictor::new(&[d, HIDDEN_DIM, FEATURE_DIM], lr, &mut rng)?,
            },
            BaselineKind::IcmForward => State::Icm {
                features: feature_net(&[d, HIDDEN_DIM, FEATURE_DIM], &mut rng)?,
                forward: Predictor::new(&[FEATURE_DIM + config.n_actions, HIDDEN_DIM, FEATURE_DIM], lr, &mut rng)?,
            },
        };
        Ok(Self {
            kind,
            config,
            state,
            last_raw: None,
        })
    }

    pub fn kind(&self) -> BaselineKind {
        self.kind
    }

    pub fn config(&self) -> &BaselineConfig {
        &self.config
    }

    /// Unnormalized error of the most recent observed transition.
    pub fn last_raw(&self) -> Option<f64> {
        self.last_raw
    }

    /// Visits recorded so far for the cell containing `s`.
    pub fn visit_count(&self, s: &[f64]) -> u64 {
        match &self.state {
            State::Count(counts) => counts.get(&self.config.discretizer.key(s)).copied().unwrap_or(0),
            _ => 0,
        }
    }

    /// Bonus the transition would earn now, leaving counts, statistics and
    /// weights untouched. The random baseline still consumes a draw.
    pub fn peek(&mut self, t: &Transition) -> Result<f64> {
        match &mut self.state {
            State::Random(rng) => Ok(rng.uniform()),
            State::Count(counts) => {
                let n = counts
                    .get(&self.config.discretizer.key(t.next_state))
                    .copied()
                    .unwrap_or(0);
                Ok(1.0 / ((1 + n) as f64).sqrt())
            }
            State::Rnd { target, predictor } => {
                let x = self.config.normalize(t.next_state)?;
                predictor.peek(&x, &target.forward(&x)?)
            }
            State::Icm { features, forward } => {
                let (input, target) = icm_input(&self.config, features, t)?;
                forward.peek(&input, &target)
            }
        }
    }

    /// Bonus for an observed transition; updates the baseline's state.
    pub fn observe(&mut self, t: &Transition) -> Result<f64> {
        match &mut self.state {
            State::Random(rng) => Ok(rng.uniform()),
            State::Count(counts) => {
                let n = counts.entry(self.config.discretizer.key(t.next_state)).or_insert(0);
                let bonus = 1.0 / ((1 + *n) as f64).sqrt();
                *n += 1;
                Ok(bonus)
            }
            State::Rnd { target, predictor } => {
                let x = self.config.normalize(t.next_state)?;
                let y = target.forward(&x)?;
                let (raw, bonus) = predictor.observe(&x, &y)?;
                self.last_raw = Some(raw);
                Ok(bonus)
            }
            State::Icm { features, forward } => {
                let (input, target) = icm_input(&self.config, features, t)?;
                let (raw, bonus) = forward.observe(&input, &target)?;
                self.last_raw = Some(raw);
                Ok(bonus)
            }
        }
    }
}

/// Bonus for one observed transition.
pub fn baseline_bonus(bonus: &mut BaselineBonus, transition: &Transition) -> Result<f64> {
    bonus.observe(transition)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(seed: u64) -> BaselineConfig {
        BaselineConfig::for_grid(&[10, 10], seed)
    }

    fn tr<'a>(s: &'a [f64], a: usize, n: &'a [f64]) -> Transition<'a> {
        Transition {
            state: s,
            action: a,
            next_state: n,
        }
    }

    #[test]
    fn count_bonus_sequence() {
        let mut b = BaselineBonus::new(BaselineKind::CountBased, cfg(0)).unwrap();
        let s = [0.0, 0.0];
        let n = [1.0 / 9.0, 0.0];
        assert_eq!(baseline_bonus(&mut b, &tr(&s, 0, &n)).unwrap(), 1.0);
        baseline_bonus(&mut b, &tr(&s, 0, &n)).unwrap();
        baseline_bonus(&mut b, &tr(&s, 0, &n)).unwrap();
        assert_eq!(b.peek(&tr(&s, 0, &n)).unwrap(), 0.5);
        assert_eq!(baseline_bonus(&mut b, &tr(&s, 0, &n)).unwrap(), 0.5);
        assert_eq!(b.visit_count(&n), 4);
    }

    #[test]
    fn random_in_unit_interval() {
        let mut b = BaselineBonus::new(BaselineKind::Random, cfg(3)).unwrap();
        let s = [0.5, 0.5];
        for _ in 0..1000 {
            let v = b.observe(&tr(&s, 0, &s)).unwrap();
            assert!((0.0..1.0).contains(&v));
        }
    }

    #[test]
    fn running_stats_match_batch() {
        let xs = [0.3, 1.2, -0.7, 2.0, 0.1];
        let mut rms = RunningMeanStd::default();
        for &x in &xs {
            rms.update(x);
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        assert!((rms.mean - mean).abs() < 1e-3);
        assert!((rms.var - var).abs() < 1e-3);
    }

    #[test]
    fn rnd_repeated_state_decays() {
        let mut b = BaselineBonus::new(BaselineKind::Rnd, cfg(1)).unwrap();
        let s = [0.3, 0.7];
        let first = b.observe(&tr(&s, 0, &s)).unwrap();
        let first_raw = b.last_raw().unwrap();
        let mut last = first;
        for _ in 0..500 {
            last = b.observe(&tr(&s, 0, &s)).unwrap();
        }
        assert!(last < first, "{last} vs {first}");
        assert!(b.last_raw().unwrap() < first_raw);
    }

    #[test]
    fn peek_does_not_train() {
        let mut b = BaselineBonus::new(BaselineKind::Rnd, cfg(2)).unwrap();
        let s = [0.1, 0.2];
        let p1 = b.peek(&tr(&s, 0, &s)).unwrap();
        let p2 = b.peek(&tr(&s, 0, &s)).unwrap();
        assert_eq!(p1, p2);
        let mut icm = BaselineBonus::new(BaselineKind::IcmForward, cfg(2)).unwrap();
        let n = [0.2, 0.2];
        let q1 = icm.peek(&tr(&s, 0, &n)).unwrap();
        assert_eq!(q1, icm.peek(&tr(&s, 0, &n)).unwrap());
        icm.observe(&tr(&s, 0, &n)).unwrap();
        assert_ne!(q1, icm.peek(&tr(&s, 0, &n)).unwrap());
    }

    #[test]
    fn icm_learns_repeated_transition() {
        let mut b = BaselineBonus::new(BaselineKind::IcmForward, cfg(4)).unwrap();
        let (s, n) = ([0.4, 0.4], [0.5, 0.4]);
        b.observe(&tr(&s, 0, &n)).unwrap();
        let first_raw = b.last_raw().unwrap();
        for _ in 0..300 {
            b.observe(&tr(&s, 0, &n)).unwrap();
        }
        assert!(b.last_raw().unwrap() < first_raw);
    }

    #[test]
    fn icm_rejects_bad_action() {
        let mut b = BaselineBonus::new(BaselineKind::IcmForward, cfg(0)).unwrap();
        let s = [0.0, 0.0];
        assert!(matches!(b.observe(&tr(&s, 9, &s)), Err(Error::InvalidAction { .. })));
    }

    #[test]
    fn kind_names_round_trip() {
        for k in [
            BaselineKind::Random,
            BaselineKind::CountBased,
            BaselineKind::Rnd,
            BaselineKind::IcmForward,
        ] {
            assert_eq!(BaselineKind::from_name(k.name()), Some(k));
        }
    }
}
