//! Experiment configuration, stored as TOML with one table per stage.
//!
//! Every field has a default, so an empty file is a valid configuration.
//! Unknown keys are rejected. A complete example:
//!
//! ```toml
//! seed = 7
//!
//! [world]
//! dims = [25, 25]
//! wall_density = 0.2
//! max_steps = 2000
//!
//! [demos]
//! gap = 4
//! episodes = 1
//! source = "shortest_path"   # or "polyline" (3-D only, ignores walls)
//!
//! [moe]
//! experts = 2
//! bottleneck = 1
//! hidden = 64
//! gate_hidden = 32
//! epochs = 3000
//! learning_rate = 0.001
//!
//! [mapping]
//! l_min = 0.01
//! l_max = 0.1
//! steepness = 20.0
//! scale = 1.0
//! falloff = "exponential"   # or "linear"
//!
//! [decay]
//! beta0 = 1.0
//! decay = 1.0               # per-step factor, or a rate when mode = "exponential_rate"
//! mode = "per_step"
//!
//! [agent]
//! kind = "moe"              # moe, random, count, rnd, icm
//! env = "grid"              # grid or chain (qlearn, verify-mdp)
//! steps = 2000
//! episodes = 500
//! alpha = 0.1
//! gamma = 0.99
//!
//! [outputs]
//! dir = "run"
//!
//! [landscape]
//! l_max = 1.0
//! stride = 2
//!
//! [ablation]
//! counts = [1, 2, 5, 11]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agents::{BaselineKind, EpsilonSchedule, QLearnConfig};
use crate::envs::ChainVariant;
use crate::error::{Error, Result};
use crate::moe::{BatchSize, MoeArch, TrainConfig};
use crate::nn::InitScheme;
use crate::shaping::{DecayMode, DecaySchedule, IntegrationMode, MappingConfig};
use crate::textio::{read_file, write_file};

/// Environment variable naming the root that relative output directories
/// are resolved against.
pub const OUT_ROOT_ENV: &str = "MOE_GUIDE_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldSection {
    pub dims: Vec<usize>,
    pub wall_density: f64,
    pub max_steps: usize,
}

impl Default for WorldSection {
    fn default() -> Self {
        Self {
            dims: vec![25, 25],
            wall_density: 0.2,
            max_steps: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DemoSource {
    /// Shortest start-to-goal paths through the world.
    #[default]
    ShortestPath,
    /// A bending 3-D polyline spanning the grid, walls ignored.
    Polyline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemosSection {
    pub gap: usize,
    pub episodes: usize,
    pub source: DemoSource,
}

impl Default for DemosSection {
    fn default() -> Self {
        Self {
            gap: 0,
            episodes: 1,
            source: DemoSource::ShortestPath,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MoeSection {
    pub experts: usize,
    pub bottleneck: usize,
    pub hidden: usize,
    pub gate_hidden: usize,
    pub top_k: Option<usize>,
    pub orthogonal_init: bool,
    pub epochs: usize,
    pub learning_rate: f64,
    /// 0 picks automatically: full batch up to 4096 states, else 256.
    pub batch_size: usize,
}

impl Default for MoeSection {
    fn default() -> Self {
        let arch = MoeArch::default();
        let train = TrainConfig::default();
        Self {
            experts: arch.experts,
            bottleneck: arch.bottleneck,
            hidden: arch.hidden,
            gate_hidden: arch.gate_hidden,
            top_k: arch.top_k,
            orthogonal_init: false,
            epochs: train.epochs,
            learning_rate: train.learning_rate,
            batch_size: 0,
        }
    }
}

impl MoeSection {
    pub fn arch(&self) -> MoeArch {
        MoeArch {
            experts: self.experts,
            bottleneck: self.bottleneck,
            hidden: self.hidden,
            gate_hidden: self.gate_hidden,
            top_k: self.top_k,
            init: if self.orthogonal_init {
                InitScheme::Orthogonal
            } else {
                InitScheme::UniformGlorot
            },
        }
    }

    pub fn train(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            batch_size: match self.batch_size {
                0 => BatchSize::Auto,
                n => BatchSize::Fixed(n),
            },
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DecayKind {
    #[default]
    PerStep,
    ExponentialRate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecaySection {
    pub beta0: f64,
    pub decay: f64,
    pub mode: DecayKind,
}

impl Default for DecaySection {
    fn default() -> Self {
        Self {
            beta0: 1.0,
            decay: 1.0,
            mode: DecayKind::PerStep,
        }
    }
}

impl DecaySection {
    pub fn schedule(&self) -> DecaySchedule {
        DecaySchedule {
            beta0: self.beta0,
            mode: match self.mode {
                DecayKind::PerStep => DecayMode::PerStepMultiplicative(self.decay),
                DecayKind::ExponentialRate => DecayMode::ExponentialRate(self.decay),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    #[default]
    Moe,
    Random,
    Count,
    Rnd,
    Icm,
}

impl AgentKind {
    pub fn baseline(self) -> Option<BaselineKind> {
        match self {
            AgentKind::Moe => None,
            AgentKind::Random => Some(BaselineKind::Random),
            AgentKind::Count => Some(BaselineKind::CountBased),
            AgentKind::Rnd => Some(BaselineKind::Rnd),
            AgentKind::Icm => Some(BaselineKind::IcmForward),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AgentEnv {
    #[default]
    Grid,
    Chain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ChainRewards {
    #[default]
    Table,
    Prose,
}

impl From<ChainRewards> for ChainVariant {
    fn from(c: ChainRewards) -> Self {
        match c {
            ChainRewards::Table => ChainVariant::Table,
            ChainRewards::Prose => ChainVariant::Prose,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentSection {
    pub kind: AgentKind,
    pub env: AgentEnv,
    pub chain_rewards: ChainRewards,
    /// Explorer step budget.
    pub steps: usize,
    pub episodes: usize,
    pub max_episode_steps: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of episodes over which epsilon anneals.
    pub epsilon_fraction: f64,
    pub integration: IntegrationMode,
    pub once_per_episode: bool,
    /// Bonus weight for verify-mdp.
    pub verify_beta: f64,
    pub tol: f64,
}

impl Default for AgentSection {
    fn default() -> Self {
        let q = QLearnConfig::default();
        Self {
            kind: AgentKind::Moe,
            env: AgentEnv::Grid,
            chain_rewards: ChainRewards::Table,
            steps: 2000,
            episodes: q.episodes,
            max_episode_steps: q.max_episode_steps,
            alpha: q.alpha,
            gamma: 0.99,
            epsilon_start: q.epsilon.start,
            epsilon_end: q.epsilon.end,
            epsilon_fraction: q.epsilon.fraction,
            integration: IntegrationMode::RewardSum,
            once_per_episode: false,
            verify_beta: 10.0,
            tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputsSection {
    pub dir: PathBuf,
}

impl Default for OutputsSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("moe-guide-out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandscapeSection {
    pub l_max: f64,
    pub stride: usize,
}

impl Default for LandscapeSection {
    fn default() -> Self {
        Self { l_max: 1.0, stride: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationSection {
    pub counts: Vec<usize>,
    pub match_budget: bool,
}

impl Default for AblationSection {
    fn default() -> Self {
        Self {
            counts: vec![1, 2, 5, 11],
            match_budget: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub world: WorldSection,
    pub demos: DemosSection,
    pub moe: MoeSection,
    pub mapping: MappingConfig,
    pub decay: DecaySection,
    pub agent: AgentSection,
    pub outputs: OutputsSection,
    pub landscape: LandscapeSection,
    pub ablation: AblationSection,
}

fn check(ok: bool, key: &str, reason: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(key, reason))
    }
}

fn keyed(section: &str, e: Error) -> Error {
    match e {
        Error::InvalidConfig { key, reason } => Error::config(format!("{section}.{key}"), reason),
        other => other,
    }
}

impl ExperimentConfig {
    pub fn from_toml(path: &Path, text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::parse(path, line, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(path, &read_file(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_toml())
    }

    pub fn validate(&self) -> Result<()> {
        let w = &self.world;
        check(
            matches!(w.dims.len(), 2 | 3) && w.dims.iter().all(|&d| d >= 2),
            "world.dims",
            "need 2 or 3 axes of at least 2 cells",
        )?;
        check(
            (0.0..1.0).contains(&w.wall_density),
            "world.wall_density",
            "must lie in [0, 1)",
        )?;
        check(w.max_steps > 0, "world.max_steps", "must be positive")?;
        check(self.demos.episodes > 0, "demos.episodes", "must be positive")?;
        check(
            self.demos.source != DemoSource::Polyline || w.dims.len() == 3,
            "demos.source",
            "polyline demonstrations need a 3-D world",
        )?;
        let m = &self.moe;
        check(m.experts > 0, "moe.experts", "need at least one expert")?;
        check(m.hidden > 0, "moe.hidden", "must be positive")?;
        check(
            m.bottleneck > 0 && m.bottleneck < w.dims.len(),
            "moe.bottleneck",
            "must satisfy 0 < bottleneck < state dimension",
        )?;
        check(m.epochs > 0, "moe.epochs", "must be at least 1")?;
        check(
            m.learning_rate > 0.0 && m.learning_rate.is_finite(),
            "moe.learning_rate",
            "must be positive",
        )?;
        if let Some(k) = m.top_k {
            check(k > 0 && k <= m.experts, "moe.top_k", "must lie in 1..=experts")?;
        }
        self.mapping.validate().map_err(|e| keyed("mapping", e))?;
        self.decay.schedule().validate().map_err(|e| keyed("decay", e))?;
        let a = &self.agent;
        check(a.steps > 0, "agent.steps", "must be positive")?;
        check((0.0..1.0).contains(&a.gamma), "agent.gamma", "must lie in [0, 1)")?;
        check(a.tol > 0.0, "agent.tol", "must be positive")?;
        check(a.verify_beta >= 0.0, "agent.verify_beta", "must be non-negative")?;
        self.q_config().validate().map_err(|e| keyed("agent", e))?;
        check(
            self.landscape.l_max > 0.0 && self.landscape.l_max.is_finite(),
            "landscape.l_max",
            "must be positive",
        )?;
        check(self.landscape.stride > 0, "landscape.stride", "must be positive")?;
        check(
            !self.ablation.counts.is_empty() && self.ablation.counts.iter().all(|&n| n > 0),
            "ablation.counts",
            "need one or more positive expert counts",
        )?;
        Ok(())
    }

    pub fn q_config(&self) -> QLearnConfig {
        let a = &self.agent;
        QLearnConfig {
            episodes: a.episodes,
            alpha: a.alpha,
            epsilon: EpsilonSchedule {
                start: a.epsilon_start,
                end: a.epsilon_end,
                fraction: a.epsilon_fraction,
            },
            max_episode_steps: a.max_episode_steps,
            mode: a.integration,
            schedule: self.decay.schedule(),
            once_per_episode: a.once_per_episode,
            seed: self.seed,
        }
    }

    /// `outputs.dir`, resolved against `$MOE_GUIDE_OUT` when relative.
    pub fn output_dir(&self) -> PathBuf {
        resolve_output(&self.outputs.dir, std::env::var_os(OUT_ROOT_ENV).map(PathBuf::from))
    }
}

pub fn resolve_output(dir: &Path, root: Option<PathBuf>) -> PathBuf {
    match root {
        Some(root) if dir.is_relative() => root.join(dir),
        _ => dir.to_path_buf(),
    }
}
