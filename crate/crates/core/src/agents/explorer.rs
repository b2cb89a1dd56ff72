//! Greedy intrinsic explorer: at every step score each successor cell with a
//! bonus and move uniformly at random among the best-scoring actions.
//! Extrinsic reward is ignored and the walk continues past the goal until
//! the step budget is spent.

use std::collections::{HashMap, HashSet};

use crate::agents::baselines::{BaselineBonus, Transition};
use crate::envs::{Cell, GridWorld};
use crate::error::Result;
use crate::moe::MoEModel;
use crate::rng::SeededRng;
use crate::shaping::{map_loss, DecaySchedule, Discretizer, MappingConfig, NoveltyMask};

/// Something that scores grid transitions for the explorer.
pub trait BonusSource {
    /// Called once before the first step with the starting cell.
    fn reset(&mut self, world: &GridWorld, start: Cell) -> Result<()>;

    /// Bonus for moving `from -> to`, without committing to the move.
    fn peek(&mut self, world: &GridWorld, from: Cell, action: usize, to: Cell, t: u64) -> Result<f64>;

    /// Commits the chosen move.
    fn observe(&mut self, world: &GridWorld, from: Cell, action: usize, to: Cell, t: u64) -> Result<()>;
}

/// Similarity bonus `beta_t * g(L(s))` from a trained mixture, paid once per
/// cell per episode.
#[derive(Debug, Clone)]
pub struct MoeBonus<'a> {
    model: &'a MoEModel,
    mapping: MappingConfig,
    schedule: DecaySchedule,
    mask: NoveltyMask,
    cache: HashMap<Cell, f64>,
}

impl<'a> MoeBonus<'a> {
    pub fn new(model: &'a MoEModel, mapping: MappingConfig, schedule: DecaySchedule) -> Result<Self> {
        mapping.validate()?;
        schedule.validate()?;
        Ok(Self {
            model,
            mapping,
            schedule,
            mask: NoveltyMask::default(),
            cache: HashMap::new(),
        })
    }

    pub fn mask(&self) -> &NoveltyMask {
        &self.mask
    }

    /// `g(L)` of a cell; the model is fixed so each cell is evaluated once.
    pub fn mapped(&mut self, world: &GridWorld, c: Cell) -> Result<f64> {
        if let Some(&v) = self.cache.get(&c) {
            return Ok(v);
        }
        let v = map_loss(self.model.loss(&world.state_of(c))?, &self.mapping)?;
        self.cache.insert(c, v);
        Ok(v)
    }
}

impl BonusSource for MoeBonus<'_> {
    fn reset(&mut self, world: &GridWorld, start: Cell) -> Result<()> {
        self.mask = NoveltyMask::new(Discretizer::cells(world.dims()));
        self.mask.insert(&world.state_of(start));
        Ok(())
    }

    fn peek(&mut self, world: &GridWorld, _from: Cell, _action: usize, to: Cell, t: u64) -> Result<f64> {
        if self.mask.contains(&world.state_of(to)) {
            return Ok(0.0);
        }
        Ok(self.schedule.beta_at(t) * self.mapped(world, to)?)
    }

    fn observe(&mut self, world: &GridWorld, _from: Cell, _action: usize, to: Cell, _t: u64) -> Result<()> {
        self.mask.insert(&world.state_of(to));
        Ok(())
    }
}

impl BonusSource for BaselineBonus {
    fn reset(&mut self, _world: &GridWorld, _start: Cell) -> Result<()> {
        Ok(())
    }

    fn peek(&mut self, world: &GridWorld, from: Cell, action: usize, to: Cell, _t: u64) -> Result<f64> {
        let (s, n) = (world.state_of(from), world.state_of(to));
        BaselineBonus::peek(
            self,
            &Transition {
                state: &s,
                action,
                next_state: &n,
            },
        )
    }

    fn observe(&mut self, world: &GridWorld, from: Cell, action: usize, to: Cell, _t: u64) -> Result<()> {
        let (s, n) = (world.state_of(from), world.state_of(to));
        BaselineBonus::observe(
            self,
            &Transition {
                state: &s,
                action,
                next_state: &n,
            },
        )?;
        Ok(())
    }
}

/// A bonus that is the same everywhere; the explorer then walks randomly.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConstantBonus(pub f64);

impl BonusSource for ConstantBonus {
    fn reset(&mut self, _: &GridWorld, _: Cell) -> Result<()> {
        Ok(())
    }

    fn peek(&mut self, _: &GridWorld, _: Cell, _: usize, _: Cell, _: u64) -> Result<f64> {
        Ok(self.0)
    }

    fn observe(&mut self, _: &GridWorld, _: Cell, _: usize, _: Cell, _: u64) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplorerTrace {
    /// Start cell followed by the cell after every step.
    pub cells: Vec<Cell>,
    pub actions: Vec<usize>,
    /// Bonus of the chosen action when it was chosen.
    pub bonuses: Vec<f64>,
    /// Fraction of demonstration cells visited.
    pub demo_coverage: f64,
    /// Fraction of open cells visited.
    pub open_coverage: f64,
    /// Step at which the goal was first entered.
    pub goal_step: Option<usize>,
}

impl ExplorerTrace {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Coverage after each step, computed the same way as the summary fields.
    pub fn coverage_curve(&self, world: &GridWorld, demo_cells: &[Cell]) -> Vec<(f64, f64)> {
        let demo: HashSet<Cell> = demo_cells.iter().copied().collect();
        let n_open = world.open_cells().count().max(1) as f64;
        let mut seen = HashSet::new();
        let mut demo_seen = 0usize;
        let mut out = Vec::with_capacity(self.cells.len());
        for c in &self.cells {
            if seen.insert(*c) && demo.contains(c) {
                demo_seen += 1;
            }
            out.push((ratio(demo_seen, demo.len()), seen.len() as f64 / n_open));
        }
        out
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Runs `max_steps` greedy steps from the world's start. Each step scores
/// all `2 * D` moves (blocked moves score the current cell), keeps the
/// maximal ones and picks one uniformly with the seeded generator.
pub fn greedy_intrinsic_explore(
    world: &GridWorld,
    source: &mut dyn BonusSource,
    demo_cells: &[Cell],
    max_steps: usize,
    seed: u64,
) -> Result<ExplorerTrace> {
    let mut rng = SeededRng::new(seed);
    let start = world.start();
    source.reset(world, start)?;
    let mut cells = vec![start];
    let mut actions = Vec::with_capacity(max_steps);
    let mut bonuses = Vec::with_capacity(max_steps);
    let mut goal_step = (start == world.goal()).then_some(0);
    let mut cur = start;
    let mut scores = vec![0.0; world.n_actions()];
    let mut best = Vec::with_capacity(world.n_actions());
    for t in 0..max_steps {
        for (a, score) in scores.iter_mut().enumerate() {
            let to = world.successor(cur, a)?;
            *score = source.peek(world, cur, a, to, t as u64)?;
        }
        let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        best.clear();
        best.extend((0..scores.len()).filter(|&a| scores[a] == top));
        // NaN scores never compare equal; fall back to every action.
        if best.is_empty() {
            best.extend(0..scores.len());
        }
        let a = *rng.choose(&best);
        let to = world.successor(cur, a)?;
        source.observe(world, cur, a, to, t as u64)?;
        actions.push(a);
        bonuses.push(scores[a]);
        cells.push(to);
        if to == world.goal() && goal_step.is_none() {
            goal_step = Some(t + 1);
        }
        cur = to;
    }

    let visited: HashSet<Cell> = cells.iter().copied().collect();
    let demo: HashSet<Cell> = demo_cells.iter().copied().collect();
    let n_open = world.open_cells().count();
    Ok(ExplorerTrace {
        demo_coverage: ratio(demo.iter().filter(|c| visited.contains(*c)).count(), demo.len()),
        open_coverage: ratio(visited.len(), n_open),
        cells,
        actions,
        bonuses,
        goal_step,
    })
}
