//! Axis-aligned gridworlds in two or three dimensions with random walls.
//!
//! Actions come in pairs per axis: action `2k` moves `+1` along axis `k`,
//! action `2k + 1` moves `-1`. Moves into a wall or off the grid leave the
//! agent where it is.
//!
//! World file:
//!
//! ```text
//! moe-guide-world v1
//! dims 25 25
//! seed 7
//! wall_density 0.2
//! max_steps 2000
//! start 0 0
//! goal 24 24
//! walls 2
//! 3 4
//! 10 0
//! ```

use std::collections::VecDeque;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::textio::{fmt_f64, read_file, write_file, Lines};

pub const WORLD_HEADER: &str = "moe-guide-world v1";

/// Grid coordinates; the third axis is 0 in 2-D worlds.
pub type Cell = [usize; 3];

const MAX_ATTEMPTS: usize = 200;
pub const DEFAULT_MAX_STEPS: usize = 2000;

#[derive(Debug, Clone, PartialEq)]
pub struct GridWorld {
    dims: Vec<usize>,
    blocked: Vec<bool>,
    start: Cell,
    goal: Cell,
    max_steps: usize,
    wall_density: f64,
    seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridStep {
    pub next: Cell,
    pub r_env: f64,
    pub done: bool,
}

/// Random world with the start at the origin corner and the goal at the
/// opposite corner. Walls are resampled until the goal is reachable.
pub fn make_gridworld(dims: &[usize], wall_density: f64, seed: u64) -> Result<GridWorld> {
    if !(dims.len() == 2 || dims.len() == 3) {
        return Err(Error::config("dims", "worlds are 2-D or 3-D"));
    }
    if let Some(k) = dims.iter().position(|&d| d < 2) {
        return Err(Error::config(format!("dims[{k}]"), "every axis needs at least 2 cells"));
    }
    if !(0.0..1.0).contains(&wall_density) {
        return Err(Error::config("wall_density", "must lie in [0, 1)"));
    }
    let mut world = GridWorld {
        dims: dims.to_vec(),
        blocked: vec![false; dims.iter().product()],
        start: [0; 3],
        goal: [0; 3],
        max_steps: DEFAULT_MAX_STEPS,
        wall_density,
        seed,
    };
    for (k, &d) in dims.iter().enumerate() {
        world.goal[k] = d - 1;
    }
    let start_idx = world.index(world.start);
    let goal_idx = world.index(world.goal);
    let mut rng = SeededRng::new(seed);
    for _ in 0..MAX_ATTEMPTS {
        for (i, b) in world.blocked.iter_mut().enumerate() {
            *b = i != start_idx && i != goal_idx && rng.uniform() < wall_density;
        }
        if world.reachable_from(world.start)[goal_idx] {
            return Ok(world);
        }
    }
    Err(Error::Generation { attempts: MAX_ATTEMPTS })
}

impl GridWorld {
    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps.max(1);
        self
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn start(&self) -> Cell {
        self.start
    }

    pub fn goal(&self) -> Cell {
        self.goal
    }

    pub fn max_steps(&self) -> usize {
        self.max_steps
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn wall_density(&self) -> f64 {
        self.wall_density
    }

    pub fn n_cells(&self) -> usize {
        self.blocked.len()
    }

    pub fn n_actions(&self) -> usize {
        2 * self.ndim()
    }

    pub fn index(&self, c: Cell) -> usize {
        let d = &self.dims;
        let z = if d.len() == 3 { c[2] } else { 0 };
        c[0] + d[0] * (c[1] + d[1] * z)
    }

    pub fn cell_at(&self, mut i: usize) -> Cell {
        let mut c = [0; 3];
        for (k, &d) in self.dims.iter().enumerate() {
            c[k] = i % d;
            i /= d;
        }
        c
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        (0..3).all(|k| {
            if k < self.ndim() {
                c[k] < self.dims[k]
            } else {
                c[k] == 0
            }
        })
    }

    pub fn is_wall(&self, c: Cell) -> bool {
        self.blocked[self.index(c)]
    }

    pub fn is_open(&self, c: Cell) -> bool {
        self.in_bounds(c) && !self.is_wall(c)
    }

    pub fn walls(&self) -> impl Iterator<Item = Cell> + '_ {
        self.blocked
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| self.cell_at(i))
    }

    pub fn open_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.blocked
            .iter()
            .enumerate()
            .filter(|(_, &b)| !b)
            .map(|(i, _)| self.cell_at(i))
    }

    /// Where `action` leads from `c`, ignoring walls; `None` if off-grid.
    fn shifted(&self, c: Cell, action: usize) -> Option<Cell> {
        let axis = action / 2;
        let mut next = c;
        if action.is_multiple_of(2) {
            next[axis] += 1;
            (next[axis] < self.dims[axis]).then_some(next)
        } else {
            next[axis] = c[axis].checked_sub(1)?;
            Some(next)
        }
    }

    /// Successor cell for `action`; blocked moves return `c`.
    pub fn successor(&self, c: Cell, action: usize) -> Result<Cell> {
        if action >= self.n_actions() {
            return Err(Error::InvalidAction {
                action,
                available: self.n_actions(),
            });
        }
        Ok(match self.shifted(c, action) {
            Some(n) if !self.is_wall(n) => n,
            _ => c,
        })
    }

    /// One environment step. `steps_taken` counts steps before this one; the
    /// episode ends on reaching the goal or after `max_steps` steps.
    pub fn step(&self, c: Cell, action: usize, steps_taken: usize) -> Result<GridStep> {
        let next = self.successor(c, action)?;
        let at_goal = next == self.goal;
        Ok(GridStep {
            next,
            r_env: if at_goal { 1.0 } else { 0.0 },
            done: at_goal || steps_taken + 1 >= self.max_steps,
        })
    }

    /// Cell coordinates scaled to `[0, 1]` per axis.
    pub fn state_of(&self, c: Cell) -> Vec<f64> {
        self.dims
            .iter()
            .enumerate()
            .map(|(k, &d)| c[k] as f64 / (d - 1) as f64)
            .collect()
    }

    /// Inverse of [`GridWorld::state_of`], rounding to the nearest cell.
    pub fn cell_of_state(&self, s: &[f64]) -> Option<Cell> {
        if s.len() != self.ndim() {
            return None;
        }
        let mut c = [0; 3];
        for (k, &d) in self.dims.iter().enumerate() {
            let v = (s[k] * (d - 1) as f64).round();
            if !(0.0..d as f64).contains(&v) {
                return None;
            }
            c[k] = v as usize;
        }
        Some(c)
    }

    /// Flood fill over open cells from `from`, indexed by [`GridWorld::index`].
    pub fn reachable_from(&self, from: Cell) -> Vec<bool> {
        let mut seen = vec![false; self.n_cells()];
        if !self.is_open(from) {
            return seen;
        }
        let mut queue = VecDeque::from([from]);
        seen[self.index(from)] = true;
        while let Some(c) = queue.pop_front() {
            for a in 0..self.n_actions() {
                if let Some(n) = self.shifted(c, a) {
                    let i = self.index(n);
                    if !self.blocked[i] && !seen[i] {
                        seen[i] = true;
                        queue.push_back(n);
                    }
                }
            }
        }
        seen
    }

    /// Breadth-first shortest path from `from` to `to`, inclusive. With an
    /// rng, neighbour expansion order is shuffled so different seeds pick
    /// different shortest paths.
    pub fn shortest_path(&self, from: Cell, to: Cell, mut rng: Option<&mut SeededRng>) -> Option<Vec<Cell>> {
        if !self.is_open(from) || !self.is_open(to) {
            return None;
        }
        let mut parent: Vec<Option<usize>> = vec![None; self.n_cells()];
        let mut seen = vec![false; self.n_cells()];
        let mut queue = VecDeque::from([from]);
        seen[self.index(from)] = true;
        let mut actions: Vec<usize> = (0..self.n_actions()).collect();
        while let Some(c) = queue.pop_front() {
            if c == to {
                break;
            }
            if let Some(r) = rng.as_deref_mut() {
                r.shuffle(&mut actions);
            }
            for &a in &actions {
                if let Some(n) = self.shifted(c, a) {
                    let i = self.index(n);
                    if !self.blocked[i] && !seen[i] {
                        seen[i] = true;
                        parent[i] = Some(self.index(c));
                        queue.push_back(n);
                    }
                }
            }
        }
        if !seen[self.index(to)] {
            return None;
        }
        let mut path = vec![to];
        let mut cur = self.index(to);
        while let Some(p) = parent[cur] {
            path.push(self.cell_at(p));
            cur = p;
        }
        path.reverse();
        Some(path)
    }

    pub fn to_text(&self) -> String {
        let coords = |c: Cell| {
            c[..self.ndim()]
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(" ")
        };
        let walls: Vec<Cell> = self.walls().collect();
        let mut out = format!("{WORLD_HEADER}\n");
        out.push_str(&format!(
            "dims {}\n",
            self.dims.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
        ));
        out.push_str(&format!("seed {}\n", self.seed));
        out.push_str(&format!("wall_density {}\n", fmt_f64(self.wall_density)));
        out.push_str(&format!("max_steps {}\n", self.max_steps));
        out.push_str(&format!("start {}\n", coords(self.start)));
        out.push_str(&format!("goal {}\n", coords(self.goal)));
        out.push_str(&format!("walls {}\n", walls.len()));
        for w in walls {
            out.push_str(&coords(w));
            out.push('\n');
        }
        out
    }

    pub fn from_text(path: &Path, text: &str) -> Result<Self> {
        let mut lines = Lines::new(path, text);
        if lines.next_line()?.trim() != WORLD_HEADER {
            return Err(lines.err(format!("expected header `{WORLD_HEADER}`")));
        }
        let dims_t = lines.expect("dims")?;
        let dims: Vec<usize> = lines.parse_all(&dims_t, "dimension")?;
        if !(dims.len() == 2 || dims.len() == 3) || dims.iter().any(|&d| d < 2) {
            return Err(lines.err("dims must list 2 or 3 sizes, each at least 2"));
        }
        let seed = lines.single("seed")?;
        let wall_density: f64 = lines.single("wall_density")?;
        let max_steps: usize = lines.single("max_steps")?;
        let n = dims.len();
        let read_cell = |lines: &Lines<'_>, toks: &[&str]| -> Result<Cell> {
            if toks.len() != n {
                return Err(lines.err(format!("expected {n} coordinates")));
            }
            let mut c = [0; 3];
            for (k, t) in toks.iter().enumerate() {
                c[k] = lines.parse(t, "coordinate")?;
                if c[k] >= dims[k] {
                    return Err(lines.err(format!("coordinate {} out of bounds", c[k])));
                }
            }
            Ok(c)
        };
        let t = lines.expect("start")?;
        let start = read_cell(&lines, &t)?;
        let t = lines.expect("goal")?;
        let goal = read_cell(&lines, &t)?;
        let n_walls: usize = lines.single("walls")?;
        let mut world = GridWorld {
            blocked: vec![false; dims.iter().product()],
            dims: dims.clone(),
            start,
            goal,
            max_steps,
            wall_density,
            seed,
        };
        for _ in 0..n_walls {
            let line = lines.next_line()?;
            let toks: Vec<&str> = line.split_whitespace().collect();
            let c = read_cell(&lines, &toks)?;
            let i = world.index(c);
            world.blocked[i] = true;
        }
        if world.is_wall(start) || world.is_wall(goal) {
            return Err(lines.err("start and goal must be open cells"));
        }
        if !world.reachable_from(start)[world.index(goal)] {
            return Err(lines.err("goal is not reachable from start"));
        }
        Ok(world)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(path, &read_file(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent connectivity oracle: iterative depth-first search over
    /// raw coordinates, not sharing code with `reachable_from`.
    fn dfs_connected(w: &GridWorld) -> bool {
        let (sx, sy) = (w.start()[0] as i64, w.start()[1] as i64);
        let (gx, gy) = (w.goal()[0] as i64, w.goal()[1] as i64);
        let (wd, ht) = (w.dims()[0] as i64, w.dims()[1] as i64);
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![(sx, sy)];
        while let Some((x, y)) = stack.pop() {
            if !seen.insert((x, y)) {
                continue;
            }
            if (x, y) == (gx, gy) {
                return true;
            }
            for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                let (nx, ny) = (x + dx, y + dy);
                if nx >= 0 && ny >= 0 && nx < wd && ny < ht && !w.is_wall([nx as usize, ny as usize, 0]) {
                    stack.push((nx, ny));
                }
            }
        }
        false
    }

    #[test]
    fn zero_density_is_open() {
        let w = make_gridworld(&[6, 4], 0.0, 1).unwrap();
        assert_eq!(w.walls().count(), 0);
        assert_eq!(w.open_cells().count(), 24);
    }

    #[test]
    fn same_seed_same_walls() {
        let a = make_gridworld(&[20, 20], 0.25, 42).unwrap();
        let b = make_gridworld(&[20, 20], 0.25, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, make_gridworld(&[20, 20], 0.25, 43).unwrap());
    }

    #[test]
    fn generated_worlds_are_connected() {
        for seed in 0..30 {
            let w = make_gridworld(&[20, 20], 0.25, seed).unwrap();
            assert!(dfs_connected(&w), "seed {seed}");
            assert!(!w.is_wall(w.start()) && !w.is_wall(w.goal()));
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(make_gridworld(&[1, 5], 0.1, 0).is_err());
        assert!(make_gridworld(&[5, 5], 1.0, 0).is_err());
        assert!(make_gridworld(&[5], 0.0, 0).is_err());
    }

    #[test]
    fn impossible_density_reports_generation_error() {
        let err = make_gridworld(&[30, 30], 0.95, 0).unwrap_err();
        assert!(matches!(err, Error::Generation { .. }));
    }

    #[test]
    fn boundary_move_is_noop() {
        let w = make_gridworld(&[4, 4], 0.0, 0).unwrap();
        let s = w.step([0, 0, 0], 1, 0).unwrap();
        assert_eq!(s.next, [0, 0, 0]);
        assert_eq!(s.r_env, 0.0);
        assert!(!s.done);
    }

    #[test]
    fn goal_step_rewards_and_ends() {
        let w = make_gridworld(&[4, 4], 0.0, 0).unwrap();
        let s = w.step([2, 3, 0], 0, 5).unwrap();
        assert_eq!(s.next, w.goal());
        assert_eq!((s.r_env, s.done), (1.0, true));
        let s = w.step([1, 1, 0], 0, 5).unwrap();
        assert_eq!((s.r_env, s.done), (0.0, false));
    }

    #[test]
    fn max_steps_ends_episode() {
        let w = make_gridworld(&[4, 4], 0.0, 0).unwrap().with_max_steps(3);
        assert!(!w.step([1, 1, 0], 0, 1).unwrap().done);
        assert!(w.step([1, 1, 0], 0, 2).unwrap().done);
    }

    #[test]
    fn invalid_action_rejected() {
        let w = make_gridworld(&[4, 4], 0.0, 0).unwrap();
        assert!(matches!(w.step([0, 0, 0], 4, 0), Err(Error::InvalidAction { .. })));
    }

    #[test]
    fn wall_blocks_move() {
        let mut w = make_gridworld(&[4, 4], 0.0, 0).unwrap();
        let i = w.index([1, 0, 0]);
        w.blocked[i] = true;
        assert_eq!(w.successor([0, 0, 0], 0).unwrap(), [0, 0, 0]);
    }

    #[test]
    fn right_then_left_returns() {
        let w = make_gridworld(&[10, 10], 0.2, 5).unwrap();
        for c in w.open_cells() {
            let r = w.successor(c, 0).unwrap();
            if r != c {
                assert_eq!(w.successor(r, 1).unwrap(), c);
            }
        }
    }

    #[test]
    fn three_d_has_six_actions() {
        let w = make_gridworld(&[3, 4, 5], 0.0, 0).unwrap();
        assert_eq!(w.n_actions(), 6);
        assert_eq!(w.successor([0, 0, 0], 4).unwrap(), [0, 0, 1]);
        assert_eq!(w.cell_at(w.index([2, 3, 4])), [2, 3, 4]);
    }

    #[test]
    fn state_encoding_round_trips() {
        let w = make_gridworld(&[5, 9], 0.0, 0).unwrap();
        for c in w.open_cells() {
            let s = w.state_of(c);
            assert!(s.iter().all(|v| (0.0..=1.0).contains(v)));
            assert_eq!(w.cell_of_state(&s), Some(c));
        }
    }

    #[test]
    fn shortest_path_is_valid() {
        let w = make_gridworld(&[15, 15], 0.25, 3).unwrap();
        let mut rng = SeededRng::new(1);
        let p = w.shortest_path(w.start(), w.goal(), Some(&mut rng)).unwrap();
        let plain = w.shortest_path(w.start(), w.goal(), None).unwrap();
        assert_eq!(p.len(), plain.len());
        assert_eq!(p[0], w.start());
        assert_eq!(*p.last().unwrap(), w.goal());
        for pair in p.windows(2) {
            let d: usize = (0..3).map(|k| pair[0][k].abs_diff(pair[1][k])).sum();
            assert_eq!(d, 1);
            assert!(w.is_open(pair[1]));
        }
    }

    #[test]
    fn world_file_round_trip() {
        for dims in [vec![12, 9], vec![4, 5, 6]] {
            let w = make_gridworld(&dims, 0.2, 11).unwrap().with_max_steps(321);
            let text = w.to_text();
            let back = GridWorld::from_text(Path::new("w"), &text).unwrap();
            assert_eq!(back, w);
            assert_eq!(back.to_text(), text);
        }
    }

    #[test]
    fn world_file_rejects_wall_on_start() {
        let text =
            "moe-guide-world v1\ndims 3 3\nseed 0\nwall_density 0.0\nmax_steps 10\nstart 0 0\ngoal 2 2\nwalls 1\n0 0\n";
        assert!(GridWorld::from_text(Path::new("w"), text).is_err());
    }
}
