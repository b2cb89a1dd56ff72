//! Desk-scale environments and expert demonstration generators.

pub mod grid;
pub mod mdp;

pub use grid::{make_gridworld, Cell, GridStep, GridWorld};
pub use mdp::{
    chain_mdp, chain_mdp_variant, rollout, ChainVariant, TabularMDP, Termination, Trajectory, TrajectoryStep,
    CHAIN_LEFT, CHAIN_RIGHT,
};

use crate::error::{Error, Result};
use crate::moe::{subsample_demos, DemoSet};
use crate::rng::SeededRng;

/// State-only demonstration of one shortest start-to-goal path. Ties between
/// equally short paths are broken by `seed`; the path is thinned with the
/// given gap. Only states are recorded.
pub fn generate_expert_demo(world: &GridWorld, gap: usize, seed: u64) -> Result<DemoSet> {
    generate_expert_demos(world, gap, 1, seed)
}

/// `episodes` independent shortest-path demonstrations with episode ids
/// `0..episodes`, each drawn with its own derived seed.
pub fn generate_expert_demos(world: &GridWorld, gap: usize, episodes: usize, seed: u64) -> Result<DemoSet> {
    let mut full = DemoSet::new(world.ndim(), "bfs shortest path");
    for ep in 0..episodes as u64 {
        let mut rng = SeededRng::derive(seed, ep);
        let path = world
            .shortest_path(world.start(), world.goal(), Some(&mut rng))
            .ok_or(Error::Generation { attempts: 1 })?;
        for (i, c) in path.into_iter().enumerate() {
            full.push(ep, i as u64, world.state_of(c))?;
        }
    }
    Ok(subsample_demos(&full, gap))
}

/// Cells of a connected 6-neighbour polyline through an open 3-D grid. The
/// path spans the longest axis end to end, bending through two seeded
/// interior waypoints.
pub fn expert_path_cells_3d(dims: &[usize], seed: u64) -> Result<Vec<Cell>> {
    if dims.len() != 3 || dims.iter().any(|&d| d < 2) {
        return Err(Error::config(
            "dims",
            "expert path needs three axes of at least 2 cells",
        ));
    }
    let mut rng = SeededRng::new(seed);
    let long = (0..3).max_by_key(|&k| (dims[k], std::cmp::Reverse(k))).unwrap_or(0);
    let mut along: Vec<usize> = (0..2).map(|_| rng.below(dims[long])).collect();
    along.sort_unstable();
    let mut waypoints = Vec::with_capacity(4);
    for (i, a) in [0].into_iter().chain(along).chain([dims[long] - 1]).enumerate() {
        let mut c = [0; 3];
        for k in 0..3 {
            c[k] = if k == long { a } else { rng.below(dims[k]) };
        }
        // Keep the interior waypoints strictly inside when the grid allows.
        if i == 1 || i == 2 {
            for k in (0..3).filter(|&k| k != long && dims[k] > 2) {
                c[k] = c[k].clamp(1, dims[k] - 2);
            }
        }
        waypoints.push(c);
    }
    let mut cells = vec![waypoints[0]];
    for target in &waypoints[1..] {
        let mut cur = *cells.last().expect("non-empty");
        while cur != *target {
            // Step along the axis with the largest remaining offset.
            let k = (0..3)
                .max_by_key(|&k| (cur[k].abs_diff(target[k]), std::cmp::Reverse(k)))
                .expect("three axes");
            if cur[k] < target[k] {
                cur[k] += 1;
            } else {
                cur[k] -= 1;
            }
            cells.push(cur);
        }
    }
    Ok(cells)
}

/// [`expert_path_cells_3d`] encoded as normalized 3-vectors in one episode.
pub fn expert_path_3d(dims: &[usize], seed: u64) -> Result<DemoSet> {
    let cells = expert_path_cells_3d(dims, seed)?;
    let mut demos = DemoSet::new(3, "3d polyline path");
    for (i, c) in cells.iter().enumerate() {
        let s = (0..3).map(|k| c[k] as f64 / (dims[k] - 1) as f64).collect();
        demos.push(0, i as u64, s)?;
    }
    Ok(demos)
}

/// Tabular view of a gridworld: one state per cell (walls included but
/// unreachable), actions as in [`GridWorld::successor`], the goal terminal
/// with extrinsic reward 1, and the given intrinsic reward per cell.
pub fn grid_to_mdp(world: &GridWorld, r_int: Vec<f64>, gamma: f64) -> Result<TabularMDP> {
    let n = world.n_cells();
    let next = (0..n)
        .map(|i| {
            let c = world.cell_at(i);
            (0..world.n_actions())
                .map(|a| {
                    if world.is_wall(c) {
                        Ok(i)
                    } else {
                        world.successor(c, a).map(|nc| world.index(nc))
                    }
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let goal = world.index(world.goal());
    let mut r_env = vec![0.0; n];
    r_env[goal] = 1.0;
    let mut terminal = vec![false; n];
    terminal[goal] = true;
    TabularMDP::deterministic(next, r_env, r_int, terminal, gamma, world.index(world.start()))
}
