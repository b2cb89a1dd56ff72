//! CSV metrics shared by the Q-learning and explorer runs.
//!
//! Columns, in order: `step` (environment steps so far), `episode`,
//! `r_env_sum` and `r_int_sum` (extrinsic reward and weighted bonus
//! accumulated within the episode), `beta` (bonus weight at that step) and
//! `coverage` (fraction of the tracked states visited within the episode).

use std::fmt::Write as _;
use std::path::Path;

use crate::agents::{EpisodeStats, ExplorerTrace};
use crate::envs::{Cell, GridWorld};
use crate::error::Result;
use crate::shaping::DecaySchedule;
use crate::textio::write_file;

pub const METRICS_HEADER: &str = "step,episode,r_env_sum,r_int_sum,beta,coverage";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub step: u64,
    pub episode: usize,
    pub r_env_sum: f64,
    pub r_int_sum: f64,
    pub beta: f64,
    pub coverage: f64,
}

impl From<&EpisodeStats> for MetricsRow {
    fn from(e: &EpisodeStats) -> Self {
        Self {
            step: e.step,
            episode: e.episode,
            r_env_sum: e.r_env_sum,
            r_int_sum: e.r_int_sum,
            beta: e.beta,
            coverage: e.coverage,
        }
    }
}

/// One row per explorer step; coverage is demonstration-cell coverage and
/// extrinsic reward is the goal reward collected on entry.
pub fn explorer_rows(
    trace: &ExplorerTrace,
    world: &GridWorld,
    demo_cells: &[Cell],
    schedule: &DecaySchedule,
) -> Vec<MetricsRow> {
    let curve = trace.coverage_curve(world, demo_cells);
    let (mut r_env, mut r_int) = (0.0, 0.0);
    (0..trace.len())
        .map(|t| {
            if trace.cells[t + 1] == world.goal() {
                r_env += 1.0;
            }
            r_int += trace.bonuses[t];
            MetricsRow {
                step: t as u64 + 1,
                episode: 0,
                r_env_sum: r_env,
                r_int_sum: r_int,
                beta: schedule.beta_at(t as u64),
                coverage: curve[t + 1].0,
            }
        })
        .collect()
}

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = format!("{METRICS_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:?},{:?},{:?},{:?}",
            r.step, r.episode, r.r_env_sum, r.r_int_sum, r.beta, r.coverage
        );
    }
    out
}

/// Writes the rows (header only when empty), replacing any existing file.
pub fn emit_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    write_file(path, &metrics_csv(rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{greedy_intrinsic_explore, q_learn, ConstantBonus, QLearnConfig};
    use crate::envs::{chain_mdp, make_gridworld};

    #[test]
    fn empty_is_header_only() {
        assert_eq!(metrics_csv(&[]), format!("{METRICS_HEADER}\n"));
    }

    #[test]
    fn one_row_per_episode() {
        let cfg = QLearnConfig {
            episodes: 37,
            ..QLearnConfig::default()
        };
        let out = q_learn(&chain_mdp(), &cfg).unwrap();
        let rows: Vec<MetricsRow> = out.curve.iter().map(MetricsRow::from).collect();
        assert_eq!(metrics_csv(&rows).lines().count(), 38);
    }

    #[test]
    fn explorer_rows_track_trace() {
        let w = make_gridworld(&[6, 6], 0.0, 0).unwrap();
        let tr = greedy_intrinsic_explore(&w, &mut ConstantBonus(0.5), &[w.goal()], 200, 1).unwrap();
        let rows = explorer_rows(&tr, &w, &[w.goal()], &DecaySchedule::constant(1.0));
        assert_eq!(rows.len(), 200);
        assert!((rows[199].r_int_sum - 100.0).abs() < 1e-9);
        assert_eq!(rows[199].coverage, tr.demo_coverage);
    }
}
