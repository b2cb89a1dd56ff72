//! Expert-count ablation: one mixture per expert count, trained on the same
//! data with the same seed, compared on training loss and on how sharply the
//! loss separates demonstrated from other states.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::envs::{Cell, GridWorld};
use crate::error::{Error, Result};
use crate::landscape::render_landscape;
use crate::moe::{train_moe, DemoSet, MoEModel, MoeArch, TrainConfig};
use crate::textio::write_file;

pub const ABLATION_HEADER: &str = "experts,hidden,params,final_loss,path_mean_v,off_path_mean_v";

/// Where the on-path and off-path `v = clip(L / l_max, 0, 1)` averages come
/// from.
#[derive(Debug, Clone)]
pub enum AblationProbe<'a> {
    /// Explicit state lists.
    States {
        path: Vec<Vec<f64>>,
        off_path: Vec<Vec<f64>>,
    },
    /// Rendered landscape of a 3-D world, one subdirectory `n<N>` per count.
    Landscape {
        world: &'a GridWorld,
        path_cells: Vec<Cell>,
        out_dir: PathBuf,
        stride: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub experts: usize,
    pub hidden: usize,
    pub params: usize,
    /// Mean loss over the training states after training.
    pub final_loss: f64,
    pub path_mean_v: f64,
    pub off_path_mean_v: f64,
}

#[derive(Debug, Clone)]
pub struct AblationSpec<'a> {
    pub base: MoeArch,
    pub train: TrainConfig,
    pub counts: Vec<usize>,
    /// Resize each count's expert hidden width to the base parameter count.
    pub match_budget: bool,
    pub l_max: f64,
    pub probe: AblationProbe<'a>,
}

fn mean_v(model: &MoEModel, states: &[Vec<f64>], l_max: f64) -> Result<f64> {
    if states.is_empty() {
        return Ok(f64::NAN);
    }
    let mut sum = 0.0;
    for s in states {
        sum += (model.loss(s)? / l_max).clamp(0.0, 1.0);
    }
    Ok(sum / states.len() as f64)
}

fn run_one(demos: &DemoSet, spec: &AblationSpec, experts: usize) -> Result<AblationRow> {
    let d = demos.state_dim;
    let mut arch = MoeArch { experts, ..spec.base };
    if spec.match_budget {
        arch = arch.with_matched_budget(d, spec.base.num_params(d));
    }
    let trained = train_moe(demos, &arch, &spec.train)?;
    let model = trained.model;
    let final_loss = model.mean_loss(demos.states())?;
    let (path_mean_v, off_path_mean_v) = match &spec.probe {
        AblationProbe::States { path, off_path } => {
            (mean_v(&model, path, spec.l_max)?, mean_v(&model, off_path, spec.l_max)?)
        }
        AblationProbe::Landscape {
            world,
            path_cells,
            out_dir,
            stride,
        } => {
            let dir = out_dir.join(format!("n{experts}"));
            render_landscape(&model, world, spec.l_max, &dir, *stride)?.region_means(path_cells)
        }
    };
    Ok(AblationRow {
        experts,
        hidden: arch.hidden,
        params: arch.num_params(d),
        final_loss,
        path_mean_v,
        off_path_mean_v,
    })
}

/// Trains one model per entry of `spec.counts` (in parallel threads, each
/// with the shared seed) and returns rows in the order of `spec.counts`.
pub fn ablate_experts(demos: &DemoSet, spec: &AblationSpec) -> Result<Vec<AblationRow>> {
    if spec.counts.is_empty() {
        return Err(Error::config("ablation.counts", "need at least one expert count"));
    }
    if !(spec.l_max > 0.0 && spec.l_max.is_finite()) {
        return Err(Error::config("l_max", "must be positive"));
    }
    for &n in &spec.counts {
        MoeArch {
            experts: n,
            ..spec.base
        }
        .validate(demos.state_dim)?;
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = spec
            .counts
            .iter()
            .map(|&n| scope.spawn(move || run_one(demos, spec, n)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|p| std::panic::resume_unwind(p)))
            .collect()
    })
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = format!("{ABLATION_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{:?},{:?},{:?}",
            r.experts, r.hidden, r.params, r.final_loss, r.path_mean_v, r.off_path_mean_v
        );
    }
    out
}

pub fn write_ablation(path: &Path, rows: &[AblationRow]) -> Result<()> {
    write_file(path, &ablation_csv(rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{bounding_box, expert_path_2d, uniform_states};

    fn spec(counts: Vec<usize>, epochs: usize) -> (DemoSet, AblationSpec<'static>) {
        let demos = expert_path_2d(30, 1);
        let (lo, hi) = bounding_box(&demos);
        let off = uniform_states(&lo, &hi, 50, 2);
        let spec = AblationSpec {
            base: MoeArch::default(),
            train: TrainConfig {
                epochs,
                seed: 3,
                ..TrainConfig::default()
            },
            counts,
            match_budget: false,
            l_max: 1.0,
            probe: AblationProbe::States {
                path: demos.states().map(<[f64]>::to_vec).collect(),
                off_path: off,
            },
        };
        (demos, spec)
    }

    #[test]
    fn single_count_matches_direct_training() {
        let (demos, s) = spec(vec![1], 50);
        let rows = ablate_experts(&demos, &s).unwrap();
        assert_eq!(rows.len(), 1);
        let direct = train_moe(&demos, &MoeArch { experts: 1, ..s.base }, &s.train).unwrap();
        assert_eq!(rows[0].final_loss, direct.model.mean_loss(demos.states()).unwrap());
    }

    #[test]
    fn rows_follow_count_order_and_repeat() {
        let (demos, s) = spec(vec![3, 1, 2], 20);
        let a = ablate_experts(&demos, &s).unwrap();
        assert_eq!(a.iter().map(|r| r.experts).collect::<Vec<_>>(), vec![3, 1, 2]);
        assert_eq!(ablation_csv(&a), ablation_csv(&ablate_experts(&demos, &s).unwrap()));
    }

    #[test]
    fn matched_budget_keeps_params_close() {
        let (demos, mut s) = spec(vec![1, 2, 5], 1);
        s.match_budget = true;
        let rows = ablate_experts(&demos, &s).unwrap();
        let budget = s.base.num_params(2);
        for r in &rows {
            assert!(r.params >= budget);
            assert!((r.params as f64) < budget as f64 * 1.1, "{r:?}");
        }
    }

    #[test]
    fn empty_counts_rejected() {
        let (demos, s) = spec(vec![], 1);
        assert!(ablate_experts(&demos, &s).is_err());
    }
}
