//! Command-line driver. Every subcommand reads its inputs from, and writes
//! its outputs to, one output directory:
//!
//! | subcommand     | reads                          | writes                                  |
//! |----------------|--------------------------------|-----------------------------------------|
//! | gen-world      |                                | `world.txt`                             |
//! | gen-demos      | `world.txt`                    | `demos.txt`                             |
//! | train-moe      | `demos.txt`                    | `moe.txt`, `train_loss.csv`             |
//! | landscape      | `moe.txt`, `world.txt`         | `landscape/slice_*.ppm`, `landscape/losses.csv` |
//! | explore        | `world.txt`, `demos.txt`, `moe.txt` | `explore_trace.csv`, `explore_metrics.csv` |
//! | qlearn         | chain, or `world.txt` + `moe.txt` | `qtable.txt`, `qlearn_metrics.csv`   |
//! | verify-mdp     | chain, or `world.txt` + `moe.txt` | `verify.txt`                         |
//! | ablate-experts | `demos.txt` (+ `world.txt` in 3-D) | `ablation/ablation.csv`, `ablation/n*/` |

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::ablation::{ablate_experts, write_ablation, AblationProbe, AblationSpec};
use crate::agents::{
    greedy_intrinsic_explore, q_learn, verify_invariance, BaselineBonus, BaselineConfig, BonusSource, MoeBonus,
};
use crate::config::{AgentEnv, AgentKind, DemoSource, ExperimentConfig};
use crate::envs::{
    chain_mdp_variant, expert_path_3d, generate_expert_demos, grid_to_mdp, make_gridworld, Cell, GridWorld, TabularMDP,
};
use crate::error::{Error, Result};
use crate::landscape::render_landscape;
use crate::metrics::{emit_metrics, explorer_rows, MetricsRow};
use crate::moe::{subsample_demos, train_moe, DemoSet, MoEModel};
use crate::shaping::map_loss;
use crate::textio::{join_f64, write_file};

pub const WORLD_FILE: &str = "world.txt";
pub const DEMOS_FILE: &str = "demos.txt";
pub const MODEL_FILE: &str = "moe.txt";

#[derive(Debug, Parser)]
#[command(
    name = "moe-guide",
    version,
    about = "Mixture-of-autoencoder demonstration bonus: data generation, training and checks",
    arg_required_else_help = true
)]
struct Cli {
    /// Experiment configuration (TOML); built-in defaults when omitted.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory, overriding `outputs.dir` and $MOE_GUIDE_OUT.
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Default)]
struct Inputs {
    /// World file to read instead of `<out>/world.txt`.
    #[arg(long)]
    world: Option<PathBuf>,
    /// Demonstration file to read instead of `<out>/demos.txt`.
    #[arg(long)]
    demos: Option<PathBuf>,
    /// Model file to read instead of `<out>/moe.txt`.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a random connected gridworld.
    GenWorld,
    /// Record state-only expert demonstrations.
    GenDemos(Inputs),
    /// Train the mixture of autoencoders on the demonstrations.
    TrainMoe(Inputs),
    /// Render loss heatmaps over the depth slices of a 3-D world.
    Landscape(Inputs),
    /// Run the greedy intrinsic explorer.
    Explore {
        #[command(flatten)]
        inputs: Inputs,
        /// Bonus source, overriding `agent.kind` (moe, random, count, rnd, icm).
        #[arg(long)]
        kind: Option<String>,
    },
    /// Tabular Q-learning with the decaying bonus.
    Qlearn(Inputs),
    /// Compare greedy policy sets with and without the bonus.
    VerifyMdp(Inputs),
    /// Train one mixture per expert count and compare them.
    AblateExperts {
        #[command(flatten)]
        inputs: Inputs,
        /// Comma-separated expert counts, overriding `ablation.counts`.
        #[arg(long, value_delimiter = ',')]
        counts: Option<Vec<usize>>,
    },
}

struct Ctx {
    cfg: ExperimentConfig,
    out: PathBuf,
}

impl Ctx {
    fn input(&self, explicit: &Option<PathBuf>, name: &str) -> PathBuf {
        explicit.clone().unwrap_or_else(|| self.out.join(name))
    }

    fn world(&self, inputs: &Inputs) -> Result<GridWorld> {
        GridWorld::load(&self.input(&inputs.world, WORLD_FILE))
    }

    fn demos(&self, inputs: &Inputs) -> Result<DemoSet> {
        DemoSet::load(&self.input(&inputs.demos, DEMOS_FILE))
    }

    fn model(&self, inputs: &Inputs) -> Result<MoEModel> {
        MoEModel::load(&self.input(&inputs.model, MODEL_FILE))
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code. Diagnostics go to stderr.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
        }
    };
    match run(cli) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn run(cli: Cli) -> Result<Vec<String>> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = cli.out.clone().unwrap_or_else(|| cfg.output_dir());
    let ctx = Ctx { cfg, out };
    match &cli.command {
        Command::GenWorld => gen_world(&ctx),
        Command::GenDemos(i) => gen_demos(&ctx, i),
        Command::TrainMoe(i) => train(&ctx, i),
        Command::Landscape(i) => landscape(&ctx, i),
        Command::Explore { inputs, kind } => explore(&ctx, inputs, kind.as_deref()),
        Command::Qlearn(i) => qlearn(&ctx, i),
        Command::VerifyMdp(i) => verify(&ctx, i),
        Command::AblateExperts { inputs, counts } => ablate(&ctx, inputs, counts.clone()),
    }
}

fn wrote(path: &Path) -> String {
    format!("wrote {}", path.display())
}

fn gen_world(ctx: &Ctx) -> Result<Vec<String>> {
    let w = &ctx.cfg.world;
    let world = make_gridworld(&w.dims, w.wall_density, ctx.cfg.seed)?.with_max_steps(w.max_steps);
    let path = ctx.out.join(WORLD_FILE);
    world.save(&path)?;
    Ok(vec![
        format!(
            "world {:?} walls={} open={}",
            world.dims(),
            world.walls().count(),
            world.open_cells().count()
        ),
        wrote(&path),
    ])
}

fn gen_demos(ctx: &Ctx, inputs: &Inputs) -> Result<Vec<String>> {
    let d = &ctx.cfg.demos;
    let demos = match d.source {
        DemoSource::ShortestPath => generate_expert_demos(&ctx.world(inputs)?, d.gap, d.episodes, ctx.cfg.seed)?,
        DemoSource::Polyline => subsample_demos(&expert_path_3d(&ctx.cfg.world.dims, ctx.cfg.seed)?, d.gap),
    };
    let path = ctx.out.join(DEMOS_FILE);
    demos.save(&path)?;
    Ok(vec![
        format!("demos states={} gap={}", demos.len(), demos.gap),
        wrote(&path),
    ])
}

fn train(ctx: &Ctx, inputs: &Inputs) -> Result<Vec<String>> {
    let demos = ctx.demos(inputs)?;
    let m = &ctx.cfg.moe;
    let trained = train_moe(&demos, &m.arch(), &m.train(ctx.cfg.seed))?;
    let model_path = ctx.out.join(MODEL_FILE);
    trained.model.save(&model_path)?;
    let mut csv = String::from("epoch,loss\n");
    for (i, l) in trained.history.iter().enumerate() {
        let _ = writeln!(csv, "{},{l:?}", i + 1);
    }
    let loss_path = ctx.out.join("train_loss.csv");
    write_file(&loss_path, &csv)?;
    Ok(vec![
        format!(
            "trained experts={} params={} final_loss={:?}",
            trained.model.num_experts(),
            trained.model.num_params(),
            trained.history.last().copied().unwrap_or(f64::NAN)
        ),
        wrote(&model_path),
        wrote(&loss_path),
    ])
}

fn landscape(ctx: &Ctx, inputs: &Inputs) -> Result<Vec<String>> {
    let model = ctx.model(inputs)?;
    let world = ctx.world(inputs)?;
    let dir = ctx.out.join("landscape");
    let l = &ctx.cfg.landscape;
    let scape = render_landscape(&model, &world, l.l_max, &dir, l.stride)?;
    let mut lines: Vec<String> = scape.images.iter().map(|p| wrote(p)).collect();
    lines.push(wrote(&scape.csv));
    Ok(lines)
}

fn demo_cells(world: &GridWorld, demos: &DemoSet) -> Result<Vec<Cell>> {
    demos
        .states()
        .map(|s| {
            world
                .cell_of_state(s)
                .ok_or_else(|| Error::config("demos", "demonstration state lies outside the world"))
        })
        .collect()
}

fn explore(ctx: &Ctx, inputs: &Inputs, kind: Option<&str>) -> Result<Vec<String>> {
    let kind = match kind {
        None => ctx.cfg.agent.kind,
        Some(name) => toml::Value::String(name.to_string())
            .try_into::<AgentKind>()
            .map_err(|_| Error::config("kind", format!("unknown bonus source `{name}`")))?,
    };
    let world = ctx.world(inputs)?;
    let cells = demo_cells(&world, &ctx.demos(inputs)?)?;
    let seed = ctx.cfg.seed;
    let schedule = ctx.cfg.decay.schedule();
    let steps = ctx.cfg.agent.steps;
    let model;
    let mut source: Box<dyn BonusSource + '_> = match kind.baseline() {
        None => {
            model = ctx.model(inputs)?;
            Box::new(MoeBonus::new(&model, ctx.cfg.mapping, schedule)?)
        }
        Some(b) => Box::new(BaselineBonus::new(b, BaselineConfig::for_grid(world.dims(), seed))?),
    };
    let trace = greedy_intrinsic_explore(&world, source.as_mut(), &cells, steps, seed)?;

    let mut csv = String::from("step,x,y,z,action,bonus\n");
    for (t, (a, b)) in trace.actions.iter().zip(&trace.bonuses).enumerate() {
        let c = trace.cells[t + 1];
        let _ = writeln!(csv, "{},{},{},{},{a},{b:?}", t + 1, c[0], c[1], c[2]);
    }
    let trace_path = ctx.out.join("explore_trace.csv");
    write_file(&trace_path, &csv)?;
    let metrics_path = ctx.out.join("explore_metrics.csv");
    emit_metrics(&metrics_path, &explorer_rows(&trace, &world, &cells, &schedule))?;
    Ok(vec![
        format!(
            "explore kind={kind:?} steps={} demo_coverage={:?} open_coverage={:?}",
            trace.len(),
            trace.demo_coverage,
            trace.open_coverage
        ),
        wrote(&trace_path),
        wrote(&metrics_path),
    ])
}

/// Chain MDP, or the world's MDP with mapped model losses as the bonus.
fn agent_mdp(ctx: &Ctx, inputs: &Inputs) -> Result<(TabularMDP, &'static str)> {
    let gamma = ctx.cfg.agent.gamma;
    match ctx.cfg.agent.env {
        AgentEnv::Chain => Ok((
            chain_mdp_variant(ctx.cfg.agent.chain_rewards.into()).with_gamma(gamma),
            "chain",
        )),
        AgentEnv::Grid => {
            let world = ctx.world(inputs)?;
            let r_int = if ctx.cfg.agent.kind == AgentKind::Moe {
                let model = ctx.model(inputs)?;
                (0..world.n_cells())
                    .map(|i| {
                        let c = world.cell_at(i);
                        if world.is_wall(c) {
                            Ok(0.0)
                        } else {
                            map_loss(model.loss(&world.state_of(c))?, &ctx.cfg.mapping)
                        }
                    })
                    .collect::<Result<Vec<_>>>()?
            } else {
                vec![0.0; world.n_cells()]
            };
            Ok((grid_to_mdp(&world, r_int, gamma)?, "grid"))
        }
    }
}

fn qlearn(ctx: &Ctx, inputs: &Inputs) -> Result<Vec<String>> {
    let (mdp, name) = agent_mdp(ctx, inputs)?;
    let out = q_learn(&mdp, &ctx.cfg.q_config())?;
    let table_path = ctx.out.join("qtable.txt");
    out.table.save(&table_path)?;
    let rows: Vec<MetricsRow> = out.curve.iter().map(MetricsRow::from).collect();
    let metrics_path = ctx.out.join("qlearn_metrics.csv");
    emit_metrics(&metrics_path, &rows)?;
    Ok(vec![
        format!("qlearn mdp={name} episodes={}", rows.len()),
        wrote(&table_path),
        wrote(&metrics_path),
    ])
}

fn verify(ctx: &Ctx, inputs: &Inputs) -> Result<Vec<String>> {
    let (mdp, name) = agent_mdp(ctx, inputs)?;
    let a = &ctx.cfg.agent;
    let rep = verify_invariance(&mdp, &mdp.r_int, a.verify_beta, a.gamma, a.tol)?;
    let sets = |g: &[usize]| {
        if g.is_empty() {
            "-".to_string()
        } else {
            g.iter().map(usize::to_string).collect::<Vec<_>>().join("|")
        }
    };
    let mut text = format!(
        "moe-guide-verify v1\nmdp {name} states={} actions={} beta={:?} gamma={:?}\npolicies_equal {}\ndiff_states {}\nmax_gap {:?}\nstate v_env v_total gap env_greedy total_greedy\n",
        mdp.n_states,
        mdp.n_actions,
        a.verify_beta,
        a.gamma,
        rep.policies_equal,
        rep.diff_states.iter().map(usize::to_string).collect::<Vec<_>>().join(" "),
        rep.max_gap
    );
    for s in 0..mdp.n_states {
        let _ = writeln!(
            text,
            "{s} {} {} {}",
            join_f64(&[rep.env.values[s], rep.total.values[s], rep.v_env_gap[s]], " "),
            sets(&rep.env.greedy[s]),
            sets(&rep.total.greedy[s])
        );
    }
    let path = ctx.out.join("verify.txt");
    write_file(&path, &text)?;
    Ok(vec![
        format!(
            "verify mdp={name} policies_equal={} diff_states={} max_gap={:?}",
            rep.policies_equal,
            rep.diff_states.len(),
            rep.max_gap
        ),
        wrote(&path),
    ])
}

fn ablate(ctx: &Ctx, inputs: &Inputs, counts: Option<Vec<usize>>) -> Result<Vec<String>> {
    let demos = ctx.demos(inputs)?;
    let counts = counts.unwrap_or_else(|| ctx.cfg.ablation.counts.clone());
    let dir = ctx.out.join("ablation");
    let world = if demos.state_dim == 3 {
        Some(ctx.world(inputs)?)
    } else {
        None
    };
    let probe = match &world {
        Some(w) => AblationProbe::Landscape {
            world: w,
            path_cells: demo_cells(w, &demos)?,
            out_dir: dir.clone(),
            stride: ctx.cfg.landscape.stride,
        },
        None => {
            let path = demos.states().map(<[f64]>::to_vec).collect();
            // Off-path states are the world's other open cells when a world
            // of matching dimension is available.
            let world_path = ctx.input(&inputs.world, WORLD_FILE);
            let off_path = if world_path.exists() {
                let w = GridWorld::load(&world_path)?;
                let on: std::collections::HashSet<Cell> = demo_cells(&w, &demos)?.into_iter().collect();
                w.open_cells()
                    .filter(|c| !on.contains(c))
                    .map(|c| w.state_of(c))
                    .collect()
            } else {
                Vec::new()
            };
            AblationProbe::States { path, off_path }
        }
    };
    let spec = AblationSpec {
        base: ctx.cfg.moe.arch(),
        train: ctx.cfg.moe.train(ctx.cfg.seed),
        counts,
        match_budget: ctx.cfg.ablation.match_budget,
        l_max: ctx.cfg.landscape.l_max,
        probe,
    };
    let rows = ablate_experts(&demos, &spec)?;
    let path = dir.join("ablation.csv");
    write_ablation(&path, &rows)?;
    let mut lines: Vec<String> = rows
        .iter()
        .map(|r| format!("experts={} final_loss={:?}", r.experts, r.final_loss))
        .collect();
    lines.push(wrote(&path));
    Ok(lines)
}
