use std::path::Path;

use moe_guide::config::ExperimentConfig;
use moe_guide::envs::{generate_expert_demos, make_gridworld, GridWorld};
use moe_guide::fixtures::expert_path_2d;
use moe_guide::moe::{train_moe, DemoSet, MoEModel, MoeArch, TrainConfig};
use moe_guide::Error;

#[test]
fn world_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    for dims in [vec![12, 9], vec![6, 5, 4]] {
        let w = make_gridworld(&dims, 0.25, 11).unwrap().with_max_steps(77);
        let p = dir.path().join("w.txt");
        w.save(&p).unwrap();
        assert_eq!(GridWorld::load(&p).unwrap(), w);
    }
}

#[test]
fn demo_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let w = make_gridworld(&[10, 10], 0.2, 4).unwrap();
    let demos = generate_expert_demos(&w, 3, 2, 4).unwrap();
    let p = dir.path().join("d.txt");
    demos.save(&p).unwrap();
    assert_eq!(DemoSet::load(&p).unwrap(), demos);
}

#[test]
fn model_file_round_trips_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let demos = expert_path_2d(24, 2);
    let cfg = TrainConfig {
        epochs: 30,
        seed: 1,
        ..TrainConfig::default()
    };
    let model = train_moe(&demos, &MoeArch::default(), &cfg).unwrap().model;
    let p = dir.path().join("m.txt");
    model.save(&p).unwrap();
    let back = MoEModel::load(&p).unwrap();
    assert_eq!(back, model);
    for s in demos.states() {
        assert_eq!(back.loss(s).unwrap().to_bits(), model.loss(s).unwrap().to_bits());
    }
}

#[test]
fn config_round_trips() {
    for name in ["grid2d.toml", "path3d.toml", "chain.toml"] {
        let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name);
        let cfg = ExperimentConfig::load(&p).unwrap();
        let back = ExperimentConfig::from_toml(Path::new("mem.toml"), &cfg.to_toml()).unwrap();
        assert_eq!(back, cfg, "{name}");
    }
}

#[test]
fn corrupt_model_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let demos = expert_path_2d(10, 0);
    let cfg = TrainConfig {
        epochs: 1,
        ..TrainConfig::default()
    };
    let text = train_moe(&demos, &MoeArch::default(), &cfg).unwrap().model.to_text();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[1] = "garbage here";
    let p = dir.path().join("bad.txt");
    std::fs::write(&p, lines.join("\n")).unwrap();
    match MoEModel::load(&p) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("expected parse error, got {other:?}"),
    }
}

#[test]
fn training_is_deterministic() {
    let demos = expert_path_2d(30, 5);
    let cfg = TrainConfig {
        epochs: 100,
        seed: 9,
        ..TrainConfig::default()
    };
    let a = train_moe(&demos, &MoeArch::default(), &cfg).unwrap();
    let b = train_moe(&demos, &MoeArch::default(), &cfg).unwrap();
    assert_eq!(a.model.to_text(), b.model.to_text());
    assert_eq!(a.history, b.history);
}
