use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_moe-guide"))
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

#[test]
fn no_arguments_prints_usage() {
    let out = bin().output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn help_exits_zero() {
    let out = bin().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in [
        "gen-world",
        "train-moe",
        "landscape",
        "explore",
        "qlearn",
        "verify-mdp",
        "ablate-experts",
    ] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
}

#[test]
fn missing_demos_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().arg("-o").arg(dir.path()).arg("train-moe").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains(&dir.path().join("demos.txt").display().to_string()),
        "{err}"
    );
    assert!(err.starts_with("error:"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[moe]\nexperts = 2\nexpertz = 3\n").unwrap();
    let out = bin().arg("-c").arg(&cfg).arg("gen-world").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.toml:3"), "{err}");
}

#[test]
fn gen_world_then_demos() {
    let dir = tempfile::tempdir().unwrap();
    let run = |args: &[&str]| {
        let out = bin()
            .args(["-c", &fixture("grid2d.toml"), "-o"])
            .arg(dir.path())
            .args(args)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8_lossy(&out.stdout).into_owned()
    };
    assert!(run(&["gen-world"]).contains("world [12, 12]"));
    let world = moe_guide::envs::GridWorld::load(&dir.path().join("world.txt")).unwrap();
    assert_eq!(world.dims(), &[12, 12]);
    assert!(run(&["gen-demos"]).contains("gap=2"));
    let demos = moe_guide::moe::DemoSet::load(&dir.path().join("demos.txt")).unwrap();
    assert!(demos
        .states()
        .all(|s| world.cell_of_state(s).is_some_and(|c| world.is_open(c))));
}

#[test]
fn chain_verify_reports_the_pitfall() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["-c", &fixture("chain.toml"), "-o"])
        .arg(dir.path())
        .arg("verify-mdp")
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("verify.txt")).unwrap();
    assert!(text.contains("policies_equal false"));
    assert!(text.contains("diff_states 0 1 2 3"));
    assert!(text.contains("max_gap 5.0"));
}

#[test]
fn env_var_sets_output_root() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .env("MOE_GUIDE_OUT", dir.path())
        .arg("gen-world")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let found = walk(dir.path()).into_iter().any(|p| p.ends_with("world.txt"));
    assert!(found);
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}
