use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use swarm_harness::training::{checkpoint_file, CURVE_FILE};
use swarm_harness::CheckpointFormat;
use swarm_harness::RunConfig;
use tempfile::TempDir;

fn swarm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swarm"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("swarm binary runs")
}

fn write_config(dir: &Path) -> String {
    let mut c = RunConfig::default();
    c.sim.n_agents = 4;
    c.trpo.episode_length = 20;
    c.trpo.episodes_per_iteration = 2;
    c.trpo.iterations = 2;
    c.output_directory = dir.join("unused");
    let path = dir.join("config.json");
    fs::write(&path, c.to_json()).unwrap();
    path.to_str().unwrap().to_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn train_eval_replay_round_trip() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path());
    let run = tmp.path().join("run");
    let out = swarm(&["train", "--config", &config, "--seed", "3", "--out", s(&run)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(run.join(CURVE_FILE)).unwrap().lines().count(), 3);
    assert_eq!(RunConfig::load(&run.join("config.json")).unwrap().master_seed, 3);

    let ckpt = checkpoint_file(&run, "final", CheckpointFormat::Binary);
    let eval = |seed: &str| swarm(&["eval", "--checkpoint", s(&ckpt), "--config", &config, "--episodes", "2", "--seed", seed]);
    let first = eval("4");
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    assert_eq!(first.stdout, eval("4").stdout);
    let metrics: serde_json::Value = serde_json::from_slice(&first.stdout).unwrap();
    assert_eq!(metrics["episodes"], 2);
    assert_eq!(metrics["metrics"]["task"], "edge");

    let replay = tmp.path().join("replay.jsonl");
    let out = swarm(&["replay", "--checkpoint", s(&ckpt), "--config", &config, "--seed", "1", "--out", s(&replay)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(&replay).unwrap().lines().count(), 20 * 4 + 1);
}

#[test]
fn failures_map_to_categories_and_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path());

    let bad = tmp.path().join("bad.json");
    fs::write(&bad, r#"{"trpo": {"kl_bound": 0.0}}"#).unwrap();
    let out = swarm(&["train", "--config", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[config]"));

    let missing = tmp.path().join("missing.bin");
    let out = swarm(&["eval", "--checkpoint", s(&missing), "--config", &config]);
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[io]"));

    let junk = tmp.path().join("junk.bin");
    fs::write(&junk, b"SWRMCKPT\x01").unwrap();
    let out = swarm(&["eval", "--checkpoint", s(&junk), "--config", &config]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[checkpoint]"));

    let run = tmp.path().join("run");
    assert!(swarm(&["train", "--config", &config, "--out", s(&run)]).status.success());
    let other = tmp.path().join("sensor.json");
    let mut c = RunConfig::load(Path::new(&config)).unwrap();
    c.protocol.mode = swarm_core::ObservationMode::Sensor;
    fs::write(&other, c.to_json()).unwrap();
    let ckpt = checkpoint_file(&run, "final", CheckpointFormat::Binary);
    let out = swarm(&["eval", "--checkpoint", s(&ckpt), "--config", s(&other)]);
    assert_eq!(out.status.code(), Some(3));
}
