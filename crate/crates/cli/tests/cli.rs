use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = "\
run.variant = EDGEAGENTX
run.episodes = 2
run.seeds = 1,2
run.eval_episodes = 1
env.n_agents = 4
env.episode_len = 10
env.n_gateways = 1
hyper.batch_size = 8
hyper.actor_hidden = 8
hyper.critic_hidden = 8
hyper.update_every = 5
fed.local_episodes = 1
fed.group_size = 2
";

fn edgeagentx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edgeagentx")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("tiny.conf");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn run_writes_metrics_and_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), TINY);
    let out = dir.path().join("out");
    let res = edgeagentx(&["run", "--config", &config, "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    for seed in [1, 2] {
        let text = std::fs::read_to_string(out.join(format!("metrics_EDGEAGENTX_{seed}.csv"))).unwrap();
        assert_eq!(text.lines().count(), 3);
    }
    assert!(out.join("summary_EDGEAGENTX.csv").exists());

    let ckpt = out.join("actor_EDGEAGENTX_1_0.ckpt");
    let res = edgeagentx(&["checkpoint", "--in", ckpt.to_str().unwrap(), "--info"]);
    assert_eq!(res.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("layers 3"), "{stdout}");
    assert!(stdout.contains("finite true"));
}

#[test]
fn overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), TINY);
    let out = dir.path().join("out");
    let res = edgeagentx(&[
        "run",
        "--config",
        &config,
        "--seed-override",
        "9",
        "--variant",
        "independent",
        "--episodes",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let text = std::fs::read_to_string(out.join("metrics_INDEPENDENT_9.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(!out.join("metrics_INDEPENDENT_1.csv").exists());
}

#[test]
fn compare_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{TINY}run.output_dir = {}\n", dir.path().join("cmp").display());
    let config = write_config(dir.path(), &text);
    let res = edgeagentx(&["compare", "--config", &config, "--variants", "EDGEAGENTX,INDEPENDENT"]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = std::fs::read_to_string(dir.path().join("cmp/comparison.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(String::from_utf8_lossy(&res.stdout).contains("INDEPENDENT"));
}

#[test]
fn missing_config_is_io_error() {
    let res = edgeagentx(&["run", "--config", "/nonexistent/x.conf"]);
    assert_eq!(res.status.code(), Some(3));
}

#[test]
fn bad_config_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "env.n_agents = 1\n");
    let res = edgeagentx(&["run", "--config", &config]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("env.n_agents"));

    let config = write_config(dir.path(), "env.bogus = 3\n");
    assert_eq!(edgeagentx(&["run", "--config", &config]).status.code(), Some(1));
}

#[test]
fn unknown_variant_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), TINY);
    let res = edgeagentx(&["run", "--config", &config, "--variant", "nope"]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn unwritable_output_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), TINY);
    let blocker = dir.path().join("blocker");
    std::fs::write(&blocker, "x").unwrap();
    let out = blocker.join("out");
    let res = edgeagentx(&["run", "--config", &config, "--episodes", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(3));
}

#[test]
fn corrupt_checkpoint_is_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.ckpt");
    std::fs::write(&path, b"NOTACKPT").unwrap();
    let res = edgeagentx(&["checkpoint", "--in", path.to_str().unwrap(), "--info"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(edgeagentx(&[]).status.code(), Some(1));
    assert_eq!(edgeagentx(&["run"]).status.code(), Some(1));
    assert_eq!(edgeagentx(&["--help"]).status.code(), Some(0));
}
