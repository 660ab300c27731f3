use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn v2x(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_v2x")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = v2x(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const QUICK: [&str; 8] = [
    "--override",
    "train.episodes=2",
    "--override",
    "train.batch_size=4",
    "--override",
    "train.hidden=[8]",
    "--override",
    "eval_episodes=2",
];

#[test]
fn train_then_rerun_from_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let mut args = vec!["train", "--seed", "3", "--out", p(&a)];
    args.extend(QUICK);
    let stdout = ok(&args);
    assert!(stdout.contains("drl"));
    let header = fs::read_to_string(a.join("seed-3/train.csv")).unwrap();
    assert!(header.starts_with("episode,v2i_sum_rate_mbps,v2v_fail_prob,mean_reward,epsilon\n"));

    let b = dir.path().join("b");
    let manifest = a.join("manifest.json");
    ok(&["train", "--config", p(&manifest), "--out", p(&b)]);
    for f in ["seed-3/train.csv", "metrics.csv", "per_seed.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let m: serde_json::Value = serde_json::from_slice(&fs::read(&manifest).unwrap()).unwrap();
    for key in ["config", "seed", "artifact_version", "command", "outputs"] {
        assert!(m.get(key).is_some(), "{key}");
    }
}

#[test]
fn baseline_kind_flag_lands_in_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["baseline", "--kind", "dqn-quantized", "--out", p(dir.path())];
    args.extend(QUICK);
    ok(&args);
    let m: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config"]["baseline"], "dqn_quantized");
    assert!(dir.path().join("seed-1/checkpoint/q.bin").exists());
}

#[test]
fn sweep_and_eval() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("sweep");
    ok(&[
        "sweep",
        "--axis",
        "payload",
        "--values",
        "1060,4240",
        "--out",
        p(&s),
        "--override",
        "eval_episodes=2",
    ]);
    let csv = fs::read_to_string(s.join("sweep_random.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);

    let t = dir.path().join("train");
    let mut args = vec!["train", "--out", p(&t)];
    args.extend(QUICK);
    ok(&args);
    let e = dir.path().join("eval");
    let stdout = ok(&["eval", "--checkpoint", p(&t), "--out", p(&e), "--override", "scenario=highway"]);
    assert!(stdout.contains("drl"));
    assert!(e.join("metrics.csv").exists());
}

#[test]
fn meta_train_then_adapt_eval() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("meta");
    let meta = [
        "--override",
        "meta.num_batches=1",
        "--override",
        "meta.tasks_per_batch=2",
        "--override",
        "meta.task_set_size=3",
        "--override",
        "meta.slots_per_task=100",
    ];
    let mut args = vec!["meta-train", "--out", p(&m)];
    args.extend(QUICK);
    args.extend(meta);
    ok(&args);
    assert_eq!(fs::read_to_string(m.join("seed-1/meta_loss.csv")).unwrap().lines().count(), 2);

    let a = dir.path().join("adapt");
    let mut args = vec![
        "adapt-eval",
        "--checkpoint",
        p(&m),
        "--samples",
        "10,5",
        "--out",
        p(&a),
        "--override",
        "scenario=highway",
    ];
    args.extend(QUICK);
    ok(&args);
    let rows: Vec<String> = fs::read_to_string(a.join("adapt.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().to_string())
        .collect();
    assert_eq!(rows, ["0", "5", "10"]);
}

#[test]
fn bad_config_key_fails_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"train": {"episodes": 1, "typo": 2}}"#).unwrap();
    let out = v2x(&["train", "--config", p(&cfg), "--out", p(dir.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("train.typo"));

    let out = v2x(&["eval", "--out", p(dir.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("checkpoint"));
}
