use std::path::Path;
use std::process::Command;

use serde_json::Value;

const SMALL: &str = r#"
seed = 3
[dataset]
n_samples = 8
grid_size = 32
val_ratio = 0.25
[gan]
filters = 32
[gan.train]
epochs = 1
[dqn]
episodes = 6
batch_size = 2
"#;

fn emfplan(dir: &Path, args: &[&str]) -> Value {
    let cfg = dir.join("small.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_emfplan"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let start = text.find(['{', '[']).unwrap_or(0);
    serde_json::from_str(&text[start..]).unwrap_or(Value::String(text))
}

#[test]
fn oracle_then_evaluate_agree() {
    let dir = tempfile::tempdir().unwrap();
    let a = emfplan(
        dir.path(),
        &["oracle", "--scene-seed", "5", "--random-txs", "2"],
    );
    let txs: Vec<(usize, usize)> = serde_json::from_value(a["tx_list"].clone()).unwrap();
    assert_eq!(txs.len(), 2);
    assert!(dir.path().join("out/maps").exists());
    let scene = dir.path().join("out/scene.json");
    let mut args = vec![
        "evaluate".to_string(),
        "--scene".into(),
        scene.to_str().unwrap().into(),
    ];
    for (i, j) in &txs {
        args.push("--tx".into());
        args.push(format!("{i},{j}"));
    }
    let b = emfplan(
        dir.path(),
        &args.iter().map(String::as_str).collect::<Vec<_>>(),
    );
    assert_eq!(a["CR"], b["CR"]);
    assert_eq!(a["ER"], b["ER"]);
}

#[test]
fn baseline_json_shape() {
    let dir = tempfile::tempdir().unwrap();
    let v = emfplan(
        dir.path(),
        &[
            "baseline",
            "--method",
            "brute",
            "--n-bs",
            "1",
            "--scene-seed",
            "2",
        ],
    );
    for key in ["placements", "CR", "ER", "evals", "wall_time_s"] {
        assert!(v.get(key).is_some(), "{key} missing from {v}");
    }
    let r = emfplan(
        dir.path(),
        &[
            "baseline",
            "--method",
            "random",
            "--n-bs",
            "2",
            "--scene-seed",
            "2",
        ],
    );
    assert_eq!(r["placements"].as_array().unwrap().len(), 2);
    assert_eq!(r["evals"], 1);
}

#[test]
fn dqn_train_plot_and_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let v = emfplan(
        dir.path(),
        &["train-dqn", "--scene-seed", "4", "--n-bs", "1"],
    );
    assert_eq!(v["placements"].as_array().unwrap().len(), 1);
    let out = dir.path().join("out");
    assert!(out.join("policy.ckpt").exists() && out.join("trace.jsonl").exists());
    let curve = out.join("learning_curve.csv");
    let tx = format!("{},{}", v["placements"][0][0], v["placements"][0][1]);
    let p = emfplan(
        dir.path(),
        &[
            "plots",
            "--curve",
            curve.to_str().unwrap(),
            "--scene-seed",
            "4",
            "--tx",
            &tx,
        ],
    );
    assert_eq!(p["files"].as_array().unwrap().len(), 3);
    assert!(out.join("learning_curve.svg").exists() && out.join("map_panels.svg").exists());
    let e = emfplan(
        dir.path(),
        &[
            "evaluate",
            "--scene",
            out.join("scene.json").to_str().unwrap(),
            "--dqn",
            out.join("policy.ckpt").to_str().unwrap(),
        ],
    );
    assert_eq!(e["placements"], v["placements"]);
}

#[test]
fn dataset_and_gan_training() {
    let dir = tempfile::tempdir().unwrap();
    let d = emfplan(dir.path(), &["dataset"]);
    assert_eq!(d["samples"], 8);
    let ds = dir.path().join("out/dataset");
    let g = emfplan(
        dir.path(),
        &["train-gan", "--dataset", ds.to_str().unwrap()],
    );
    let ckpt = g["checkpoint"].as_str().unwrap().to_string();
    assert!(Path::new(&ckpt).exists());
    let e = emfplan(
        dir.path(),
        &[
            "evaluate",
            "--dataset",
            ds.to_str().unwrap(),
            "--gan",
            &ckpt,
        ],
    );
    assert!(e["mae_mean"].as_f64().unwrap() > 0.0);
}

#[test]
fn bad_arguments_fail() {
    let out = Command::new(env!("CARGO_BIN_EXE_emfplan"))
        .args(["baseline", "--method", "genetic"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let out = Command::new(env!("CARGO_BIN_EXE_emfplan"))
        .args([
            "--out",
            "/tmp/emfplan-never",
            "oracle",
            "--scene-seed",
            "1",
            "--tx",
            "x",
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
}
