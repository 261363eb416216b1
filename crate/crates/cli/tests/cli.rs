use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ifr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ifr"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn ifr")
}

fn ok(args: &[&str]) -> String {
    let out = ifr(args);
    assert!(out.status.success(), "ifr {args:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_dataset(dir: &Path) -> String {
    ok(&["gen", "--out", s(&dir.join("data")), "--train", "12", "--test", "4", "--seed", "3", "--points", "32"]);
    dir.join("data/manifest.json").to_string_lossy().into_owned()
}

fn small_checkpoint(dir: &Path, manifest: &str) -> String {
    let ckpt = dir.join("ckpt");
    ok(&[
        "train", "--manifest", manifest, "--out", s(&ckpt), "--budget", "20", "--loops", "1", "--epochs", "1",
        "--encoder-points", "16",
    ]);
    ckpt.to_string_lossy().into_owned()
}

#[test]
fn full_pipeline_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let manifest = small_dataset(d);
    let ckpt = small_checkpoint(d, &manifest);
    for f in ["nets.ckpt", "policy.ckpt", "metrics.jsonl", "train_config.json"] {
        assert!(Path::new(&ckpt).join(f).exists(), "missing {f}");
    }

    let table = ok(&["eval", "--manifest", &manifest, "--ckpt", &ckpt, "--method", "ours_final", "--budget", "frac20", "--out", s(&d.join("eval"))]);
    assert!(table.contains("ours_final"));
    for f in ["results.txt", "results.json", "curves/ours_final-frac20.csv"] {
        assert!(d.join("eval").join(f).exists(), "missing {f}");
    }
    assert!(fs::read_dir(d.join("eval/graphs")).unwrap().next().is_some());

    let scene = fs::read_dir(d.join("data/scenes")).unwrap().next().unwrap().unwrap().path();
    let log = d.join("log.jsonl");
    let summary = ok(&["adapt", "--scene", s(&scene), "--ckpt", &ckpt, "--mode", "certainty", "--log", s(&log)]);
    let v: serde_json::Value = serde_json::from_str(&summary).unwrap();
    let k = v["interactions"].as_u64().unwrap() as usize;
    assert_eq!(fs::read_to_string(&log).unwrap().lines().count(), k);

    let curve = d.join("curve.csv");
    ok(&["curve", "--manifest", &manifest, "--ckpt", &ckpt, "--budget", "certainty", "--out", s(&curve)]);
    assert!(fs::read_to_string(&curve).unwrap().starts_with("t,precision,recall,f1,mcc,active"));

    let abl = ok(&["ablate-edges", "--manifest", &manifest, "--ckpt", &ckpt, "--out", s(&d.join("abl"))]);
    for key in ["prior-only", "distance-only", "combined:0.4", "combined:0.6", "combined:0.8", "combined:1.0"] {
        assert!(abl.contains(&format!("[{key}]")), "{key} missing from\n{abl}");
    }

    let tr = ok(&[
        "transfer", "--manifest", &manifest, "--ckpt", &ckpt, "--train-family", "kitchen", "--test-family", "living",
        "--out", s(&d.join("tr")), "--split", "train",
    ]);
    assert!(tr.contains("unseen-relation recall"));
    assert!(d.join("tr/transfer.json").exists());
}

#[test]
fn eval_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let manifest = small_dataset(d);
    let ckpt = small_checkpoint(d, &manifest);
    for out in ["a", "b"] {
        ok(&["eval", "--manifest", &manifest, "--ckpt", &ckpt, "--method", "abla_random_adapt", "--out", s(&d.join(out))]);
    }
    assert_eq!(fs::read(d.join("a/results.json")).unwrap(), fs::read(d.join("b/results.json")).unwrap());
}

#[test]
fn baselines_run_without_a_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = small_dataset(tmp.path());
    let t = ok(&["eval", "--manifest", &manifest, "--method", "exhaustive", "--budget", "certainty", "--out", s(&tmp.path().join("e"))]);
    let row = t.lines().find(|l| l.starts_with("exhaustive")).unwrap();
    assert!(row.contains("1.000   1.000   1.000   1.000"), "{row}");
}

#[test]
fn bad_input_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = small_dataset(tmp.path());
    let out = s(&tmp.path().join("x")).to_string();
    for args in [
        vec!["eval", "--manifest", &manifest, "--method", "nope", "--out", &out],
        vec!["eval", "--manifest", &manifest, "--method", "ours_final", "--out", &out],
        vec!["eval", "--manifest", &manifest, "--method", "random", "--budget", "certainty", "--out", &out],
        vec!["eval", "--manifest", &manifest, "--method", "random", "--budget", "frac:3", "--out", &out],
        vec!["eval", "--manifest", "/nonexistent/manifest.json", "--method", "random", "--out", &out],
    ] {
        let o = ifr(&args);
        assert!(!o.status.success(), "{args:?} should fail");
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn shipped_config_matches_the_default() {
    let shipped = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/desk.json");
    assert_eq!(ok(&["gen", "--print-config", "--config", shipped]), ok(&["gen", "--print-config"]));
}
