use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn hpk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hpk"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn hpk")
}

fn tiny_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/tiny.json")
}

fn with_override(dir: &Path, edit: impl FnOnce(&mut serde_json::Value)) -> PathBuf {
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(tiny_config()).unwrap()).unwrap();
    edit(&mut v);
    let p = dir.join("config.json");
    std::fs::write(&p, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    p
}

fn run_ok(cmd: &str, cfg: &Path, out: &Path) -> String {
    let o = hpk(&[cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

#[test]
fn full_flow_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = tiny_config();
    run_ok("synth", &cfg, &out);
    assert!(out.join("manifest.jsonl").is_file());
    run_ok("autolabel", &cfg, &out);
    assert!(out.join("boundaries.json").is_file());
    let train = run_ok("train", &cfg, &out);
    assert!(train.contains("4 steps"), "{train}");
    let infer = run_ok("infer", &cfg, &out);
    assert!(infer.contains("3 frames"), "{infer}");
    let det = std::fs::read_to_string(out.join("detections.jsonl")).unwrap();
    assert_eq!(det.lines().count(), 3);
    for line in det.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["frame_id"].is_string() && v["vehicles"].is_array() && v["lanes"].is_array());
    }
    let eval = run_ok("eval", &cfg, &out);
    assert!(eval.contains("ego@15-50m"), "{eval}");
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["lane_positions"].as_array().unwrap().len(), 56);
    let bench = run_ok("bench", &cfg, &out);
    assert!(bench.contains("44 Hz"), "{bench}");
    assert!(out.join("bench.json").is_file());
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    for (out, seed) in [(&a, "1"), (&b, "1"), (&c, "2")] {
        let o = hpk(&["synth", "--config", cfg.to_str().unwrap(), "--seed", seed, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    let read = |p: &Path| std::fs::read(p.join("manifest.jsonl")).unwrap();
    let img = |p: &Path| std::fs::read(p.join("images/frame_0000.ppm")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_eq!(img(&a), img(&b));
    assert_ne!(img(&a), img(&c));
}

#[test]
fn validation_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let missing = dir.path().join("nope.json");
    let o = hpk(&["synth", "--config", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));

    let unknown = with_override(dir.path(), |v| {
        v["not_a_key"] = serde_json::json!(1);
    });
    assert_eq!(hpk(&["synth", "--config", unknown.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.code(), Some(1));

    // eval before any detections exist
    let cfg = tiny_config();
    assert_eq!(hpk(&["eval", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.code(), Some(1));

    assert_eq!(hpk(&[]).status.code(), Some(1));
    assert_eq!(hpk(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(hpk(&["synth"]).status.code(), Some(1));
    assert_eq!(hpk(&["--help"]).status.code(), Some(0));
}

#[test]
fn diverging_training_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = with_override(dir.path(), |v| {
        v["train"]["lr"]["base"] = serde_json::json!(1e30);
    });
    run_ok("synth", &cfg, &out);
    let o = hpk(&["train", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}
