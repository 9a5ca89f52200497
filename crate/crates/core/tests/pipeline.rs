mod common;

use hpk_core::pipeline::RunConfig;

fn pipeline_bytes(cfg: &RunConfig) -> Vec<(&'static str, Vec<u8>)> {
    let dir = tempfile::tempdir().unwrap();
    common::run_pipeline(cfg, dir.path())
}

#[test]
fn repeated_runs_are_byte_identical() {
    let cfg = common::tiny_config();
    let a = pipeline_bytes(&cfg);
    let b = pipeline_bytes(&cfg);
    for ((name, x), (_, y)) in a.iter().zip(&b) {
        assert!(x == y, "{name} differs between runs");
    }
}

#[test]
fn worker_count_does_not_change_outputs() {
    let mut cfg = common::tiny_config();
    cfg.workers = 1;
    let a = pipeline_bytes(&cfg);
    cfg.workers = 3;
    let b = pipeline_bytes(&cfg);
    for ((name, x), (_, y)) in a.iter().zip(&b) {
        assert!(x == y, "{name} differs between 1 and 3 workers");
    }
}

#[test]
fn seed_changes_outputs() {
    let mut cfg = common::tiny_config();
    let a = pipeline_bytes(&cfg);
    cfg.seed += 1;
    let b = pipeline_bytes(&cfg);
    assert_ne!(a[2].1, b[2].1, "checkpoint ignores the seed");
}
