//! Failure-path checks for the experiment runners.

use std::path::PathBuf;
use vortex_channel_cli::config::ExperimentConfig;
use vortex_channel_cli::experiments;

fn tmp(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

#[test]
fn transmit_rejects_unreadable_image() {
    let mut cfg = ExperimentConfig::defaults_for("transmit");
    cfg.grid_n = 64;
    cfg.fov_waists = 12.0;
    cfg.out_dir = tmp("bad-image");
    cfg.image = Some(PathBuf::from("/nonexistent/picture.pgm"));
    let err = experiments::run(&cfg).unwrap_err();
    assert!(
        err.to_string().contains("picture.pgm"),
        "unexpected error: {err}"
    );
}

#[test]
fn transmit_rejects_oversized_image() {
    let dir = tmp("big-image");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("big.pgm");
    // A 2100×2100 maxval-15 graymap crosses the 4 Mpixel limit.
    let mut bytes = format!("P5\n2100 2100\n15\n").into_bytes();
    bytes.extend(std::iter::repeat_n(7u8, 2100 * 2100));
    std::fs::write(&path, bytes).unwrap();
    let mut cfg = ExperimentConfig::defaults_for("transmit");
    cfg.grid_n = 64;
    cfg.fov_waists = 12.0;
    cfg.out_dir = dir;
    cfg.image = Some(path);
    let err = experiments::run(&cfg).unwrap_err();
    assert!(err.to_string().contains("limit"), "unexpected error: {err}");
}

#[test]
fn unknown_experiment_is_rejected() {
    let mut cfg = ExperimentConfig::defaults_for("sweep-sr");
    cfg.name = "warp-drive".into();
    assert!(experiments::run(&cfg).is_err());
}
