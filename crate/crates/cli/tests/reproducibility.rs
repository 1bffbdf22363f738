//! Every run writes a manifest; re-running the manifest must reproduce all
//! CSV numbers bit-exactly.

use std::path::{Path, PathBuf};
use vortex_channel_cli::config::ExperimentConfig;
use vortex_channel_cli::experiments;

fn tmp(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn small_cfg(name: &str, out: PathBuf) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::defaults_for(name);
    cfg.grid_n = 64;
    cfg.fov_waists = 12.0;
    cfg.realizations = 5;
    cfg.master_seed = 9;
    cfg.sr_targets = vec![0.6, 1.0];
    cfg.out_dir = out;
    cfg
}

fn read_csvs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| {
            let p = e.unwrap().path();
            if p.extension().is_some_and(|x| x == "csv") {
                Some((
                    p.file_name().unwrap().to_string_lossy().into_owned(),
                    std::fs::read(&p).unwrap(),
                ))
            } else {
                None
            }
        })
        .collect();
    out.sort();
    out
}

#[test]
fn rerunning_a_manifest_reproduces_csv_bytes() {
    for name in [
        "sweep-sr",
        "linearity",
        "crosstalk",
        "calibrate",
        "transmit",
    ] {
        let dir_a = tmp(&format!("{name}-a"));
        let cfg = small_cfg(name, dir_a.clone());
        experiments::run(&cfg).unwrap_or_else(|e| panic!("{name} run failed: {e}"));
        let manifest = dir_a.join("manifest.cfg");
        assert!(manifest.exists(), "{name} wrote no manifest");

        let dir_b = tmp(&format!("{name}-b"));
        let mut replay = ExperimentConfig::load(&manifest, name).unwrap();
        replay.out_dir = dir_b.clone();
        experiments::run(&replay).unwrap_or_else(|e| panic!("{name} replay failed: {e}"));

        let a = read_csvs(&dir_a);
        let b = read_csvs(&dir_b);
        assert!(!a.is_empty(), "{name} produced no CSV files");
        assert_eq!(a.len(), b.len(), "{name}: file sets differ");
        for ((na, ba), (nb, bb)) in a.iter().zip(b.iter()) {
            assert_eq!(na, nb, "{name}: file names differ");
            assert_eq!(ba, bb, "{name}: {na} is not bit-identical across reruns");
        }
    }
}

#[test]
fn noisy_runs_are_deterministic_and_sane() {
    use vortex_channel::tomography::NoiseModel;
    use vortex_channel_cli::experiments::compute_sweep_sr;

    let mut cfg = small_cfg("sweep-sr", tmp("noisy-sweep"));
    cfg.noise = Some(NoiseModel::Gaussian { sigma_rel: 0.01 });
    cfg.sr_targets = vec![0.7, 1.0];
    let (points_a, _) = compute_sweep_sr(&cfg).unwrap();
    let (points_b, _) = compute_sweep_sr(&cfg).unwrap();
    for (a, b) in points_a.iter().zip(points_b.iter()) {
        assert_eq!(
            a.c_ensemble, b.c_ensemble,
            "noise must be seed-deterministic"
        );
        assert!((0.0..=1.0).contains(&a.c_ensemble));
        assert!(a.fidelity_tm > 0.5, "noisy fidelity {}", a.fidelity_tm);
    }
    // The noiseless SR = 1.0 channel reconstructs to a maximally entangled
    // state even through the noisy MLE path.
    assert!(
        points_a[1].c_ensemble > 0.95,
        "C = {}",
        points_a[1].c_ensemble
    );

    let mut cfg = small_cfg("tomography-demo", tmp("noisy-demo"));
    cfg.noise = Some(NoiseModel::Poisson { mean_total: 1e6 });
    cfg.sr_targets = vec![0.8];
    experiments::run(&cfg).unwrap();
    let report = std::fs::read_to_string(cfg.out_dir.join("report.txt")).unwrap();
    assert!(report.contains("\"concurrence\""));
    assert!(report.contains("\"residual\""));
}

#[test]
fn transmit_images_are_deterministic() {
    let dir_a = tmp("transmit-img-a");
    let dir_b = tmp("transmit-img-b");
    for dir in [&dir_a, &dir_b] {
        let mut cfg = small_cfg("transmit", dir.clone());
        cfg.sr_targets = vec![0.4];
        experiments::run(&cfg).unwrap();
    }
    for name in [
        "sent.pgm",
        "received_uncorrected.pgm",
        "received_corrected.pgm",
    ] {
        let a = std::fs::read(dir_a.join(name)).unwrap();
        let b = std::fs::read(dir_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}
