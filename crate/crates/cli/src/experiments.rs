//! The experiment runners behind the CLI subcommands. Each run writes its
//! CSV tables, SVG figures and a manifest into the configured output
//! directory; re-running a manifest reproduces every number bit-exactly.

use anyhow::{anyhow, bail, Context, Result};
use nalgebra::Matrix4;
use num_complex::Complex64;
use rayon::prelude::*;
use std::io::Write;
use std::path::PathBuf;

use vortex_channel::channel::{
    channel_concurrence_factor, concurrence_vs_sr, propagate_hybrid, ModalCoupling,
    SubspaceAnalyzer,
};
use vortex_channel::comms::{
    measure_crosstalk, transmit, ChannelRealization, ImageFrame, LinkReport,
};
use vortex_channel::optics::{make_oam_mode, make_vector_mode, oam_spectrum, GridSpec, JonesField};
use vortex_channel::states::{
    concurrence_mixed, concurrence_pure, fidelity, project_physical, DensityMatrix, HybridState,
    VectorModeBasis,
};
use vortex_channel::stats;
use vortex_channel::tomography::{
    reconstruct_linear, reconstruct_mle, simulate_measurements, trace_distance, MeasurementRecord,
    MleOptions, ProjectorSet,
};
use vortex_channel::turbulence::{
    calibrate_screens, generate_phase_screen, measure_strehl, write_calibration_csv, PhaseScreen,
    TurbulenceSpec,
};

use crate::config::ExperimentConfig;
use crate::plot::{save_bar_chart, save_matrix_heatmap, LinePlot, Series};

/// Output files produced by a run, echoed to the console.
#[derive(Debug, Default)]
pub struct RunOutputs {
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

impl RunOutputs {
    fn add(&mut self, p: PathBuf) {
        self.files.push(p);
    }
}

/// Shared machinery for the sweep-style runs.
struct Rig {
    grid: GridSpec,
    basis: VectorModeBasis,
    analyzer: SubspaceAnalyzer,
    tm_field: JonesField,
    set: ProjectorSet,
}

impl Rig {
    fn build(cfg: &ExperimentConfig) -> Result<Self> {
        let grid = cfg.grid()?;
        let basis = VectorModeBasis::new(cfg.ell)?;
        let analyzer = SubspaceAnalyzer::new(grid, cfg.ell, cfg.w0)?;
        let tm_field = make_vector_mode(grid, &basis.tm, cfg.w0)?;
        Ok(Self {
            grid,
            basis,
            analyzer,
            tm_field,
            set: ProjectorSet::standard(),
        })
    }

    fn spec_for(&self, cfg: &ExperimentConfig, target_sr: f64) -> Result<TurbulenceSpec> {
        Ok(TurbulenceSpec::from_target_strehl(
            target_sr,
            cfg.w0,
            cfg.path_length,
            &self.grid,
            cfg.master_seed,
        )?)
    }
}

/// Per-realization observables of a TM probe through one screen.
struct ProbeRealization {
    seed: u64,
    sr_measured: f64,
    couplings: ModalCoupling,
    survival: f64,
    c_pure: Option<f64>,
    c_ch: Option<f64>,
    intensities: Vec<f64>,
}

fn probe_tm_through(
    rig: &Rig,
    cfg: &ExperimentConfig,
    spec: &TurbulenceSpec,
    seed: u64,
) -> Result<ProbeRealization> {
    let screen = generate_phase_screen(&spec.with_seed(seed), &rig.grid)?;
    let sr_measured = measure_strehl(&screen, cfg.w0)?;
    let couplings = rig.analyzer.couplings(&screen)?;
    let out = propagate_hybrid(&rig.tm_field, &screen)?;
    let proj = rig.analyzer.filter(&out)?;
    let intensities = rig.set.expected_intensities(&proj.density_contribution());
    let c_pure = proj
        .normalized()
        .ok()
        .map(|s| concurrence_pure(&s))
        .transpose()?;
    let c_ch = channel_concurrence_factor(&couplings).ok();
    Ok(ProbeRealization {
        seed,
        sr_measured,
        couplings,
        survival: proj.survival,
        c_pure,
        c_ch,
        intensities,
    })
}

/// Tomograph the ensemble of unnormalized per-screen records: sum the
/// survival-weighted intensities, add the configured detector noise, and
/// reconstruct (pseudo-inverse when noiseless, χ² MLE otherwise).
fn reconstruct_ensemble(
    rig: &Rig,
    cfg: &ExperimentConfig,
    realizations: &[ProbeRealization],
    noise_seed: u64,
) -> Result<DensityMatrix> {
    let mut summed = vec![0.0f64; rig.set.len()];
    for r in realizations {
        for (k, v) in r.intensities.iter().enumerate() {
            summed[k] += v;
        }
    }
    let record = MeasurementRecord {
        intensities: summed,
        scale: 1.0,
        noise: None,
        seed: noise_seed,
    };
    match cfg.noise {
        None => Ok(reconstruct_linear(&record, &rig.set)?),
        Some(model) => {
            let noisy = record.with_noise(model, noise_seed)?;
            Ok(reconstruct_mle(&noisy, &rig.set, MleOptions::default())?.rho)
        }
    }
}

const REALIZATION_HEADER: &str = "sr_target,seed,sr_measured,c_in,c_out,c_ch,\
p0_ll_re,p0_ll_im,p0_mm_re,p0_mm_im,p2l_re,p2l_im,pm2l_re,pm2l_im";

fn realization_row(sr_target: f64, r: &ProbeRealization) -> String {
    let c = &r.couplings;
    format!(
        "{:.6},{},{:.9},{:.9},{},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
        sr_target,
        r.seed,
        r.sr_measured,
        1.0,
        r.c_pure.map_or("nan".into(), |v| format!("{v:.9}")),
        r.c_ch.map_or("nan".into(), |v| format!("{v:.9}")),
        c.p0_ll.re,
        c.p0_ll.im,
        c.p0_mm.re,
        c.p0_mm.im,
        c.p_plus.re,
        c.p_plus.im,
        c.p_minus.re,
        c.p_minus.im,
    )
}

/// One aggregated sweep point.
pub struct SweepPoint {
    pub sr_target: f64,
    pub sr_measured_mean: f64,
    pub sr_measured_std: f64,
    /// Concurrence of the ensemble-averaged (survival-weighted) state, the
    /// quantity the theory column describes.
    pub c_ensemble: f64,
    pub c_theory: f64,
    pub fidelity_tm: f64,
    pub c_pure_mean: f64,
    pub c_pure_std: f64,
    pub survival_mean: f64,
    pub n: usize,
}

/// Compute the concurrence-decay sweep: TM₁ through `realizations` screens
/// per SR target with ensemble tomography. Returns the aggregated points and
/// the per-realization CSV rows.
pub fn compute_sweep_sr(cfg: &ExperimentConfig) -> Result<(Vec<SweepPoint>, Vec<String>)> {
    cfg.validate()?;
    let rig = Rig::build(cfg)?;
    let mut points = Vec::new();
    let mut realization_rows = vec![REALIZATION_HEADER.to_string()];
    for (si, &sr) in cfg.sr_targets.iter().enumerate() {
        let spec = rig.spec_for(cfg, sr)?;
        let reals: Vec<ProbeRealization> = (0..cfg.realizations)
            .into_par_iter()
            .map(|i| probe_tm_through(&rig, cfg, &spec, cfg.master_seed + i as u64))
            .collect::<Result<_>>()?;
        let noise_seed = cfg.master_seed ^ ((si as u64 + 1) << 32);
        let rho = reconstruct_ensemble(&rig, cfg, &reals, noise_seed)?;
        let srs: Vec<f64> = reals.iter().map(|r| r.sr_measured).collect();
        let c_pures: Vec<f64> = reals.iter().filter_map(|r| r.c_pure).collect();
        let survivals: Vec<f64> = reals.iter().map(|r| r.survival).collect();
        points.push(SweepPoint {
            sr_target: sr,
            sr_measured_mean: stats::mean(&srs),
            sr_measured_std: stats::std_dev(&srs),
            c_ensemble: concurrence_mixed(&rho)?,
            c_theory: concurrence_vs_sr(sr)?,
            fidelity_tm: fidelity(&rho, &rig.basis.tm)?,
            c_pure_mean: stats::mean(&c_pures),
            c_pure_std: stats::std_dev(&c_pures),
            survival_mean: stats::mean(&survivals),
            n: reals.len(),
        });
        for r in &reals {
            realization_rows.push(realization_row(sr, r));
        }
    }
    Ok((points, realization_rows))
}

/// Concurrence-decay sweep with CSV/SVG/manifest output.
pub fn run_sweep_sr(cfg: &ExperimentConfig) -> Result<RunOutputs> {
    let (points, realization_rows) = compute_sweep_sr(cfg)?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut outputs = RunOutputs::default();

    let csv_path = cfg.out_dir.join("sweep_sr.csv");
    let mut f = std::fs::File::create(&csv_path)?;
    writeln!(
        f,
        "sr_target,sr_measured_mean,sr_measured_std,c_ensemble,c_theory,fidelity_tm,\
         c_pure_mean,c_pure_std,survival_mean,n"
    )?;
    for p in &points {
        writeln!(
            f,
            "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
            p.sr_target,
            p.sr_measured_mean,
            p.sr_measured_std,
            p.c_ensemble,
            p.c_theory,
            p.fidelity_tm,
            p.c_pure_mean,
            p.c_pure_std,
            p.survival_mean,
            p.n
        )?;
    }
    outputs.add(csv_path);

    let real_path = cfg.out_dir.join("sweep_sr_realizations.csv");
    std::fs::write(&real_path, realization_rows.join("\n") + "\n")?;
    outputs.add(real_path);

    let theory: Vec<(f64, f64)> = (1..=100)
        .map(|k| {
            let sr = 0.25 + 0.75 * k as f64 / 100.0;
            (sr, concurrence_vs_sr(sr).unwrap())
        })
        .collect();
    let plot = LinePlot {
        title: "Concurrence decay in turbulence".into(),
        x_label: "Strehl ratio".into(),
        y_label: "concurrence / fidelity".into(),
        series: vec![
            Series::line("theory", theory),
            Series::scatter(
                "ensemble concurrence",
                points
                    .iter()
                    .map(|p| (p.sr_measured_mean, p.c_ensemble))
                    .collect(),
            ),
            Series::scatter(
                "fidelity to TM",
                points
                    .iter()
                    .map(|p| (p.sr_measured_mean, p.fidelity_tm))
                    .collect(),
            ),
        ],
    };
    let svg_path = cfg.out_dir.join("sweep_sr.svg");
    plot.save(&svg_path)?;
    outputs.add(svg_path);
    outputs.add(cfg.write_manifest()?);

    for p in &points {
        outputs.summary.push(format!(
            "SR {:.2}: measured {:.3}±{:.3}, C_ens {:.4} (theory {:.4}), F {:.4}",
            p.sr_target,
            p.sr_measured_mean,
            p.sr_measured_std,
            p.c_ensemble,
            p.c_theory,
            p.fidelity_tm
        ));
    }
    Ok(outputs)
}

/// One fitted channel of the linearity experiment.
pub struct LinearityFit {
    pub sr_target: f64,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// C_ch measured from the maximally entangled probe (ensemble state).
    pub c_ch_probe: f64,
    /// Mean per-realization channel factor from the coupling formula.
    pub c_ch_eq_mean: f64,
    pub points: Vec<(f64, f64)>, // (c_in, c_out)
}

/// The θ grid swept by the linearity experiment (symmetric about π/4 so both
/// branches of each input-concurrence value are visited).
pub fn linearity_thetas(points: usize) -> Vec<f64> {
    (0..points)
        .map(|j| j as f64 * std::f64::consts::FRAC_PI_2 / (points - 1) as f64)
        .collect()
}

/// Compute the input-output concurrence linearity: sweep the input
/// concurrence via α = cos θ over `linearity_points` angles for each SR
/// target.
///
/// Subspace filtering is linear in the input amplitudes, so each input
/// state's filtered output follows from the couplings of the propagated
/// LG(±ℓ) basis modes of that screen.
pub fn compute_linearity(cfg: &ExperimentConfig) -> Result<Vec<LinearityFit>> {
    cfg.validate()?;
    if cfg.linearity_points < 3 {
        bail!("linearity needs at least 3 input points");
    }
    let rig = Rig::build(cfg)?;
    let thetas = linearity_thetas(cfg.linearity_points);
    let mut fits: Vec<LinearityFit> = Vec::new();
    for &sr in &cfg.sr_targets {
        let spec = rig.spec_for(cfg, sr)?;
        let couplings: Vec<ModalCoupling> = (0..cfg.realizations)
            .into_par_iter()
            .map(|i| -> Result<ModalCoupling> {
                let screen =
                    generate_phase_screen(&spec.with_seed(cfg.master_seed + i as u64), &rig.grid)?;
                Ok(rig.analyzer.couplings(&screen)?)
            })
            .collect::<Result<_>>()?;

        let mut points = Vec::with_capacity(thetas.len());
        let mut probe_c = 0.0;
        for &theta in &thetas {
            let state = HybridState::weighted(
                cfg.ell,
                Complex64::new(theta.cos(), 0.0),
                Complex64::new(theta.sin(), 0.0),
            )?;
            let c_in = 2.0 * (theta.cos() * theta.sin()).abs();
            let mut rho_acc: Matrix4<Complex64> = Matrix4::zeros();
            for c in &couplings {
                let amps = c.to_operator().apply(state.amplitudes());
                let v = nalgebra::Vector4::from_row_slice(&amps);
                rho_acc += v * v.adjoint();
            }
            let tr = rho_acc.trace().re;
            let c_out = if tr > 1e-12 {
                let rho = project_physical(&(rho_acc / Complex64::new(tr, 0.0)))?;
                concurrence_mixed(&rho)?
            } else {
                0.0
            };
            if (theta - std::f64::consts::FRAC_PI_4).abs() < 1e-9 {
                probe_c = c_out;
            }
            points.push((c_in, c_out));
        }
        let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().cloned().unzip();
        let fit = stats::linear_fit(&xs, &ys);
        let eq_factors: Vec<f64> = couplings
            .iter()
            .filter_map(|c| channel_concurrence_factor(c).ok())
            .collect();
        fits.push(LinearityFit {
            sr_target: sr,
            slope: fit.slope,
            intercept: fit.intercept,
            r_squared: fit.r_squared,
            c_ch_probe: probe_c,
            c_ch_eq_mean: stats::mean(&eq_factors),
            points,
        });
    }
    Ok(fits)
}

/// Linearity experiment with CSV/SVG/manifest output.
pub fn run_linearity(cfg: &ExperimentConfig) -> Result<RunOutputs> {
    let fits = compute_linearity(cfg)?;
    let thetas = linearity_thetas(cfg.linearity_points);
    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut outputs = RunOutputs::default();

    let pts_path = cfg.out_dir.join("linearity.csv");
    let mut f = std::fs::File::create(&pts_path)?;
    writeln!(f, "sr_target,theta,c_in,c_out")?;
    for fit in &fits {
        for (j, &(c_in, c_out)) in fit.points.iter().enumerate() {
            writeln!(
                f,
                "{:.6},{:.9},{:.9},{:.9}",
                fit.sr_target, thetas[j], c_in, c_out
            )?;
        }
    }
    outputs.add(pts_path);

    let fit_path = cfg.out_dir.join("linearity_fit.csv");
    let mut f = std::fs::File::create(&fit_path)?;
    writeln!(
        f,
        "sr_target,slope,intercept,r_squared,c_ch_probe,c_ch_eq_mean,n_screens"
    )?;
    for fit in &fits {
        writeln!(
            f,
            "{:.6},{:.9},{:.9},{:.9},{:.9},{:.9},{}",
            fit.sr_target,
            fit.slope,
            fit.intercept,
            fit.r_squared,
            fit.c_ch_probe,
            fit.c_ch_eq_mean,
            cfg.realizations
        )?;
    }
    outputs.add(fit_path);

    let mut series = Vec::new();
    for fit in &fits {
        series.push(Series::scatter(
            &format!("SR {:.2} (slope {:.3})", fit.sr_target, fit.slope),
            fit.points.clone(),
        ));
    }
    series.push(Series::line("identity", vec![(0.0, 0.0), (1.0, 1.0)]));
    let plot = LinePlot {
        title: "Output vs input concurrence".into(),
        x_label: "input concurrence".into(),
        y_label: "output concurrence".into(),
        series,
    };
    let svg_path = cfg.out_dir.join("linearity.svg");
    plot.save(&svg_path)?;
    outputs.add(svg_path);
    outputs.add(cfg.write_manifest()?);

    for fit in &fits {
        outputs.summary.push(format!(
            "SR {:.2}: slope {:.4} (probe C_ch {:.4}), intercept {:+.4}, R² {:.5}",
            fit.sr_target, fit.slope, fit.c_ch_probe, fit.intercept, fit.r_squared
        ));
    }
    Ok(outputs)
}

/// Vector-mode crosstalk matrices and OAM spectra per SR target.
pub fn run_crosstalk(cfg: &ExperimentConfig) -> Result<RunOutputs> {
    cfg.validate()?;
    let rig = Rig::build(cfg)?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut outputs = RunOutputs::default();

    let ell = cfg.ell as i32;
    let spectrum_range = -(ell + 4)..=(ell + 4);
    let lg_plus = make_oam_mode(rig.grid, ell, cfg.w0)?;
    let lg_minus = make_oam_mode(rig.grid, -ell, cfg.w0)?;

    let matrix_path = cfg.out_dir.join("crosstalk.csv");
    let mut mf = std::fs::File::create(&matrix_path)?;
    writeln!(
        mf,
        "sr_target,sr_measured_mean,condition_number,input_mode,p_tm,p_te,p_hee,p_heo"
    )?;
    let spectra_path = cfg.out_dir.join("oam_spectra.csv");
    let mut sf = std::fs::File::create(&spectra_path)?;
    writeln!(sf, "sr_target,probe,ell,mean_power")?;

    for &sr in &cfg.sr_targets {
        let spec = rig.spec_for(cfg, sr)?;
        let screens: Vec<PhaseScreen> = (0..cfg.realizations)
            .into_par_iter()
            .map(|i| {
                Ok(generate_phase_screen(
                    &spec.with_seed(cfg.master_seed + i as u64),
                    &rig.grid,
                )?)
            })
            .collect::<Result<_>>()?;
        let xt = measure_crosstalk(&screens, cfg.ell, cfg.w0)?;
        for j in 0..4 {
            writeln!(
                mf,
                "{:.6},{:.6},{:.6},{},{:.9},{:.9},{:.9},{:.9}",
                sr,
                xt.sr_context.unwrap_or(f64::NAN),
                xt.condition_number,
                VectorModeBasis::LABELS[j],
                xt.t[(0, j)],
                xt.t[(1, j)],
                xt.t[(2, j)],
                xt.t[(3, j)]
            )?;
        }
        let mut m = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                m[i][j] = xt.t[(i, j)];
            }
        }
        let heat_path = cfg
            .out_dir
            .join(format!("crosstalk_sr{:03}.svg", (sr * 100.0) as u32));
        save_matrix_heatmap(
            &heat_path,
            &format!("Vector-mode crosstalk, target SR {sr:.2}"),
            &VectorModeBasis::LABELS,
            &m,
        )?;
        outputs.add(heat_path);

        // Mean OAM power spectra of the two pure-OAM probes.
        let n_ells = spectrum_range.clone().count();
        let mut acc_plus = vec![0.0f64; n_ells];
        let mut acc_minus = vec![0.0f64; n_ells];
        for screen in &screens {
            let pert_p = lg_plus.with_phase(&screen.phase);
            let pert_m = lg_minus.with_phase(&screen.phase);
            for (k, (l, c)) in oam_spectrum(&pert_p, cfg.w0, spectrum_range.clone())?
                .into_iter()
                .enumerate()
            {
                debug_assert_eq!(l, spectrum_range.clone().nth(k).unwrap());
                acc_plus[k] += c.norm_sqr();
            }
            for (k, (_, c)) in oam_spectrum(&pert_m, cfg.w0, spectrum_range.clone())?
                .into_iter()
                .enumerate()
            {
                acc_minus[k] += c.norm_sqr();
            }
        }
        let nscr = screens.len() as f64;
        for (k, l) in spectrum_range.clone().enumerate() {
            writeln!(sf, "{:.6},plusR,{},{:.9}", sr, l, acc_plus[k] / nscr)?;
            writeln!(sf, "{:.6},minusL,{},{:.9}", sr, l, acc_minus[k] / nscr)?;
        }
        let cats: Vec<String> = spectrum_range.clone().map(|l| l.to_string()).collect();
        let bars_path = cfg
            .out_dir
            .join(format!("oam_spectrum_sr{:03}.svg", (sr * 100.0) as u32));
        save_bar_chart(
            &bars_path,
            &format!("OAM spectra after turbulence, target SR {sr:.2}"),
            "OAM index",
            "mean power",
            &cats,
            &[
                (
                    "|+l, R> probe".to_string(),
                    acc_plus.iter().map(|v| v / nscr).collect(),
                ),
                (
                    "|-l, L> probe".to_string(),
                    acc_minus.iter().map(|v| v / nscr).collect(),
                ),
            ],
        )?;
        outputs.add(bars_path);
        outputs.summary.push(format!(
            "SR {:.2}: diag mean {:.3}, condition {:.2}",
            sr,
            (0..4).map(|i| xt.t[(i, i)]).sum::<f64>() / 4.0,
            xt.condition_number
        ));
    }
    outputs.add(matrix_path);
    outputs.add(spectra_path);
    outputs.add(cfg.write_manifest()?);
    Ok(outputs)
}

/// Encoded-vs-measured Strehl calibration table.
pub fn run_calibrate(cfg: &ExperimentConfig) -> Result<RunOutputs> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut outputs = RunOutputs::default();
    let rows = calibrate_screens(
        &cfg.sr_targets,
        cfg.realizations,
        &grid,
        cfg.w0,
        cfg.path_length,
        cfg.master_seed,
    )?;
    let csv_path = cfg.out_dir.join("calibration.csv");
    write_calibration_csv(&rows, std::fs::File::create(&csv_path)?)?;
    outputs.add(csv_path);

    let plot = LinePlot {
        title: "Phase-screen Strehl calibration".into(),
        x_label: "encoded SR".into(),
        y_label: "measured SR".into(),
        series: vec![
            Series::line("encoded = measured", vec![(0.0, 0.0), (1.0, 1.0)]),
            Series::scatter(
                "measured mean",
                rows.iter().map(|r| (r.target_sr, r.mean_sr)).collect(),
            ),
        ],
    };
    let svg_path = cfg.out_dir.join("calibration.svg");
    plot.save(&svg_path)?;
    outputs.add(svg_path);
    outputs.add(cfg.write_manifest()?);
    for r in &rows {
        outputs.summary.push(format!(
            "target {:.2}: measured {:.4} ± {:.4} over {} screens",
            r.target_sr, r.mean_sr, r.std_sr, r.n
        ));
    }
    Ok(outputs)
}

/// Four-mode image transmission through one characterized channel.
pub fn run_transmit(cfg: &ExperimentConfig) -> Result<RunOutputs> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut outputs = RunOutputs::default();

    let img = match &cfg.image {
        Some(path) => {
            let img = ImageFrame::load_pgm(path)
                .with_context(|| format!("loading image {}", path.display()))?;
            if img.width() * img.height() > 4_000_000 {
                bail!(
                    "image {}x{} exceeds the 4 Mpixel limit",
                    img.width(),
                    img.height()
                );
            }
            img
        }
        None => ImageFrame::test_pattern(128, 128)?,
    };

    let sr = cfg.sr_targets[0];
    let spec =
        TurbulenceSpec::from_target_strehl(sr, cfg.w0, cfg.path_length, &grid, cfg.master_seed)?;
    let mut screen = generate_phase_screen(&spec, &grid)?;
    let sr_measured = screen.record_strehl(cfg.w0)?;
    // Characterize the channel with the mode sorter, then decode against it.
    let crosstalk = measure_crosstalk(std::slice::from_ref(&screen), cfg.ell, cfg.w0)?;

    let realization = if cfg.per_slot_redraw {
        ChannelRealization::PerSlot {
            spec: &spec,
            grid: &grid,
            base_seed: cfg.master_seed,
        }
    } else {
        ChannelRealization::Fixed(&screen)
    };
    let (corrected_img, report) = transmit(
        &img,
        &realization,
        cfg.ell,
        cfg.w0,
        &crosstalk,
        cfg.threshold_frac,
        true,
    )?;
    let (raw_img, _) = transmit(
        &img,
        &realization,
        cfg.ell,
        cfg.w0,
        &crosstalk,
        cfg.threshold_frac,
        false,
    )?;

    for (name, frame) in [
        ("sent.pgm", &img),
        ("received_uncorrected.pgm", &raw_img),
        ("received_corrected.pgm", &corrected_img),
    ] {
        let p = cfg.out_dir.join(name);
        frame.save_pgm(&p, false)?;
        outputs.add(p);
    }

    let report_path = cfg.out_dir.join("link_report.csv");
    let mut f = std::fs::File::create(&report_path)?;
    writeln!(
        f,
        "sr,threshold,corrected,correlation,n_symbols,condition_number"
    )?;
    write_report_row(&mut f, sr_measured, cfg.threshold_frac, false, &report)?;
    write_report_row(&mut f, sr_measured, cfg.threshold_frac, true, &report)?;
    outputs.add(report_path);
    outputs.add(cfg.write_manifest()?);

    outputs.summary.push(format!(
        "SR {:.3}: correlation {:.4} uncorrected → {:.4} corrected ({} symbols, cond {:.2})",
        sr_measured,
        report.correlation_uncorrected,
        report.correlation_corrected,
        report.n_symbols,
        report.condition_number
    ));
    Ok(outputs)
}

fn write_report_row<W: Write>(
    w: &mut W,
    sr: f64,
    threshold: f64,
    corrected: bool,
    report: &LinkReport,
) -> Result<()> {
    writeln!(
        w,
        "{:.6},{:.6},{},{:.6},{},{:.6}",
        sr,
        threshold,
        corrected as u8,
        if corrected {
            report.correlation_corrected
        } else {
            report.correlation_uncorrected
        },
        report.n_symbols,
        report.condition_number
    )?;
    Ok(())
}

/// Single-channel tomography walkthrough: simulate the 36 projections of a
/// perturbed TM probe and reconstruct it both ways.
pub fn run_tomography_demo(cfg: &ExperimentConfig) -> Result<RunOutputs> {
    cfg.validate()?;
    let rig = Rig::build(cfg)?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut outputs = RunOutputs::default();

    let sr = cfg.sr_targets[0];
    let spec = rig.spec_for(cfg, sr)?;
    let screen = generate_phase_screen(&spec, &rig.grid)?;
    let out = propagate_hybrid(&rig.tm_field, &screen)?;
    let proj = rig.analyzer.filter(&out)?;
    let state = proj
        .normalized()
        .map_err(|e| anyhow!("channel extinguished the probe: {e}"))?;
    let truth = DensityMatrix::from_pure(&state)?;

    let record = simulate_measurements(
        &truth,
        &rig.set,
        cfg.noise,
        cfg.master_seed ^ 0x746f6d6f,
        1e4,
    )?;
    let meas_path = cfg.out_dir.join("measurements.csv");
    record.write_csv(&rig.set, std::fs::File::create(&meas_path)?)?;
    outputs.add(meas_path);

    let rho_lin = reconstruct_linear(&record, &rig.set)?;
    let mle = reconstruct_mle(&record, &rig.set, MleOptions::default())?;

    let rho_path = cfg.out_dir.join("rho_reconstructed.txt");
    mle.rho.write_text(std::fs::File::create(&rho_path)?)?;
    outputs.add(rho_path);

    let report_path = cfg.out_dir.join("report.txt");
    let mut f = std::fs::File::create(&report_path)?;
    writeln!(f, "{{")?;
    writeln!(f, "  \"sr_target\": {:.6},", sr)?;
    writeln!(
        f,
        "  \"sr_measured\": {:.6},",
        measure_strehl(&screen, cfg.w0)?
    )?;
    writeln!(f, "  \"survival\": {:.6},", proj.survival)?;
    writeln!(f, "  \"residual\": {:.6e},", mle.residual)?;
    writeln!(f, "  \"iterations\": {},", mle.iterations)?;
    writeln!(f, "  \"scale\": {:.6e},", mle.scale)?;
    writeln!(f, "  \"concurrence\": {:.9},", concurrence_mixed(&mle.rho)?)?;
    writeln!(
        f,
        "  \"fidelity_tm\": {:.9},",
        fidelity(&mle.rho, &rig.basis.tm)?
    )?;
    writeln!(
        f,
        "  \"trace_distance_linear\": {:.3e},",
        trace_distance(&mle.rho, &rho_lin)
    )?;
    writeln!(
        f,
        "  \"trace_distance_truth\": {:.3e}",
        trace_distance(&mle.rho, &truth)
    )?;
    writeln!(f, "}}")?;
    outputs.add(report_path);
    outputs.add(cfg.write_manifest()?);

    outputs.summary.push(format!(
        "reconstructed C {:.4}, F(TM) {:.4}, χ² {:.3e} after {} iterations",
        concurrence_mixed(&mle.rho)?,
        fidelity(&mle.rho, &rig.basis.tm)?,
        mle.residual,
        mle.iterations
    ));
    Ok(outputs)
}

/// Dispatch by experiment name.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutputs> {
    match cfg.name.as_str() {
        "sweep-sr" => run_sweep_sr(cfg),
        "linearity" => run_linearity(cfg),
        "crosstalk" => run_crosstalk(cfg),
        "calibrate" => run_calibrate(cfg),
        "transmit" => run_transmit(cfg),
        "tomography-demo" => run_tomography_demo(cfg),
        other => bail!("unknown experiment {other:?}"),
    }
}
