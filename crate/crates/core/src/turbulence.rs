//! Kolmogorov phase screens: synthesis by the FFT method with subharmonic
//! low-frequency compensation, Strehl-ratio theory and measurement, and
//! screen calibration.
//!
//! The phase power spectral density in cyclic spatial frequency f is
//!
//! Φ_φ(f) = 0.023·r₀^{−5/3}·exp(−(f/f_m)²)·(f² + f₀²)^{−11/6},
//!
//! with f_m = 5.92/(2π·l₀) the inner-scale rolloff and f₀ = 1/L₀ the outer
//! scale (f₀ = 0 for an unbounded inertial range). The constant 0.023 is
//! fixed by the structure function D(r) = 6.88·(r/r₀)^{5/3}.

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rustfft::FftDirection;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::optics::{make_oam_mode, GridSpec};
use crate::stats;

/// Subharmonic depth used by [`generate_phase_screen`]. Six levels keep the
/// low-frequency (tilt) deficit of the synthesized structure function under
/// ~7% at separations up to an eighth of the grid width.
pub const DEFAULT_SUBHARMONIC_LEVELS: usize = 6;

/// Physical description of a single-screen turbulent path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurbulenceSpec {
    /// Refractive-index structure parameter C_n² (m^(−2/3)); 0 disables
    /// turbulence entirely.
    pub cn2: f64,
    /// Path length z in metres.
    pub path_length: f64,
    /// Wavelength in metres.
    pub wavelength: f64,
    /// Beam radius of the fundamental mode, in metres.
    pub w0: f64,
    /// Inner scale l₀ in metres.
    pub inner_scale: f64,
    /// Outer scale L₀ in metres; `f64::INFINITY` for pure Kolmogorov.
    pub outer_scale: f64,
    /// Generation seed; a given (seed, spec, grid) fully determines a screen.
    pub seed: u64,
}

impl TurbulenceSpec {
    pub fn new(
        cn2: f64,
        path_length: f64,
        wavelength: f64,
        w0: f64,
        inner_scale: f64,
        outer_scale: f64,
        seed: u64,
    ) -> Result<Self> {
        if cn2 < 0.0 || !cn2.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "cn2 must be ≥ 0, got {cn2}"
            )));
        }
        for (name, v) in [
            ("path_length", path_length),
            ("wavelength", wavelength),
            ("w0", w0),
            ("inner_scale", inner_scale),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !(outer_scale > inner_scale) {
            return Err(Error::InvalidParameter(format!(
                "outer scale {outer_scale} must exceed inner scale {inner_scale}"
            )));
        }
        Ok(Self {
            cn2,
            path_length,
            wavelength,
            w0,
            inner_scale,
            outer_scale,
            seed,
        })
    }

    /// Spec whose encoded Strehl ratio equals `target_sr` for a beam of waist
    /// `w0`, with scales defaulted from the grid (l₀ = 2·pitch, L₀ = ∞).
    pub fn from_target_strehl(
        target_sr: f64,
        w0: f64,
        path_length: f64,
        grid: &GridSpec,
        seed: u64,
    ) -> Result<Self> {
        let ratio = ratio_for_strehl(target_sr)?;
        let r0 = if ratio == 0.0 {
            f64::INFINITY
        } else {
            w0 / ratio
        };
        Self::from_fried_parameter(r0, w0, path_length, grid, seed)
    }

    /// Spec with a prescribed Fried parameter (C_n² back-computed from it).
    pub fn from_fried_parameter(
        r0: f64,
        w0: f64,
        path_length: f64,
        grid: &GridSpec,
        seed: u64,
    ) -> Result<Self> {
        if !(r0 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "r0 must be positive, got {r0}"
            )));
        }
        let lambda = grid.wavelength;
        let cn2 = if r0.is_infinite() {
            0.0
        } else {
            lambda * lambda / (path_length * (r0 / 0.185).powf(5.0 / 3.0))
        };
        Self::new(
            cn2,
            path_length,
            lambda,
            w0,
            2.0 * grid.pitch,
            f64::INFINITY,
            seed,
        )
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Fried parameter r₀ = 0.185·(λ²/(C_n²·z))^(3/5); +∞ when C_n² = 0.
    pub fn fried_parameter(&self) -> f64 {
        if self.cn2 == 0.0 {
            return f64::INFINITY;
        }
        0.185 * (self.wavelength * self.wavelength / (self.cn2 * self.path_length)).powf(3.0 / 5.0)
    }

    /// The Strehl ratio this spec encodes for its beam waist.
    pub fn encoded_strehl(&self) -> f64 {
        let r0 = self.fried_parameter();
        if r0.is_infinite() {
            return 1.0;
        }
        strehl_theoretical(self.w0 / r0).expect("ratio is non-negative")
    }
}

/// Single-screen Strehl ratio model SR = 1/(1 + 6.88·(w₀/r₀)^(5/3)).
pub fn strehl_theoretical(w0_over_r0: f64) -> Result<f64> {
    if w0_over_r0 < 0.0 || !w0_over_r0.is_finite() && w0_over_r0 < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "w0/r0 must be ≥ 0, got {w0_over_r0}"
        )));
    }
    if w0_over_r0.is_infinite() {
        return Ok(0.0);
    }
    Ok(1.0 / (1.0 + 6.88 * w0_over_r0.powf(5.0 / 3.0)))
}

/// Quadratic structure-function variant SR = 1/(1 + 6.88·(w₀/r₀)²), provided
/// as a documented alternative only; [`strehl_theoretical`] is the model used
/// throughout.
pub fn strehl_quadratic(w0_over_r0: f64) -> Result<f64> {
    if w0_over_r0 < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "w0/r0 must be ≥ 0, got {w0_over_r0}"
        )));
    }
    Ok(1.0 / (1.0 + 6.88 * w0_over_r0 * w0_over_r0))
}

/// Invert [`strehl_theoretical`]: the w₀/r₀ ratio that encodes `sr`.
pub fn ratio_for_strehl(sr: f64) -> Result<f64> {
    if !(sr > 0.0 && sr <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "SR must lie in (0, 1], got {sr}"
        )));
    }
    Ok(((1.0 / sr - 1.0) / 6.88).powf(3.0 / 5.0))
}

/// A single random phase layer drawn from the Kolmogorov spectrum.
#[derive(Debug, Clone)]
pub struct PhaseScreen {
    pub grid: GridSpec,
    pub phase: Array2<f64>,
    pub spec: TurbulenceSpec,
    pub measured_sr: Option<f64>,
}

impl PhaseScreen {
    /// Measure the Strehl ratio seen by a waist-`w0` Gaussian and store it
    /// in `measured_sr`.
    pub fn record_strehl(&mut self, w0: f64) -> Result<f64> {
        let sr = measure_strehl(self, w0)?;
        self.measured_sr = Some(sr);
        Ok(sr)
    }

    /// Phase variance over the screen.
    pub fn variance(&self) -> f64 {
        let n = (self.grid.n * self.grid.n) as f64;
        let mean: f64 = self.phase.iter().sum::<f64>() / n;
        self.phase
            .iter()
            .map(|&p| (p - mean) * (p - mean))
            .sum::<f64>()
            / n
    }

    /// Write the cache format: magic `CLPS`, u32 n, f64 pitch, f64 r0,
    /// u64 seed, then row-major f64 phases, little-endian.
    pub fn write_cache<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"CLPS")?;
        w.write_all(&(self.grid.n as u32).to_le_bytes())?;
        w.write_all(&self.grid.pitch.to_le_bytes())?;
        w.write_all(&self.spec.fried_parameter().to_le_bytes())?;
        w.write_all(&self.spec.seed.to_le_bytes())?;
        for &p in self.phase.iter() {
            w.write_all(&p.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn save_cache<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        self.write_cache(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    /// Read a cached screen. The cache carries only (n, pitch, r₀, seed), so
    /// the remaining spec fields must be supplied.
    pub fn read_cache<R: Read>(
        mut r: R,
        wavelength: f64,
        w0: f64,
        path_length: f64,
    ) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"CLPS" {
            return Err(Error::Parse(format!("bad screen magic {magic:?}")));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let n = u32::from_le_bytes(b4) as usize;
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let pitch = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let r0 = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let seed = u64::from_le_bytes(b8);
        let grid = GridSpec::new(n, pitch, wavelength)?;
        let spec = TurbulenceSpec::from_fried_parameter(r0, w0, path_length, &grid, seed)?;
        let mut phase = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                r.read_exact(&mut b8)?;
                phase[(i, j)] = f64::from_le_bytes(b8);
            }
        }
        Ok(Self {
            grid,
            phase,
            spec,
            measured_sr: None,
        })
    }

    pub fn load_cache<P: AsRef<Path>>(
        path: P,
        wavelength: f64,
        w0: f64,
        path_length: f64,
    ) -> Result<Self> {
        Self::read_cache(
            std::io::BufReader::new(std::fs::File::open(path)?),
            wavelength,
            w0,
            path_length,
        )
    }
}

fn phase_psd(f: f64, r0: f64, inner: f64, outer: f64) -> f64 {
    let fm = 5.92 / (2.0 * std::f64::consts::PI * inner);
    let f0 = if outer.is_infinite() {
        0.0
    } else {
        1.0 / outer
    };
    let rolloff = (-(f / fm) * (f / fm)).exp();
    0.023 * r0.powf(-5.0 / 3.0) * rolloff * (f * f + f0 * f0).powf(-11.0 / 6.0)
}

/// Variance ∫Φ d²f and effective frequency √(∫Φ·f² / ∫Φ) of one frequency
/// cell. Near the origin the f^{-11/3} spectrum varies steeply across a
/// cell: sampling it at the cell centre (the plain FFT recipe) loses ~10% of
/// the structure function at every separation, while assigning the whole
/// cell variance to the centre frequency overweights the cell's tilt
/// contribution by up to 2×. Carrying the exact cell variance at the
/// spectrum-weighted effective frequency matches both the variance and the
/// small-separation structure of the cell.
fn cell_moments(
    fx: f64,
    fy: f64,
    df_x: f64,
    df_y: f64,
    r0: f64,
    inner: f64,
    outer: f64,
) -> (f64, f64) {
    const K: usize = 16;
    let mut var = 0.0;
    let mut second = 0.0;
    for a in 0..K {
        let x = fx + ((a as f64 + 0.5) / K as f64 - 0.5) * df_x;
        for b in 0..K {
            let y = fy + ((b as f64 + 0.5) / K as f64 - 0.5) * df_y;
            let f2 = x * x + y * y;
            let psd = phase_psd(f2.sqrt(), r0, inner, outer);
            var += psd;
            second += psd * f2;
        }
    }
    let w = df_x * df_y / (K * K) as f64;
    let f_eff = if var > 0.0 {
        (second / var).sqrt()
    } else {
        fx.hypot(fy)
    };
    (var * w, f_eff)
}

/// Cells within this index distance of the origin are carried as free modes
/// with exact cell moments; farther out the centre-point spectrum value is
/// accurate to ≪1%.
const EXACT_CELL_RADIUS: f64 = 8.0;

/// A single low-frequency mode evaluated directly on the grid.
struct FreeMode {
    fx: f64,
    fy: f64,
    coeff: Complex64,
}

/// Draw a phase screen with the default subharmonic depth.
pub fn generate_phase_screen(spec: &TurbulenceSpec, grid: &GridSpec) -> Result<PhaseScreen> {
    generate_phase_screen_with(spec, grid, DEFAULT_SUBHARMONIC_LEVELS)
}

/// Draw a phase screen: complex Gaussian white noise is shaped by the phase
/// spectrum and inverse-transformed; `subharmonic_levels` 3×3 low-frequency
/// layers restore the tilt content the FFT grid cannot represent. The result
/// is deterministic in (spec, grid, levels) and has zero mean.
pub fn generate_phase_screen_with(
    spec: &TurbulenceSpec,
    grid: &GridSpec,
    subharmonic_levels: usize,
) -> Result<PhaseScreen> {
    let n = grid.n;
    let r0 = spec.fried_parameter();
    if r0.is_infinite() {
        return Ok(PhaseScreen {
            grid: *grid,
            phase: Array2::zeros((n, n)),
            spec: *spec,
            measured_sr: None,
        });
    }

    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let df = grid.freq_pitch();
    let (l0, big_l0) = (spec.inner_scale, spec.outer_scale);

    // FFT portion: coefficients in FFT index order with the centre-point
    // spectrum. The DC cell and the steep inner region are left to the free
    // modes below.
    let inner_lattice =
        |kx: f64, ky: f64| kx.abs() <= EXACT_CELL_RADIUS && ky.abs() <= EXACT_CELL_RADIUS;
    let mut coeffs: Array2<Complex64> = Array2::zeros((n, n));
    for i in 0..n {
        let ky = fft_frequency(i, n);
        let fy = ky * df;
        for j in 0..n {
            let kx = fft_frequency(j, n);
            let fx = kx * df;
            if inner_lattice(kx, ky) {
                continue;
            }
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            let amp = (phase_psd(fx.hypot(fy), r0, l0, big_l0)).sqrt() * df;
            coeffs[(i, j)] = Complex64::new(a, b) * amp;
        }
    }
    let mut spectrum = coeffs;
    crate::optics::fft2_inplace(&mut spectrum, FftDirection::Inverse);
    let mut phase: Array2<f64> = spectrum.mapv(|v| v.re);

    // Free modes: the inner lattice cells and the subharmonic 3×3 levels that
    // telescope into the DC cell, each carrying its exact cell variance at
    // its effective frequency.
    let mut modes: Vec<FreeMode> = Vec::new();
    let mut push_mode = |rng: &mut ChaCha12Rng, fx: f64, fy: f64, dfx: f64, dfy: f64| {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        let (var, f_eff) = cell_moments(fx, fy, dfx, dfy, r0, l0, big_l0);
        let f_c = fx.hypot(fy);
        let scale = if f_c > 0.0 { f_eff / f_c } else { 1.0 };
        modes.push(FreeMode {
            fx: fx * scale,
            fy: fy * scale,
            coeff: Complex64::new(a, b) * var.sqrt(),
        });
    };
    let k_max = EXACT_CELL_RADIUS as i32;
    for ky in -k_max..=k_max {
        for kx in -k_max..=k_max {
            if kx == 0 && ky == 0 {
                continue;
            }
            push_mode(&mut rng, kx as f64 * df, ky as f64 * df, df, df);
        }
    }
    for level in 1..=subharmonic_levels {
        let dfp = df / 3f64.powi(level as i32);
        for di in -1i32..=1 {
            for dj in -1i32..=1 {
                if di == 0 && dj == 0 {
                    continue;
                }
                push_mode(&mut rng, dj as f64 * dfp, di as f64 * dfp, dfp, dfp);
            }
        }
    }

    // Accumulate the free modes as outer products of 1-D phasors over the
    // centered grid coordinates. Split real/imaginary parts so the inner
    // loop vectorizes.
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut row_re = vec![0.0f64; n];
    let mut row_im = vec![0.0f64; n];
    for mode in &modes {
        for j in 0..n {
            let (s, c) = (two_pi * mode.fx * grid.coordinate(j)).sin_cos();
            row_re[j] = c;
            row_im[j] = s;
        }
        for i in 0..n {
            let (s, c) = (two_pi * mode.fy * grid.coordinate(i)).sin_cos();
            let ci = mode.coeff * Complex64::new(c, s);
            let (a, b) = (ci.re, ci.im);
            let line = phase.row_mut(i);
            let line = line.into_slice().expect("contiguous row");
            for j in 0..n {
                // Re[ci · e^{2πi fx x_j}] accumulated in place.
                line[j] += a * row_re[j] - b * row_im[j];
            }
        }
    }

    let mean = phase.iter().sum::<f64>() / (n * n) as f64;
    phase.mapv_inplace(|p| p - mean);

    Ok(PhaseScreen {
        grid: *grid,
        phase,
        spec: *spec,
        measured_sr: None,
    })
}

fn fft_frequency(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

/// Strehl ratio of a single screen: the ratio of on-axis far-field intensity
/// of a waist-`w0` Gaussian with and without the screen applied. Bounded by 1
/// for any pure phase screen.
pub fn measure_strehl(screen: &PhaseScreen, w0: f64) -> Result<f64> {
    let gauss = make_oam_mode(screen.grid, 0, w0)?;
    let clean: Complex64 = gauss.values.iter().sum();
    let mut aberrated = Complex64::new(0.0, 0.0);
    for (v, &p) in gauss.values.iter().zip(screen.phase.iter()) {
        aberrated += v * Complex64::from_polar(1.0, p);
    }
    Ok(aberrated.norm_sqr() / clean.norm_sqr())
}

/// One row of a screen-calibration table.
#[derive(Debug, Clone, Copy)]
pub struct CalibrationRow {
    pub target_sr: f64,
    pub mean_sr: f64,
    pub std_sr: f64,
    pub n: usize,
}

/// Monte Carlo calibration of encoded vs measured Strehl ratio.
///
/// For each target the matching w₀/r₀ is solved, `n_realizations` screens are
/// generated with seeds `master_seed + i`, and the measured SR statistics are
/// recorded.
pub fn calibrate_screens(
    targets: &[f64],
    n_realizations: usize,
    grid: &GridSpec,
    w0: f64,
    path_length: f64,
    master_seed: u64,
) -> Result<Vec<CalibrationRow>> {
    if n_realizations == 0 {
        return Err(Error::InvalidParameter(
            "need at least one realization".into(),
        ));
    }
    let mut rows = Vec::with_capacity(targets.len());
    for &target in targets {
        let spec = TurbulenceSpec::from_target_strehl(target, w0, path_length, grid, 0)?;
        let mut srs = Vec::with_capacity(n_realizations);
        for i in 0..n_realizations {
            let screen = generate_phase_screen(&spec.with_seed(master_seed + i as u64), grid)?;
            srs.push(measure_strehl(&screen, w0)?);
        }
        rows.push(CalibrationRow {
            target_sr: target,
            mean_sr: stats::mean(&srs),
            std_sr: stats::std_dev(&srs),
            n: n_realizations,
        });
    }
    Ok(rows)
}

/// CSV columns: `target_sr, mean_sr, std_sr, n`.
pub fn write_calibration_csv<W: Write>(rows: &[CalibrationRow], mut w: W) -> Result<()> {
    writeln!(w, "target_sr,mean_sr,std_sr,n")?;
    for r in rows {
        writeln!(
            w,
            "{:.6},{:.6},{:.6},{}",
            r.target_sr, r.mean_sr, r.std_sr, r.n
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec {
        let w0 = 1e-2;
        GridSpec::new(128, 16.0 * w0 / 128.0, 633e-9).unwrap()
    }

    const W0: f64 = 1e-2;
    const Z: f64 = 1000.0;

    #[test]
    fn fried_parameter_reference_value() {
        let g = grid();
        let spec =
            TurbulenceSpec::new(1e-14, Z, 633e-9, W0, 2.0 * g.pitch, f64::INFINITY, 0).unwrap();
        let r0 = spec.fried_parameter();
        assert!((r0 - 0.0269).abs() < 2e-4, "r0 = {r0}");
    }

    #[test]
    fn fried_parameter_power_law() {
        let g = grid();
        let base =
            TurbulenceSpec::new(1e-14, Z, 633e-9, W0, 2.0 * g.pitch, f64::INFINITY, 0).unwrap();
        let eight =
            TurbulenceSpec::new(8e-14, Z, 633e-9, W0, 2.0 * g.pitch, f64::INFINITY, 0).unwrap();
        let ratio = eight.fried_parameter() / base.fried_parameter();
        assert!((ratio - 8f64.powf(-0.6)).abs() < 1e-12, "ratio {ratio}");
        assert!((ratio - 0.2872).abs() < 1e-4);
    }

    #[test]
    fn zero_cn2_is_the_identity_channel() {
        let g = grid();
        let spec =
            TurbulenceSpec::new(0.0, Z, 633e-9, W0, 2.0 * g.pitch, f64::INFINITY, 0).unwrap();
        assert!(spec.fried_parameter().is_infinite());
        let screen = generate_phase_screen(&spec, &g).unwrap();
        assert!(screen.variance() == 0.0);
        assert!((measure_strehl(&screen, W0).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn strehl_model_values() {
        assert!((strehl_theoretical(0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((strehl_theoretical(1.0).unwrap() - 1.0 / 7.88).abs() < 1e-12);
        assert!(strehl_theoretical(-0.1).is_err());
        assert!((strehl_quadratic(1.0).unwrap() - 1.0 / 7.88).abs() < 1e-12);
    }

    #[test]
    fn strehl_model_is_monotone() {
        let mut prev = 2.0;
        for k in 0..100 {
            let ratio = 0.05 * k as f64;
            let sr = strehl_theoretical(ratio).unwrap();
            assert!(sr < prev || k == 0);
            prev = sr;
        }
    }

    #[test]
    fn ratio_inversion_round_trip() {
        for k in 1..=40 {
            let sr = k as f64 / 40.0;
            let ratio = ratio_for_strehl(sr).unwrap();
            let back = strehl_theoretical(ratio).unwrap();
            assert!((back - sr).abs() < 1e-9, "sr {sr} → {back}");
        }
        assert!(ratio_for_strehl(0.0).is_err());
        assert!(ratio_for_strehl(1.2).is_err());
    }

    #[test]
    fn screens_are_deterministic() {
        let g = grid();
        let spec = TurbulenceSpec::from_target_strehl(0.5, W0, Z, &g, 42).unwrap();
        let a = generate_phase_screen(&spec, &g).unwrap();
        let b = generate_phase_screen(&spec, &g).unwrap();
        assert_eq!(a.phase, b.phase);
        let c = generate_phase_screen(&spec.with_seed(43), &g).unwrap();
        assert_ne!(a.phase, c.phase);
    }

    #[test]
    fn stronger_turbulence_means_more_variance_and_less_strehl() {
        let g = grid();
        let weak = TurbulenceSpec::from_target_strehl(0.9, W0, Z, &g, 7).unwrap();
        let strong = TurbulenceSpec::from_target_strehl(0.3, W0, Z, &g, 7).unwrap();
        let mut var_w = 0.0;
        let mut var_s = 0.0;
        let mut sr_w = 0.0;
        let mut sr_s = 0.0;
        for i in 0..20 {
            let a = generate_phase_screen(&weak.with_seed(100 + i), &g).unwrap();
            let b = generate_phase_screen(&strong.with_seed(100 + i), &g).unwrap();
            var_w += a.variance();
            var_s += b.variance();
            sr_w += measure_strehl(&a, W0).unwrap();
            sr_s += measure_strehl(&b, W0).unwrap();
        }
        assert!(var_s > var_w, "variance {var_s} !> {var_w}");
        assert!(sr_w > sr_s, "strehl {sr_w} !> {sr_s}");
    }

    #[test]
    fn structure_function_tracks_kolmogorov() {
        // Light version of the ensemble oracle: D(r) against 6.88·(r/r0)^{5/3}
        // at two mid-band separations, 25% tolerance at 80 screens.
        let g = grid();
        let r0 = 8.0 * g.pitch;
        let spec = TurbulenceSpec::from_fried_parameter(r0, W0, Z, &g, 0).unwrap();
        let n = g.n;
        let seps = [6usize, 12];
        let mut acc = [0.0f64; 2];
        let mut cnt = [0usize; 2];
        let screens = 80;
        for s in 0..screens {
            let screen = generate_phase_screen(&spec.with_seed(5000 + s), &g).unwrap();
            for (k, &dr) in seps.iter().enumerate() {
                for i in 0..n {
                    for j in 0..(n - dr) {
                        let d = screen.phase[(i, j + dr)] - screen.phase[(i, j)];
                        acc[k] += d * d;
                        cnt[k] += 1;
                    }
                }
            }
        }
        for (k, &dr) in seps.iter().enumerate() {
            let measured = acc[k] / cnt[k] as f64;
            let r = dr as f64 * g.pitch;
            let expected = 6.88 * (r / r0).powf(5.0 / 3.0);
            let rel = (measured - expected).abs() / expected;
            assert!(
                rel < 0.25,
                "D({dr} px): {measured:.3} vs {expected:.3} (rel {rel:.3})"
            );
        }
    }

    #[test]
    fn calibration_covers_targets() {
        // Statistical check at unit-test scale: 120 screens keep the standard
        // error of the mean near 0.02.
        let g = grid();
        let rows = calibrate_screens(&[1.0, 0.5], 120, &g, W0, Z, 11).unwrap();
        assert!((rows[0].mean_sr - 1.0).abs() < 1e-9);
        assert!(rows[0].std_sr == 0.0);
        assert!(
            (rows[1].mean_sr - 0.5).abs() < 0.08,
            "mean {}",
            rows[1].mean_sr
        );
        assert!(rows[0].mean_sr > rows[1].mean_sr);
        assert!(calibrate_screens(&[1.5], 5, &g, W0, Z, 0).is_err());
    }

    #[test]
    fn cache_round_trip_is_bit_exact() {
        let g = grid();
        let spec = TurbulenceSpec::from_target_strehl(0.6, W0, Z, &g, 99).unwrap();
        let screen = generate_phase_screen(&spec, &g).unwrap();
        let mut buf = Vec::new();
        screen.write_cache(&mut buf).unwrap();
        let back = PhaseScreen::read_cache(&buf[..], g.wavelength, W0, Z).unwrap();
        assert_eq!(screen.phase, back.phase);
        assert_eq!(back.spec.seed, 99);
        let r0_rel =
            (back.spec.fried_parameter() - spec.fried_parameter()).abs() / spec.fried_parameter();
        assert!(r0_rel < 1e-12);
    }

    #[test]
    fn screen_mean_is_zero() {
        let g = grid();
        let spec = TurbulenceSpec::from_target_strehl(0.4, W0, Z, &g, 3).unwrap();
        let screen = generate_phase_screen(&spec, &g).unwrap();
        let mean = screen.phase.iter().sum::<f64>() / (g.n * g.n) as f64;
        assert!(mean.abs() < 1e-12);
    }
}
