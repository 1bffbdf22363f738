//! Channel error correction by operator inversion, and the four-vector-mode
//! image link with crosstalk-corrected decoding.

use nalgebra::{Matrix2, Matrix4 as NaMatrix4, Vector4};
use num_complex::Complex64;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::channel::{ChannelOperator, SubspaceAnalyzer};
use crate::error::{Error, Result};
use crate::optics::{make_vector_mode, GridSpec, JonesField};
use crate::states::VectorModeBasis;
use crate::stats;
use crate::turbulence::{generate_phase_screen, measure_strehl, PhaseScreen, TurbulenceSpec};

type C = Complex64;

/// Polar form M = U·|M| with |M| = V·diag(λ₀, λ₁)·V† and λ₀ ≥ λ₁ ≥ 0 the
/// singular values.
#[derive(Debug, Clone)]
pub struct PolarDecomposition {
    pub unitary: Matrix2<C>,
    pub positive: Matrix2<C>,
    pub lambda0: f64,
    pub lambda1: f64,
}

fn svd2(m: &Matrix2<C>) -> Result<(Matrix2<C>, [f64; 2], Matrix2<C>)> {
    let svd = m.svd(true, true);
    let u = svd
        .u
        .ok_or_else(|| Error::NonPhysical("SVD produced no U".into()))?;
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::NonPhysical("SVD produced no V".into()))?;
    Ok((u, [svd.singular_values[0], svd.singular_values[1]], v_t))
}

/// Polar-decompose a channel operator. Errors on the (numerically) zero
/// matrix.
pub fn polar_decompose(m: &ChannelOperator) -> Result<PolarDecomposition> {
    let scale = m.m.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if scale < 1e-300 {
        return Err(Error::DegenerateChannel(
            "cannot polar-decompose the zero matrix".into(),
        ));
    }
    let (u_svd, s, v_t) = svd2(&m.m)?;
    let v = v_t.adjoint();
    let unitary = u_svd * v_t;
    let positive =
        v * Matrix2::new(
            C::new(s[0], 0.0),
            C::new(0.0, 0.0),
            C::new(0.0, 0.0),
            C::new(s[1], 0.0),
        ) * v_t;
    Ok(PolarDecomposition {
        unitary,
        positive,
        lambda0: s[0],
        lambda1: s[1],
    })
}

/// The conjugate filter M̃ = (λ₁|v₀⟩⟨v₀| + λ₀|v₁⟩⟨v₁|)·U† with M̃·M = λ₀λ₁·𝟙.
///
/// Errors when M is rank deficient (λ₁ < 1e-9·λ₀): such a channel cannot be
/// undone by filtering.
pub fn conjugate_filter(m: &ChannelOperator) -> Result<ChannelOperator> {
    let scale = m.m.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if scale < 1e-300 {
        return Err(Error::DegenerateChannel("zero channel operator".into()));
    }
    let (u_svd, s, v_t) = svd2(&m.m)?;
    if s[1] < 1e-9 * s[0] {
        return Err(Error::DegenerateChannel(format!(
            "rank-deficient operator (σ₁/σ₀ = {:.3e})",
            s[1] / s[0]
        )));
    }
    let v = v_t.adjoint();
    let swapped = Matrix2::new(
        C::new(s[1], 0.0),
        C::new(0.0, 0.0),
        C::new(0.0, 0.0),
        C::new(s[0], 0.0),
    );
    Ok(ChannelOperator {
        m: v * swapped * u_svd.adjoint(),
    })
}

/// Power-transfer matrix among the four vector modes: entry (i, j) is the
/// power detected in mode i when mode j is sent through the channel.
#[derive(Debug, Clone)]
pub struct CrosstalkMatrix {
    pub t: NaMatrix4<f64>,
    pub condition_number: f64,
    /// Mean measured Strehl ratio of the probed channel realizations.
    pub sr_context: Option<f64>,
}

impl CrosstalkMatrix {
    pub fn from_matrix(t: NaMatrix4<f64>, sr_context: Option<f64>) -> Result<Self> {
        if t.iter().any(|&v| v < -1e-9 || !v.is_finite()) {
            return Err(Error::NonPhysical("crosstalk entries must be ≥ 0".into()));
        }
        for j in 0..4 {
            let col: f64 = (0..4).map(|i| t[(i, j)]).sum();
            if col > 1.0 + 1e-6 {
                return Err(Error::NonPhysical(format!("column {j} sums to {col} > 1")));
            }
        }
        let sv = t.svd(false, false).singular_values;
        let condition_number = if sv[3] > 0.0 {
            sv[0] / sv[3]
        } else {
            f64::INFINITY
        };
        Ok(Self {
            t,
            condition_number,
            sr_context,
        })
    }

    pub fn identity() -> Self {
        Self {
            t: NaMatrix4::identity(),
            condition_number: 1.0,
            sr_context: Some(1.0),
        }
    }

    /// Inverse by truncated SVD: singular values below `rcond`·σ_max are
    /// discarded. Errors when nothing survives the truncation.
    pub fn regularized_inverse(&self, rcond: f64) -> Result<NaMatrix4<f64>> {
        let svd = self.t.svd(true, true);
        let smax = svd.singular_values[0];
        if !(smax > 0.0) {
            return Err(Error::DegenerateChannel("zero crosstalk matrix".into()));
        }
        let kept = svd
            .singular_values
            .iter()
            .filter(|&&s| s >= rcond * smax)
            .count();
        if kept == 0 {
            return Err(Error::DegenerateChannel(
                "crosstalk matrix is singular beyond regularization".into(),
            ));
        }
        let u = svd.u.as_ref().expect("svd with u");
        let v_t = svd.v_t.as_ref().expect("svd with v_t");
        let mut sinv = NaMatrix4::zeros();
        for k in 0..4 {
            let s = svd.singular_values[k];
            sinv[(k, k)] = if s >= rcond * smax { 1.0 / s } else { 0.0 };
        }
        Ok(v_t.transpose() * sinv * u.transpose())
    }

    /// CSV rows `input_mode, p_tm, p_te, p_hee, p_heo` (column-major sends).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "input_mode,p_tm,p_te,p_hee,p_heo")?;
        for j in 0..4 {
            writeln!(
                w,
                "{},{:.9e},{:.9e},{:.9e},{:.9e}",
                VectorModeBasis::LABELS[j],
                self.t[(0, j)],
                self.t[(1, j)],
                self.t[(2, j)],
                self.t[(3, j)]
            )?;
        }
        Ok(())
    }
}

/// Amplitude coupling matrix of one fixed screen: entry (i, j) is the complex
/// amplitude detected in vector mode i for a unit send of mode j.
fn mode_coupling_amplitudes(
    screen: &PhaseScreen,
    analyzer: &SubspaceAnalyzer,
    basis: &VectorModeBasis,
    inputs: &[JonesField; 4],
) -> Result<NaMatrix4<C>> {
    let mut a = NaMatrix4::zeros();
    for (j, field) in inputs.iter().enumerate() {
        let out = crate::channel::propagate_hybrid(field, screen)?;
        let proj = analyzer.filter(&out)?;
        for (i, state) in basis.states().iter().enumerate() {
            let amp: C = state
                .amplitudes()
                .iter()
                .zip(proj.amps.iter())
                .map(|(s, r)| s.conj() * r)
                .sum();
            a[(i, j)] = amp;
        }
    }
    Ok(a)
}

fn power_matrix(a: &NaMatrix4<C>) -> NaMatrix4<f64> {
    NaMatrix4::from_fn(|i, j| a[(i, j)].norm_sqr())
}

/// Send each vector mode through every screen and average the detected power
/// fractions.
pub fn measure_crosstalk(screens: &[PhaseScreen], ell: u32, w0: f64) -> Result<CrosstalkMatrix> {
    let first = screens
        .first()
        .ok_or_else(|| Error::InvalidParameter("need at least one screen".into()))?;
    let grid = first.grid;
    let analyzer = SubspaceAnalyzer::new(grid, ell, w0)?;
    let basis = VectorModeBasis::new(ell)?;
    let inputs = vector_mode_inputs(grid, &basis, w0)?;
    let mut acc = NaMatrix4::<f64>::zeros();
    let mut srs = Vec::with_capacity(screens.len());
    for screen in screens {
        let a = mode_coupling_amplitudes(screen, &analyzer, &basis, &inputs)?;
        acc += power_matrix(&a);
        srs.push(measure_strehl(screen, w0)?);
    }
    acc /= screens.len() as f64;
    CrosstalkMatrix::from_matrix(acc, Some(stats::mean(&srs)))
}

fn vector_mode_inputs(grid: GridSpec, basis: &VectorModeBasis, w0: f64) -> Result<[JonesField; 4]> {
    Ok([
        make_vector_mode(grid, &basis.tm, w0)?,
        make_vector_mode(grid, &basis.te, w0)?,
        make_vector_mode(grid, &basis.he_even, w0)?,
        make_vector_mode(grid, &basis.he_odd, w0)?,
    ])
}

/// A 4-bit grayscale image (pixel values 0–15).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageFrame {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl ImageFrame {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Image(format!(
                "degenerate dimensions {width}×{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::Image(format!(
                "{} pixels for a {width}×{height} frame",
                pixels.len()
            )));
        }
        if let Some(&bad) = pixels.iter().find(|&&v| v > 15) {
            return Err(Error::Image(format!("pixel value {bad} exceeds 15")));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    /// Deterministic test pattern covering all 16 gray levels.
    pub fn test_pattern(width: usize, height: usize) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let v =
                    (x * 16 / width.max(1) + y * 16 / height.max(1) + ((x / 8 + y / 8) % 2)) % 16;
                pixels.push(v as u8);
            }
        }
        Self::new(width, height, pixels)
    }

    /// Read a binary (P5) portable graymap. Maxval 15 loads natively; other
    /// maxvals are quantized down to 16 levels.
    pub fn read_pgm<R: BufRead>(mut r: R) -> Result<Self> {
        let mut header = Vec::new();
        let mut fields = Vec::new();
        // Header: magic, width, height, maxval, separated by whitespace with
        // optional '#' comments.
        while fields.len() < 4 {
            let mut byte = [0u8; 1];
            r.read_exact(&mut byte)?;
            match byte[0] {
                b'#' => {
                    let mut skip = Vec::new();
                    r.read_until(b'\n', &mut skip)?;
                }
                b if b.is_ascii_whitespace() => {
                    if !header.is_empty() {
                        fields.push(String::from_utf8_lossy(&header).into_owned());
                        header.clear();
                    }
                }
                b => header.push(b),
            }
        }
        if fields[0] != "P5" {
            return Err(Error::Image(format!("expected P5, got {:?}", fields[0])));
        }
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| Error::Image(format!("bad header field: {e}")))
        };
        let width = parse(&fields[1])?;
        let height = parse(&fields[2])?;
        let maxval = parse(&fields[3])?;
        if maxval == 0 || maxval > 255 {
            return Err(Error::Image(format!("unsupported maxval {maxval}")));
        }
        let mut raw = vec![0u8; width * height];
        r.read_exact(&mut raw)?;
        let pixels = if maxval == 15 {
            for &v in &raw {
                if v > 15 {
                    return Err(Error::Image(format!("sample {v} exceeds maxval 15")));
                }
            }
            raw
        } else {
            raw.iter()
                .map(|&v| ((v as usize * 16) / (maxval + 1)) as u8)
                .collect()
        };
        Self::new(width, height, pixels)
    }

    pub fn load_pgm<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::read_pgm(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    /// Write a binary portable graymap; `native` keeps the 4-bit maxval 15,
    /// otherwise levels are spread over 0–255.
    pub fn write_pgm<W: Write>(&self, mut w: W, native: bool) -> Result<()> {
        let maxval = if native { 15 } else { 255 };
        write!(w, "P5\n{} {}\n{}\n", self.width, self.height, maxval)?;
        if native {
            w.write_all(&self.pixels)?;
        } else {
            let scaled: Vec<u8> = self.pixels.iter().map(|&v| v * 17).collect();
            w.write_all(&scaled)?;
        }
        Ok(())
    }

    pub fn save_pgm<P: AsRef<Path>>(&self, path: P, native: bool) -> Result<()> {
        self.write_pgm(
            std::io::BufWriter::new(std::fs::File::create(path)?),
            native,
        )
    }
}

/// Per-slot on/off drive of the four multiplexed modes, ordered
/// [TM, TE, HEᵉ, HEᵒ].
pub type Symbol = [bool; 4];

/// Map each 4-bit pixel to one time slot: the most significant bit drives TM,
/// then TE, HEᵉ, and HEᵒ.
pub fn encode_image(img: &ImageFrame) -> Vec<Symbol> {
    img.pixels()
        .iter()
        .map(|&v| {
            [
                v & 0b1000 != 0,
                v & 0b0100 != 0,
                v & 0b0010 != 0,
                v & 0b0001 != 0,
            ]
        })
        .collect()
}

/// Inverse of [`encode_image`].
pub fn decode_image(symbols: &[Symbol], width: usize, height: usize) -> Result<ImageFrame> {
    if symbols.len() != width * height {
        return Err(Error::Image(format!(
            "{} symbols for a {width}×{height} frame",
            symbols.len()
        )));
    }
    let pixels = symbols
        .iter()
        .map(|s| {
            (u8::from(s[0]) << 3) | (u8::from(s[1]) << 2) | (u8::from(s[2]) << 1) | u8::from(s[3])
        })
        .collect();
    ImageFrame::new(width, height, pixels)
}

/// Channel realization policy for a frame transmission.
pub enum ChannelRealization<'a> {
    /// One fixed screen characterizes the whole frame.
    Fixed(&'a PhaseScreen),
    /// Redraw a screen per slot with seeds `base_seed + slot`.
    PerSlot {
        spec: &'a TurbulenceSpec,
        grid: &'a GridSpec,
        base_seed: u64,
    },
}

/// Link quality summary of one transmitted frame.
#[derive(Debug, Clone, Copy)]
pub struct LinkReport {
    pub correlation_uncorrected: f64,
    pub correlation_corrected: f64,
    /// Absolute decision threshold applied to the returned stream.
    pub threshold_used: f64,
    pub n_symbols: usize,
    pub condition_number: f64,
}

/// Regularization cutoff for crosstalk inversion (relative to σ_max).
pub const CROSSTALK_RCOND: f64 = 1e-3;

/// Transmit an image through the channel and decode it with and without
/// crosstalk correction.
///
/// Per slot the active modes are multiplexed as mutually incoherent carriers,
/// so the received power vector is the per-screen power-coupling matrix
/// applied to the bit vector. Correction left-multiplies by the regularized
/// inverse of the supplied (measured) crosstalk matrix; a matrix whose
/// condition number exceeds 1/[`CROSSTALK_RCOND`] is singular beyond
/// regularization and rejected. Both decoded streams are thresholded at
/// `threshold_frac` of their own frame-wide maximum. The returned frame is
/// the corrected one when `correct` is set, the raw one otherwise; the
/// report always carries both correlations.
pub fn transmit(
    img: &ImageFrame,
    channel: &ChannelRealization,
    ell: u32,
    w0: f64,
    crosstalk: &CrosstalkMatrix,
    threshold_frac: f64,
    correct: bool,
) -> Result<(ImageFrame, LinkReport)> {
    if !(threshold_frac > 0.0 && threshold_frac < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold must lie in (0, 1), got {threshold_frac}"
        )));
    }
    if !(crosstalk.condition_number <= 1.0 / CROSSTALK_RCOND) {
        return Err(Error::DegenerateChannel(format!(
            "crosstalk matrix is singular beyond regularization (condition number {:.3e})",
            crosstalk.condition_number
        )));
    }
    let inverse = crosstalk.regularized_inverse(CROSSTALK_RCOND)?;
    let symbols = encode_image(img);

    let grid = match channel {
        ChannelRealization::Fixed(s) => s.grid,
        ChannelRealization::PerSlot { grid, .. } => **grid,
    };
    let basis = VectorModeBasis::new(ell)?;
    let analyzer = SubspaceAnalyzer::new(grid, ell, w0)?;
    let inputs = vector_mode_inputs(grid, &basis, w0)?;

    let fixed_t = match channel {
        ChannelRealization::Fixed(screen) => Some(power_matrix(&mode_coupling_amplitudes(
            screen, &analyzer, &basis, &inputs,
        )?)),
        ChannelRealization::PerSlot { .. } => None,
    };

    let mut raw = Vec::with_capacity(symbols.len());
    let mut corrected = Vec::with_capacity(symbols.len());
    for (slot, sym) in symbols.iter().enumerate() {
        let t = match (&fixed_t, channel) {
            (Some(t), _) => *t,
            (
                None,
                ChannelRealization::PerSlot {
                    spec,
                    grid,
                    base_seed,
                },
            ) => {
                let screen = generate_phase_screen(&spec.with_seed(base_seed + slot as u64), grid)?;
                power_matrix(&mode_coupling_amplitudes(
                    &screen, &analyzer, &basis, &inputs,
                )?)
            }
            (None, ChannelRealization::Fixed(_)) => unreachable!(),
        };
        let bits = Vector4::new(
            f64::from(sym[0]),
            f64::from(sym[1]),
            f64::from(sym[2]),
            f64::from(sym[3]),
        );
        let received = t * bits;
        raw.push(received);
        corrected.push(inverse * received);
    }

    let decode = |stream: &[Vector4<f64>]| -> (ImageFrame, f64) {
        let max = stream
            .iter()
            .flat_map(|v| v.iter().cloned())
            .fold(0.0f64, f64::max);
        let thr = threshold_frac * max;
        let symbols: Vec<Symbol> = stream
            .iter()
            .map(|v| [v[0] > thr, v[1] > thr, v[2] > thr, v[3] > thr])
            .collect();
        let frame =
            decode_image(&symbols, img.width(), img.height()).expect("symbol count matches frame");
        (frame, thr)
    };

    let (frame_raw, thr_raw) = decode(&raw);
    let (frame_corr, thr_corr) = decode(&corrected);

    let report = LinkReport {
        correlation_uncorrected: correlation_coefficient(img, &frame_raw)?,
        correlation_corrected: correlation_coefficient(img, &frame_corr)?,
        threshold_used: if correct { thr_corr } else { thr_raw },
        n_symbols: symbols.len(),
        condition_number: crosstalk.condition_number,
    };
    let received = if correct { frame_corr } else { frame_raw };
    Ok((received, report))
}

/// Pearson correlation over raw pixel values. Errors on dimension mismatch
/// or a zero-variance image.
pub fn correlation_coefficient(a: &ImageFrame, b: &ImageFrame) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::Image(format!(
            "dimension mismatch: {}×{} vs {}×{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let xs: Vec<f64> = a.pixels().iter().map(|&v| v as f64).collect();
    let ys: Vec<f64> = b.pixels().iter().map(|&v| v as f64).collect();
    stats::pearson(&xs, &ys)
        .ok_or_else(|| Error::Image("zero-variance image in correlation".into()))
}
