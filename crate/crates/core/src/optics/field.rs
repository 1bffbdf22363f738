//! Sampled complex fields, the centered Fourier transform, and modal overlaps.

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};
use std::cell::RefCell;
use std::io::{Read, Write};
use std::path::Path;

use super::grid::GridSpec;
use crate::error::{Error, Result};

type C = Complex64;

/// A scalar complex field sampled on a [`GridSpec`].
#[derive(Debug, Clone)]
pub struct SampledField {
    pub grid: GridSpec,
    pub values: Array2<C>,
}

impl SampledField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            values: Array2::zeros((grid.n, grid.n)),
        }
    }

    /// Build a field by evaluating `f(x, y)` on the centered grid.
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(f64, f64) -> C) -> Self {
        let n = grid.n;
        let mut values = Array2::zeros((n, n));
        for i in 0..n {
            let y = grid.coordinate(i);
            for j in 0..n {
                let x = grid.coordinate(j);
                values[(i, j)] = f(x, y);
            }
        }
        Self { grid, values }
    }

    /// Total power Σ|E|²·pitch².
    pub fn power(&self) -> f64 {
        let w = self.grid.pitch * self.grid.pitch;
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * w
    }

    /// Rescale to unit power. Errors on a null field.
    pub fn normalize_power(&mut self) -> Result<()> {
        let p = self.power();
        if p < 1e-300 {
            return Err(Error::InvalidState("cannot normalize a null field".into()));
        }
        let s = C::new(1.0 / p.sqrt(), 0.0);
        self.values.mapv_inplace(|v| v * s);
        Ok(())
    }

    pub fn scaled(&self, s: C) -> Self {
        Self {
            grid: self.grid,
            values: self.values.mapv(|v| v * s),
        }
    }

    /// Pointwise multiplication by exp(i·phase).
    pub fn with_phase(&self, phase: &Array2<f64>) -> Self {
        let mut values = self.values.clone();
        ndarray::Zip::from(&mut values)
            .and(phase)
            .for_each(|v, &p| {
                *v *= C::from_polar(1.0, p);
            });
        Self {
            grid: self.grid,
            values,
        }
    }

    /// Plane-integral Σ E·pitch², i.e. the on-axis value of the far field.
    pub fn integral(&self) -> C {
        let w = self.grid.pitch * self.grid.pitch;
        self.values.iter().sum::<C>() * C::new(w, 0.0)
    }

    /// Amplitude at the beam axis (sample n/2, n/2).
    pub fn on_axis(&self) -> C {
        let n2 = self.grid.n / 2;
        self.values[(n2, n2)]
    }

    /// Save intensity |E|² as an 8-bit binary portable graymap.
    pub fn save_pgm<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let n = self.grid.n;
        let max = self.values.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
        let mut data = Vec::with_capacity(n * n);
        for v in self.values.iter() {
            let x = if max > 0.0 { v.norm_sqr() / max } else { 0.0 };
            data.push((x * 255.0).round() as u8);
        }
        let mut f = std::fs::File::create(path)?;
        write!(f, "P5\n{n} {n}\n255\n")?;
        f.write_all(&data)?;
        Ok(())
    }

    /// Serialize to the raw binary field format: 16-byte header
    /// (magic `CLFD`, u32 n, f64 pitch) then row-major (re, im) f64 pairs,
    /// all little-endian.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"CLFD")?;
        w.write_all(&(self.grid.n as u32).to_le_bytes())?;
        w.write_all(&self.grid.pitch.to_le_bytes())?;
        for v in self.values.iter() {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn save_binary<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        self.write_binary(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    /// Inverse of [`write_binary`]. The format does not carry the wavelength,
    /// so it must be supplied.
    pub fn read_binary<R: Read>(mut r: R, wavelength: f64) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"CLFD" {
            return Err(Error::Parse(format!("bad field magic {magic:?}")));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let n = u32::from_le_bytes(b4) as usize;
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let pitch = f64::from_le_bytes(b8);
        let grid = GridSpec::new(n, pitch, wavelength)?;
        let mut values = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                r.read_exact(&mut b8)?;
                let re = f64::from_le_bytes(b8);
                r.read_exact(&mut b8)?;
                let im = f64::from_le_bytes(b8);
                values[(i, j)] = C::new(re, im);
            }
        }
        Ok(Self { grid, values })
    }

    pub fn load_binary<P: AsRef<Path>>(path: P, wavelength: f64) -> Result<Self> {
        Self::read_binary(
            std::io::BufReader::new(std::fs::File::open(path)?),
            wavelength,
        )
    }
}

/// Modal overlap ⟨filter|field⟩ = Σ filter*·field·pitch².
///
/// For unit-power modes this is the projection amplitude; it equals the
/// on-axis far-field value of the product field filter*·field.
pub fn modal_overlap(field: &SampledField, filter: &SampledField) -> Result<C> {
    field.grid.ensure_matches(&filter.grid)?;
    let w = field.grid.pitch * field.grid.pitch;
    let mut acc = C::new(0.0, 0.0);
    for (a, b) in field.values.iter().zip(filter.values.iter()) {
        acc += b.conj() * a;
    }
    Ok(acc * C::new(w, 0.0))
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Unnormalized 2-D FFT over rows then columns.
pub(crate) fn fft2_inplace(values: &mut Array2<C>, direction: FftDirection) {
    let n = values.nrows();
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft(n, direction));
    // Rows are contiguous in standard layout.
    for mut row in values.rows_mut() {
        fft.process(row.as_slice_mut().expect("row must be contiguous"));
    }
    let mut t = values.t().as_standard_layout().into_owned();
    for mut row in t.rows_mut() {
        fft.process(row.as_slice_mut().expect("row must be contiguous"));
    }
    *values = t.t().as_standard_layout().into_owned();
}

/// Swap quadrants by n/2 in both axes. For the even n used here the forward
/// and inverse shifts coincide.
pub(crate) fn fftshift2(a: &Array2<C>) -> Array2<C> {
    let n = a.nrows();
    let h = n / 2;
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            out[((i + h) % n, (j + h) % n)] = a[(i, j)];
        }
    }
    out
}

/// Centered discrete Fourier transform of a field.
///
/// The output lives on the conjugate grid (pitch 1/(n·pitch)) with the zero
/// frequency at sample n/2 and is scaled by pitch², which conserves power
/// (Parseval) and makes the on-axis output equal Σ E·pitch².
pub fn far_field(field: &SampledField) -> SampledField {
    let n = field.grid.n;
    let mut values = fftshift2(&field.values);
    fft2_inplace(&mut values, FftDirection::Forward);
    let mut values = fftshift2(&values);
    let s = C::new(field.grid.pitch * field.grid.pitch, 0.0);
    values.mapv_inplace(|v| v * s);
    let grid = GridSpec {
        n,
        pitch: field.grid.freq_pitch(),
        wavelength: field.grid.wavelength,
    };
    SampledField { grid, values }
}

/// A pair of circular-polarisation components sampled on a common grid:
/// `right` carries |R⟩, `left` carries |L⟩.
#[derive(Debug, Clone)]
pub struct JonesField {
    pub right: SampledField,
    pub left: SampledField,
}

impl JonesField {
    pub fn new(right: SampledField, left: SampledField) -> Result<Self> {
        right.grid.ensure_matches(&left.grid)?;
        Ok(Self { right, left })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.right.grid
    }

    pub fn power(&self) -> f64 {
        self.right.power() + self.left.power()
    }

    /// Horizontal/vertical linear components:
    /// E_H = (E_R + E_L)/√2, E_V = i(E_L − E_R)/√2.
    ///
    /// Conventions: R = (H − iV)/√2, L = (H + iV)/√2.
    pub fn linear_components(&self) -> (Array2<C>, Array2<C>) {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let n = self.grid().n;
        let mut h = Array2::zeros((n, n));
        let mut v = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                let er = self.right.values[(i, j)];
                let el = self.left.values[(i, j)];
                h[(i, j)] = (er + el) * C::new(s, 0.0);
                v[(i, j)] = (el - er) * C::new(0.0, s);
            }
        }
        (h, v)
    }

    /// Inverse of [`linear_components`]:
    /// E_R = (E_H + iE_V)/√2, E_L = (E_H − iE_V)/√2.
    pub fn from_linear_components(grid: GridSpec, h: Array2<C>, v: Array2<C>) -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let n = grid.n;
        let mut right = Array2::zeros((n, n));
        let mut left = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                let eh = h[(i, j)];
                let ev = v[(i, j)];
                right[(i, j)] = (eh + C::new(0.0, 1.0) * ev) * C::new(s, 0.0);
                left[(i, j)] = (eh - C::new(0.0, 1.0) * ev) * C::new(s, 0.0);
            }
        }
        Self {
            right: SampledField {
                grid,
                values: right,
            },
            left: SampledField { grid, values: left },
        }
    }
}
