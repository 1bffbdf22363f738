use crate::error::{Error, Result};

/// Sampling geometry shared by every field in a simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Samples per side; a power of two, at least 64.
    pub n: usize,
    /// Sample spacing in metres (or inverse metres for Fourier-plane grids).
    pub pitch: f64,
    /// Optical wavelength in metres.
    pub wavelength: f64,
}

impl GridSpec {
    pub fn new(n: usize, pitch: f64, wavelength: f64) -> Result<Self> {
        if n < 64 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n must be a power of two ≥ 64, got {n}"
            )));
        }
        if !(pitch > 0.0) || !pitch.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "pitch must be positive, got {pitch}"
            )));
        }
        if !(wavelength > 0.0) || !wavelength.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "wavelength must be positive, got {wavelength}"
            )));
        }
        Ok(Self {
            n,
            pitch,
            wavelength,
        })
    }

    /// Physical side length n·pitch.
    pub fn extent(&self) -> f64 {
        self.n as f64 * self.pitch
    }

    /// Centered physical coordinate of sample index `i` along either axis.
    /// The beam axis sits exactly on sample n/2.
    pub fn coordinate(&self, i: usize) -> f64 {
        (i as f64 - (self.n / 2) as f64) * self.pitch
    }

    /// Frequency-domain sample spacing 1/(n·pitch) of the conjugate grid.
    pub fn freq_pitch(&self) -> f64 {
        1.0 / (self.n as f64 * self.pitch)
    }

    /// Largest |ℓ| representable without azimuthal aliasing.
    pub fn max_ell(&self) -> i32 {
        (self.n / 8) as i32
    }

    /// Error unless `other` samples the same geometry (exact comparison; grids
    /// derived from the same spec are bit-identical).
    pub fn ensure_matches(&self, other: &GridSpec) -> Result<()> {
        if self.n != other.n || self.pitch != other.pitch {
            return Err(Error::GridMismatch(format!(
                "{}×{} @ {:e} vs {}×{} @ {:e}",
                self.n, self.n, self.pitch, other.n, other.n, other.pitch
            )));
        }
        Ok(())
    }

    /// Error unless a beam of waist `w0` fits the field of view (n·pitch ≥ 8·w0).
    pub fn ensure_fits_waist(&self, w0: f64) -> Result<()> {
        if !(w0 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "w0 must be positive, got {w0}"
            )));
        }
        if self.extent() < 8.0 * w0 {
            return Err(Error::InvalidGrid(format!(
                "field of view {:.3e} m is below 8·w0 = {:.3e} m",
                self.extent(),
                8.0 * w0
            )));
        }
        Ok(())
    }
}
