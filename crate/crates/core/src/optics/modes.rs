//! Laguerre–Gaussian realizations of the OAM kets and modal decomposition.
//!
//! The |ℓ⟩ kets are realized as LG modes with radial index p = 0 and a common
//! waist w0: amplitude ∝ (r√2/w0)^{|ℓ|}·exp(−r²/w0²)·exp(iℓφ), normalized to
//! unit power.

use num_complex::Complex64;

use super::field::{modal_overlap, JonesField, SampledField};
use super::grid::GridSpec;
use crate::error::{Error, Result};
use crate::states::{HybridState, VectorModeBasis};

type C = Complex64;

fn ensure_alias_safe(grid: &GridSpec, ell: i32) -> Result<()> {
    let bound = grid.max_ell();
    if ell.abs() > bound {
        return Err(Error::AliasingBound { ell, bound });
    }
    Ok(())
}

/// Unit-power LG(p = 0) mode with azimuthal index `ell` and waist `w0`.
pub fn make_oam_mode(grid: GridSpec, ell: i32, w0: f64) -> Result<SampledField> {
    ensure_alias_safe(&grid, ell)?;
    grid.ensure_fits_waist(w0)?;
    let k = ell.abs();
    let mut field = SampledField::from_fn(grid, |x, y| {
        let r = x.hypot(y);
        let radial = (r * std::f64::consts::SQRT_2 / w0).powi(k) * (-r * r / (w0 * w0)).exp();
        let phi = y.atan2(x);
        C::from_polar(radial, ell as f64 * phi)
    });
    field.normalize_power()?;
    Ok(field)
}

/// Realize a hybrid state as a polarized field: the |±ℓ⟩ kets become LG(±ℓ)
/// modes of waist `w0` and the amplitudes weight the circular components.
pub fn make_vector_mode(grid: GridSpec, state: &HybridState, w0: f64) -> Result<JonesField> {
    let lg_p = make_oam_mode(grid, state.ell() as i32, w0)?;
    let lg_m = make_oam_mode(grid, -(state.ell() as i32), w0)?;
    let n = grid.n;
    let mut right = SampledField::zeros(grid);
    let mut left = SampledField::zeros(grid);
    for i in 0..n {
        for j in 0..n {
            let up = lg_p.values[(i, j)];
            let um = lg_m.values[(i, j)];
            right.values[(i, j)] = state.amp_lr * up + state.amp_mr * um;
            left.values[(i, j)] = state.amp_ll * up + state.amp_ml * um;
        }
    }
    JonesField::new(right, left)
}

/// Precomputed LG(±ℓ) filters for repeated projections onto the |ℓ| subspace.
#[derive(Debug, Clone)]
pub struct ModeProjector {
    pub grid: GridSpec,
    pub ell: u32,
    pub w0: f64,
    lg_plus: SampledField,
    lg_minus: SampledField,
}

impl ModeProjector {
    pub fn new(grid: GridSpec, ell: u32, w0: f64) -> Result<Self> {
        if ell < 1 {
            return Err(Error::InvalidParameter(format!(
                "ell must be ≥ 1, got {ell}"
            )));
        }
        Ok(Self {
            grid,
            ell,
            w0,
            lg_plus: make_oam_mode(grid, ell as i32, w0)?,
            lg_minus: make_oam_mode(grid, -(ell as i32), w0)?,
        })
    }

    pub fn lg_plus(&self) -> &SampledField {
        &self.lg_plus
    }

    pub fn lg_minus(&self) -> &SampledField {
        &self.lg_minus
    }

    /// Raw projection amplitudes of a polarized field onto the four basis
    /// kets (|ℓ,R⟩, |ℓ,L⟩, |−ℓ,R⟩, |−ℓ,L⟩).
    pub fn project(&self, field: &JonesField) -> Result<[C; 4]> {
        self.grid.ensure_matches(field.grid())?;
        Ok([
            modal_overlap(&field.right, &self.lg_plus)?,
            modal_overlap(&field.left, &self.lg_plus)?,
            modal_overlap(&field.right, &self.lg_minus)?,
            modal_overlap(&field.left, &self.lg_minus)?,
        ])
    }
}

/// Power detected in each of TM/TE/HEᵉ/HEᵒ when `field` hits the numerical
/// vector-mode sorter.
pub fn vector_mode_project(
    field: &JonesField,
    basis: &VectorModeBasis,
    w0: f64,
) -> Result<[f64; 4]> {
    let amps = vector_mode_amplitudes(field, basis, w0)?;
    Ok([
        amps[0].norm_sqr(),
        amps[1].norm_sqr(),
        amps[2].norm_sqr(),
        amps[3].norm_sqr(),
    ])
}

/// Complex detection amplitudes ⟨mode|field⟩ for the four vector modes.
pub fn vector_mode_amplitudes(
    field: &JonesField,
    basis: &VectorModeBasis,
    w0: f64,
) -> Result<[C; 4]> {
    let ell = basis.tm.ell();
    let projector = ModeProjector::new(*field.grid(), ell, w0)?;
    let raw = projector.project(field)?;
    let mut amps = [C::new(0.0, 0.0); 4];
    for (k, state) in basis.states().iter().enumerate() {
        let s = state.amplitudes();
        amps[k] = s.iter().zip(raw.iter()).map(|(a, r)| a.conj() * r).sum();
    }
    Ok(amps)
}

/// Modal spectrum cℓ = ⟨LG(ℓ)|field⟩ over an inclusive range of OAM indices.
pub fn oam_spectrum(
    field: &SampledField,
    w0: f64,
    ell_range: std::ops::RangeInclusive<i32>,
) -> Result<Vec<(i32, C)>> {
    ensure_alias_safe(&field.grid, *ell_range.start())?;
    ensure_alias_safe(&field.grid, *ell_range.end())?;
    let mut out = Vec::new();
    for ell in ell_range {
        let filter = make_oam_mode(field.grid, ell, w0)?;
        out.push((ell, modal_overlap(field, &filter)?));
    }
    Ok(out)
}
