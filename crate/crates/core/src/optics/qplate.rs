//! The geometric-phase plate coupling spin and orbital angular momentum.
//!
//! In the linear-polarisation basis the plate acts pointwise as the Hermitian
//! matrix [[cos 2qφ, sin 2qφ], [sin 2qφ, −cos 2qφ]], which maps
//! |ℓ, L⟩ → |ℓ + 2q, R⟩ and |ℓ, R⟩ → |ℓ − 2q, L⟩.

use num_complex::Complex64;

use super::field::JonesField;
use crate::error::{Error, Result};

/// Plate parameters: half-integer topological charge `q` and a global
/// retardation phase offset `delta` (ideal half-wave conversion at δ = 0).
#[derive(Debug, Clone, Copy)]
pub struct QPlateParams {
    q: f64,
    pub delta: f64,
}

impl QPlateParams {
    pub fn new(q: f64) -> Result<Self> {
        let twice = 2.0 * q;
        if (twice - twice.round()).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "q must be a half-integer, got {q}"
            )));
        }
        Ok(Self { q, delta: 0.0 })
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn q(&self) -> f64 {
        self.q
    }
}

/// Pass a polarized field through a q-plate. Power is conserved pointwise.
pub fn apply_qplate(field: &JonesField, qp: &QPlateParams) -> Result<JonesField> {
    let grid = *field.grid();
    let (h, v) = field.linear_components();
    let n = grid.n;
    let mut h2 = h.clone();
    let mut v2 = v;
    let global = Complex64::from_polar(1.0, qp.delta);
    for i in 0..n {
        let y = grid.coordinate(i);
        for j in 0..n {
            let x = grid.coordinate(j);
            let phi = y.atan2(x);
            let (s, c) = (2.0 * qp.q * phi).sin_cos();
            let eh = h[(i, j)];
            let ev = v2[(i, j)];
            h2[(i, j)] = (eh * c + ev * s) * global;
            v2[(i, j)] = (eh * s - ev * c) * global;
        }
    }
    Ok(JonesField::from_linear_components(grid, h2, v2))
}
