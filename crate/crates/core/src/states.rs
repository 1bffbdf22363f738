//! Exact finite-dimensional representations of hybrid OAM⊗polarisation qubit
//! pairs, together with the entanglement and similarity measures used
//! throughout the crate.
//!
//! The ordered basis is fixed everywhere as
//! (|ℓ,R⟩, |ℓ,L⟩, |−ℓ,R⟩, |−ℓ,L⟩): OAM index slow, polarisation fast.

use nalgebra::{Matrix2, Matrix4, Vector4};
use num_complex::Complex64;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Normalization gate applied to user-supplied states.
pub const NORM_TOLERANCE: f64 = 1e-6;
/// Physicality tolerance for density matrices.
pub const PHYSICAL_TOLERANCE: f64 = 1e-10;

type C = Complex64;

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

/// Pauli matrix σ_i for i ∈ 0..=3 (σ₀ = identity).
pub fn pauli(i: usize) -> Matrix2<C> {
    match i {
        0 => Matrix2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)),
        1 => Matrix2::new(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)),
        2 => Matrix2::new(c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)),
        3 => Matrix2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)),
        _ => panic!("pauli index must be 0..=3, got {i}"),
    }
}

/// Two-qubit Pauli product σ_n ⊗ σ_m with n on the OAM factor (slow index).
pub fn pauli_product(n: usize, m: usize) -> Matrix4<C> {
    pauli(n).kronecker(&pauli(m))
}

/// A pure hybrid state over (|ℓ,R⟩, |ℓ,L⟩, |−ℓ,R⟩, |−ℓ,L⟩).
///
/// The amplitudes play the roles α = `amp_lr`, γ = `amp_ll`, τ = `amp_mr`,
/// β = `amp_ml` of the general hybrid qubit pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridState {
    pub amp_lr: C,
    pub amp_ll: C,
    pub amp_mr: C,
    pub amp_ml: C,
    ell: u32,
}

impl HybridState {
    /// Build a state from raw amplitudes in basis order. `ell` must be ≥ 1.
    pub fn new(ell: u32, amps: [C; 4]) -> Result<Self> {
        if ell < 1 {
            return Err(Error::InvalidState(format!("ell must be ≥ 1, got {ell}")));
        }
        Ok(Self {
            amp_lr: amps[0],
            amp_ll: amps[1],
            amp_mr: amps[2],
            amp_ml: amps[3],
            ell,
        })
    }

    /// Build and normalize in one step; errors on a null vector.
    pub fn normalized(ell: u32, amps: [C; 4]) -> Result<Self> {
        let mut s = Self::new(ell, amps)?;
        s.normalize()?;
        Ok(s)
    }

    /// State α|ℓ,R⟩ + β|−ℓ,L⟩ (the γ = τ = 0 family swept in the
    /// variable-concurrence experiments).
    pub fn weighted(ell: u32, alpha: C, beta: C) -> Result<Self> {
        Self::new(ell, [alpha, c(0.0, 0.0), c(0.0, 0.0), beta])
    }

    pub fn ell(&self) -> u32 {
        self.ell
    }

    pub fn amplitudes(&self) -> [C; 4] {
        [self.amp_lr, self.amp_ll, self.amp_mr, self.amp_ml]
    }

    pub fn as_vector(&self) -> Vector4<C> {
        Vector4::new(self.amp_lr, self.amp_ll, self.amp_mr, self.amp_ml)
    }

    /// Σ|amp|².
    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes().iter().map(|a| a.norm_sqr()).sum()
    }

    /// Rescale to unit norm. Errors on (numerically) null states.
    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm_sqr().sqrt();
        if n < 1e-150 {
            return Err(Error::InvalidState("cannot normalize a null state".into()));
        }
        let inv = 1.0 / n;
        self.amp_lr *= inv;
        self.amp_ll *= inv;
        self.amp_mr *= inv;
        self.amp_ml *= inv;
        Ok(())
    }

    /// Inner product ⟨self|other⟩.
    pub fn inner(&self, other: &Self) -> C {
        self.amplitudes()
            .iter()
            .zip(other.amplitudes().iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    fn check_normalized(&self) -> Result<()> {
        let dev = (self.norm_sqr() - 1.0).abs();
        if dev > NORM_TOLERANCE {
            return Err(Error::NotNormalized { deviation: dev });
        }
        Ok(())
    }

    /// Serialize to the plain-text interchange format.
    pub fn to_text(&self) -> String {
        let mut out = format!("hybridstate ell={}\n", self.ell);
        for a in self.amplitudes() {
            out.push_str(&format!("{:.17e} {:.17e}\n", a.re, a.im));
        }
        out
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_text().as_bytes())?;
        Ok(())
    }

    /// Parse the plain-text interchange format.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty input".into()))?;
        let header = header.trim();
        let ell = header
            .strip_prefix("hybridstate ell=")
            .ok_or_else(|| Error::Parse(format!("bad header: {header:?}")))?
            .parse::<u32>()
            .map_err(|e| Error::Parse(format!("bad ell: {e}")))?;
        let mut amps = [c(0.0, 0.0); 4];
        for a in amps.iter_mut() {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse("truncated state".into()))?;
            *a = parse_complex_line(line)?;
        }
        Self::new(ell, amps)
    }

    pub fn read_text<R: BufRead>(mut r: R) -> Result<Self> {
        let mut text = String::new();
        r.read_to_string(&mut text)?;
        Self::from_text(&text)
    }
}

fn parse_complex_line(line: &str) -> Result<C> {
    let mut it = line.split_whitespace();
    let re = it
        .next()
        .ok_or_else(|| Error::Parse("missing real part".into()))?
        .parse::<f64>()
        .map_err(|e| Error::Parse(format!("bad float: {e}")))?;
    let im = it
        .next()
        .ok_or_else(|| Error::Parse("missing imaginary part".into()))?
        .parse::<f64>()
        .map_err(|e| Error::Parse(format!("bad float: {e}")))?;
    Ok(c(re, im))
}

/// The four vector vortex modes of the |ℓ| subspace, also known as the
/// optical fibre modes TM, TE, HEᵉ, HEᵒ. They form an orthonormal,
/// Bell-like basis of the hybrid space.
#[derive(Debug, Clone, Copy)]
pub struct VectorModeBasis {
    pub tm: HybridState,
    pub te: HybridState,
    pub he_even: HybridState,
    pub he_odd: HybridState,
}

impl VectorModeBasis {
    pub fn new(ell: u32) -> Result<Self> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let z = c(0.0, 0.0);
        let p = c(s, 0.0);
        let m = c(-s, 0.0);
        Ok(Self {
            // TM = (|ℓ,R⟩ + |−ℓ,L⟩)/√2 — the maximally entangled probe.
            tm: HybridState::new(ell, [p, z, z, p])?,
            // TE = (|ℓ,R⟩ − |−ℓ,L⟩)/√2
            te: HybridState::new(ell, [p, z, z, m])?,
            // HEᵉ = (|ℓ,L⟩ + |−ℓ,R⟩)/√2
            he_even: HybridState::new(ell, [z, p, p, z])?,
            // HEᵒ = (|ℓ,L⟩ − |−ℓ,R⟩)/√2
            he_odd: HybridState::new(ell, [z, p, m, z])?,
        })
    }

    pub fn states(&self) -> [&HybridState; 4] {
        [&self.tm, &self.te, &self.he_even, &self.he_odd]
    }

    pub const LABELS: [&'static str; 4] = ["TM", "TE", "HEe", "HEo"];
}

/// Concurrence of a normalized pure hybrid state: 2|αβ − γτ|.
///
/// Inputs whose norm deviates from 1 by more than [`NORM_TOLERANCE`] are
/// rejected.
pub fn concurrence_pure(state: &HybridState) -> Result<f64> {
    state.check_normalized()?;
    let v = 2.0 * (state.amp_lr * state.amp_ml - state.amp_ll * state.amp_mr).norm();
    Ok(v.min(1.0))
}

/// A 4×4 Hermitian, positive semi-definite, unit-trace operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: Matrix4<C>,
}

impl DensityMatrix {
    /// Validate and wrap a matrix. Hermiticity and trace must hold to
    /// [`PHYSICAL_TOLERANCE`]; eigenvalues may undershoot zero by the same
    /// amount.
    pub fn from_matrix(m: Matrix4<C>) -> Result<Self> {
        let herm_dev = hermiticity_deviation(&m);
        if herm_dev > PHYSICAL_TOLERANCE {
            return Err(Error::NonPhysical(format!(
                "max|ρ − ρ†| = {herm_dev:.3e} exceeds {PHYSICAL_TOLERANCE:.0e}"
            )));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > PHYSICAL_TOLERANCE || tr.im.abs() > PHYSICAL_TOLERANCE {
            return Err(Error::NonPhysical(format!("trace = {tr} is not 1")));
        }
        let sym = hermitian_part(&m);
        let eigs = nalgebra::SymmetricEigen::new(sym).eigenvalues;
        if eigs.iter().any(|&e| e < -PHYSICAL_TOLERANCE) {
            let min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
            return Err(Error::NonPhysical(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(Self { m })
    }

    /// ρ = |ψ⟩⟨ψ| for a normalized pure state.
    pub fn from_pure(state: &HybridState) -> Result<Self> {
        state.check_normalized()?;
        let v = state.as_vector();
        let mut m = v * v.adjoint();
        // Renormalize away the residual O(NORM_TOLERANCE) trace error so the
        // operator passes its own validity gate.
        let tr = m.trace().re;
        m /= c(tr, 0.0);
        Ok(Self { m })
    }

    /// The maximally mixed state 𝟙/4.
    pub fn maximally_mixed() -> Self {
        Self {
            m: Matrix4::identity() * c(0.25, 0.0),
        }
    }

    pub fn matrix(&self) -> &Matrix4<C> {
        &self.m
    }

    pub fn entry(&self, row: usize, col: usize) -> C {
        self.m[(row, col)]
    }

    /// Purity Tr(ρ²).
    pub fn purity(&self) -> f64 {
        (self.m * self.m).trace().re
    }

    /// Serialize to the plain-text interchange format (row-major).
    pub fn to_text(&self) -> String {
        let mut out = String::from("densitymatrix\n");
        for i in 0..4 {
            for j in 0..4 {
                let v = self.m[(i, j)];
                out.push_str(&format!("{:.17e} {:.17e}\n", v.re, v.im));
            }
        }
        out
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_text().as_bytes())?;
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty input".into()))?;
        if header.trim() != "densitymatrix" {
            return Err(Error::Parse(format!("bad header: {header:?}")));
        }
        let mut m = Matrix4::zeros();
        for i in 0..4 {
            for j in 0..4 {
                let line = lines
                    .next()
                    .ok_or_else(|| Error::Parse("truncated matrix".into()))?;
                m[(i, j)] = parse_complex_line(line)?;
            }
        }
        Self::from_matrix(m)
    }

    pub fn read_text<R: BufRead>(mut r: R) -> Result<Self> {
        let mut text = String::new();
        r.read_to_string(&mut text)?;
        Self::from_text(&text)
    }
}

fn hermiticity_deviation(m: &Matrix4<C>) -> f64 {
    let d = m - m.adjoint();
    d.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

fn hermitian_part(m: &Matrix4<C>) -> Matrix4<C> {
    (m + m.adjoint()) * c(0.5, 0.0)
}

/// Hermitian square root via eigendecomposition. Eigenvalues below
/// 1e-14·λ_max (rounding debris on rank-deficient inputs) are clipped to
/// zero so their square roots do not inject O(1e-8) noise.
fn matrix_sqrt_psd(m: &Matrix4<C>) -> Matrix4<C> {
    let eig = nalgebra::SymmetricEigen::new(*m);
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let mut out = Matrix4::zeros();
    for k in 0..4 {
        let lambda = eig.eigenvalues[k];
        if lambda > 1e-14 * lmax {
            let v = eig.eigenvectors.column(k);
            out += (v * v.adjoint()) * c(lambda.sqrt(), 0.0);
        }
    }
    out
}

/// Concurrence of an arbitrary (pure or mixed) two-qubit density matrix.
///
/// C(ρ) = max{0, √λ₁ − √λ₂ − √λ₃ − √λ₄} with λᵢ the decreasingly ordered
/// eigenvalues of ρ(σ₂⊗σ₂)ρ*(σ₂⊗σ₂). Numerically the √λᵢ are taken as the
/// singular values of √ρ̃·√ρ, whose Gram matrix is the Hermitian similar
/// form √ρ·ρ̃·√ρ of that product; this avoids complex spurious eigenvalue
/// parts and keeps the small √λᵢ at full precision.
pub fn concurrence_mixed(rho: &DensityMatrix) -> Result<f64> {
    let flip = pauli_product(2, 2);
    let m = hermitian_part(rho.matrix());
    let sqrt_rho = matrix_sqrt_psd(&m);
    // ρ̃ = FρF* with F = σ₂⊗σ₂ implies √ρ̃ = F·conj(√ρ)·F.
    let sqrt_rho_tilde = flip * sqrt_rho.conjugate() * flip;
    let x = sqrt_rho_tilde * sqrt_rho;
    let mut lambdas: Vec<f64> = x
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .collect();
    lambdas.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let cval = lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3];
    Ok(cval.clamp(0.0, 1.0))
}

/// Fidelity F = ⟨Φ|ρ|Φ⟩ of ρ against a pure target state.
pub fn fidelity(rho: &DensityMatrix, target: &HybridState) -> Result<f64> {
    target.check_normalized()?;
    let v = target.as_vector();
    let f = (v.adjoint() * rho.matrix() * v)[(0, 0)].re;
    // For validated inputs f can only stray outside [0,1] by rounding.
    Ok(f.clamp(0.0, 1.0))
}

/// Expand ρ in the Pauli product basis: ρ = Σ c_{nm} σ_n⊗σ_m. Returns the 16
/// real coefficients with index 4n + m; c₀₀ = 1/4 for unit trace.
pub fn pauli_decompose(rho: &DensityMatrix) -> [f64; 16] {
    let mut coeffs = [0.0; 16];
    for n in 0..4 {
        for m in 0..4 {
            let p = pauli_product(n, m);
            coeffs[4 * n + m] = (p * rho.matrix()).trace().re / 4.0;
        }
    }
    coeffs
}

/// Inverse of [`pauli_decompose`].
pub fn pauli_assemble(coeffs: &[f64; 16]) -> Matrix4<C> {
    let mut m = Matrix4::zeros();
    for n in 0..4 {
        for mm in 0..4 {
            m += pauli_product(n, mm) * c(coeffs[4 * n + mm], 0.0);
        }
    }
    m
}

/// Hermiticity gate for [`project_physical`] inputs.
const PROJECT_HERMITICITY_TOLERANCE: f64 = 1e-8;

/// Project a Hermitian matrix onto the physical set: clip negative
/// eigenvalues to zero and renormalize the trace to one.
///
/// Errors when the input violates Hermiticity beyond tolerance or carries no
/// positive weight at all (e.g. the zero matrix).
pub fn project_physical(m: &Matrix4<C>) -> Result<DensityMatrix> {
    let scale = m.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1.0);
    let dev = hermiticity_deviation(m);
    if dev > PROJECT_HERMITICITY_TOLERANCE * scale {
        return Err(Error::NonPhysical(format!(
            "input is not Hermitian: max|m − m†| = {dev:.3e}"
        )));
    }
    let sym = hermitian_part(m);
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut out = Matrix4::zeros();
    let mut trace = 0.0;
    for k in 0..4 {
        let lambda = eig.eigenvalues[k].max(0.0);
        if lambda > 0.0 {
            let v = eig.eigenvectors.column(k);
            out += (v * v.adjoint()) * c(lambda, 0.0);
            trace += lambda;
        }
    }
    if trace < 1e-150 {
        return Err(Error::NonPhysical(
            "no positive spectral weight to project onto".into(),
        ));
    }
    out /= c(trace, 0.0);
    Ok(DensityMatrix { m: out })
}
