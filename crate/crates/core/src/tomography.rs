//! The 36-projection overcomplete state tomography: measurement simulation,
//! linear (pseudo-inverse) reconstruction, and χ²-minimizing maximum
//! likelihood reconstruction over the physical set.

use nalgebra::{Cholesky, DMatrix, DVector, Matrix4, Vector2, Vector4};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use std::io::Write;

use crate::error::{Error, Result};
use crate::optim::{minimize, MinimizeOptions, MinimizeResult};
use crate::states::{pauli_assemble, pauli_product, project_physical, DensityMatrix};

type C = Complex64;

/// Labels of the six polarisation analyser settings, in projector order.
pub const POL_LABELS: [&str; 6] = ["H", "V", "D", "A", "R", "L"];
/// Labels of the six OAM analyser holograms, in projector order: the two pure
/// modes and the equatorial superpositions (|ℓ⟩ + e^{iθ}|−ℓ⟩)/√2.
pub const OAM_LABELS: [&str; 6] = ["l+", "l-", "s0", "s90", "s180", "s270"];

/// The overcomplete set of 36 rank-1 projectors
/// (polarisation ket) ⊗ (OAM ket) on the hybrid basis.
#[derive(Debug, Clone)]
pub struct ProjectorSet {
    projectors: Vec<Matrix4<C>>,
    labels: Vec<(usize, usize)>,
}

fn pol_ket(i: usize) -> Vector2<C> {
    // Circular-basis components (R, L) with the conventions
    // D = (H+V)/√2, A = (H−V)/√2, R = (H−iV)/√2, L = (H+iV)/√2.
    let s = std::f64::consts::FRAC_1_SQRT_2;
    match i {
        0 => Vector2::new(C::new(s, 0.0), C::new(s, 0.0)), // H
        1 => Vector2::new(C::new(0.0, s), C::new(0.0, -s)), // V
        2 => Vector2::new(C::new(0.5, 0.5), C::new(0.5, -0.5)), // D
        3 => Vector2::new(C::new(0.5, -0.5), C::new(0.5, 0.5)), // A
        4 => Vector2::new(C::new(1.0, 0.0), C::new(0.0, 0.0)), // R
        5 => Vector2::new(C::new(0.0, 0.0), C::new(1.0, 0.0)), // L
        _ => unreachable!(),
    }
}

fn oam_ket(i: usize) -> Vector2<C> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    match i {
        0 => Vector2::new(C::new(1.0, 0.0), C::new(0.0, 0.0)), // |ℓ⟩
        1 => Vector2::new(C::new(0.0, 0.0), C::new(1.0, 0.0)), // |−ℓ⟩
        2..=5 => {
            let theta = (i - 2) as f64 * std::f64::consts::FRAC_PI_2;
            Vector2::new(C::new(s, 0.0), C::from_polar(s, theta))
        }
        _ => unreachable!(),
    }
}

impl ProjectorSet {
    /// The standard 6 × 6 polarisation/OAM analyser set.
    pub fn standard() -> Self {
        let mut projectors = Vec::with_capacity(36);
        let mut labels = Vec::with_capacity(36);
        for p in 0..6 {
            for o in 0..6 {
                let pk = pol_ket(p);
                let ok = oam_ket(o);
                // Hybrid ket with OAM slow, polarisation fast.
                let ket = Vector4::new(ok[0] * pk[0], ok[0] * pk[1], ok[1] * pk[0], ok[1] * pk[1]);
                projectors.push(ket * ket.adjoint());
                labels.push((p, o));
            }
        }
        Self { projectors, labels }
    }

    /// Keep only the projectors at `indices` (overcompleteness means many
    /// subsets still span the operator space).
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            projectors: indices.iter().map(|&k| self.projectors[k]).collect(),
            labels: indices.iter().map(|&k| self.labels[k]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }

    pub fn projectors(&self) -> &[Matrix4<C>] {
        &self.projectors
    }

    /// (pol_index, oam_index) labels per projector.
    pub fn labels(&self) -> &[(usize, usize)] {
        &self.labels
    }

    /// Design matrix A with A[k][j] = Tr(Π_k · σ_n⊗σ_m), j = 4n + m. It is
    /// real because both factors are Hermitian.
    pub fn design_matrix(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.len(), 16);
        for (k, proj) in self.projectors.iter().enumerate() {
            for n in 0..4 {
                for m in 0..4 {
                    a[(k, 4 * n + m)] = (pauli_product(n, m) * proj).trace().re;
                }
            }
        }
        a
    }

    /// Rank of the design matrix; 16 means the set is tomographically
    /// complete.
    pub fn rank(&self) -> usize {
        self.design_matrix().svd(false, false).rank(1e-9)
    }

    /// Born-rule intensities Tr(Π_k ρ).
    pub fn expected_intensities(&self, rho: &Matrix4<C>) -> Vec<f64> {
        self.projectors
            .iter()
            .map(|p| (p * rho).trace().re)
            .collect()
    }
}

impl Default for ProjectorSet {
    fn default() -> Self {
        Self::standard()
    }
}

/// Detector noise applied to simulated intensities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    /// Multiplicative Gaussian noise: I → I·(1 + σ_rel·ξ), floored at 0.
    Gaussian { sigma_rel: f64 },
    /// Shot noise: counts ~ Poisson with the stated expected total over the
    /// whole record.
    Poisson { mean_total: f64 },
}

/// One simulated (or imported) set of projection intensities.
#[derive(Debug, Clone)]
pub struct MeasurementRecord {
    pub intensities: Vec<f64>,
    pub scale: f64,
    pub noise: Option<NoiseModel>,
    pub seed: u64,
}

impl MeasurementRecord {
    /// CSV columns: `pol_index, oam_index, intensity`.
    pub fn write_csv<W: Write>(&self, set: &ProjectorSet, mut w: W) -> Result<()> {
        writeln!(w, "pol_index,oam_index,intensity")?;
        for (k, (p, o)) in set.labels().iter().enumerate() {
            writeln!(w, "{},{},{:.12e}", p, o, self.intensities[k])?;
        }
        Ok(())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            intensities: self.intensities.iter().map(|v| v * c).collect(),
            scale: self.scale * c,
            noise: self.noise,
            seed: self.seed,
        }
    }

    /// Apply a noise model to an already-assembled record (e.g. intensities
    /// accumulated over an ensemble of channel realizations).
    pub fn with_noise(&self, noise: NoiseModel, seed: u64) -> Result<Self> {
        let mut out = self.clone();
        out.noise = Some(noise);
        out.seed = seed;
        match noise {
            NoiseModel::Gaussian { sigma_rel } => {
                if sigma_rel < 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "gaussian sigma must be ≥ 0, got {sigma_rel}"
                    )));
                }
                let mut rng = ChaCha12Rng::seed_from_u64(seed);
                for v in out.intensities.iter_mut() {
                    let xi: f64 = rng.sample(StandardNormal);
                    *v = (*v * (1.0 + sigma_rel * xi)).max(0.0);
                }
            }
            NoiseModel::Poisson { mean_total } => {
                if !(mean_total > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "poisson photon budget must be > 0, got {mean_total}"
                    )));
                }
                let total: f64 = out.intensities.iter().sum();
                if total <= 0.0 {
                    return Err(Error::InvalidParameter(
                        "record carries no intensity".into(),
                    ));
                }
                let mut rng = ChaCha12Rng::seed_from_u64(seed);
                for v in out.intensities.iter_mut() {
                    let lambda = mean_total * *v / total;
                    *v = if lambda > 0.0 {
                        Poisson::new(lambda)
                            .map_err(|e| Error::InvalidParameter(format!("poisson: {e}")))?
                            .sample(&mut rng)
                    } else {
                        0.0
                    };
                }
            }
        }
        Ok(out)
    }
}

/// Simulate intensity_k = scale·Tr(Π_k ρ) plus optional noise; deterministic
/// for a given seed.
pub fn simulate_measurements(
    rho: &DensityMatrix,
    set: &ProjectorSet,
    noise: Option<NoiseModel>,
    seed: u64,
    scale: f64,
) -> Result<MeasurementRecord> {
    if !(scale > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "scale must be > 0, got {scale}"
        )));
    }
    let intensities: Vec<f64> = set
        .expected_intensities(rho.matrix())
        .iter()
        .map(|v| v.max(0.0) * scale)
        .collect();
    let clean = MeasurementRecord {
        intensities,
        scale,
        noise: None,
        seed,
    };
    match noise {
        None => Ok(clean),
        Some(model) => clean.with_noise(model, seed),
    }
}

/// Least-squares inversion in the Pauli basis followed by projection onto
/// the physical set. The overall scale is inferred from trace normalization.
pub fn reconstruct_linear(record: &MeasurementRecord, set: &ProjectorSet) -> Result<DensityMatrix> {
    if record.intensities.len() != set.len() {
        return Err(Error::InvalidParameter(format!(
            "record has {} intensities for {} projectors",
            record.intensities.len(),
            set.len()
        )));
    }
    let a = set.design_matrix();
    let svd = a.clone().svd(true, true);
    if svd.rank(1e-9) < 16 {
        return Err(Error::RankDeficient {
            rank: svd.rank(1e-9),
        });
    }
    let b = DVector::from_column_slice(&record.intensities);
    let c_scaled = svd
        .solve(&b, 1e-12)
        .map_err(|e| Error::NonPhysical(format!("least squares failed: {e}")))?;
    let s = 4.0 * c_scaled[0];
    if !(s > 0.0) {
        return Err(Error::NonPhysical(format!(
            "inferred scale {s:.3e} is not positive"
        )));
    }
    let mut coeffs = [0.0; 16];
    for j in 0..16 {
        coeffs[j] = c_scaled[j] / s;
    }
    project_physical(&pauli_assemble(&coeffs))
}

/// Options for [`reconstruct_mle`].
#[derive(Debug, Clone, Copy)]
pub struct MleOptions {
    pub max_iter: usize,
    /// Relative objective-decrease tolerance.
    pub tol: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-10,
        }
    }
}

/// Result of a maximum-likelihood reconstruction.
#[derive(Debug, Clone)]
pub struct MleReconstruction {
    pub rho: DensityMatrix,
    pub scale: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// χ² objective shared by the optimizer and its gradient: the physical state
/// is parameterized as ρ = T·T†/Tr(T·T†) with T lower-triangular (16 real
/// parameters) and the detector scale s is the 17th parameter.
struct ChiSquare<'a> {
    projectors: &'a [Matrix4<C>],
    intensities: &'a [f64],
    weights: Vec<f64>,
}

fn t_from_params(x: &[f64]) -> Matrix4<C> {
    // Parameter layout: 4 real diagonal entries, then (re, im) pairs for the
    // 6 strictly-lower entries in row-major order.
    let mut t = Matrix4::zeros();
    for k in 0..4 {
        t[(k, k)] = C::new(x[k], 0.0);
    }
    let lower = [(1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2)];
    for (idx, &(i, j)) in lower.iter().enumerate() {
        t[(i, j)] = C::new(x[4 + 2 * idx], x[5 + 2 * idx]);
    }
    t
}

fn params_from_t(t: &Matrix4<C>, scale: f64) -> Vec<f64> {
    let mut x = Vec::with_capacity(17);
    for k in 0..4 {
        x.push(t[(k, k)].re);
    }
    for &(i, j) in &[(1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2)] {
        x.push(t[(i, j)].re);
        x.push(t[(i, j)].im);
    }
    x.push(scale);
    x
}

impl ChiSquare<'_> {
    fn rho_of(t: &Matrix4<C>) -> (Matrix4<C>, f64) {
        let g = t * t.adjoint();
        let n = g.trace().re;
        (g / C::new(n, 0.0), n)
    }

    fn value(&self, x: &[f64]) -> f64 {
        let t = t_from_params(x);
        let s = x[16];
        let (rho, _) = Self::rho_of(&t);
        let mut chi = 0.0;
        for (k, proj) in self.projectors.iter().enumerate() {
            let m = (proj * rho).trace().re;
            let r = self.intensities[k] - s * m;
            chi += r * r / self.weights[k];
        }
        chi
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let t = t_from_params(x);
        let s = x[16];
        let g = t * t.adjoint();
        let n = g.trace().re;
        let rho = g / C::new(n, 0.0);

        // W accumulates Σ_k coeff_k·(Π_k − m_k·𝟙); the T-gradient of the
        // objective is then the entrywise 2·(W·T)/N read at each parameter.
        let mut w_acc: Matrix4<C> = Matrix4::zeros();
        let mut ds = 0.0;
        for (k, proj) in self.projectors.iter().enumerate() {
            let m = (proj * rho).trace().re;
            let r = self.intensities[k] - s * m;
            let coeff = -2.0 * r * s / self.weights[k];
            w_acc += proj * C::new(coeff, 0.0) - Matrix4::identity() * C::new(coeff * m, 0.0);
            ds += -2.0 * r * m / self.weights[k];
        }
        let gt = (w_acc * t) * C::new(2.0 / n, 0.0);

        let mut grad = Vec::with_capacity(17);
        for k in 0..4 {
            grad.push(gt[(k, k)].re);
        }
        for &(i, j) in &[(1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2)] {
            grad.push(gt[(i, j)].re);
            grad.push(gt[(i, j)].im);
        }
        grad.push(ds);
        grad
    }
}

/// Minimize Σ_k (I_k − s·Tr(Π_k ρ))²/max(I_k, ε) over physical ρ and scale s,
/// starting from the linear-inversion estimate. The result is physical by
/// construction. Non-convergence surfaces as an error carrying the best
/// iterate.
pub fn reconstruct_mle(
    record: &MeasurementRecord,
    set: &ProjectorSet,
    options: MleOptions,
) -> Result<MleReconstruction> {
    let rho_init = reconstruct_linear(record, set)?;
    let max_i = record.intensities.iter().cloned().fold(0.0, f64::max);
    if max_i <= 0.0 {
        return Err(Error::NonPhysical("record carries no intensity".into()));
    }
    let eps = 1e-6 * max_i;
    let weights: Vec<f64> = record.intensities.iter().map(|&v| v.max(eps)).collect();

    // Initial scale: match total intensity to total prediction.
    let pred: f64 = set.expected_intensities(rho_init.matrix()).iter().sum();
    let s0 = record.intensities.iter().sum::<f64>() / pred.max(1e-300);

    // Blend a little of the maximally mixed state in so the Cholesky factor
    // exists even for (near-)pure estimates.
    let delta = 1e-9;
    let blended = rho_init.matrix() * C::new(1.0 - delta, 0.0)
        + Matrix4::identity() * C::new(delta / 4.0, 0.0);
    let chol = Cholesky::new(blended)
        .ok_or_else(|| Error::NonPhysical("initial estimate is not PSD".into()))?;
    let x0 = params_from_t(&chol.l(), s0);

    let chi = ChiSquare {
        projectors: set.projectors(),
        intensities: &record.intensities,
        weights,
    };
    let MinimizeResult {
        x,
        value,
        iterations,
        converged,
    } = minimize(
        |x| chi.value(x),
        |x| chi.gradient(x),
        &x0,
        &MinimizeOptions {
            max_iter: options.max_iter,
            tol: options.tol,
        },
    );

    let t = t_from_params(&x);
    let (rho_m, _) = ChiSquare::rho_of(&t);
    // TT†/Tr is Hermitian PSD with unit trace by construction.
    let rho = DensityMatrix::from_matrix(rho_m).or_else(|_| project_physical(&rho_m))?;
    let out = MleReconstruction {
        rho,
        scale: x[16],
        residual: value,
        iterations,
    };
    if !converged {
        return Err(Error::NonConvergence {
            iterations,
            residual: value,
            best: Box::new(out),
        });
    }
    Ok(out)
}

/// Trace distance ½·Σ|eig(a − b)|.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    let d = a.matrix() - b.matrix();
    let eigs = nalgebra::SymmetricEigen::new(d).eigenvalues;
    (eigs.iter().map(|e| e.abs()).sum::<f64>() / 2.0).min(1.0)
}
