//! The one-sided perturbation channel: only the spatial degree of freedom
//! sees the screen, the polarisation does not. This module extracts the
//! modal couplings, reads off the 2×2 channel operator M on the (|ℓ⟩, |−ℓ⟩)
//! subspace, and evaluates the analytic entanglement-decay laws.

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::optics::{modal_overlap, GridSpec, JonesField, ModeProjector, SampledField};
use crate::states::HybridState;
use crate::turbulence::PhaseScreen;

type C = Complex64;

/// Modal couplings of one screen realization within the ±ℓ subspace:
/// p₀ = ⟨ℓ|K|ℓ⟩, p₂ℓ = ⟨−ℓ|K|ℓ⟩, p₋₂ℓ = ⟨ℓ|K|−ℓ⟩, plus the second diagonal
/// ⟨−ℓ|K|−ℓ⟩, which for a thin pure-phase screen coincides with p₀ exactly.
#[derive(Debug, Clone, Copy)]
pub struct ModalCoupling {
    /// ⟨ℓ|K|ℓ⟩.
    pub p0_ll: C,
    /// ⟨−ℓ|K|−ℓ⟩, recorded separately as a symmetry check.
    pub p0_mm: C,
    /// p₂ℓ = ⟨−ℓ|K|ℓ⟩ — scattering from |ℓ⟩ into |−ℓ⟩.
    pub p_plus: C,
    /// p₋₂ℓ = ⟨ℓ|K|−ℓ⟩ — scattering from |−ℓ⟩ into |ℓ⟩.
    pub p_minus: C,
    pub ell: u32,
}

impl ModalCoupling {
    /// Survival probability p = (|p₀|² + |p₀′|² + |p₂ℓ|² + |p₋₂ℓ|²)/2 of a
    /// maximally entangled input (reduces to (2|p₀|² + |p₂ℓ|² + |p₋₂ℓ|²)/2
    /// when the diagonals coincide).
    pub fn survival_probability(&self) -> f64 {
        (self.p0_ll.norm_sqr()
            + self.p0_mm.norm_sqr()
            + self.p_plus.norm_sqr()
            + self.p_minus.norm_sqr())
            / 2.0
    }

    /// The 2×2 operator M on the ordered basis (|ℓ⟩, |−ℓ⟩).
    pub fn to_operator(&self) -> ChannelOperator {
        ChannelOperator {
            m: Matrix2::new(self.p0_ll, self.p_minus, self.p_plus, self.p0_mm),
        }
    }
}

/// The channel's Kraus operator on the OAM qubit, basis (|ℓ⟩, |−ℓ⟩).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelOperator {
    pub m: Matrix2<C>,
}

impl ChannelOperator {
    pub fn identity() -> Self {
        Self {
            m: Matrix2::identity(),
        }
    }

    pub fn determinant(&self) -> C {
        self.m[(0, 0)] * self.m[(1, 1)] - self.m[(0, 1)] * self.m[(1, 0)]
    }

    pub fn frobenius_norm_sqr(&self) -> f64 {
        self.m.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Survival probability ‖M‖²_F/2 of a maximally entangled probe.
    pub fn survival_probability(&self) -> f64 {
        self.frobenius_norm_sqr() / 2.0
    }

    /// Lifted form M ⊗ 𝟙 on the hybrid basis (OAM slow, polarisation fast).
    pub fn lifted(&self) -> Matrix4<C> {
        self.m.kronecker(&Matrix2::identity())
    }

    /// Apply M ⊗ 𝟙 to raw hybrid amplitudes.
    pub fn apply(&self, amps: [C; 4]) -> [C; 4] {
        let m = &self.m;
        [
            m[(0, 0)] * amps[0] + m[(0, 1)] * amps[2],
            m[(0, 0)] * amps[1] + m[(0, 1)] * amps[3],
            m[(1, 0)] * amps[0] + m[(1, 1)] * amps[2],
            m[(1, 0)] * amps[1] + m[(1, 1)] * amps[3],
        ]
    }

    /// Fix the global phase by rotating the largest-magnitude entry onto the
    /// positive real axis.
    pub fn normalize_phase(&self) -> Self {
        let mut best = C::new(1.0, 0.0);
        let mut best_norm = 0.0;
        for v in self.m.iter() {
            if v.norm() > best_norm {
                best_norm = v.norm();
                best = *v;
            }
        }
        if best_norm == 0.0 {
            return *self;
        }
        let rot = best.conj() / best.norm();
        Self { m: self.m * rot }
    }
}

/// Phenomenological Gaussian OAM-coupling model pℓ = exp(−ℓ²/2Δ²).
#[derive(Debug, Clone, Copy)]
pub struct GaussianCouplingModel {
    delta: f64,
    pub ell: u32,
}

impl GaussianCouplingModel {
    pub fn new(delta: f64, ell: u32) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "delta must be > 0, got {delta}"
            )));
        }
        Ok(Self { delta, ell })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Spectral weight for an OAM shift of `shift`.
    pub fn coupling(&self, shift: i32) -> f64 {
        let s = shift as f64;
        (-s * s / (2.0 * self.delta * self.delta)).exp()
    }

    /// Concurrence transfer factor |1 − exp(−ℓ²/Δ²)| of the model.
    pub fn factor(&self) -> f64 {
        let l = self.ell as f64;
        (1.0 - (-l * l / (self.delta * self.delta)).exp()).abs()
    }
}

/// Multiply both circular components by exp(i·phase): the spatial degree of
/// freedom is perturbed, the polarisation is untouched, and power is
/// conserved.
pub fn propagate_hybrid(input: &JonesField, screen: &PhaseScreen) -> Result<JonesField> {
    input.grid().ensure_matches(&screen.grid)?;
    JonesField::new(
        input.right.with_phase(&screen.phase),
        input.left.with_phase(&screen.phase),
    )
}

/// Unnormalized result of projecting a field onto the ±ℓ subspace.
#[derive(Debug, Clone, Copy)]
pub struct SubspaceProjection {
    /// Raw projection amplitudes onto (|ℓ,R⟩, |ℓ,L⟩, |−ℓ,R⟩, |−ℓ,L⟩).
    pub amps: [C; 4],
    /// Power fraction retained by the filter (for unit-power inputs).
    pub survival: f64,
    pub ell: u32,
}

impl SubspaceProjection {
    pub fn is_degenerate(&self) -> bool {
        self.survival <= 1e-12
    }

    /// The normalized post-selected state; errors on a degenerate projection.
    pub fn normalized(&self) -> Result<HybridState> {
        if self.is_degenerate() {
            return Err(Error::DegenerateChannel(format!(
                "filter retained no power (survival {:.3e})",
                self.survival
            )));
        }
        HybridState::normalized(self.ell, self.amps)
    }

    /// Unnormalized contribution |ψ̃⟩⟨ψ̃| (trace = survival) for ensemble
    /// accumulation.
    pub fn density_contribution(&self) -> Matrix4<C> {
        let v = nalgebra::Vector4::from_row_slice(&self.amps);
        v * v.adjoint()
    }
}

/// Precomputed machinery for repeated coupling extraction and subspace
/// filtering on one grid.
#[derive(Debug, Clone)]
pub struct SubspaceAnalyzer {
    projector: ModeProjector,
}

impl SubspaceAnalyzer {
    pub fn new(grid: GridSpec, ell: u32, w0: f64) -> Result<Self> {
        Ok(Self {
            projector: ModeProjector::new(grid, ell, w0)?,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.projector.grid
    }

    pub fn ell(&self) -> u32 {
        self.projector.ell
    }

    /// Modal couplings of a screen, via overlaps of perturbed LG probes.
    pub fn couplings(&self, screen: &PhaseScreen) -> Result<ModalCoupling> {
        self.projector.grid.ensure_matches(&screen.grid)?;
        let lg_p: &SampledField = self.projector.lg_plus();
        let lg_m: &SampledField = self.projector.lg_minus();
        let pert_p = lg_p.with_phase(&screen.phase);
        let pert_m = lg_m.with_phase(&screen.phase);
        Ok(ModalCoupling {
            p0_ll: modal_overlap(&pert_p, lg_p)?,
            p0_mm: modal_overlap(&pert_m, lg_m)?,
            p_plus: modal_overlap(&pert_p, lg_m)?,
            p_minus: modal_overlap(&pert_m, lg_p)?,
            ell: self.projector.ell,
        })
    }

    /// Project a (typically perturbed) field onto the ±ℓ subspace.
    pub fn filter(&self, field: &JonesField) -> Result<SubspaceProjection> {
        let amps = self.projector.project(field)?;
        let survival = amps.iter().map(|a| a.norm_sqr()).sum();
        Ok(SubspaceProjection {
            amps,
            survival,
            ell: self.projector.ell,
        })
    }
}

/// One-shot variant of [`SubspaceAnalyzer::couplings`].
pub fn extract_couplings(screen: &PhaseScreen, ell: u32, w0: f64) -> Result<ModalCoupling> {
    SubspaceAnalyzer::new(screen.grid, ell, w0)?.couplings(screen)
}

/// One-shot variant of [`SubspaceAnalyzer::filter`].
pub fn subspace_filter(output: &JonesField, ell: u32, w0: f64) -> Result<SubspaceProjection> {
    SubspaceAnalyzer::new(*output.grid(), ell, w0)?.filter(output)
}

/// Read the channel operator off the (unnormalized) filtered output of a
/// maximally entangled TM probe: M entries are √2 times the four amplitudes.
pub fn channel_operator_from_state(out: &SubspaceProjection) -> ChannelOperator {
    let s = C::new(std::f64::consts::SQRT_2, 0.0);
    ChannelOperator {
        m: Matrix2::new(
            out.amps[0] * s,
            out.amps[1] * s,
            out.amps[2] * s,
            out.amps[3] * s,
        ),
    }
}

/// Fraction of entanglement preserved by the channel realization:
/// C_ch = |p₀·p₀′ − p₂ℓ·p₋₂ℓ| / p, the symmetric-diagonal form being
/// |p₀² − p₂ℓ·p₋₂ℓ| / p. Errors on total extinction (p = 0).
pub fn channel_concurrence_factor(c: &ModalCoupling) -> Result<f64> {
    let p = c.survival_probability();
    if p <= 1e-300 {
        return Err(Error::DegenerateChannel("total extinction: p = 0".into()));
    }
    let det = c.p0_ll * c.p0_mm - c.p_plus * c.p_minus;
    Ok((det.norm() / p).min(1.0))
}

/// Theoretical decay of the concurrence of a maximally entangled probe with
/// the channel's Strehl ratio: C = SR/(SR² − SR + 1), valid on (0, 1].
pub fn concurrence_vs_sr(sr: f64) -> Result<f64> {
    if !(sr > 0.0 && sr <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "SR must lie in (0, 1], got {sr}"
        )));
    }
    Ok(sr / (sr * sr - sr + 1.0))
}

/// Concurrence transfer factor of a [`GaussianCouplingModel`].
pub fn gaussian_model_factor(model: &GaussianCouplingModel) -> f64 {
    model.factor()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::make_vector_mode;
    use crate::states::{concurrence_pure, VectorModeBasis};
    use crate::turbulence::{generate_phase_screen, TurbulenceSpec};

    const W0: f64 = 1e-2;
    const Z: f64 = 1000.0;

    fn grid() -> GridSpec {
        GridSpec::new(128, 16.0 * W0 / 128.0, 633e-9).unwrap()
    }

    fn screen(sr: f64, seed: u64) -> PhaseScreen {
        let g = grid();
        let spec = TurbulenceSpec::from_target_strehl(sr, W0, Z, &g, seed).unwrap();
        generate_phase_screen(&spec, &g).unwrap()
    }

    #[test]
    fn identity_channel_couplings() {
        let s = screen(1.0, 0);
        let c = extract_couplings(&s, 1, W0).unwrap();
        assert!((c.p0_ll - C::new(1.0, 0.0)).norm() < 1e-9);
        assert!((c.p0_mm - C::new(1.0, 0.0)).norm() < 1e-9);
        assert!(c.p_plus.norm() < 1e-9);
        assert!(c.p_minus.norm() < 1e-9);
        assert!((c.survival_probability() - 1.0).abs() < 1e-9);
        let m = c.to_operator();
        assert!((m.m - Matrix2::identity()).iter().all(|v| v.norm() < 1e-9));
    }

    #[test]
    fn diagonal_couplings_coincide_for_phase_screens() {
        let s = screen(0.5, 21);
        let c = extract_couplings(&s, 1, W0).unwrap();
        assert!(
            (c.p0_ll - c.p0_mm).norm() < 1e-12,
            "diagonals differ: {} vs {}",
            c.p0_ll,
            c.p0_mm
        );
    }

    #[test]
    fn propagation_conserves_power_and_polarisation() {
        let g = grid();
        let basis = VectorModeBasis::new(1).unwrap();
        let field = make_vector_mode(g, &basis.tm, W0).unwrap();
        let s = screen(0.4, 5);
        let out = propagate_hybrid(&field, &s).unwrap();
        assert!((out.power() - field.power()).abs() < 1e-10);
        // Polarisation-only observables are untouched.
        assert!((out.right.power() - field.right.power()).abs() < 1e-10);
        assert!((out.left.power() - field.left.power()).abs() < 1e-10);
        // Zero screen is the identity.
        let id = screen(1.0, 5);
        let same = propagate_hybrid(&field, &id).unwrap();
        assert_eq!(same.right.values, field.right.values);
        // Mismatched grids are rejected.
        let g2 = GridSpec::new(64, 16.0 * W0 / 64.0, 633e-9).unwrap();
        let spec2 = TurbulenceSpec::from_target_strehl(0.5, W0, Z, &g2, 0).unwrap();
        let other = generate_phase_screen(&spec2, &g2).unwrap();
        assert!(propagate_hybrid(&field, &other).is_err());
    }

    #[test]
    fn unperturbed_tm_survives_filtering() {
        let g = grid();
        let basis = VectorModeBasis::new(1).unwrap();
        let field = make_vector_mode(g, &basis.tm, W0).unwrap();
        let proj = subspace_filter(&field, 1, W0).unwrap();
        assert!((proj.survival - 1.0).abs() < 1e-6);
        let state = proj.normalized().unwrap();
        assert!((state.inner(&basis.tm).norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn equal_couplings_make_tm_separable() {
        // Synthetic output field with p0 = p2ℓ = p−2ℓ on a TM input.
        let g = grid();
        let analyzer = SubspaceAnalyzer::new(g, 1, W0).unwrap();
        let p = C::new(0.5, 0.0);
        let a = C::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let mk = |u: &SampledField, v: &SampledField, ca: C, cb: C| {
            let mut out = SampledField::zeros(g);
            for ((o, x), y) in out
                .values
                .iter_mut()
                .zip(u.values.iter())
                .zip(v.values.iter())
            {
                *o = ca * x + cb * y;
            }
            out
        };
        let lg_p = crate::optics::make_oam_mode(g, 1, W0).unwrap();
        let lg_m = crate::optics::make_oam_mode(g, -1, W0).unwrap();
        // right: α(p0|ℓ⟩ + p2ℓ|−ℓ⟩), left: β(p−2ℓ|ℓ⟩ + p0|−ℓ⟩)
        let right = mk(&lg_p, &lg_m, a * p, a * p);
        let left = mk(&lg_p, &lg_m, a * p, a * p);
        let field = JonesField::new(right, left).unwrap();
        let proj = analyzer.filter(&field).unwrap();
        let state = proj.normalized().unwrap();
        assert!(concurrence_pure(&state).unwrap() < 1e-6);
    }

    #[test]
    fn survival_matches_coupling_norm_for_tm() {
        let g = grid();
        let basis = VectorModeBasis::new(1).unwrap();
        let field = make_vector_mode(g, &basis.tm, W0).unwrap();
        let s = screen(0.5, 33);
        let out = propagate_hybrid(&field, &s).unwrap();
        let proj = subspace_filter(&out, 1, W0).unwrap();
        let c = extract_couplings(&s, 1, W0).unwrap();
        assert!(
            (proj.survival - c.survival_probability()).abs() < 1e-6,
            "{} vs {}",
            proj.survival,
            c.survival_probability()
        );
    }

    #[test]
    fn operator_read_off_matches_couplings() {
        let g = grid();
        let basis = VectorModeBasis::new(1).unwrap();
        let field = make_vector_mode(g, &basis.tm, W0).unwrap();
        let s = screen(0.45, 64);
        let out = propagate_hybrid(&field, &s).unwrap();
        let proj = subspace_filter(&out, 1, W0).unwrap();
        let m_state = channel_operator_from_state(&proj);
        let m_coupling = extract_couplings(&s, 1, W0).unwrap().to_operator();
        let err = (m_state.m - m_coupling.m)
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "operator mismatch {err}");
    }

    #[test]
    fn recovered_operator_reproduces_filtering() {
        use rand::Rng;
        use rand::SeedableRng;
        let g = grid();
        let basis = VectorModeBasis::new(1).unwrap();
        let s = screen(0.5, 11);
        let tm_field = make_vector_mode(g, &basis.tm, W0).unwrap();
        let tm_out = subspace_filter(&propagate_hybrid(&tm_field, &s).unwrap(), 1, W0).unwrap();
        let m = channel_operator_from_state(&tm_out);

        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(2);
        for _ in 0..20 {
            let amps: [C; 4] = std::array::from_fn(|_| {
                C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            let state = HybridState::normalized(1, amps).unwrap();
            let field = make_vector_mode(g, &state, W0).unwrap();
            let direct = subspace_filter(&propagate_hybrid(&field, &s).unwrap(), 1, W0)
                .unwrap()
                .amps;
            let predicted = m.apply(state.amplitudes());
            for k in 0..4 {
                assert!(
                    (direct[k] - predicted[k]).norm() < 1e-6,
                    "component {k}: {} vs {}",
                    direct[k],
                    predicted[k]
                );
            }
        }
    }

    #[test]
    fn concurrence_factor_examples() {
        let c = ModalCoupling {
            p0_ll: C::new(0.9, 0.0),
            p0_mm: C::new(0.9, 0.0),
            p_plus: C::new(0.3, 0.0),
            p_minus: C::new(0.3, 0.0),
            ell: 1,
        };
        assert!((c.survival_probability() - 0.9).abs() < 1e-15);
        assert!((channel_concurrence_factor(&c).unwrap() - 0.8).abs() < 1e-12);

        let weak = ModalCoupling {
            p0_ll: C::new(1.0, 0.0),
            p0_mm: C::new(1.0, 0.0),
            p_plus: C::new(0.0, 0.0),
            p_minus: C::new(0.0, 0.0),
            ell: 1,
        };
        assert!((channel_concurrence_factor(&weak).unwrap() - 1.0).abs() < 1e-15);

        let strong = ModalCoupling {
            p0_ll: C::new(0.4, 0.1),
            p0_mm: C::new(0.4, 0.1),
            p_plus: C::new(0.4, 0.1),
            p_minus: C::new(0.4, 0.1),
            ell: 1,
        };
        assert!(channel_concurrence_factor(&strong).unwrap() < 1e-12);

        let dead = ModalCoupling {
            p0_ll: C::new(0.0, 0.0),
            p0_mm: C::new(0.0, 0.0),
            p_plus: C::new(0.0, 0.0),
            p_minus: C::new(0.0, 0.0),
            ell: 1,
        };
        assert!(channel_concurrence_factor(&dead).is_err());
    }

    #[test]
    fn concurrence_vs_sr_examples() {
        assert!((concurrence_vs_sr(1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((concurrence_vs_sr(0.5).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((concurrence_vs_sr(0.7).unwrap() - 0.7 / 0.79).abs() < 1e-12);
        assert!(concurrence_vs_sr(0.0).is_err());
        assert!(concurrence_vs_sr(1.1).is_err());
    }

    #[test]
    fn gaussian_model_examples() {
        let zero_ell = GaussianCouplingModel::new(1.0, 0).unwrap();
        assert_eq!(gaussian_model_factor(&zero_ell), 0.0);
        let narrow = GaussianCouplingModel::new(1e-6, 1).unwrap();
        assert!((gaussian_model_factor(&narrow) - 1.0).abs() < 1e-12);
        let unit = GaussianCouplingModel::new(1.0, 1).unwrap();
        assert!((gaussian_model_factor(&unit) - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
        assert!(GaussianCouplingModel::new(0.0, 1).is_err());
    }

    #[test]
    fn phase_normalization_fixes_the_gauge() {
        let m = ChannelOperator {
            m: Matrix2::new(
                C::from_polar(0.3, 1.1),
                C::from_polar(0.9, -2.0),
                C::from_polar(0.1, 0.4),
                C::from_polar(0.5, 2.9),
            ),
        };
        let fixed = m.normalize_phase();
        // Largest-magnitude entry lands on the positive real axis.
        assert!((fixed.m[(0, 1)].im).abs() < 1e-15);
        assert!(fixed.m[(0, 1)].re > 0.0);
        // A pure gauge rotation: entry magnitudes and |det| are untouched.
        for (a, b) in m.m.iter().zip(fixed.m.iter()) {
            assert!((a.norm() - b.norm()).abs() < 1e-15);
        }
        assert!((m.determinant().norm() - fixed.determinant().norm()).abs() < 1e-15);
    }

    #[test]
    fn empty_field_is_a_degenerate_projection() {
        let g = grid();
        let dark = JonesField::new(SampledField::zeros(g), SampledField::zeros(g)).unwrap();
        let proj = subspace_filter(&dark, 1, W0).unwrap();
        assert!(proj.is_degenerate());
        assert!(proj.normalized().is_err());
    }

    #[test]
    fn higher_order_subspace_works() {
        // The |ℓ| = 2 subspace carries the same machinery.
        let g = grid();
        let basis = VectorModeBasis::new(2).unwrap();
        let field = make_vector_mode(g, &basis.tm, W0).unwrap();
        let s = screen(0.6, 17);
        let out = propagate_hybrid(&field, &s).unwrap();
        let proj = subspace_filter(&out, 2, W0).unwrap();
        let c = extract_couplings(&s, 2, W0).unwrap();
        assert_eq!(c.ell, 2);
        assert!((proj.survival - c.survival_probability()).abs() < 1e-6);
        let factor = channel_concurrence_factor(&c).unwrap();
        let state = proj.normalized().unwrap();
        let c_out = concurrence_pure(&state).unwrap();
        assert!(
            (c_out - factor).abs() < 1e-9,
            "TM probe: {c_out} vs factor {factor}"
        );
    }

    #[test]
    fn couplings_shrink_with_turbulence() {
        let mut strong_mean = 0.0;
        let mut weak_mean = 0.0;
        for seed in 0..15 {
            let cw = extract_couplings(&screen(0.9, 300 + seed), 1, W0).unwrap();
            let cs = extract_couplings(&screen(0.3, 300 + seed), 1, W0).unwrap();
            weak_mean += cw.p0_ll.norm();
            strong_mean += cs.p0_ll.norm();
        }
        assert!(strong_mean < weak_mean);
    }

    #[test]
    fn couplings_bit_identical_from_cache() {
        let g = grid();
        let s = screen(0.5, 77);
        let c1 = extract_couplings(&s, 1, W0).unwrap();
        let mut buf = Vec::new();
        s.write_cache(&mut buf).unwrap();
        let back = PhaseScreen::read_cache(&buf[..], g.wavelength, W0, Z).unwrap();
        let c2 = extract_couplings(&back, 1, W0).unwrap();
        assert_eq!(c1.p0_ll, c2.p0_ll);
        assert_eq!(c1.p_plus, c2.p_plus);
        assert_eq!(c1.p_minus, c2.p_minus);
    }

    #[test]
    fn single_screen_linearity() {
        // For one fixed screen, C_out(α) against C_in(α) is a line through
        // the origin with slope equal to the channel factor.
        let g = grid();
        let analyzer = SubspaceAnalyzer::new(g, 1, W0).unwrap();
        let s = screen(0.7, 12);
        let c_ch = channel_concurrence_factor(&analyzer.couplings(&s).unwrap()).unwrap();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for k in 0..9 {
            let theta = k as f64 * std::f64::consts::FRAC_PI_2 / 8.0;
            let state =
                HybridState::weighted(1, C::new(theta.cos(), 0.0), C::new(theta.sin(), 0.0))
                    .unwrap();
            let field = make_vector_mode(g, &state, W0).unwrap();
            let out = propagate_hybrid(&field, &s).unwrap();
            let filtered = analyzer.filter(&out).unwrap().normalized().unwrap();
            xs.push(concurrence_pure(&state).unwrap());
            ys.push(concurrence_pure(&filtered).unwrap());
        }
        let fit = crate::stats::linear_fit(&xs, &ys);
        assert!(fit.intercept.abs() <= 0.02, "intercept {}", fit.intercept);
        assert!(
            (fit.slope - c_ch).abs() / c_ch <= 0.03,
            "slope {} vs factor {c_ch}",
            fit.slope
        );
        assert!(fit.r_squared >= 0.99, "R² = {}", fit.r_squared);
    }
}
