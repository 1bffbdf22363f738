//! Independent oracle for the ensemble coupling statistics.
//!
//! For LG(±1) probes through a thin phase layer with structure function
//! D(s) = 6.88·(s/r₀)^{5/3}, the ensemble second moments of the modal
//! couplings are exact double integrals over the mode intensities:
//!
//!   a_m = ⟨|p_m|²⟩ = ∫∫ I(r₁) I(r₂) cos(mΔθ) e^{−D(|r₁−r₂|)/2} d²r₁ d²r₂,
//!
//! with m = 0 for the diagonal coupling and m = 2 for the ±ℓ cross
//! coupling. This evaluates those integrals by direct quadrature —
//! completely independent of the screen synthesis and of the overlap
//! pipeline — and checks the Monte-Carlo ensemble against them.

use vortex_channel::channel::SubspaceAnalyzer;
use vortex_channel::optics::GridSpec;
use vortex_channel::turbulence::{generate_phase_screen, TurbulenceSpec};

const W0: f64 = 1e-2;
const Z: f64 = 1000.0;

/// (a0, a2) for the LG₁ intensity I ∝ r²·e^{−2r²/w0²}, by midpoint
/// quadrature in (r₁, r₂, Δθ); radii in units of w0, X = 1/SR − 1.
fn quadrature_moments(x_big: f64) -> (f64, f64) {
    let nr = 140;
    let na = 200;
    let rmax = 4.0;
    let dr = rmax / nr as f64;
    let da = 2.0 * std::f64::consts::PI / na as f64;
    let mut a0 = 0.0;
    let mut a2 = 0.0;
    let mut norm = 0.0;
    for i in 0..nr {
        let x = (i as f64 + 0.5) * dr;
        for j in 0..nr {
            let y = (j as f64 + 0.5) * dr;
            let w = x.powi(3) * y.powi(3) * (-2.0 * (x * x + y * y)).exp();
            norm += w * na as f64;
            for k in 0..na {
                let d = (k as f64 + 0.5) * da;
                let s2 = (x * x + y * y - 2.0 * x * y * d.cos()).max(0.0);
                let gamma = (-(x_big / 2.0) * s2.powf(5.0 / 6.0)).exp();
                a0 += w * gamma;
                a2 += w * gamma * (2.0 * d).cos();
            }
        }
    }
    (a0 / norm, a2 / norm)
}

#[test]
fn ensemble_moments_match_quadrature() {
    let g = GridSpec::new(256, 16.0 * W0 / 256.0, 633e-9).unwrap();
    let analyzer = SubspaceAnalyzer::new(g, 1, W0).unwrap();
    let screens = 300u64;
    // (target SR, tolerance on a2/a0, tolerance on the moment concurrence)
    for &(sr, ratio_tol, c_tol) in &[(0.3, 0.10, 0.03), (0.5, 0.20, 0.03)] {
        let spec = TurbulenceSpec::from_target_strehl(sr, W0, Z, &g, 0).unwrap();
        let mut a0 = 0.0;
        let mut a2 = 0.0;
        for i in 0..screens {
            let screen = generate_phase_screen(&spec.with_seed(1 + i), &g).unwrap();
            let c = analyzer.couplings(&screen).unwrap();
            a0 += c.p0_ll.norm_sqr();
            a2 += 0.5 * (c.p_plus.norm_sqr() + c.p_minus.norm_sqr());
        }
        a0 /= screens as f64;
        a2 /= screens as f64;

        let (q0, q2) = quadrature_moments(1.0 / sr - 1.0);
        let ratio_mc = a2 / a0;
        let ratio_q = q2 / q0;
        let rel = (ratio_mc - ratio_q).abs() / ratio_q;
        // Concurrence of the isotropic-ensemble state built from the moments.
        let c_mc = (a0 - a2) / (a0 + a2);
        let c_q = (q0 - q2) / (q0 + q2);
        println!(
            "SR {sr}: MC a0 {a0:.4}, a2 {a2:.4} (ratio {ratio_mc:.4}); \
             quadrature a0 {q0:.4}, a2 {q2:.4} (ratio {ratio_q:.4}); \
             C {c_mc:.4} vs {c_q:.4}"
        );
        assert!(
            rel <= ratio_tol,
            "SR {sr}: coupling ratio off by {:.1}%",
            100.0 * rel
        );
        assert!(
            (a0 - q0).abs() / q0 <= 0.10,
            "SR {sr}: diagonal moment {a0:.4} vs quadrature {q0:.4}"
        );
        assert!(
            (c_mc - c_q).abs() <= c_tol,
            "SR {sr}: moment concurrence {c_mc:.4} vs quadrature {c_q:.4}"
        );
    }
}
