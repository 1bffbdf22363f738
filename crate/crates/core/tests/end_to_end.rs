//! Pipeline tests that chain screens, propagation, filtering, tomography and
//! the channel-operator algebra together.

use num_complex::Complex64;
use vortex_channel::channel::{
    channel_operator_from_state, propagate_hybrid, subspace_filter, SubspaceAnalyzer,
};
use vortex_channel::optics::{make_oam_mode, make_vector_mode, oam_spectrum, GridSpec};
use vortex_channel::states::{concurrence_mixed, concurrence_pure, DensityMatrix, VectorModeBasis};
use vortex_channel::tomography::{
    reconstruct_linear, reconstruct_mle, simulate_measurements, trace_distance, MleOptions,
    ProjectorSet,
};
use vortex_channel::turbulence::{generate_phase_screen, TurbulenceSpec};

const W0: f64 = 1e-2;
const Z: f64 = 1000.0;

fn grid() -> GridSpec {
    GridSpec::new(128, 16.0 * W0 / 128.0, 633e-9).unwrap()
}

#[test]
fn tomography_agrees_with_direct_concurrence_per_realization() {
    // screen → propagate → 36 projections → reconstruct → concurrence_mixed
    // must agree with concurrence_pure of the filtered state to 1e-4.
    let g = grid();
    let basis = VectorModeBasis::new(1).unwrap();
    let field = make_vector_mode(g, &basis.tm, W0).unwrap();
    let set = ProjectorSet::standard();
    for (sr, seed) in [(0.7, 3u64), (0.5, 4), (0.35, 5)] {
        let spec = TurbulenceSpec::from_target_strehl(sr, W0, Z, &g, seed).unwrap();
        let screen = generate_phase_screen(&spec, &g).unwrap();
        let out = propagate_hybrid(&field, &screen).unwrap();
        let proj = subspace_filter(&out, 1, W0).unwrap();
        let state = proj.normalized().unwrap();
        let c_direct = concurrence_pure(&state).unwrap();

        let truth = DensityMatrix::from_pure(&state).unwrap();
        let record = simulate_measurements(&truth, &set, None, 0, 1.0).unwrap();

        let lin = reconstruct_linear(&record, &set).unwrap();
        assert!(trace_distance(&lin, &truth) <= 1e-8);
        let c_lin = concurrence_mixed(&lin).unwrap();
        assert!(
            (c_lin - c_direct).abs() <= 1e-4,
            "sr {sr}: linear tomography C {c_lin} vs direct {c_direct}"
        );

        let mle = reconstruct_mle(&record, &set, MleOptions::default()).unwrap();
        let c_mle = concurrence_mixed(&mle.rho).unwrap();
        assert!(
            (c_mle - c_direct).abs() <= 1e-4,
            "sr {sr}: MLE tomography C {c_mle} vs direct {c_direct}"
        );
    }
}

#[test]
fn recovered_operator_is_choi_consistent_across_strengths() {
    use rand::Rng;
    use rand::SeedableRng;
    let g = grid();
    let basis = VectorModeBasis::new(1).unwrap();
    let tm_field = make_vector_mode(g, &basis.tm, W0).unwrap();
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(99);
    for (sr, seed) in [(0.85, 11u64), (0.5, 12), (0.3, 13)] {
        let spec = TurbulenceSpec::from_target_strehl(sr, W0, Z, &g, seed).unwrap();
        let screen = generate_phase_screen(&spec, &g).unwrap();
        let tm_out =
            subspace_filter(&propagate_hybrid(&tm_field, &screen).unwrap(), 1, W0).unwrap();
        let m = channel_operator_from_state(&tm_out);

        for _ in 0..5 {
            let amps: [Complex64; 4] = std::array::from_fn(|_| {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            let state = vortex_channel::states::HybridState::normalized(1, amps).unwrap();
            let field = make_vector_mode(g, &state, W0).unwrap();
            let direct = subspace_filter(&propagate_hybrid(&field, &screen).unwrap(), 1, W0)
                .unwrap()
                .amps;
            let predicted = m.apply(state.amplitudes());
            for k in 0..4 {
                assert!(
                    (direct[k] - predicted[k]).norm() < 1e-6,
                    "sr {sr}, component {k}"
                );
            }
        }
    }
}

#[test]
fn oam_spectrum_spreads_with_turbulence() {
    let g = grid();
    let lg = make_oam_mode(g, 1, W0).unwrap();
    let mut leak = Vec::new();
    for sr in [0.9, 0.6, 0.35] {
        let spec = TurbulenceSpec::from_target_strehl(sr, W0, Z, &g, 0).unwrap();
        let mut acc = 0.0;
        for i in 0..15u64 {
            let screen = generate_phase_screen(&spec.with_seed(200 + i), &g).unwrap();
            let pert = lg.with_phase(&screen.phase);
            let spread: f64 = oam_spectrum(&pert, W0, -4..=4)
                .unwrap()
                .into_iter()
                .filter(|(l, _)| *l != 1)
                .map(|(_, c)| c.norm_sqr())
                .sum();
            acc += spread;
        }
        leak.push(acc / 15.0);
    }
    assert!(
        leak[0] < leak[1] && leak[1] < leak[2],
        "energy redistribution should grow with turbulence: {leak:?}"
    );
    // Without turbulence the spectrum is concentrated at the input index.
    let clean = oam_spectrum(&lg, W0, -4..=4).unwrap();
    for (l, c) in clean {
        if l == 1 {
            assert!((c.norm_sqr() - 1.0).abs() < 1e-9);
        } else {
            assert!(c.norm_sqr() < 1e-10);
        }
    }
}

#[test]
fn ensemble_filter_analyzer_and_one_shot_agree() {
    let g = grid();
    let basis = VectorModeBasis::new(1).unwrap();
    let field = make_vector_mode(g, &basis.he_odd, W0).unwrap();
    let spec = TurbulenceSpec::from_target_strehl(0.55, W0, Z, &g, 31).unwrap();
    let screen = generate_phase_screen(&spec, &g).unwrap();
    let out = propagate_hybrid(&field, &screen).unwrap();
    let analyzer = SubspaceAnalyzer::new(g, 1, W0).unwrap();
    let a = analyzer.filter(&out).unwrap();
    let b = subspace_filter(&out, 1, W0).unwrap();
    assert_eq!(a.amps, b.amps);
    assert_eq!(a.survival, b.survival);
}
