mod common;

use std::f64::consts::PI;

use offres::error::Error;
use offres::linalg::{CMatrix, C64};
use offres::model::{LevelSystem, Pulse};
use offres::propagate::{evolve, leakage_of, IntegratorConfig};
use offres::synth::{
    corrective_first_order, effective_two_level_map, first_order_leakage, refine, synthesize_sequence,
    RefineOptions, COSINE_DRIVE_FACTOR,
};
use proptest::prelude::*;

const T0: f64 = 3.0 * PI;

#[test]
fn reference_first_order_values() {
    let system = common::reference();
    let w = first_order_leakage(&system, T0, C64::new(1.0, 0.0), C64::new(0.0, 0.0)).unwrap();
    let expected = C64::from_polar(0.01, -0.7) * (1.0 / 9.0 + 1.0 / 11.0);
    assert!((w - expected).norm() < 1e-17, "{w} vs {expected}");

    // the ω32 sidebands (8 and 10) complete whole periods in 3π
    let (c31, c32) = corrective_first_order(&system, T0).unwrap();
    let expected = C64::new(0.0, -1.0) * (2.0 / 9.0 + 2.0 / 11.0) / (3.0 * PI);
    assert!((c31 - expected).norm() < 1e-15, "{c31} vs {expected}");
    assert!(c32.norm() < 1e-15);
}

#[test]
fn first_order_matches_propagation() {
    let system = common::reference();
    let u = evolve(&system, &Pulse::new(1.0, 1.0, 0.0, T0).unwrap(), &IntegratorConfig::default()).unwrap();
    let w = first_order_leakage(&system, T0, C64::new(1.0, 0.0), C64::new(0.0, 0.0)).unwrap();
    // next order is smaller by γ t0
    assert!((u.entries[(2, 0)] - w).norm() < 0.01 * T0 * w.norm());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn leakage_is_linear_in_the_initial_state(
        a in -1.0f64..1.0, b in -1.0f64..1.0, c in -1.0f64..1.0, d in -1.0f64..1.0,
        m in 1u32..12,
    ) {
        let system = common::reference();
        let t0 = f64::from(m) * PI;
        let (u0, v0) = (C64::new(a, b), C64::new(c, d));
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let w = first_order_leakage(&system, t0, u0, v0).unwrap();
        let wu = first_order_leakage(&system, t0, one, zero).unwrap();
        let wv = first_order_leakage(&system, t0, zero, one).unwrap();
        prop_assert!((w - (u0 * wu + v0 * wv)).norm() < 1e-16);
    }

    #[test]
    fn correction_ignores_the_coupling_phase(phase in -PI..PI) {
        // rotating γ13 rotates the leakage but not the correction, which is γ-free
        let system = common::reference();
        let mut c = system.couplings().clone();
        common::set(&mut c, 0, 2, C64::from_polar(0.01, phase));
        let rotated = system.with_couplings(c).unwrap();
        let (a, _) = corrective_first_order(&system, T0).unwrap();
        let (b, _) = corrective_first_order(&rotated, T0).unwrap();
        prop_assert!((a - b).norm() < 1e-16);
        let w = first_order_leakage(&rotated, T0, C64::new(1.0, 0.0), C64::new(0.0, 0.0)).unwrap();
        let turned = w * C64::from_polar(1.0, phase);
        prop_assert!(turned.im.abs() < 1e-12 && turned.re > 0.0);
    }
}

#[test]
fn zero_leakage_couplings_give_zero_corrections() {
    let system = common::pure_two_level();
    let r = synthesize_sequence(&system, T0).unwrap();
    assert!(r.coefficients().iter().all(|c| *c == C64::new(0.0, 0.0)));
    assert_eq!(r.final_leakage.max_leakage_population, 0.0);
    let refined = refine(&system, &r, &RefineOptions::default()).unwrap();
    assert_eq!(refined.iterations, 0);
}

#[test]
fn correction_beats_bare_pulse_and_refinement_finishes() {
    let system = common::reference();
    let bare = leakage_of(&evolve(&system, &Pulse::new(1.0, 1.0, 0.0, T0).unwrap(), &IntegratorConfig::default()).unwrap());
    let first = synthesize_sequence(&system, T0).unwrap();
    assert!(first.final_leakage.max_amplitude() < 0.3 * bare.max_amplitude());
    let refined = refine(&system, &first, &RefineOptions::default()).unwrap();
    assert!(refined.converged);
    assert!(refined.final_leakage.max_amplitude() < 1e-10);
    for s in &refined.series {
        let sum: C64 = s.coefficients.iter().sum();
        assert!((sum - s.accumulated).norm() < 1e-15);
        assert_eq!(s.coefficients.len(), 1 + refined.iterations);
    }
}

#[test]
fn degenerate_tone_is_rejected() {
    let mut c = CMatrix::zeros(3, 3);
    common::set(&mut c, 0, 1, C64::new(0.01, 0.0));
    common::set(&mut c, 0, 2, C64::new(0.01, 0.0));
    common::set(&mut c, 1, 2, C64::new(0.01, 0.0));
    let system = LevelSystem::new("degenerate", vec![0.0, 1.0, 1.02], c).unwrap();
    let err = synthesize_sequence(&system, T0).unwrap_err();
    assert!(matches!(err, Error::DegenerateDenominator { .. }), "{err}");
}

#[test]
fn pulse_count_grows_with_levels() {
    for n in 3..=6 {
        let r = synthesize_sequence(&common::ladder(n), T0).unwrap();
        assert_eq!(r.corrective_pulses.len(), 2 * (n - 2));
        assert_eq!(r.sequence(1).unwrap().segments().len(), 2 * n - 3);
    }
}

#[test]
fn pure_two_level_residual_is_bloch_siegert() {
    for g in [0.02, 0.01, 0.005] {
        let mut c = CMatrix::zeros(3, 3);
        common::set(&mut c, 0, 1, C64::new(g, 0.0));
        let system = LevelSystem::new("two", vec![0.0, 1.0, 10.0], c).unwrap();
        let r = refine(&system, &synthesize_sequence(&system, T0).unwrap(), &RefineOptions::default()).unwrap();
        let m = effective_two_level_map(&system, &r, 1).unwrap();
        let [d0, dx, dy, dz] = m.generator_decomposition;
        assert!(d0.abs() < 1e-15 && dy.abs() < 1e-15);
        assert!((dz / (g * g) - 0.125).abs() < 1e-3, "δz/γ² = {}", dz / (g * g));
        assert!(dx.abs() < g.powi(3) * 0.02);
        assert!((m.convention_factor - COSINE_DRIVE_FACTOR).abs() < 1e-4);
    }
}
