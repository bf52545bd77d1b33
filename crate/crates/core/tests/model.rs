mod common;

use std::collections::BTreeSet;
use std::f64::consts::PI;

use offres::linalg::{max_abs_diff, unitarity_defect, CMatrix, C64};
use offres::model::{
    embed_bipartite_index_map, map_two_qubits, select_t0, validate_system, LevelSystem, Pulse, PulseSequence,
    TwoQubitSpec,
};
use offres::rng;
use proptest::prelude::*;

fn spec(seed: u64, jz: f64, jx: f64) -> TwoQubitSpec {
    let mut g = rng::stream(seed, "model-two-qubit");
    TwoQubitSpec {
        dims: (2, 2),
        local_hamiltonians: (rng::random_hermitian(&mut g, 2), rng::random_hermitian(&mut g, 2)),
        coupling_jz: jz,
        coupling_jx: jx,
        drive: None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mapped_spectrum_matches_jacobi(seed in any::<u64>(), jz in -0.5f64..0.5, jx in -0.5f64..0.5) {
        let s = spec(seed, jz, jx);
        let m = map_two_qubits(&s).unwrap();
        let oracle = common::jacobi_eigenvalues(&m.hamiltonian);
        for (a, b) in m.spectrum.iter().zip(&oracle) {
            prop_assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        prop_assert!(unitarity_defect(&m.basis_change) < 1e-12);
        let d = &m.basis_change.adjoint() * &m.hamiltonian * &m.basis_change;
        prop_assert!(max_abs_diff(&d, &common::diag(&m.spectrum)) < 1e-12);
    }

    #[test]
    fn embedding_is_injective(n in 3usize..80) {
        let map = embed_bipartite_index_map(n).unwrap();
        prop_assert_eq!(map.product_dimension, 3 * (n - 1));
        prop_assert_eq!(map.image.len(), n);
        let used: BTreeSet<usize> = map.image.iter().chain(&map.unphysical).map(|s| s.index).collect();
        prop_assert_eq!(used.len(), map.product_dimension);
        prop_assert_eq!(map.image.len() + map.unphysical.len(), map.product_dimension);
        prop_assert!(map.image.iter().all(|s| s.index == s.first * (n - 1) + s.second));
    }

    #[test]
    fn pulses_round_trip(amp in 0.0f64..5.0, carrier in 0.1f64..20.0, phase in -PI..PI, duration in 0.1f64..50.0) {
        let p = Pulse::new(amp, carrier, phase, duration).unwrap();
        let back: Pulse = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        prop_assert_eq!(p, back);
        let q = Pulse::from_coefficient(p.coefficient(), carrier, duration).unwrap();
        prop_assert!((q.coefficient() - p.coefficient()).norm() < 1e-14 * amp.max(1.0));
    }
}

#[test]
fn level_system_round_trip() {
    let s = common::four_level(42);
    let text = serde_json::to_string(&s).unwrap();
    let back: LevelSystem = serde_json::from_str(&text).unwrap();
    assert_eq!(s, back);
    let seq = PulseSequence::new(vec![Pulse::new(1.0, 1.0, 0.0, 3.0 * PI).unwrap()], 4).unwrap();
    let back: PulseSequence = serde_json::from_str(&serde_json::to_string(&seq).unwrap()).unwrap();
    assert_eq!(seq, back);
}

#[test]
fn two_qubit_spec_round_trip() {
    let s = spec(3, 0.1, 0.05);
    let back: TwoQubitSpec = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
    assert_eq!(s, back);
}

#[test]
fn bad_systems_are_rejected() {
    let mut c = CMatrix::zeros(3, 3);
    c[(0, 1)] = C64::new(0.01, 0.0);
    assert!(LevelSystem::new("skew", vec![0.0, 1.0, 10.0], c).is_err());
    assert!(LevelSystem::new("order", vec![0.0, 10.0, 1.0], CMatrix::zeros(3, 3)).is_err());
    assert!(LevelSystem::new("shape", vec![0.0, 1.0], CMatrix::zeros(3, 3)).is_err());
    assert!(Pulse::new(1.0, 1.0, 0.0, -1.0).is_err());
    assert!(embed_bipartite_index_map(2).is_err());
}

#[test]
fn reference_is_clean_and_degenerate_is_flagged() {
    assert!(!validate_system(&common::reference(), 1.0).has_degenerate_tones());
    let mut c = CMatrix::zeros(3, 3);
    common::set(&mut c, 0, 1, C64::new(0.01, 0.0));
    common::set(&mut c, 0, 2, C64::new(0.01, 0.0));
    let close = LevelSystem::new("close", vec![0.0, 1.0, 1.02], c).unwrap();
    assert!(validate_system(&close, 1.0).has_degenerate_tones());
}

#[test]
fn reference_t0_is_three_half_periods() {
    let t0 = select_t0(&common::reference()).unwrap().t0;
    assert!((t0 - 3.0 * PI).abs() < 1e-12);
}

#[test]
fn uncoupled_qubits_map_to_product_energies() {
    let s = TwoQubitSpec {
        dims: (2, 2),
        local_hamiltonians: (common::diag(&[0.0, 1.0]), common::diag(&[0.0, 2.5])),
        coupling_jz: 0.0,
        coupling_jx: 0.0,
        drive: None,
    };
    let m = map_two_qubits(&s).unwrap();
    assert_eq!(m.spectrum, vec![0.0, 1.0, 2.5, 3.5]);
    let ls = m.level_system(&s.default_drive(), "product").unwrap();
    assert!((ls.coupling(0, 1).norm() - 1.0).abs() < 1e-15);
    assert_eq!(ls.coupling(0, 2).norm(), 0.0);
}
