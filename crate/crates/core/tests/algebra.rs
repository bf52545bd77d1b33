mod common;

use offres::algebra::{
    alternating_search, constraint_count, lie_closure, project_simplex, schedule_propagator, AlternatingSchedule,
    Generator, SearchOptions, DEFAULT_RANK_TOL,
};
use offres::linalg::{unitarity_defect, CMatrix, C64};
use offres::model::LevelSystem;
use offres::rng;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn closure_dimension_survives_conjugation_and_scaling(seed in any::<u64>(), n in 3usize..=5, scale in 0.01f64..100.0) {
        let mut g = rng::stream(seed, "algebra-conj");
        let system = common::random_system(&mut g, n);
        let base = lie_closure(&system.h0(), system.couplings(), DEFAULT_RANK_TOL).unwrap().dimension;
        let v = rng::random_unitary(&mut g, n);
        let h0 = &v * system.h0() * v.adjoint();
        let hi = &v * system.couplings() * v.adjoint() * C64::new(scale, 0.0);
        let moved = lie_closure(&h0, &hi, DEFAULT_RANK_TOL).unwrap().dimension;
        prop_assert_eq!(base, moved);
        prop_assert_eq!(base, n * n);
    }

    #[test]
    fn simplex_projection_sums_to_total(v in proptest::collection::vec(-5.0f64..5.0, 1..20), total in 0.1f64..50.0) {
        let p = project_simplex(&v, total);
        prop_assert_eq!(p.len(), v.len());
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - total).abs() < 1e-9 * total.max(1.0));
    }

    #[test]
    fn schedules_give_unitaries(seed in any::<u64>()) {
        let mut g = rng::stream(seed, "algebra-schedule");
        let system = common::random_system(&mut g, 3);
        let pattern = AlternatingSchedule::pattern(3);
        let raw: Vec<f64> = (0..pattern.len()).map(|_| rng::normal(&mut g).abs()).collect();
        let schedule = AlternatingSchedule {
            durations: project_simplex(&raw, 20.0),
            which_generator: pattern,
            scale: 1.0,
        };
        let u = schedule_propagator(&system, system.couplings(), &schedule);
        prop_assert!(unitarity_defect(&u) < 1e-12);
    }
}

#[test]
fn block_diagonal_drive_is_not_controllable() {
    let mut c = CMatrix::zeros(4, 4);
    common::set(&mut c, 0, 1, C64::new(0.3, 0.0));
    common::set(&mut c, 2, 3, C64::new(0.2, 0.0));
    let h0 = common::diag(&[0.0, 1.0, 3.7, 6.1]);
    let r = lie_closure(&h0, &c, DEFAULT_RANK_TOL).unwrap();
    // su(2) ⊕ su(2) plus the one central direction carried by H0
    assert_eq!(r.dimension, 7);
    assert!(!r.is_full);
    assert_eq!(r.basis_matrices.len(), 7);
    // a diagonal drive term adds the other central direction
    common::set(&mut c, 0, 0, C64::new(0.05, 0.0));
    assert_eq!(lie_closure(&h0, &c, DEFAULT_RANK_TOL).unwrap().dimension, 8);
}

#[test]
fn commuting_generators_stop_at_two() {
    let h0 = common::diag(&[0.0, 1.0, 2.5]);
    let hi = common::diag(&[0.3, -0.1, 0.7]);
    assert_eq!(lie_closure(&h0, &hi, DEFAULT_RANK_TOL).unwrap().dimension, 2);
}

#[test]
fn pattern_ends_with_the_drive() {
    for n in [3, 4] {
        let p = AlternatingSchedule::pattern(n);
        assert_eq!(p.len(), n * n + 1);
        assert_eq!(*p.last().unwrap(), Generator::HI);
        assert!(p.windows(2).all(|w| w[0] != w[1]));
    }
    assert_eq!(AlternatingSchedule::pattern(3)[0], Generator::H0);
}

#[test]
fn constraint_count_formula() {
    for n in 3..=12 {
        assert_eq!(constraint_count(n).unwrap(), 4 * (n - 2));
    }
    assert!(constraint_count(2).is_err());
}

#[test]
fn leakage_free_control_succeeds_immediately() {
    // HI acts on the qubit only, so every schedule keeps the leakage block empty
    let mut c = CMatrix::zeros(3, 3);
    common::set(&mut c, 0, 1, C64::new(0.05, 0.0));
    let system = LevelSystem::new("isolated", vec![0.0, 1.0, 10.0], c.clone()).unwrap();
    let opts = SearchOptions {
        budget: 50,
        restarts: 2,
        ..SearchOptions::default()
    };
    let out = alternating_search(&system, &c, 20.0, 42, &opts).unwrap();
    assert!(out.success);
    assert!(out.leakage_norm <= 1e-12);
    assert_eq!(out.best_restart, 0);
    assert!((out.schedule.total_time() - 20.0).abs() < 1e-9);
}

#[test]
fn search_is_seed_deterministic() {
    let system = common::reference();
    let opts = SearchOptions {
        budget: 200,
        restarts: 2,
        ..SearchOptions::default()
    };
    let a = alternating_search(&system, system.couplings(), 30.0, 7, &opts);
    let b = alternating_search(&system, system.couplings(), 30.0, 7, &opts);
    match (a, b) {
        (Ok(a), Ok(b)) => assert_eq!(a, b),
        (Err(a), Err(b)) => assert_eq!(a.to_string(), b.to_string()),
        _ => panic!("outcomes differ"),
    }
}

#[test]
fn search_rejects_other_sizes() {
    assert!(alternating_search(&common::ladder(5), common::ladder(5).couplings(), 10.0, 1, &SearchOptions::default()).is_err());
}
