//! Alternate drift and drive for N² + 1 durations until the leakage block of
//! the product vanishes.

use std::f64::consts::TAU;

use offres::algebra::{alternating_search, schedule_propagator, SearchOptions};
use offres::linalg::CMatrix;
use offres::model::LevelSystem;
use offres::propagate::leakage_of_matrix;
use offres::rng;

fn main() -> offres::error::Result<()> {
    let system = LevelSystem::new("drift", vec![0.0, 1.0, 10.0], CMatrix::zeros(3, 3))?;
    let hi = rng::random_hermitian(&mut rng::stream(7, "control"), 3);
    let total = 10.0 * TAU / system.qubit_gap();
    let outcome = alternating_search(&system, &hi, total, 7, &SearchOptions::default())?;
    println!(
        "leakage norm {:.3e} after {} evaluations (best restart {})",
        outcome.leakage_norm, outcome.evaluations, outcome.best_restart
    );
    println!("α = {:.6}", outcome.schedule.scale);
    for (t, g) in outcome.schedule.durations.iter().zip(&outcome.schedule.which_generator) {
        println!("  {g:?} for {t:.6}");
    }
    println!("Σt = {:.12} (target {total:.12})", outcome.schedule.total_time());
    let u = schedule_propagator(&system, &hi, &outcome.schedule);
    println!("replayed leakage norm {:.3e}", leakage_of_matrix(&u).residual_norm);
    Ok(())
}
