//! Propagate a resonant qubit pulse, read off the leakage and compare schemes.

use std::f64::consts::PI;

use offres::linalg::{max_abs_diff, CMatrix, C64};
use offres::model::{LevelSystem, Pulse};
use offres::propagate::{dyson_terms, evolve, leakage_of, oracle_evolve, IntegratorConfig, StateVector};

fn main() -> offres::error::Result<()> {
    let mut g = CMatrix::zeros(3, 3);
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        g[(i, j)] = C64::new(0.01, 0.0);
        g[(j, i)] = C64::new(0.01, 0.0);
    }
    let system = LevelSystem::new("demo", vec![0.0, 1.0, 10.0], g)?;
    let pulse = Pulse::new(1.0, system.qubit_gap(), 0.0, 3.0 * PI)?;
    let config = IntegratorConfig::default();

    let u = evolve(&system, &pulse, &config)?;
    println!("unitarity defect {:.2e}", u.unitarity_defect());
    let leak = leakage_of(&u);
    println!("max leakage population {:.3e}", leak.max_leakage_population);

    let oracle = oracle_evolve(&system, &pulse, 8)?;
    println!("rk4 vs oracle {:.2e}", max_abs_diff(&u.entries, &oracle.entries));

    let psi = StateVector::qubit(3, C64::new(1.0, 0.0), C64::new(0.0, 0.0))?.evolve(&u)?;
    println!("|ψ3|² from |1⟩ = {:.3e}", psi.amplitudes[2].norm_sqr());

    let terms = dyson_terms(&system, &pulse, 3, pulse.duration(), &config)?;
    let sum = terms.iter().fold(CMatrix::zeros(3, 3), |acc, t| acc + t);
    println!("Dyson through third order vs propagator {:.2e}", max_abs_diff(&sum, &u.entries));
    Ok(())
}
