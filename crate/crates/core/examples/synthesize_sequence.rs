//! First-order corrective sequence for a four-level system, refined until the
//! leakage block vanishes, then checked against the independent integrator.

use offres::linalg::{CMatrix, C64};
use offres::model::{select_t0, LevelSystem};
use offres::propagate::{leakage_of, oracle_evolve_sequence};
use offres::synth::{refine, synthesize_sequence, RefineOptions};

fn main() -> offres::error::Result<()> {
    let mut g = CMatrix::zeros(4, 4);
    let phases = [0.0, 0.4, -2.1, 1.1, 2.7, -0.6];
    let pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
    for ((i, j), ph) in pairs.into_iter().zip(phases) {
        g[(i, j)] = C64::from_polar(0.01, ph);
        g[(j, i)] = C64::from_polar(0.01, -ph);
    }
    let system = LevelSystem::new("four", vec![0.0, 1.0, 9.0, 17.0], g)?;
    let t0 = select_t0(&system)?.t0;

    let first = synthesize_sequence(&system, t0)?;
    println!("{} corrective pulses, first-order max leakage {:.3e}", first.corrective_pulses.len(), first.final_leakage.max_amplitude());
    let refined = refine(&system, &first, &RefineOptions::default())?;
    println!("refined in {} Newton steps: max leakage {:.3e}", refined.iterations, refined.final_leakage.max_amplitude());
    for (s, p) in refined.series.iter().zip(&refined.corrective_pulses) {
        println!(
            "  ω{}{} = {:>4}: α = {:.6e}, φ = {:.6}, series terms {}",
            s.target_level,
            s.source_level,
            s.tone,
            p.amplitude(),
            p.phase(),
            s.coefficients.len()
        );
    }

    let check = oracle_evolve_sequence(&system, &refined.sequence(1)?, 8, &refined.integrator)?;
    println!("leakage under the 8x oracle {:.3e}", leakage_of(&check).max_amplitude());
    Ok(())
}
