//! The qubit block of a refined sequence as a rotation about x plus small
//! corrections, for one and for ten repetitions.

use std::f64::consts::PI;

use offres::linalg::{CMatrix, C64};
use offres::model::LevelSystem;
use offres::synth::{effective_two_level_map, refine, synthesize_sequence, RefineOptions};

fn main() -> offres::error::Result<()> {
    let mut g = CMatrix::zeros(3, 3);
    for (i, j, z) in [
        (0, 1, C64::new(0.01, 0.0)),
        (0, 2, C64::from_polar(0.01, 0.7)),
        (1, 2, C64::from_polar(0.01, -1.3)),
    ] {
        g[(i, j)] = z;
        g[(j, i)] = z.conj();
    }
    let system = LevelSystem::new("reference", vec![0.0, 1.0, 10.0], g)?;
    // 4π makes every block see the same drive phases
    let refined = refine(&system, &synthesize_sequence(&system, 4.0 * PI)?, &RefineOptions::default())?;
    println!("convention factor {:.8}", refined.convention_factor);
    for repeats in [1, 10] {
        let m = effective_two_level_map(&system, &refined, repeats)?;
        let [d0, dx, dy, dz] = m.generator_decomposition;
        println!(
            "k = {repeats:>2}: φ̄ = {:.10} (nominal {:.10})  δ = ({d0:.3e}, {dx:.3e}, {dy:.3e}, {dz:.3e})  |B - R| = {:.3e}",
            m.rotation_angle, m.nominal_angle, m.deviation_norm
        );
    }
    Ok(())
}
