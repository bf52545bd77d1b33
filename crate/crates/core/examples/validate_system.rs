//! Build a three-level system, look for problematic tones and pick `t0`.

use offres::linalg::{CMatrix, C64};
use offres::model::{select_t0, validate_system, LevelSystem};

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

    let report = validate_system(&system, system.qubit_gap());
    println!("delta_min = {:e}", report.delta_min);
    for (i, j, r) in &report.ratios {
        println!("|γ{i}{j} / ω{i}{j}| = {r:.3e}");
    }
    println!("clean: {}", report.is_clean());

    let choice = select_t0(&system)?;
    println!("t0 = {} π / ω21 = {:.6}", choice.multiple, choice.t0);

    // a third level almost on top of the second makes the correction tones collide
    let close = LevelSystem::new("close", vec![0.0, 1.0, 1.02], system.couplings().clone())?;
    for c in validate_system(&close, 1.0).degenerate_tones {
        println!("degenerate: {} vs {} (separation {:.3})", c.tone, c.other, c.separation);
    }
    Ok(())
}
