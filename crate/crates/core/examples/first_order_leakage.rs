//! Closed-form lowest-order leakage against the propagated amplitude, and the
//! corrective coefficients that cancel it.

use std::f64::consts::PI;

use offres::linalg::{CMatrix, C64};
use offres::model::{LevelSystem, Pulse};
use offres::propagate::{evolve, IntegratorConfig};
use offres::synth::{corrective_first_order, first_order_leakage};

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
    let t0 = 3.0 * PI;
    let u = evolve(&system, &Pulse::new(1.0, 1.0, 0.0, t0)?, &IntegratorConfig::default())?;

    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let from_1 = first_order_leakage(&system, t0, one, zero)?;
    let from_2 = first_order_leakage(&system, t0, zero, one)?;
    println!("U31: propagated {:.6e}  first order {:.6e}", u.entries[(2, 0)], from_1);
    println!("U32: propagated {:.6e}  first order {:.6e}", u.entries[(2, 1)], from_2);

    let (c31, c32) = corrective_first_order(&system, t0)?;
    for (name, c) in [("ω31", c31), ("ω32", c32)] {
        let p = Pulse::from_coefficient(c, 1.0, t0)?;
        println!("{name}: coefficient {c:.6e} -> amplitude {:.6e}, phase {:.6}", p.amplitude(), p.phase());
    }
    Ok(())
}
