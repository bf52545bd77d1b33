//! Two coupled flux qubits seen as one four-level system, and the embedding of
//! an N-level system in a 3 × (N - 1) product space.

use offres::linalg::{CMatrix, C64};
use offres::model::{embed_bipartite_index_map, map_two_qubits, TwoQubitSpec};

fn qubit(eps: f64, delta: f64) -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[C64::new(-eps, 0.0), C64::new(delta, 0.0), C64::new(delta, 0.0), C64::new(eps, 0.0)])
}

fn main() -> offres::error::Result<()> {
    let spec = TwoQubitSpec {
        dims: (2, 2),
        local_hamiltonians: (qubit(0.5, 0.05), qubit(0.7, 0.03)),
        coupling_jz: 0.1,
        coupling_jx: 0.05,
        drive: None,
    };
    let mapping = map_two_qubits(&spec)?;
    println!("spectrum {:?}", mapping.spectrum);
    let system = mapping.level_system(&spec.default_drive(), "pc")?;
    println!("level energies {:?}", system.energies());
    println!("|γ12| = {:.4}, |γ13| = {:.4}", system.coupling(0, 1).norm(), system.coupling(0, 2).norm());

    for n in [3, 5] {
        let map = embed_bipartite_index_map(n)?;
        println!("N = {n}: product dimension {}", map.product_dimension);
        for (k, s) in map.image.iter().enumerate() {
            println!("  level {} -> ({}, {}) index {}", k + 1, s.first, s.second, s.index);
        }
    }
    Ok(())
}
