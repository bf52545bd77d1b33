//! Controllability of drift plus drive: generic pairs close to u(N), a
//! block-diagonal pair does not.

use offres::algebra::{constraint_count, lie_closure, DEFAULT_RANK_TOL};
use offres::linalg::{CMatrix, C64};
use offres::rng;

fn main() -> offres::error::Result<()> {
    for n in 3..=5 {
        let mut g = rng::stream(42, &format!("closure-{n}"));
        let h0 = rng::random_hermitian(&mut g, n);
        let hi = rng::random_hermitian(&mut g, n);
        let c = lie_closure(&h0, &hi, DEFAULT_RANK_TOL)?;
        println!(
            "N = {n}: dimension {:>2} of {:>2}, {} generations, {} leakage constraints",
            c.dimension,
            n * n,
            c.generations,
            constraint_count(n)?
        );
    }

    // both generators respect the {1,2} ⊕ {3,4} split
    let h0 = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(
        [0.0, 1.0, 10.0, 17.0].map(|x| C64::new(x, 0.0)).to_vec(),
    ));
    let mut hi = CMatrix::zeros(4, 4);
    for (i, j) in [(0, 1), (2, 3)] {
        hi[(i, j)] = C64::new(0.3, 0.1);
        hi[(j, i)] = C64::new(0.3, -0.1);
    }
    let c = lie_closure(&h0, &hi, DEFAULT_RANK_TOL)?;
    println!("block-diagonal N = 4: dimension {} (full: {})", c.dimension, c.is_full);
    Ok(())
}
