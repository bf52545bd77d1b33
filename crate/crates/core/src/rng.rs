//! Seeded randomness. Every consumer draws from its own named stream so that
//! adding draws in one place never shifts another.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{self, CMatrix, C64};

pub const DEFAULT_SEED: u64 = 42;

/// ChaCha8 generator for `(seed, name)`; the name selects the stream.
pub fn stream(seed: u64, name: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // FNV-1a of the name
    let id = name
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3));
    rng.set_stream(id);
    rng
}

pub fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Hermitian matrix with independent standard normal entries (GUE up to scale).
pub fn random_hermitian(rng: &mut impl Rng, n: usize) -> CMatrix {
    let a = CMatrix::from_fn(n, n, |_, _| C64::new(normal(rng), normal(rng)));
    (&a + a.adjoint()) * C64::new(0.5, 0.0)
}

/// Haar-random unitary from the QR of a complex Ginibre matrix.
pub fn random_unitary(rng: &mut impl Rng, n: usize) -> CMatrix {
    let a = CMatrix::from_fn(n, n, |_, _| C64::new(normal(rng), normal(rng)));
    let qr = a.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { linalg::ONE };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

pub fn random_phase(rng: &mut impl Rng) -> C64 {
    C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
}
