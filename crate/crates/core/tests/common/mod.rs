#![allow(dead_code)]

use offres::linalg::{CMatrix, C64};
use offres::model::LevelSystem;
use offres::rng;
use rand::Rng;

pub fn set(c: &mut CMatrix, i: usize, j: usize, z: C64) {
    c[(i, j)] = z;
    c[(j, i)] = z.conj();
}

/// ω = (0, 1, 10), |γ| = 0.01 with phases 0, 0.7, -1.3 on (12, 13, 23).
pub fn reference() -> LevelSystem {
    let mut c = CMatrix::zeros(3, 3);
    set(&mut c, 0, 1, C64::new(0.01, 0.0));
    set(&mut c, 0, 2, C64::from_polar(0.01, 0.7));
    set(&mut c, 1, 2, C64::from_polar(0.01, -1.3));
    LevelSystem::new("reference", vec![0.0, 1.0, 10.0], c).unwrap()
}

/// Reference gaps with the higher-level couplings switched off.
pub fn pure_two_level() -> LevelSystem {
    let mut c = CMatrix::zeros(3, 3);
    set(&mut c, 0, 1, C64::new(0.01, 0.0));
    LevelSystem::new("two_level", vec![0.0, 1.0, 10.0], c).unwrap()
}

/// ω = (0, 1, 9, 17) with seeded random phases, |γ| = 0.01, γ12 real.
pub fn four_level(seed: u64) -> LevelSystem {
    let mut g = rng::stream(seed, "four-level");
    let mut c = CMatrix::zeros(4, 4);
    for i in 0..4 {
        for j in i + 1..4 {
            let z = if (i, j) == (0, 1) {
                C64::new(0.01, 0.0)
            } else {
                rng::random_phase(&mut g) * 0.01
            };
            set(&mut c, i, j, z);
        }
    }
    LevelSystem::new("four_level", vec![0.0, 1.0, 9.0, 17.0], c).unwrap()
}

/// N levels with well separated, non-harmonic gaps and uniform couplings.
pub fn ladder(n: usize) -> LevelSystem {
    let energies: Vec<f64> = (0..n)
        .map(|k| match k {
            0 => 0.0,
            1 => 1.0,
            _ => 10.0 + 13.0 * (k as f64 - 2.0) + (k * k) as f64,
        })
        .collect();
    let c = CMatrix::from_fn(n, n, |i, j| if i == j { C64::new(0.0, 0.0) } else { C64::new(0.01, 0.0) });
    LevelSystem::new(format!("ladder{n}"), energies, c).unwrap()
}

pub fn random_system(g: &mut impl Rng, n: usize) -> LevelSystem {
    let mut energies = vec![0.0, 1.0];
    let mut e = 1.0;
    for _ in 2..n {
        e += g.random_range(3.0..8.0);
        energies.push(e);
    }
    let mut c = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            set(&mut c, i, j, rng::random_phase(g) * g.random_range(0.002..0.02));
        }
    }
    LevelSystem::new("random", energies, c).unwrap()
}

/// Eigenvalues of a Hermitian matrix by cyclic Jacobi rotations on the real
/// symmetric embedding `[[Re, -Im], [Im, Re]]`; every eigenvalue appears twice
/// there, so every other one is kept.
pub fn jacobi_eigenvalues(h: &CMatrix) -> Vec<f64> {
    let n = h.nrows();
    let m = 2 * n;
    let mut a = vec![vec![0.0f64; m]; m];
    for i in 0..n {
        for j in 0..n {
            let z = h[(i, j)];
            a[i][j] = z.re;
            a[i + n][j + n] = z.re;
            a[i][j + n] = -z.im;
            a[i + n][j] = z.im;
        }
    }
    for _sweep in 0..100 {
        let off: f64 = (0..m)
            .flat_map(|p| (0..m).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| a[p][q] * a[p][q])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..m {
            for q in p + 1..m {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..m {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..m {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut d: Vec<f64> = (0..m).map(|i| a[i][i]).collect();
    d.sort_by(f64::total_cmp);
    d.into_iter().step_by(2).collect()
}

pub fn diag(v: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(v.len(), v.iter().map(|&x| C64::new(x, 0.0))))
}
