//! Dense complex matrix helpers shared by the propagators and the algebra checks.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

pub const I: C64 = C64::new(0.0, 1.0);
pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Largest entrywise modulus.
pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// `max |A - A^H|`.
pub fn hermitian_defect(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut d = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            d = d.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    d
}

/// `max |U^H U - I|`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let g = u.adjoint() * u;
    let n = g.nrows();
    let mut d = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { ONE } else { ZERO };
            d = d.max((g[(i, j)] - target).norm());
        }
    }
    d
}

pub fn require_hermitian(a: &CMatrix, rel_tol: f64) -> Result<()> {
    if !a.is_square() {
        return Err(Error::BadDimension {
            n: a.nrows(),
            reason: "matrix must be square",
        });
    }
    let defect = hermitian_defect(a);
    if defect > rel_tol * max_abs(a).max(f64::MIN_POSITIVE) {
        return Err(Error::NotHermitian { defect });
    }
    Ok(())
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn sigma_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn sigma_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

pub fn sigma_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

/// Spectral decomposition of a Hermitian matrix, reused to build `exp(-i H t)`
/// for many `t` without re-diagonalizing.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn new(h: &CMatrix) -> Self {
        let eig = h.clone().symmetric_eigen();
        Self {
            values: eig.eigenvalues.iter().copied().collect(),
            vectors: eig.eigenvectors,
        }
    }

    /// Eigenvalues in ascending order.
    pub fn sorted_values(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        v.sort_by(f64::total_cmp);
        v
    }

    /// `exp(-i H t)`, assembled as `I + V (exp(-i Λ t) - 1) V^H` so that
    /// eigenvector roundoff only touches the small part for short steps.
    pub fn propagator(&self, t: f64) -> CMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &lambda) in self.values.iter().enumerate() {
            let x = lambda * t;
            let half = (0.5 * x).sin();
            let em1 = C64::new(-2.0 * half * half, -x.sin());
            for i in 0..n {
                scaled[(i, j)] *= em1;
            }
        }
        scaled * self.vectors.adjoint() + CMatrix::identity(n, n)
    }
}

/// `exp(-i H t)` for Hermitian `H`.
pub fn expm_hermitian(h: &CMatrix, t: f64) -> CMatrix {
    HermitianEigen::new(h).propagator(t)
}

/// Closest unitary in Frobenius norm (`U V^H` from the SVD).
pub fn polar_unitary(a: &CMatrix) -> Result<CMatrix> {
    let svd = a.clone().svd(true, true);
    match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => Ok(u * v_t),
        _ => Err(Error::Numerical("SVD did not return singular vectors")),
    }
}

/// Logarithm of a 2x2 unitary written as `W = exp(i*phase) * (cos θ I - i sin θ n·σ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Su2Log {
    pub phase: f64,
    pub theta: f64,
    /// Unit axis; `[0, 0, 0]` when `theta == 0`.
    pub axis: [f64; 3],
    /// Raw `(a0, ax, ay, az)` of the SU(2) factor.
    pub quaternion: [f64; 4],
}

impl Su2Log {
    pub fn of(w: &CMatrix) -> Self {
        assert_eq!(w.shape(), (2, 2), "Su2Log expects a 2x2 matrix");
        let det = w[(0, 0)] * w[(1, 1)] - w[(0, 1)] * w[(1, 0)];
        let phase = det.arg() / 2.0;
        let s = w * C64::from_polar(1.0, -phase);
        let a0 = ((s[(0, 0)] + s[(1, 1)]) / 2.0).re;
        let ax = (I * (s[(0, 1)] + s[(1, 0)]) / 2.0).re;
        let ay = (I * (I * s[(0, 1)] - I * s[(1, 0)]) / 2.0).re;
        let az = (I * (s[(0, 0)] - s[(1, 1)]) / 2.0).re;
        let norm = (ax * ax + ay * ay + az * az).sqrt();
        let theta = norm.atan2(a0);
        let axis = if norm > 0.0 {
            [ax / norm, ay / norm, az / norm]
        } else {
            [0.0; 3]
        };
        Self {
            phase,
            theta,
            axis,
            quaternion: [a0, ax, ay, az],
        }
    }

    /// Hermitian generator `G` with `W = exp(-i G t)`, as `(g0, gx, gy, gz)`.
    pub fn generator(&self, t: f64) -> [f64; 4] {
        [
            -self.phase / t,
            self.theta * self.axis[0] / t,
            self.theta * self.axis[1] / t,
            self.theta * self.axis[2] / t,
        ]
    }
}

/// `exp(-i angle σx)`.
pub fn x_rotation(angle: f64) -> CMatrix {
    let (s, c) = angle.sin_cos();
    CMatrix::from_row_slice(
        2,
        2,
        &[C64::new(c, 0.0), C64::new(0.0, -s), C64::new(0.0, -s), C64::new(c, 0.0)],
    )
}

pub fn frobenius(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

/// Serde adapter: a complex matrix as a list of rows of `[re, im]` pairs.
pub mod serde_cmatrix {
    use super::{CMatrix, C64};
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMatrix, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(d)?;
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(D::Error::custom("ragged matrix rows"));
        }
        Ok(CMatrix::from_fn(n, m, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_sigma_x_is_rotation() {
        let u = expm_hermitian(&sigma_x(), 0.3);
        assert!(max_abs_diff(&u, &x_rotation(0.3)) < 1e-14);
    }

    #[test]
    fn su2_log_recovers_generator() {
        let h = sigma_x() * C64::new(0.2, 0.0)
            + sigma_z() * C64::new(-0.05, 0.0)
            + CMatrix::identity(2, 2) * C64::new(0.01, 0.0);
        let w = expm_hermitian(&h, 1.5);
        let g = Su2Log::of(&w).generator(1.5);
        assert!((g[0] - 0.01).abs() < 1e-13);
        assert!((g[1] - 0.2).abs() < 1e-13);
        assert!(g[2].abs() < 1e-13);
        assert!((g[3] + 0.05).abs() < 1e-13);
    }

    #[test]
    fn polar_of_scaled_unitary() {
        let u = x_rotation(0.7) * C64::new(1.3, 0.0);
        let w = polar_unitary(&u).unwrap();
        assert!(max_abs_diff(&w, &x_rotation(0.7)) < 1e-13);
    }
}
