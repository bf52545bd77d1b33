//! Lie-algebra closure of a drift/control pair and a numerical search over
//! alternating-exponential schedules that clears the leakage block.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, HermitianEigen, C64, I};
use crate::model::LevelSystem;
use crate::propagate::{self, LeakageReport};

pub const DEFAULT_RANK_TOL: f64 = 1e-8;
pub const MAX_CLOSURE_DIM: usize = 16;
pub const SEARCH_THRESHOLD: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosureResult {
    pub n: usize,
    pub dimension: usize,
    /// Orthonormal under `Re tr(A^H B)`, each anti-Hermitian.
    #[serde(with = "matrix_list")]
    pub basis_matrices: Vec<CMatrix>,
    pub is_full: bool,
    pub generations: usize,
}

mod matrix_list {
    use super::CMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Wrap(#[serde(with = "crate::linalg::serde_cmatrix")] CMatrix);

    pub fn serialize<S: Serializer>(v: &[CMatrix], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|m| Wrap(m.clone())).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<CMatrix>, D::Error> {
        Ok(Vec::<Wrap>::deserialize(d)?.into_iter().map(|w| w.0).collect())
    }
}

/// Real coordinates of an anti-Hermitian matrix: `Im A_jj` on the diagonal and
/// `√2 Re A_jk`, `√2 Im A_jk` above it. The Euclidean product of two vectors is
/// `Re tr(A^H B)`.
fn vectorize(a: &CMatrix) -> Vec<f64> {
    let n = a.nrows();
    let mut v = Vec::with_capacity(n * n);
    for j in 0..n {
        v.push(a[(j, j)].im);
    }
    let r2 = std::f64::consts::SQRT_2;
    for j in 0..n {
        for k in j + 1..n {
            v.push(r2 * a[(j, k)].re);
            v.push(r2 * a[(j, k)].im);
        }
    }
    v
}

fn devectorize(v: &[f64], n: usize) -> CMatrix {
    let mut a = CMatrix::zeros(n, n);
    for j in 0..n {
        a[(j, j)] = C64::new(0.0, v[j]);
    }
    let r2 = std::f64::consts::SQRT_2;
    let mut idx = n;
    for j in 0..n {
        for k in j + 1..n {
            let z = C64::new(v[idx], v[idx + 1]) / r2;
            a[(j, k)] = z;
            a[(k, j)] = -z.conj();
            idx += 2;
        }
    }
    a
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Span {
    vectors: Vec<Vec<f64>>,
    rank_tol: f64,
}

impl Span {
    /// Adds the component of `v` orthogonal to the span if it exceeds
    /// `rank_tol * max(|v|, floor)`.
    fn try_add(&mut self, mut v: Vec<f64>, floor: f64) -> bool {
        let norm0 = dot(&v, &v).sqrt();
        if norm0 == 0.0 {
            return false;
        }
        for _ in 0..2 {
            for b in &self.vectors {
                let c = dot(b, &v);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm <= self.rank_tol * norm0.max(floor) {
            return false;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        self.vectors.push(v);
        true
    }
}

/// Real span of `{iH0, iHI}` closed under commutators.
pub fn lie_closure(h0: &CMatrix, hi: &CMatrix, rank_tol: f64) -> Result<ClosureResult> {
    let n = h0.nrows();
    if hi.shape() != h0.shape() {
        return Err(Error::BadDimension {
            n: hi.nrows(),
            reason: "H0 and HI differ in shape",
        });
    }
    if n > MAX_CLOSURE_DIM {
        return Err(Error::DimensionOverflow(n));
    }
    linalg::require_hermitian(h0, 1e-12)?;
    linalg::require_hermitian(hi, 1e-12)?;
    let full = n * n;
    let mut span = Span {
        vectors: Vec::new(),
        rank_tol,
    };
    for h in [h0, hi] {
        span.try_add(vectorize(&(h * I)), 0.0);
    }
    if span.vectors.is_empty() {
        return Err(Error::InvalidSystem("both generators vanish".into()));
    }

    let mut frontier_start = 0;
    let mut generations = 1;
    while span.vectors.len() < full {
        let end = span.vectors.len();
        let mats: Vec<CMatrix> = span.vectors.iter().map(|v| devectorize(v, n)).collect();
        let mut grew = false;
        'outer: for j in frontier_start..end {
            for i in 0..j {
                // commutators of unit elements: roundoff is measured against 1, so a
                // vanishing commutator is never promoted to a new direction
                let c = &mats[i] * &mats[j] - &mats[j] * &mats[i];
                grew |= span.try_add(vectorize(&c), 1.0);
                if span.vectors.len() == full {
                    break 'outer;
                }
            }
        }
        if !grew {
            break;
        }
        frontier_start = end;
        generations += 1;
    }

    let dimension = span.vectors.len();
    Ok(ClosureResult {
        n,
        dimension,
        basis_matrices: span.vectors.iter().map(|v| devectorize(v, n)).collect(),
        is_full: dimension == full,
        generations,
    })
}

/// Real constraints `U_1k = U_2k = 0` for `k = 3..N`.
pub fn constraint_count(n: usize) -> Result<usize> {
    if n < 3 {
        return Err(Error::BadDimension {
            n,
            reason: "leakage constraints need at least three levels",
        });
    }
    Ok(4 * (n - 2))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    H0,
    HI,
}

/// `U = exp(-iα G_last t_last) ... exp(-iα G_0 t_0)`; `durations[0]` acts first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlternatingSchedule {
    pub durations: Vec<f64>,
    pub which_generator: Vec<Generator>,
    pub scale: f64,
}

impl AlternatingSchedule {
    /// The last factor is always `HI`; generators alternate backwards from it.
    pub fn pattern(n: usize) -> Vec<Generator> {
        let m = n * n;
        (0..=m)
            .map(|i| if (m - i).is_multiple_of(2) { Generator::HI } else { Generator::H0 })
            .collect()
    }

    pub fn total_time(&self) -> f64 {
        self.durations.iter().sum()
    }
}

struct Factors {
    h0: HermitianEigen,
    hi: HermitianEigen,
    pattern: Vec<Generator>,
}

impl Factors {
    fn product(&self, durations: &[f64], scale: f64) -> CMatrix {
        let n = self.h0.values.len();
        let mut u = CMatrix::identity(n, n);
        for (t, g) in durations.iter().zip(&self.pattern) {
            let e = match g {
                Generator::H0 => &self.h0,
                Generator::HI => &self.hi,
            };
            u = e.propagator(scale * t) * u;
        }
        u
    }
}

fn leakage_norm_sq(u: &CMatrix) -> f64 {
    let n = u.nrows();
    let mut s = 0.0;
    for row in 0..2 {
        for col in 2..n {
            s += u[(row, col)].norm_sqr();
        }
    }
    s
}

/// Euclidean projection onto `{t >= 0, Σ t = total}`.
pub fn project_simplex(v: &[f64], total: f64) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &x) in u.iter().enumerate() {
        cumsum += x;
        let t = (cumsum - total) / (j + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub schedule: AlternatingSchedule,
    pub leakage: LeakageReport,
    /// Frobenius norm of the `U_1k, U_2k` block.
    pub leakage_norm: f64,
    pub evaluations: usize,
    pub restarts: usize,
    pub best_restart: usize,
    pub success: bool,
}

#[derive(Clone, Debug)]
pub struct SearchOptions {
    /// Objective evaluations per restart.
    pub budget: usize,
    pub restarts: usize,
    pub threshold: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            budget: 2000,
            restarts: 20,
            threshold: SEARCH_THRESHOLD,
        }
    }
}

struct Objective<'a> {
    factors: &'a Factors,
    total: f64,
    evaluations: usize,
    budget: usize,
}

impl Objective<'_> {
    fn split(&self, x: &[f64]) -> (Vec<f64>, f64) {
        let (d, a) = x.split_at(x.len() - 1);
        (project_simplex(d, self.total), a[0])
    }

    /// Past the budget every point scores `+inf`, so it is never accepted.
    fn eval(&mut self, x: &[f64]) -> f64 {
        if self.evaluations >= self.budget {
            return f64::INFINITY;
        }
        self.evaluations += 1;
        let (d, a) = self.split(x);
        leakage_norm_sq(&self.factors.product(&d, a))
    }
}

struct RestartResult {
    x: Vec<f64>,
    f: f64,
    evaluations: usize,
}

/// Nelder–Mead with local re-initialization around the best vertex when the
/// simplex collapses, until `budget` evaluations or `target` is reached.
fn nelder_mead(obj: &mut Objective<'_>, x0: Vec<f64>, steps: &[f64], budget: usize, target: f64) -> RestartResult {
    let dim = x0.len();
    let mut best_x = x0.clone();
    let mut best_f = obj.eval(&x0);
    let mut scale = 1.0;
    while obj.evaluations < budget && best_f > target {
        let mut simplex: Vec<(Vec<f64>, f64)> = vec![(best_x.clone(), best_f)];
        for j in 0..dim {
            if obj.evaluations >= budget {
                break;
            }
            let mut x = best_x.clone();
            x[j] += scale * steps[j];
            let f = obj.eval(&x);
            simplex.push((x, f));
        }
        if simplex.len() < dim + 1 {
            break;
        }
        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let spread = simplex[dim].1 - simplex[0].1;
            let size = simplex[1..]
                .iter()
                .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            if obj.evaluations >= budget || simplex[0].1 <= target || size < 1e-12 || spread <= 1e-30 {
                break;
            }
            let centroid: Vec<f64> = (0..dim)
                .map(|k| simplex[..dim].iter().map(|(x, _)| x[k]).sum::<f64>() / dim as f64)
                .collect();
            let worst = simplex[dim].clone();
            let along = |c: f64| -> Vec<f64> {
                centroid.iter().zip(&worst.0).map(|(m, w)| m + c * (m - w)).collect()
            };
            let xr = along(1.0);
            let fr = obj.eval(&xr);
            if fr < simplex[0].1 {
                let xe = along(2.0);
                let fe = obj.eval(&xe);
                simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[dim - 1].1 {
                simplex[dim] = (xr, fr);
            } else {
                let (xc, fc) = if fr < worst.1 {
                    let xc = along(0.5);
                    let fc = obj.eval(&xc);
                    (xc, fc)
                } else {
                    let xc = along(-0.5);
                    let fc = obj.eval(&xc);
                    (xc, fc)
                };
                if fc < worst.1.min(fr) {
                    simplex[dim] = (xc, fc);
                } else {
                    let x_best = simplex[0].0.clone();
                    for v in simplex.iter_mut().skip(1) {
                        v.0 = v.0.iter().zip(&x_best).map(|(x, b)| b + 0.5 * (x - b)).collect();
                        v.1 = obj.eval(&v.0);
                    }
                }
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[0].1 < best_f {
            best_x = simplex[0].0.clone();
            best_f = simplex[0].1;
        }
        scale = (scale * 0.3).max(1e-6);
    }
    RestartResult {
        x: best_x,
        f: best_f,
        evaluations: obj.evaluations,
    }
}

/// Searches the durations and scale of the alternating product
/// `exp(-iα HI t_{N²}) exp(-iα H0 t_{N²-1}) ...` with `Σ t = total_time` for a
/// propagator with vanishing leakage block.
pub fn alternating_search(
    system: &LevelSystem,
    hi: &CMatrix,
    total_time: f64,
    seed: u64,
    opts: &SearchOptions,
) -> Result<SearchOutcome> {
    let n = system.n();
    if !(3..=4).contains(&n) {
        return Err(Error::BadDimension {
            n,
            reason: "alternating search runs for three or four levels",
        });
    }
    if hi.shape() != (n, n) {
        return Err(Error::BadDimension {
            n: hi.nrows(),
            reason: "HI does not match the system dimension",
        });
    }
    linalg::require_hermitian(hi, 1e-12)?;
    if !(total_time > 0.0 && total_time.is_finite()) {
        return Err(Error::InvalidPulse(format!("total time must be positive, got {total_time}")));
    }
    if opts.restarts == 0 || opts.budget == 0 {
        return Err(Error::InvalidPulse("search needs at least one restart and evaluation".into()));
    }
    let h0 = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        system.energies().iter().map(|&e| C64::new(e, 0.0)),
    ));
    let factors = Factors {
        h0: HermitianEigen::new(&h0),
        hi: HermitianEigen::new(hi),
        pattern: AlternatingSchedule::pattern(n),
    };
    let m = n * n + 1;
    let target = opts.threshold * opts.threshold;
    let mut steps = vec![0.5 * total_time / m as f64; m];
    steps.push(0.2);

    let runs: Vec<RestartResult> = crate::parallel::install(|| {
        (0..opts.restarts)
            .into_par_iter()
            .map(|r| {
                let mut rng = crate::rng::stream(seed, &format!("alternating-restart-{r}"));
                // uniform point on the simplex via normalized exponentials
                let e: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(rand_distr::Exp1)).collect();
                let sum: f64 = e.iter().sum();
                let mut x0: Vec<f64> = e.iter().map(|v| total_time * v / sum).collect();
                x0.push(rng.random_range(0.5..2.0));
                let mut obj = Objective {
                    factors: &factors,
                    total: total_time,
                    evaluations: 0,
                    budget: opts.budget,
                };
                nelder_mead(&mut obj, x0, &steps, opts.budget, target)
            })
            .collect()
    });

    let (best_restart, best) = runs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.f.total_cmp(&b.1.f).then(a.0.cmp(&b.0)))
        .expect("at least one restart");
    let obj = Objective {
        factors: &factors,
        total: total_time,
        evaluations: 0,
        budget: 0,
    };
    let (durations, scale) = obj.split(&best.x);
    let u = factors.product(&durations, scale);
    let leakage_norm = leakage_norm_sq(&u).sqrt();
    let success = leakage_norm < opts.threshold;
    let outcome = SearchOutcome {
        schedule: AlternatingSchedule {
            durations,
            which_generator: factors.pattern.clone(),
            scale,
        },
        leakage: propagate::leakage_of_matrix(&u),
        leakage_norm,
        evaluations: runs.iter().map(|r| r.evaluations).sum(),
        restarts: opts.restarts,
        best_restart,
        success,
    };
    if success {
        Ok(outcome)
    } else {
        Err(Error::SearchFailed {
            best_leakage: leakage_norm,
            outcome: Box::new(outcome),
        })
    }
}

/// Composed alternating product for a given schedule, for replay and checks.
pub fn schedule_propagator(system: &LevelSystem, hi: &CMatrix, schedule: &AlternatingSchedule) -> CMatrix {
    let n = system.n();
    let h0 = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        system.energies().iter().map(|&e| C64::new(e, 0.0)),
    ));
    Factors {
        h0: HermitianEigen::new(&h0),
        hi: HermitianEigen::new(hi),
        pattern: schedule.which_generator.clone(),
    }
    .product(&schedule.durations, schedule.scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn diag(v: &[f64]) -> CMatrix {
        CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(v.len(), v.iter().map(|&x| C64::new(x, 0.0))))
    }

    #[test]
    fn vectorization_is_isometric() {
        let mut g = rng::stream(3, "vec");
        let a = rng::random_hermitian(&mut g, 4) * I;
        let b = rng::random_hermitian(&mut g, 4) * I;
        let tr = (a.adjoint() * &b).trace().re;
        assert!((dot(&vectorize(&a), &vectorize(&b)) - tr).abs() < 1e-12);
        assert!(linalg::max_abs_diff(&devectorize(&vectorize(&a), 4), &a) < 1e-15);
    }

    #[test]
    fn commuting_pair_is_abelian() {
        let r = lie_closure(&diag(&[0.0, 1.0, 3.0]), &diag(&[0.2, -0.1, 0.5]), DEFAULT_RANK_TOL).unwrap();
        assert!(r.dimension <= 2);
        assert!(!r.is_full);
    }

    #[test]
    fn generic_pair_is_full() {
        let hi = rng::random_hermitian(&mut rng::stream(42, "closure"), 3);
        let r = lie_closure(&diag(&[0.0, 1.0, 10.0]), &hi, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(r.dimension, 9);
        for (i, a) in r.basis_matrices.iter().enumerate() {
            assert!(linalg::max_abs_diff(&a.adjoint(), &(-a)) < 1e-12);
            for b in &r.basis_matrices[..i] {
                assert!((a.adjoint() * b).trace().re.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn constraint_counts() {
        assert_eq!(constraint_count(3).unwrap(), 4);
        assert_eq!(constraint_count(4).unwrap(), 8);
        assert_eq!(constraint_count(10).unwrap(), 32);
        assert!(constraint_count(2).is_err());
    }

    #[test]
    fn oversize_closure_is_refused() {
        let h = CMatrix::identity(17, 17);
        assert!(matches!(lie_closure(&h, &h, 1e-8), Err(Error::DimensionOverflow(17))));
    }

    #[test]
    fn projection_lands_on_simplex() {
        let p = project_simplex(&[0.4, -1.0, 2.5, 0.3], 2.0);
        assert!((p.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        assert!(p.iter().all(|&x| x >= 0.0));
        let q = project_simplex(&[0.5, 0.5, 1.0], 2.0);
        assert_eq!(q, vec![0.5, 0.5, 1.0]);
    }

    #[test]
    fn pattern_ends_with_control() {
        let p = AlternatingSchedule::pattern(3);
        assert_eq!(p.len(), 10);
        assert_eq!(p[0], Generator::H0);
        assert_eq!(p[9], Generator::HI);
    }
}
