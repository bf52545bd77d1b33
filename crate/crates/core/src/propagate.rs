//! Interaction-picture propagation of `i dΨ/dt = H_int(t) Ψ`, where
//! `H_int(t)_ij = f(t) γ_ij exp(i ω_ij t)` and `f` is the sum of the active
//! pulse envelopes.
//!
//! Two fixed-step schemes are available: classical RK4 on the propagator, and
//! exponential integrators (midpoint and two-point Gauss) that are unitary by
//! construction. Drive phases are referenced to the global clock, so splitting a
//! pulse in two and propagating the halves back to back reproduces the whole.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, HermitianEigen, C64, I, ONE, ZERO};
use crate::model::{LevelSystem, Pulse, PulseSequence, SegmentLayout};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Rk4Fixed,
    MidpointExponential,
    /// Fourth-order Magnus step on two Gauss–Legendre nodes.
    GaussExponential,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub steps_per_carrier_period: u32,
    pub scheme: Scheme,
    pub unitarity_tolerance: f64,
    /// Project onto the unitary group after every segment.
    pub polar_projection: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            steps_per_carrier_period: 128,
            scheme: Scheme::Rk4Fixed,
            unitarity_tolerance: 1e-9,
            polar_projection: false,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps_per_carrier_period == 0 {
            return Err(Error::InvalidPulse("steps_per_carrier_period must be positive".into()));
        }
        if self.scheme == Scheme::Rk4Fixed && self.steps_per_carrier_period < 16 {
            return Err(Error::InvalidPulse(
                "rk4_fixed needs at least 16 steps per carrier period".into(),
            ));
        }
        if !(self.unitarity_tolerance > 0.0) {
            return Err(Error::InvalidPulse("unitarity tolerance must be positive".into()));
        }
        Ok(())
    }

    /// Configuration used to cross-check `self`: the other family of scheme at
    /// `density` times the step count.
    pub fn oracle(&self, density: u32) -> Self {
        let scheme = match self.scheme {
            Scheme::Rk4Fixed => Scheme::GaussExponential,
            Scheme::MidpointExponential | Scheme::GaussExponential => Scheme::Rk4Fixed,
        };
        Self {
            steps_per_carrier_period: self.steps_per_carrier_period * density,
            scheme,
            ..*self
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Interaction,
    Lab,
}

/// Evolution operator from `t = 0` to `time`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagatorMatrix {
    #[serde(with = "linalg::serde_cmatrix")]
    pub entries: CMatrix,
    pub frame: Frame,
    pub time: f64,
}

impl PropagatorMatrix {
    pub fn identity(n: usize) -> Self {
        Self {
            entries: CMatrix::identity(n, n),
            frame: Frame::Interaction,
            time: 0.0,
        }
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn unitarity_defect(&self) -> f64 {
        linalg::unitarity_defect(&self.entries)
    }

    /// Lab-frame operator `exp(-i H0 t) U_int`.
    pub fn to_lab(&self, system: &LevelSystem) -> Self {
        match self.frame {
            Frame::Lab => self.clone(),
            Frame::Interaction => {
                let mut e = self.entries.clone();
                for (i, &w) in system.energies().iter().enumerate() {
                    let p = C64::from_polar(1.0, -w * self.time);
                    e.row_mut(i).iter_mut().for_each(|z| *z *= p);
                }
                Self {
                    entries: e,
                    frame: Frame::Lab,
                    time: self.time,
                }
            }
        }
    }

    /// The 2x2 qubit block.
    pub fn qubit_block(&self) -> CMatrix {
        self.entries.view((0, 0), (2, 2)).into_owned()
    }
}

/// Normalized state; for three levels the components are `(u, v, w)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub amplitudes: Vec<C64>,
}

pub const STATE_NORM_TOL: f64 = 1e-9;

impl StateVector {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        let norm = amplitudes.iter().map(C64::norm_sqr).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > STATE_NORM_TOL {
            return Err(Error::InvalidSystem(format!("state norm {norm} is not 1")));
        }
        Ok(Self { amplitudes })
    }

    /// `u0 |1⟩ + v0 |2⟩` in an `n`-level space.
    pub fn qubit(n: usize, u0: C64, v0: C64) -> Result<Self> {
        let mut a = vec![ZERO; n];
        a[0] = u0;
        a[1] = v0;
        Self::new(a)
    }

    pub fn evolve(&self, u: &PropagatorMatrix) -> Result<Self> {
        let v = nalgebra::DVector::from_column_slice(&self.amplitudes);
        Self::new((&u.entries * v).iter().copied().collect())
    }
}

/// A span of time during which a fixed set of tones drives the system.
#[derive(Clone, Debug)]
struct Piece {
    tones: Vec<Pulse>,
    start: f64,
    duration: f64,
}

impl Piece {
    fn envelope(&self, t: f64) -> f64 {
        self.tones.iter().map(|p| p.envelope(t)).sum()
    }

    fn max_carrier(&self) -> f64 {
        self.tones.iter().fold(0.0, |m, p| m.max(p.carrier()))
    }
}

fn pieces_of(seq: &PulseSequence, t_start: f64) -> Vec<Piece> {
    let block = seq.block_duration();
    let mut pieces = Vec::new();
    for r in 0..seq.repeat_count() {
        let origin = t_start + f64::from(r) * block;
        match seq.layout() {
            SegmentLayout::Sequential => {
                let mut t = origin;
                for p in seq.segments() {
                    pieces.push(Piece {
                        tones: vec![*p],
                        start: t,
                        duration: p.duration(),
                    });
                    t += p.duration();
                }
            }
            SegmentLayout::Simultaneous => pieces.push(Piece {
                tones: seq.segments().to_vec(),
                start: origin,
                duration: block,
            }),
        }
    }
    pieces
}

/// Interaction-picture Hamiltonian sampler. Keeps scratch buffers so the inner
/// loops never allocate.
struct Sampler<'a> {
    gamma: &'a CMatrix,
    energies: &'a [f64],
    phases: Vec<C64>,
}

impl<'a> Sampler<'a> {
    fn new(system: &'a LevelSystem) -> Self {
        Self {
            gamma: system.couplings(),
            energies: system.energies(),
            phases: vec![ONE; system.n()],
        }
    }

    /// Writes `H_int(t)` row-major into `out`.
    fn fill(&mut self, piece: &Piece, t: f64, out: &mut [C64]) {
        let n = self.energies.len();
        let f = piece.envelope(t);
        for (p, &w) in self.phases.iter_mut().zip(self.energies) {
            *p = C64::from_polar(1.0, w * t);
        }
        for i in 0..n {
            let pi = self.phases[i] * f;
            for j in 0..n {
                out[i * n + j] = self.gamma[(i, j)] * pi * self.phases[j].conj();
            }
        }
    }

    fn matrix(&mut self, piece: &Piece, t: f64) -> CMatrix {
        let n = self.energies.len();
        let mut buf = vec![ZERO; n * n];
        self.fill(piece, t, &mut buf);
        CMatrix::from_row_slice(n, n, &buf)
    }
}

/// `out = scale * a * b` for row-major `n x n` buffers.
#[inline]
fn mul_into(out: &mut [C64], a: &[C64], b: &[C64], n: usize, scale: C64) {
    for i in 0..n {
        for j in 0..n {
            let mut acc = ZERO;
            for k in 0..n {
                acc += a[i * n + k] * b[k * n + j];
            }
            out[i * n + j] = acc * scale;
        }
    }
}

fn step_count(system: &LevelSystem, piece: &Piece, config: &IntegratorConfig) -> usize {
    let fastest = piece.max_carrier().max(system.gap(system.n() - 1, 0));
    let h_target = TAU / fastest / f64::from(config.steps_per_carrier_period);
    ((piece.duration / h_target).ceil() as usize).max(1)
}

fn to_buf(m: &CMatrix) -> Vec<C64> {
    let n = m.nrows();
    let mut b = vec![ZERO; n * n];
    for i in 0..n {
        for j in 0..n {
            b[i * n + j] = m[(i, j)];
        }
    }
    b
}

fn from_buf(b: &[C64], n: usize) -> CMatrix {
    CMatrix::from_row_slice(n, n, b)
}

/// Advances row-major `u` across one piece.
fn advance(system: &LevelSystem, piece: &Piece, config: &IntegratorConfig, u: &mut [C64]) {
    let n = system.n();
    let steps = step_count(system, piece, config);
    let h = piece.duration / steps as f64;
    let mut sampler = Sampler::new(system);
    let at = |j: usize, frac: f64| piece.start + (j as f64 + frac) * h;
    match config.scheme {
        Scheme::Rk4Fixed => {
            let nn = n * n;
            let mut m0 = vec![ZERO; nn];
            let mut mh = vec![ZERO; nn];
            let mut m1 = vec![ZERO; nn];
            let (mut k1, mut k2, mut k3, mut k4) = (vec![ZERO; nn], vec![ZERO; nn], vec![ZERO; nn], vec![ZERO; nn]);
            let mut tmp = vec![ZERO; nn];
            let minus_i = -I;
            sampler.fill(piece, at(0, 0.0), &mut m0);
            for j in 0..steps {
                sampler.fill(piece, at(j, 0.5), &mut mh);
                sampler.fill(piece, at(j, 1.0), &mut m1);
                mul_into(&mut k1, &m0, u, n, minus_i);
                for q in 0..nn {
                    tmp[q] = u[q] + k1[q] * (0.5 * h);
                }
                mul_into(&mut k2, &mh, &tmp, n, minus_i);
                for q in 0..nn {
                    tmp[q] = u[q] + k2[q] * (0.5 * h);
                }
                mul_into(&mut k3, &mh, &tmp, n, minus_i);
                for q in 0..nn {
                    tmp[q] = u[q] + k3[q] * h;
                }
                mul_into(&mut k4, &m1, &tmp, n, minus_i);
                for q in 0..nn {
                    u[q] += (k1[q] + (k2[q] + k3[q]) * 2.0 + k4[q]) * (h / 6.0);
                }
                std::mem::swap(&mut m0, &mut m1);
            }
        }
        Scheme::MidpointExponential => {
            for j in 0..steps {
                let m = sampler.matrix(piece, at(j, 0.5));
                apply_exponential(&m, h, u, n);
            }
        }
        Scheme::GaussExponential => {
            let c = 3f64.sqrt() / 6.0;
            let k = C64::new(0.0, -(3f64.sqrt()) * h / 12.0);
            for j in 0..steps {
                let a1 = sampler.matrix(piece, at(j, 0.5 - c));
                let a2 = sampler.matrix(piece, at(j, 0.5 + c));
                let comm = &a2 * &a1 - &a1 * &a2;
                let heff = (&a1 + &a2).map(|z| z * 0.5) + comm * k;
                apply_exponential(&heff, h, u, n);
            }
        }
    }
}

fn apply_exponential(h_eff: &CMatrix, dt: f64, u: &mut [C64], n: usize) {
    let step = HermitianEigen::new(h_eff).propagator(dt);
    let s = to_buf(&step);
    let cur = u.to_vec();
    mul_into(u, &s, &cur, n, ONE);
}

fn run(
    system: &LevelSystem,
    pieces: &[Piece],
    config: &IntegratorConfig,
    end_time: f64,
) -> Result<PropagatorMatrix> {
    config.validate()?;
    let n = system.n();
    let mut u = to_buf(&CMatrix::identity(n, n));
    for piece in pieces {
        advance(system, piece, config, &mut u);
        if config.polar_projection {
            u = to_buf(&linalg::polar_unitary(&from_buf(&u, n))?);
        }
    }
    let prop = PropagatorMatrix {
        entries: from_buf(&u, n),
        frame: Frame::Interaction,
        time: end_time,
    };
    let defect = prop.unitarity_defect();
    if !(defect <= config.unitarity_tolerance) {
        return Err(Error::UnitarityLost {
            defect,
            tolerance: config.unitarity_tolerance,
        });
    }
    Ok(prop)
}

/// `M_ij = α γ_ij exp(i ω_ij t) cos(ω t + φ)`.
pub fn interaction_hamiltonian(system: &LevelSystem, pulse: &Pulse, t: f64) -> CMatrix {
    let piece = Piece {
        tones: vec![*pulse],
        start: 0.0,
        duration: pulse.duration(),
    };
    Sampler::new(system).matrix(&piece, t)
}

/// Propagator over `[0, duration]` of a single pulse.
pub fn evolve(system: &LevelSystem, pulse: &Pulse, config: &IntegratorConfig) -> Result<PropagatorMatrix> {
    evolve_interval(system, pulse, 0.0, pulse.duration(), config)
}

/// Propagator over `[t_start, t_start + duration]` with the pulse phase continued
/// on the global clock.
pub fn evolve_interval(
    system: &LevelSystem,
    pulse: &Pulse,
    t_start: f64,
    duration: f64,
    config: &IntegratorConfig,
) -> Result<PropagatorMatrix> {
    if !(duration > 0.0) {
        return Err(Error::InvalidPulse(format!("duration must be positive, got {duration}")));
    }
    let piece = Piece {
        tones: vec![*pulse],
        start: t_start,
        duration,
    };
    let mut p = run(system, &[piece], config, t_start + duration)?;
    p.time = t_start + duration;
    Ok(p)
}

/// Propagator of a whole sequence starting at `t = 0`.
pub fn evolve_sequence(
    system: &LevelSystem,
    seq: &PulseSequence,
    config: &IntegratorConfig,
) -> Result<PropagatorMatrix> {
    run(system, &pieces_of(seq, 0.0), config, seq.total_duration())
}

/// Independent cross-check of [`evolve`] with the default configuration.
pub fn oracle_evolve(system: &LevelSystem, pulse: &Pulse, density_multiplier: u32) -> Result<PropagatorMatrix> {
    let seq = PulseSequence::new(vec![*pulse], 1)?;
    oracle_evolve_sequence(system, &seq, density_multiplier, &IntegratorConfig::default())
}

/// Cross-check of [`evolve_sequence`] under `config`, using the other scheme
/// family at `density_multiplier` times the step density.
pub fn oracle_evolve_sequence(
    system: &LevelSystem,
    seq: &PulseSequence,
    density_multiplier: u32,
    config: &IntegratorConfig,
) -> Result<PropagatorMatrix> {
    if density_multiplier < 2 {
        return Err(Error::InvalidPulse("oracle density multiplier must be at least 2".into()));
    }
    evolve_sequence(system, seq, &config.oracle(density_multiplier))
}

const GAUSS4_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GAUSS4_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_9,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_9,
];

/// Order-`k` term of the time-ordered expansion of the propagator over `[0, t]`:
/// `(-i)^k ∫_0^t dt1 ∫_0^t1 dt2 .. H(t1) H(t2) ..`.
///
/// Order 1 uses composite four-point Gauss–Legendre quadrature. Orders 2 and 3
/// integrate the nested hierarchy `D_k' = -i H D_{k-1}` with RK4 on the
/// integrator grid, which is a nested Simpson rule.
pub fn dyson_term(
    system: &LevelSystem,
    pulse: &Pulse,
    order: usize,
    t: f64,
    config: &IntegratorConfig,
) -> Result<CMatrix> {
    if !(1..=3).contains(&order) {
        return Err(Error::OrderUnsupported(order));
    }
    Ok(dyson_terms(system, pulse, order, t, config)?.swap_remove(order))
}

/// All terms `D_0 = I, D_1, .., D_order` over `[0, t]`.
pub fn dyson_terms(
    system: &LevelSystem,
    pulse: &Pulse,
    order: usize,
    t: f64,
    config: &IntegratorConfig,
) -> Result<Vec<CMatrix>> {
    if !(1..=3).contains(&order) {
        return Err(Error::OrderUnsupported(order));
    }
    config.validate()?;
    if !(t > 0.0) {
        return Ok((0..=order)
            .map(|k| {
                let n = system.n();
                if k == 0 {
                    CMatrix::identity(n, n)
                } else {
                    CMatrix::zeros(n, n)
                }
            })
            .collect());
    }
    let n = system.n();
    let piece = Piece {
        tones: vec![*pulse],
        start: 0.0,
        duration: t,
    };
    let steps = step_count(system, &piece, config);
    let h = t / steps as f64;
    let mut sampler = Sampler::new(system);

    let mut first = CMatrix::zeros(n, n);
    for j in 0..steps {
        let mid = (j as f64 + 0.5) * h;
        for (x, w) in GAUSS4_NODES.iter().zip(GAUSS4_WEIGHTS) {
            first += sampler.matrix(&piece, mid + 0.5 * h * x) * C64::new(0.5 * h * w, 0.0);
        }
    }
    first *= -I;

    let mut terms: Vec<CMatrix> = (0..=order)
        .map(|k| if k == 0 { CMatrix::identity(n, n) } else { CMatrix::zeros(n, n) })
        .collect();
    if order >= 2 {
        // RK4 on the block-triangular system; d[k] advances with d[k-1].
        let rhs = |m: &CMatrix, d: &[CMatrix]| -> Vec<CMatrix> {
            let mut out = vec![CMatrix::zeros(n, n)];
            for k in 1..d.len() {
                out.push(m * &d[k - 1] * (-I));
            }
            out
        };
        let axpy = |d: &[CMatrix], k: &[CMatrix], s: f64| -> Vec<CMatrix> {
            d.iter().zip(k).map(|(a, b)| a + b * C64::new(s, 0.0)).collect()
        };
        let mut m0 = sampler.matrix(&piece, 0.0);
        for j in 0..steps {
            let mh = sampler.matrix(&piece, (j as f64 + 0.5) * h);
            let m1 = sampler.matrix(&piece, (j as f64 + 1.0) * h);
            let k1 = rhs(&m0, &terms);
            let k2 = rhs(&mh, &axpy(&terms, &k1, 0.5 * h));
            let k3 = rhs(&mh, &axpy(&terms, &k2, 0.5 * h));
            let k4 = rhs(&m1, &axpy(&terms, &k3, h));
            for q in 1..terms.len() {
                let inc = (&k1[q] + (&k2[q] + &k3[q]) * C64::new(2.0, 0.0) + &k4[q]) * C64::new(h / 6.0, 0.0);
                terms[q] += inc;
            }
            m0 = m1;
        }
    }
    terms[1] = first;
    Ok(terms)
}

/// `∫_a^b exp(i ν t) dt`.
fn exp_integral(nu: f64, a: f64, b: f64) -> C64 {
    if (nu * (b - a)).abs() < 1e-6 && (nu * b).abs() < 1e-6 {
        // series for tiny ν
        let len = b - a;
        return C64::new(len, nu * (b * b - a * a) / 2.0);
    }
    (C64::from_polar(1.0, nu * b) - C64::from_polar(1.0, nu * a)) / (I * nu)
}

/// Closed-form first-order term over `[a, b]` from the antiderivative of
/// `exp(i ω_ij t) cos(ω t + φ)`.
pub fn first_order_closed_form(system: &LevelSystem, pulse: &Pulse, a: f64, b: f64) -> CMatrix {
    let n = system.n();
    let (w, phi, amp) = (pulse.carrier(), pulse.phase(), pulse.amplitude());
    CMatrix::from_fn(n, n, |i, j| {
        let g = system.coupling(i, j);
        if g == ZERO {
            return ZERO;
        }
        let wij = system.gap(i, j);
        let plus = C64::from_polar(1.0, phi) * exp_integral(wij + w, a, b);
        let minus = C64::from_polar(1.0, -phi) * exp_integral(wij - w, a, b);
        -I * g * amp * 0.5 * (plus + minus)
    })
}

/// One leakage entry `U[row][col]`, 1-based labels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeakageEntry {
    pub row: usize,
    pub col: usize,
    pub value: C64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeakageReport {
    pub n: usize,
    /// Rows 1, 2 and columns 3..N.
    pub amplitudes: Vec<LeakageEntry>,
    pub max_leakage_population: f64,
    pub residual_norm: f64,
    /// Real constraints `4 (N - 2)` that make the block vanish.
    pub constraint_count: usize,
}

impl LeakageReport {
    pub fn max_amplitude(&self) -> f64 {
        self.max_leakage_population.sqrt()
    }

    /// `(|U_1k|, |U_2k|)` for level `k` (1-based).
    pub fn pair(&self, k: usize) -> (f64, f64) {
        let get = |row| {
            self.amplitudes
                .iter()
                .find(|e| e.row == row && e.col == k)
                .map_or(0.0, |e| e.value.norm())
        };
        (get(1), get(2))
    }
}

pub fn leakage_of(u: &PropagatorMatrix) -> LeakageReport {
    leakage_of_matrix(&u.entries)
}

pub fn leakage_of_matrix(u: &CMatrix) -> LeakageReport {
    let n = u.nrows();
    let mut amplitudes = Vec::with_capacity(2 * n.saturating_sub(2));
    let mut max_pop = 0.0f64;
    let mut sum = 0.0;
    for row in 0..2.min(n) {
        for col in 2..n {
            let value = u[(row, col)];
            max_pop = max_pop.max(value.norm_sqr());
            sum += value.norm_sqr();
            amplitudes.push(LeakageEntry {
                row: row + 1,
                col: col + 1,
                value,
            });
        }
    }
    LeakageReport {
        n,
        amplitudes,
        max_leakage_population: max_pop.min(1.0),
        residual_norm: sum.sqrt(),
        constraint_count: 4 * n.saturating_sub(2),
    }
}
