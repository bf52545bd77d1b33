//! Leakage-cancelling pulse sequences.
//!
//! A resonant qubit pulse at `ω21` of length `t0` is followed by one corrective
//! pulse per leakage channel, at tones `ω_k1` and `ω_k2` for every higher level
//! `k`. First-order coefficients come in closed form; [`refine`] then drives the
//! leakage block of the true propagator to zero with a damped Newton iteration,
//! each update being the next term of the coefficient series.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, Su2Log, C64, I, ZERO};
use crate::model::{self, LevelSystem, Pulse, PulseSequence, SegmentLayout};
use crate::propagate::{self, IntegratorConfig, LeakageReport};

/// Rabi angle per unit `γ12 t` of a resonant `cos` drive in the rotating-wave
/// limit: only one of the two exponentials in the cosine is resonant.
pub const COSINE_DRIVE_FACTOR: f64 = 0.5;

fn check_denominator(label: String, value: f64, delta_min: f64) -> Result<()> {
    if value == 0.0 || value.abs() < delta_min {
        return Err(Error::DegenerateDenominator {
            label,
            value: value.abs(),
            delta_min,
        });
    }
    Ok(())
}

/// `(e^{-i(ω21-ω)t0} - 1)/(ω21-ω) - (e^{i(ω21+ω)t0} - 1)/(ω21+ω)` for
/// `ω = ω_k,source`.
fn bracket(system: &LevelSystem, k: usize, source: usize, t0: f64, delta_min: f64) -> Result<C64> {
    let w21 = system.qubit_gap();
    let w = system.gap(k, source);
    let minus = w21 - w;
    check_denominator(format!("ω21 - ω{}{}", k + 1, source + 1), minus, delta_min)?;
    let plus = w21 + w;
    let one = C64::new(1.0, 0.0);
    Ok((C64::from_polar(1.0, -minus * t0) - one) / minus - (C64::from_polar(1.0, plus * t0) - one) / plus)
}

fn require_three_levels(system: &LevelSystem) -> Result<()> {
    if system.n() != 3 {
        return Err(Error::BadDimension {
            n: system.n(),
            reason: "closed-form leakage is stated for three levels",
        });
    }
    Ok(())
}

/// Amplitude on level `k` (0-based, `k >= 2`) after the qubit pulse of length
/// `t0`, to lowest order, from the initial qubit state `(u0, v0)`.
pub fn first_order_leakage_to(
    system: &LevelSystem,
    k: usize,
    t0: f64,
    u0: C64,
    v0: C64,
    delta_min: f64,
) -> Result<C64> {
    let from_u = system.coupling(k, 0) * bracket(system, k, 0, t0, delta_min)?;
    let from_v = system.coupling(k, 1) * bracket(system, k, 1, t0, delta_min)?;
    Ok((u0 * from_u + v0 * from_v) * COSINE_DRIVE_FACTOR)
}

/// Third-level amplitude `w` after the qubit pulse for a three-level system.
pub fn first_order_leakage(system: &LevelSystem, t0: f64, u0: C64, v0: C64) -> Result<C64> {
    require_three_levels(system)?;
    first_order_leakage_to(system, 2, t0, u0, v0, system.delta_min())
}

/// First-order coefficient `α e^{-iφ}` of the corrective pulse at tone
/// `ω_k,source`. Zero when that channel carries no coupling.
pub fn corrective_coefficient(
    system: &LevelSystem,
    k: usize,
    source: usize,
    t0: f64,
    delta_min: f64,
) -> Result<C64> {
    let b = bracket(system, k, source, t0, delta_min)?;
    if system.coupling(k, source) == ZERO {
        return Ok(ZERO);
    }
    Ok(b / (I * t0))
}

/// `(c31, c32)` for a three-level system.
pub fn corrective_first_order(system: &LevelSystem, t0: f64) -> Result<(C64, C64)> {
    require_three_levels(system)?;
    let d = system.delta_min();
    Ok((corrective_coefficient(system, 2, 0, t0, d)?, corrective_coefficient(system, 2, 1, t0, d)?))
}

/// Coefficient series of one corrective pulse. Levels are 1-based here.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectiveCoefficientSeries {
    pub target_level: usize,
    pub source_level: usize,
    pub tone: f64,
    pub coefficients: Vec<C64>,
    pub accumulated: C64,
}

impl CorrectiveCoefficientSeries {
    fn push(&mut self, increment: C64) {
        self.coefficients.push(increment);
        self.accumulated += increment;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub system_label: String,
    pub t0: f64,
    pub base_pulse: Pulse,
    pub corrective_pulses: Vec<Pulse>,
    pub series: Vec<CorrectiveCoefficientSeries>,
    pub layout: SegmentLayout,
    pub order_achieved: usize,
    pub iterations: usize,
    pub converged: bool,
    pub final_leakage: LeakageReport,
    pub convention_factor: f64,
    pub integrator: IntegratorConfig,
}

impl SynthesisResult {
    /// One block: qubit pulse then the corrective pulses.
    pub fn sequence(&self, repeats: u32) -> Result<PulseSequence> {
        let mut segments = Vec::with_capacity(1 + self.corrective_pulses.len());
        segments.push(self.base_pulse);
        segments.extend(self.corrective_pulses.iter().copied());
        PulseSequence::with_layout(segments, repeats, self.layout)
    }

    pub fn coefficients(&self) -> Vec<C64> {
        self.series.iter().map(|s| s.accumulated).collect()
    }

    fn rebuild_pulses(&mut self) -> Result<()> {
        self.corrective_pulses = self
            .series
            .iter()
            .map(|s| Pulse::from_coefficient(s.accumulated, s.tone, self.t0))
            .collect::<Result<_>>()?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SynthesisOptions {
    pub integrator: IntegratorConfig,
    /// Overrides the default `10 γ_max` tone-separation threshold.
    pub delta_min: Option<f64>,
    pub layout: SegmentLayout,
    /// Amplitude of the qubit pulse; the corrections scale with it.
    pub base_amplitude: f64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            integrator: IntegratorConfig::default(),
            delta_min: None,
            layout: SegmentLayout::Sequential,
            base_amplitude: 1.0,
        }
    }
}

pub fn synthesize_sequence(system: &LevelSystem, t0: f64) -> Result<SynthesisResult> {
    synthesize_sequence_with(system, t0, &SynthesisOptions::default())
}

pub fn synthesize_sequence_with(system: &LevelSystem, t0: f64, opts: &SynthesisOptions) -> Result<SynthesisResult> {
    if !(t0 > 0.0 && t0.is_finite()) {
        return Err(Error::NoValidT0(format!("t0 must be positive, got {t0}")));
    }
    let delta_min = opts.delta_min.unwrap_or_else(|| system.delta_min());
    let report = model::validate_system_with(system, system.qubit_gap(), delta_min);
    if let Some(c) = report.degenerate_tones.first() {
        return Err(Error::DegenerateDenominator {
            label: format!("{} - {}", c.tone, c.other),
            value: c.separation,
            delta_min,
        });
    }
    let amp = opts.base_amplitude;
    let base_pulse = Pulse::new(amp, system.qubit_gap(), 0.0, t0)?;
    let mut series = Vec::with_capacity(2 * system.n().saturating_sub(2));
    for k in 2..system.n() {
        for source in 0..2 {
            let c = corrective_coefficient(system, k, source, t0, delta_min)? * amp;
            series.push(CorrectiveCoefficientSeries {
                target_level: k + 1,
                source_level: source + 1,
                tone: system.gap(k, source),
                coefficients: vec![c],
                accumulated: c,
            });
        }
    }
    let mut result = SynthesisResult {
        system_label: system.label().to_string(),
        t0,
        base_pulse,
        corrective_pulses: Vec::new(),
        series,
        layout: opts.layout,
        order_achieved: 1,
        iterations: 0,
        converged: false,
        final_leakage: propagate::leakage_of_matrix(&CMatrix::identity(system.n(), system.n())),
        convention_factor: measure_convention_factor(system, t0, &opts.integrator)?,
        integrator: opts.integrator,
    };
    result.rebuild_pulses()?;
    let u = propagate::evolve_sequence(system, &result.sequence(1)?, &opts.integrator)?;
    result.final_leakage = propagate::leakage_of(&u);
    Ok(result)
}

/// Rotation angle per `γ12 t0` of the bare qubit driven resonantly for `t0`.
pub fn measure_convention_factor(system: &LevelSystem, t0: f64, config: &IntegratorConfig) -> Result<f64> {
    let qubit = system.truncated(2)?;
    let g12 = qubit.coupling(0, 1).norm();
    if g12 == 0.0 {
        return Ok(COSINE_DRIVE_FACTOR);
    }
    let pulse = Pulse::new(1.0, qubit.qubit_gap(), 0.0, t0)?;
    let u = propagate::evolve(&qubit, &pulse, config)?;
    let log = Su2Log::of(&linalg::polar_unitary(&u.entries)?);
    Ok(log.theta / (g12 * t0))
}

#[derive(Clone, Debug)]
pub struct RefineOptions {
    /// Target for the largest leakage amplitude `|U_k1|, |U_k2|`.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub fd_relative_step: f64,
    pub fd_floor: f64,
    /// Halvings tried when a full Newton step increases the residual.
    pub max_halvings: usize,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 50,
            fd_relative_step: 1e-6,
            fd_floor: 1e-9,
            max_halvings: 8,
        }
    }
}

/// Leakage entries `U_k1, U_k2` (k >= 3) as interleaved real and imaginary parts.
struct LeakageMap<'a> {
    system: &'a LevelSystem,
    template: &'a SynthesisResult,
}

impl LeakageMap<'_> {
    fn pulses(&self, x: &[f64]) -> Result<PulseSequence> {
        let t0 = self.template.t0;
        let mut segments = vec![self.template.base_pulse];
        for (j, s) in self.template.series.iter().enumerate() {
            segments.push(Pulse::from_coefficient(C64::new(x[2 * j], x[2 * j + 1]), s.tone, t0)?);
        }
        PulseSequence::with_layout(segments, 1, self.template.layout)
    }

    fn eval(&self, x: &[f64]) -> Result<(DVector<f64>, CMatrix)> {
        let seq = self.pulses(x)?;
        let u = propagate::evolve_sequence(self.system, &seq, &self.template.integrator)?;
        let mut r = DVector::zeros(x.len());
        for (j, s) in self.template.series.iter().enumerate() {
            let z = u.entries[(s.target_level - 1, s.source_level - 1)];
            r[2 * j] = z.re;
            r[2 * j + 1] = z.im;
        }
        Ok((r, u.entries))
    }
}

fn max_complex_abs(r: &DVector<f64>) -> f64 {
    r.as_slice()
        .chunks(2)
        .map(|c| c[0].hypot(c[1]))
        .fold(0.0, f64::max)
}

/// Newton refinement of the corrective coefficients until every leakage
/// amplitude of one block is below `opts.tolerance`.
pub fn refine(system: &LevelSystem, result: &SynthesisResult, opts: &RefineOptions) -> Result<SynthesisResult> {
    let mut out = result.clone();
    if out.series.is_empty() {
        out.converged = true;
        return Ok(out);
    }
    let map = LeakageMap {
        system,
        template: result,
    };
    let mut x: Vec<f64> = result.coefficients().iter().flat_map(|c| [c.re, c.im]).collect();
    let (mut r, mut u) = map.eval(&x)?;
    let mut residual = max_complex_abs(&r);
    let mut iterations = 0;
    while residual > opts.tolerance {
        if iterations == opts.max_iterations {
            out.final_leakage = propagate::leakage_of_matrix(&u);
            out.iterations = iterations;
            out.converged = false;
            return Err(Error::NoConvergence {
                iterations,
                residual,
                best: Box::new(out),
            });
        }
        let jac = jacobian(&map, &x, &r, opts)?;
        let step = jac
            .svd(true, true)
            .solve(&(-&r), 1e-14)
            .map_err(|_| Error::Numerical("Newton system could not be solved"))?;
        let norm0 = r.norm();
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + lambda * d).collect();
            let (rt, ut) = map.eval(&trial)?;
            if rt.norm() < norm0 {
                accepted = Some((trial, rt, ut));
                break;
            }
            lambda *= 0.5;
        }
        // no decrease along the Newton direction: keep the smallest trial step
        let (trial, rt, ut) = match accepted {
            Some(a) => a,
            None => {
                let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + lambda * d).collect();
                let (rt, ut) = map.eval(&trial)?;
                (trial, rt, ut)
            }
        };
        for (j, s) in out.series.iter_mut().enumerate() {
            s.push(C64::new(trial[2 * j] - x[2 * j], trial[2 * j + 1] - x[2 * j + 1]));
        }
        x = trial;
        r = rt;
        u = ut;
        residual = max_complex_abs(&r);
        iterations += 1;
    }
    // the accumulated sums can differ from x in the last bits; keep x exactly
    for (j, s) in out.series.iter_mut().enumerate() {
        s.accumulated = C64::new(x[2 * j], x[2 * j + 1]);
    }
    out.rebuild_pulses()?;
    out.iterations = iterations;
    out.order_achieved = 1 + iterations;
    out.converged = true;
    out.final_leakage = propagate::leakage_of_matrix(&u);
    Ok(out)
}

fn jacobian(map: &LeakageMap<'_>, x: &[f64], r0: &DVector<f64>, opts: &RefineOptions) -> Result<DMatrix<f64>> {
    let dim = x.len();
    let columns: Vec<Result<DVector<f64>>> = crate::parallel::install(|| {
        (0..dim)
            .into_par_iter()
            .map(|col| {
                let j = col / 2;
                let magnitude = x[2 * j].hypot(x[2 * j + 1]);
                let h = (opts.fd_relative_step * magnitude).max(opts.fd_floor);
                let mut xp = x.to_vec();
                xp[col] += h;
                let (rp, _) = map.eval(&xp)?;
                Ok((rp - r0) / h)
            })
            .collect()
    });
    let mut jac = DMatrix::zeros(dim, dim);
    for (col, c) in columns.into_iter().enumerate() {
        jac.set_column(col, &c?);
    }
    Ok(jac)
}

/// Qubit block of a (repeated) sequence and its generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveMapReport {
    pub repeats: u32,
    /// Qubit block after rephasing level 2 by `gauge_phase`, which makes `γ12` real.
    #[serde(with = "linalg::serde_cmatrix")]
    pub block: CMatrix,
    pub gauge_phase: f64,
    pub unitarity_defect: f64,
    /// Rotation angle per repeat.
    pub rotation_angle: f64,
    /// `convention_factor * α |γ12| t0` for base amplitude `α`.
    pub nominal_angle: f64,
    /// `(δ0, δx, δy, δz)` with `δx` measured from `convention_factor * |γ12|`.
    pub generator_decomposition: [f64; 4],
    /// Raw generator `(g0, gx, gy, gz)` of `block = exp(-i G repeats t0)`.
    pub generator: [f64; 4],
    pub deviation_norm: f64,
    pub convention_factor: f64,
}

#[derive(Clone, Debug)]
pub struct EffectiveMapOptions {
    /// Largest accepted `max |B^H B - I|` of the qubit block.
    pub block_tolerance: f64,
}

impl Default for EffectiveMapOptions {
    fn default() -> Self {
        Self { block_tolerance: 1e-9 }
    }
}

pub fn effective_two_level_map(
    system: &LevelSystem,
    result: &SynthesisResult,
    repeats: u32,
) -> Result<EffectiveMapReport> {
    effective_two_level_map_with(system, result, repeats, &EffectiveMapOptions::default())
}

pub fn effective_two_level_map_with(
    system: &LevelSystem,
    result: &SynthesisResult,
    repeats: u32,
    opts: &EffectiveMapOptions,
) -> Result<EffectiveMapReport> {
    let seq = result.sequence(repeats)?;
    let u = propagate::evolve_sequence(system, &seq, &result.integrator)?;
    let block = u.qubit_block();
    let unitarity_defect = linalg::unitarity_defect(&block);
    if unitarity_defect > opts.block_tolerance {
        return Err(Error::BlockNotUnitary {
            defect: unitarity_defect,
        });
    }
    // rephase level 2 so that γ12 is real and positive; the ideal block is then
    // an x rotation
    let gauge_phase = -system.coupling(0, 1).arg();
    let d = CMatrix::from_diagonal(&DVector::from_vec(vec![C64::new(1.0, 0.0), C64::from_polar(1.0, gauge_phase)]));
    let block = d.adjoint() * block * &d;
    let w = linalg::polar_unitary(&block)?;
    let log = Su2Log::of(&w);
    let total_time = f64::from(repeats) * result.t0;
    let generator = log.generator(total_time);

    let g12 = system.coupling(0, 1).norm();
    let g12 = g12 * result.base_pulse.amplitude();
    let nominal_angle = result.convention_factor * g12 * result.t0;
    let [a0, ax, _, _] = log.quaternion;
    let mut total = ax.atan2(a0);
    let expected = nominal_angle * f64::from(repeats);
    total += 2.0 * PI * ((expected - total) / (2.0 * PI)).round();
    let ideal = linalg::x_rotation(total);
    let deviation_norm = linalg::frobenius(&(&block - ideal));

    Ok(EffectiveMapReport {
        repeats,
        block,
        gauge_phase,
        unitarity_defect,
        rotation_angle: total / f64::from(repeats),
        nominal_angle,
        generator_decomposition: [
            generator[0],
            generator[1] - result.convention_factor * g12,
            generator[2],
            generator[3],
        ],
        generator,
        deviation_norm,
        convention_factor: result.convention_factor,
    })
}

/// Scale factors and the base multiple `m` of `t0 = m π / ω21`.
///
/// At scale `s` the gaps are multiplied by `s`, the couplings divided by `s`,
/// and `t0 = m(s) π / ω21(s)` with `m(s)` the integer nearest above `m s`
/// sharing the parity of `m`. Both `γ t0` and `1 / (ω t0)` then shrink as
/// `1/s`, and for integer gap ratios every phase `exp(i ω_ij t0)` is the same
/// at all scales.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingProtocol {
    pub scales: Vec<u32>,
    pub base_multiple: u64,
}

impl ScalingProtocol {
    pub fn multiple_at(&self, s: u32) -> u64 {
        let m = self.base_multiple * u64::from(s);
        if m % 2 == self.base_multiple % 2 {
            m
        } else {
            m + 1
        }
    }

    pub fn system_at(&self, system: &LevelSystem, s: u32) -> (LevelSystem, f64) {
        let scaled = system.scaled(f64::from(s));
        let t0 = model::T0Choice::from_multiple(&scaled, self.multiple_at(s)).t0;
        (scaled, t0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub s: u32,
    pub t0: f64,
    /// `γ_max t0` at this scale.
    pub epsilon: f64,
    pub uncorrected_amp: f64,
    pub corrected_amp: f64,
}

/// Largest leakage amplitude with the bare qubit pulse and with first-order
/// corrections, at every scale of `protocol`.
pub fn scaling_sweep(
    system: &LevelSystem,
    protocol: &ScalingProtocol,
    opts: &SynthesisOptions,
) -> Result<Vec<ScalingPoint>> {
    protocol
        .scales
        .iter()
        .map(|&s| {
            let (scaled, t0) = protocol.system_at(system, s);
            let base = Pulse::new(opts.base_amplitude, scaled.qubit_gap(), 0.0, t0)?;
            let bare = propagate::evolve(&scaled, &base, &opts.integrator)?;
            let corrected = synthesize_sequence_with(&scaled, t0, opts)?;
            Ok(ScalingPoint {
                s,
                t0,
                epsilon: scaled.max_coupling() * t0,
                uncorrected_amp: propagate::leakage_of(&bare).max_amplitude(),
                corrected_amp: corrected.final_leakage.max_amplitude(),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveScalingPoint {
    pub s: u32,
    pub t0: f64,
    pub deviation_norm: f64,
    pub rotation_angle: f64,
    pub nominal_angle: f64,
}

/// Refines at every scale and records the qubit-block deviation of one block.
pub fn effective_scaling_sweep(
    system: &LevelSystem,
    protocol: &ScalingProtocol,
    opts: &SynthesisOptions,
    refine_opts: &RefineOptions,
) -> Result<Vec<EffectiveScalingPoint>> {
    protocol
        .scales
        .iter()
        .map(|&s| {
            let (scaled, t0) = protocol.system_at(system, s);
            let first = synthesize_sequence_with(&scaled, t0, opts)?;
            let refined = refine(&scaled, &first, refine_opts)?;
            let map = effective_two_level_map(&scaled, &refined, 1)?;
            Ok(EffectiveScalingPoint {
                s,
                t0,
                deviation_norm: map.deviation_norm,
                rotation_angle: map.rotation_angle,
                nominal_angle: map.nominal_angle,
            })
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`. `None` when fewer than two
/// points or any value is not strictly positive.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 || xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
