//! Level systems, drive pulses and the multilevel/multiqubit mappings.

use std::f64::consts::{PI, TAU};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, HermitianEigen, C64, ONE, ZERO};

/// Relative tolerance for accepting a coupling matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Resonance-collision threshold as a multiple of the largest coupling.
pub const DELTA_MIN_FACTOR: f64 = 10.0;

/// Ratio `|γ_ij / ω_ij|` above which the perturbative regime is flagged.
pub const RATIO_FLAG: f64 = 0.1;

/// Upper end of the integer scan used by [`select_t0`].
pub const T0_MAX_MULTIPLE: u64 = 1_000_000;

/// N levels with energies (ground shifted to zero) and a Hermitian drive coupling.
///
/// Levels are 0-indexed: levels 0 and 1 span the qubit, 2.. are the leakage levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LevelSystemDoc", into = "LevelSystemDoc")]
pub struct LevelSystem {
    label: String,
    energies: Vec<f64>,
    couplings: CMatrix,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct LevelSystemDoc {
    #[serde(default)]
    label: String,
    energies: Vec<f64>,
    #[serde(with = "linalg::serde_cmatrix")]
    couplings: CMatrix,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    keep_diagonal: bool,
}

impl TryFrom<LevelSystemDoc> for LevelSystem {
    type Error = Error;

    fn try_from(doc: LevelSystemDoc) -> Result<Self> {
        LevelSystem::with_options(doc.label, doc.energies, doc.couplings, doc.keep_diagonal)
    }
}

impl From<LevelSystem> for LevelSystemDoc {
    fn from(s: LevelSystem) -> Self {
        let keep_diagonal = (0..s.n()).any(|i| s.couplings[(i, i)] != ZERO);
        Self {
            label: s.label,
            energies: s.energies,
            couplings: s.couplings,
            keep_diagonal,
        }
    }
}

impl LevelSystem {
    /// Builds a system, zeroing any diagonal couplings.
    pub fn new(label: impl Into<String>, energies: Vec<f64>, couplings: CMatrix) -> Result<Self> {
        Self::with_options(label, energies, couplings, false)
    }

    /// `keep_diagonal` retains `γ_ii` instead of zeroing them.
    pub fn with_options(
        label: impl Into<String>,
        energies: Vec<f64>,
        mut couplings: CMatrix,
        keep_diagonal: bool,
    ) -> Result<Self> {
        let label = label.into();
        let n = energies.len();
        if n < 2 {
            return Err(Error::InvalidSystem(format!("need at least 2 levels, got {n}")));
        }
        if energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidSystem("energies must be finite".into()));
        }
        if energies.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSystem("energies must be strictly increasing".into()));
        }
        if couplings.shape() != (n, n) {
            return Err(Error::InvalidSystem(format!(
                "coupling matrix is {}x{}, expected {n}x{n}",
                couplings.nrows(),
                couplings.ncols()
            )));
        }
        if couplings.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidSystem("couplings must be finite".into()));
        }
        linalg::require_hermitian(&couplings, HERMITIAN_TOL)?;
        // symmetrize so that later constructions are exactly Hermitian
        let adj = couplings.adjoint();
        couplings = (&couplings + adj).map(|z| z * 0.5);
        if !keep_diagonal {
            let mut dropped = false;
            for i in 0..n {
                dropped |= couplings[(i, i)] != ZERO;
                couplings[(i, i)] = ZERO;
            }
            if dropped {
                warn!("system '{label}': diagonal couplings zeroed");
            }
        }
        let ground = energies[0];
        let energies = energies.into_iter().map(|e| e - ground).collect();
        Ok(Self {
            label,
            energies,
            couplings,
        })
    }

    pub fn n(&self) -> usize {
        self.energies.len()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn couplings(&self) -> &CMatrix {
        &self.couplings
    }

    /// `ω_ij = ω_i - ω_j` (0-indexed).
    pub fn gap(&self, i: usize, j: usize) -> f64 {
        self.energies[i] - self.energies[j]
    }

    /// Qubit splitting `ω_21`.
    pub fn qubit_gap(&self) -> f64 {
        self.gap(1, 0)
    }

    /// Coupling `γ_ij` (0-indexed).
    pub fn coupling(&self, i: usize, j: usize) -> C64 {
        self.couplings[(i, j)]
    }

    /// Largest off-diagonal coupling modulus.
    pub fn max_coupling(&self) -> f64 {
        let n = self.n();
        let mut m = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    m = m.max(self.couplings[(i, j)].norm());
                }
            }
        }
        m
    }

    /// Default resonance-collision threshold.
    pub fn delta_min(&self) -> f64 {
        DELTA_MIN_FACTOR * self.max_coupling()
    }

    /// Dense `H_0 = diag(ω)`.
    pub fn h0(&self) -> CMatrix {
        CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.n(),
            self.energies.iter().map(|&e| C64::new(e, 0.0)),
        ))
    }

    /// Gaps multiplied by `s` and couplings divided by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            label: format!("{}@s={s}", self.label),
            energies: self.energies.iter().map(|e| e * s).collect(),
            couplings: self.couplings.map(|z| z / s),
        }
    }

    /// The same energies with a replacement coupling matrix.
    pub fn with_couplings(&self, couplings: CMatrix) -> Result<Self> {
        Self::with_options(self.label.clone(), self.energies.clone(), couplings, true)
    }

    /// Restriction to the first `n` levels.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n < 2 || n > self.n() {
            return Err(Error::BadDimension {
                n,
                reason: "truncation must keep between 2 and N levels",
            });
        }
        Ok(Self {
            label: format!("{}[..{n}]", self.label),
            energies: self.energies[..n].to_vec(),
            couplings: self.couplings.view((0, 0), (n, n)).into_owned(),
        })
    }
}

/// A cosine drive segment `amplitude * H_I * cos(carrier * t + phase)`, with `t`
/// measured on the global clock.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PulseDoc", into = "PulseDoc")]
pub struct Pulse {
    amplitude: f64,
    carrier: f64,
    phase: f64,
    duration: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
struct PulseDoc {
    amplitude: f64,
    carrier: f64,
    phase: f64,
    duration: f64,
}

impl TryFrom<PulseDoc> for Pulse {
    type Error = Error;

    fn try_from(d: PulseDoc) -> Result<Self> {
        Pulse::new(d.amplitude, d.carrier, d.phase, d.duration)
    }
}

impl From<Pulse> for PulseDoc {
    fn from(p: Pulse) -> Self {
        Self {
            amplitude: p.amplitude,
            carrier: p.carrier,
            phase: p.phase,
            duration: p.duration,
        }
    }
}

fn wrap_phase(phase: f64) -> f64 {
    let p = phase.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU
    if p >= TAU {
        0.0
    } else {
        p
    }
}

impl Pulse {
    pub fn new(amplitude: f64, carrier: f64, phase: f64, duration: f64) -> Result<Self> {
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::InvalidPulse(format!("duration must be positive, got {duration}")));
        }
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(Error::InvalidPulse(format!(
                "amplitude must be nonnegative, got {amplitude}"
            )));
        }
        if !(carrier >= 0.0 && carrier.is_finite()) {
            return Err(Error::InvalidPulse(format!("carrier must be nonnegative, got {carrier}")));
        }
        if !phase.is_finite() {
            return Err(Error::InvalidPulse("phase must be finite".into()));
        }
        Ok(Self {
            amplitude,
            carrier,
            phase: wrap_phase(phase),
            duration,
        })
    }

    /// Pulse whose resonant interaction-picture coefficient is `c`, i.e.
    /// `amplitude * exp(-i phase) == c`.
    pub fn from_coefficient(c: C64, carrier: f64, duration: f64) -> Result<Self> {
        let phase = if c.norm() == 0.0 { 0.0 } else { -c.arg() };
        Self::new(c.norm(), carrier, phase, duration)
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn carrier(&self) -> f64 {
        self.carrier
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// `amplitude * exp(-i phase)`.
    pub fn coefficient(&self) -> C64 {
        C64::from_polar(self.amplitude, -self.phase)
    }

    /// Envelope `amplitude * cos(carrier * t + phase)` at global time `t`.
    #[inline]
    pub fn envelope(&self, t: f64) -> f64 {
        self.amplitude * (self.carrier * t + self.phase).cos()
    }

    pub fn with_duration(&self, duration: f64) -> Result<Self> {
        Self::new(self.amplitude, self.carrier, self.phase, duration)
    }
}

/// How the segments of a [`PulseSequence`] are laid out in time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentLayout {
    /// One after another.
    #[default]
    Sequential,
    /// All segments at once; durations must agree.
    Simultaneous,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PulseSequenceDoc", into = "PulseSequenceDoc")]
pub struct PulseSequence {
    segments: Vec<Pulse>,
    repeat_count: u32,
    layout: SegmentLayout,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct PulseSequenceDoc {
    segments: Vec<Pulse>,
    repeat_count: u32,
    #[serde(default)]
    layout: SegmentLayout,
}

impl TryFrom<PulseSequenceDoc> for PulseSequence {
    type Error = Error;

    fn try_from(d: PulseSequenceDoc) -> Result<Self> {
        PulseSequence::with_layout(d.segments, d.repeat_count, d.layout)
    }
}

impl From<PulseSequence> for PulseSequenceDoc {
    fn from(s: PulseSequence) -> Self {
        Self {
            segments: s.segments,
            repeat_count: s.repeat_count,
            layout: s.layout,
        }
    }
}

impl PulseSequence {
    pub fn new(segments: Vec<Pulse>, repeat_count: u32) -> Result<Self> {
        Self::with_layout(segments, repeat_count, SegmentLayout::Sequential)
    }

    pub fn with_layout(segments: Vec<Pulse>, repeat_count: u32, layout: SegmentLayout) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidPulse("sequence has no segments".into()));
        }
        if repeat_count == 0 {
            return Err(Error::InvalidPulse("repeat count must be positive".into()));
        }
        if layout == SegmentLayout::Simultaneous {
            let d = segments[0].duration;
            if segments.iter().any(|p| p.duration != d) {
                return Err(Error::InvalidPulse(
                    "simultaneous segments must share one duration".into(),
                ));
            }
        }
        let seq = Self {
            segments,
            repeat_count,
            layout,
        };
        if !seq.total_duration().is_finite() {
            return Err(Error::InvalidPulse("total duration overflows".into()));
        }
        Ok(seq)
    }

    pub fn segments(&self) -> &[Pulse] {
        &self.segments
    }

    pub fn repeat_count(&self) -> u32 {
        self.repeat_count
    }

    pub fn layout(&self) -> SegmentLayout {
        self.layout
    }

    /// Duration of one repetition.
    pub fn block_duration(&self) -> f64 {
        match self.layout {
            SegmentLayout::Sequential => self.segments.iter().map(|p| p.duration).sum(),
            SegmentLayout::Simultaneous => self.segments[0].duration,
        }
    }

    pub fn total_duration(&self) -> f64 {
        f64::from(self.repeat_count) * self.block_duration()
    }

    pub fn repeated(&self, repeat_count: u32) -> Result<Self> {
        Self::with_layout(self.segments.clone(), repeat_count, self.layout)
    }
}

/// Findings of [`validate_system`]; nothing here is fatal by itself.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub delta_min: f64,
    pub drive_carrier: f64,
    /// `(i, j, |γ_ij / ω_ij|)` for every coupled pair `i > j`, 1-based labels.
    pub ratios: Vec<(usize, usize, f64)>,
    /// Pairs whose ratio reaches [`RATIO_FLAG`].
    pub strong_couplings: Vec<(usize, usize)>,
    /// Transitions other than the qubit one lying within `delta_min` of the carrier.
    pub resonance_collisions: Vec<(usize, usize)>,
    /// Pairs of frequencies that make a correction tone ambiguous, with their separation.
    pub degenerate_tones: Vec<ToneCollision>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToneCollision {
    pub tone: String,
    pub other: String,
    pub separation: f64,
}

impl ValidationReport {
    pub fn has_degenerate_tones(&self) -> bool {
        !self.degenerate_tones.is_empty()
    }

    pub fn is_clean(&self) -> bool {
        self.strong_couplings.is_empty()
            && self.resonance_collisions.is_empty()
            && self.degenerate_tones.is_empty()
    }
}

pub fn validate_system(system: &LevelSystem, drive_carrier: f64) -> ValidationReport {
    validate_system_with(system, drive_carrier, system.delta_min())
}

pub fn validate_system_with(system: &LevelSystem, drive_carrier: f64, delta_min: f64) -> ValidationReport {
    let n = system.n();
    let mut report = ValidationReport {
        delta_min,
        drive_carrier,
        ..Default::default()
    };
    for i in 1..n {
        for j in 0..i {
            let gamma = system.coupling(i, j).norm();
            let gap = system.gap(i, j);
            if gamma > 0.0 {
                let ratio = gamma / gap;
                report.ratios.push((i + 1, j + 1, ratio));
                if ratio >= RATIO_FLAG {
                    report.strong_couplings.push((i + 1, j + 1));
                }
            }
            if (i, j) != (1, 0) && (gap - drive_carrier).abs() < delta_min {
                report.resonance_collisions.push((i + 1, j + 1));
            }
        }
    }

    // correction tones ω_k1, ω_k2 for k >= 3, checked against each other, the
    // qubit carrier and DC
    let mut named: Vec<(String, f64)> = vec![
        ("DC".to_string(), 0.0),
        ("ω21".to_string(), system.qubit_gap()),
    ];
    let fixed = named.len();
    for k in 2..n {
        for s in 0..2 {
            named.push((format!("ω{}{}", k + 1, s + 1), system.gap(k, s)));
        }
    }
    for a in fixed..named.len() {
        for b in 0..a {
            let sep = (named[a].1 - named[b].1).abs();
            if sep < delta_min {
                report.degenerate_tones.push(ToneCollision {
                    tone: named[a].0.clone(),
                    other: named[b].0.clone(),
                    separation: sep,
                });
            }
        }
    }
    report
}

/// Integer multiple `m` and the resulting `t0 = m π / ω21`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct T0Choice {
    pub multiple: u64,
    pub t0: f64,
}

impl T0Choice {
    pub fn from_multiple(system: &LevelSystem, multiple: u64) -> Self {
        Self {
            multiple,
            t0: multiple as f64 * PI / system.qubit_gap(),
        }
    }
}

/// Chooses `t0 = m π / ω21` balancing `γ_max t0` against `1 / (ω21 t0)`,
/// subject to `γ_max t0 < 0.2` and `ω21 t0 > 5`.
pub fn select_t0(system: &LevelSystem) -> Result<T0Choice> {
    let w21 = system.qubit_gap();
    let g = system.max_coupling();
    if !(w21 > 0.0) {
        return Err(Error::NoValidT0("qubit gap must be positive".into()));
    }
    if !(g > 0.0) {
        return Err(Error::NoValidT0("system has no couplings".into()));
    }
    let mut best: Option<(f64, u64)> = None;
    for m in 1..=T0_MAX_MULTIPLE {
        let t0 = m as f64 * PI / w21;
        if g * t0 >= 0.2 {
            break;
        }
        if w21 * t0 <= 5.0 {
            continue;
        }
        let objective = (g * t0 - 1.0 / (w21 * t0)).abs();
        if best.is_none_or(|(b, _)| objective < b) {
            best = Some((objective, m));
        }
    }
    best.map(|(_, m)| T0Choice::from_multiple(system, m)).ok_or_else(|| {
        Error::NoValidT0(format!(
            "windows γ t0 < 0.2 and ω21 t0 > 5 are disjoint for γ_max/ω21 = {:e}",
            g / w21
        ))
    })
}

/// Two subsystems with optional `σz σz` / `σz σx + σx σz` coupling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoQubitSpec {
    pub dims: (usize, usize),
    #[serde(with = "pair_of_matrices")]
    pub local_hamiltonians: (CMatrix, CMatrix),
    #[serde(default)]
    pub coupling_jz: f64,
    #[serde(default)]
    pub coupling_jx: f64,
    /// Drive applied after mapping; defaults to `σx ⊗ I` when absent.
    #[serde(default, with = "option_matrix", skip_serializing_if = "Option::is_none")]
    pub drive: Option<CMatrix>,
}

mod pair_of_matrices {
    use super::CMatrix;
    use crate::linalg::serde_cmatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Wrap(#[serde(with = "serde_cmatrix")] CMatrix);

    pub fn serialize<S: Serializer>(m: &(CMatrix, CMatrix), s: S) -> Result<S::Ok, S::Error> {
        (Wrap(m.0.clone()), Wrap(m.1.clone())).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(CMatrix, CMatrix), D::Error> {
        let (a, b) = <(Wrap, Wrap)>::deserialize(d)?;
        Ok((a.0, b.0))
    }
}

mod option_matrix {
    use super::CMatrix;
    use crate::linalg::serde_cmatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Wrap(#[serde(with = "serde_cmatrix")] CMatrix);

    pub fn serialize<S: Serializer>(m: &Option<CMatrix>, s: S) -> Result<S::Ok, S::Error> {
        m.as_ref().map(|m| Wrap(m.clone())).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<CMatrix>, D::Error> {
        Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
    }
}

impl TwoQubitSpec {
    pub fn validate(&self) -> Result<()> {
        let (n1, n2) = self.dims;
        if n1 < 2 || n2 < 2 {
            return Err(Error::BadDimension {
                n: n1.min(n2),
                reason: "each subsystem needs at least 2 levels",
            });
        }
        if self.local_hamiltonians.0.shape() != (n1, n1) || self.local_hamiltonians.1.shape() != (n2, n2) {
            return Err(Error::InvalidSystem("local Hamiltonian shapes do not match dims".into()));
        }
        linalg::require_hermitian(&self.local_hamiltonians.0, HERMITIAN_TOL)?;
        linalg::require_hermitian(&self.local_hamiltonians.1, HERMITIAN_TOL)?;
        if let Some(d) = &self.drive {
            if d.shape() != (n1 * n2, n1 * n2) {
                return Err(Error::InvalidSystem("drive must act on the product space".into()));
            }
            linalg::require_hermitian(d, HERMITIAN_TOL)?;
        }
        Ok(())
    }

    /// Default drive `σx ⊗ I` rotating the first subsystem (first two levels).
    pub fn default_drive(&self) -> CMatrix {
        let (n1, n2) = self.dims;
        let mut x1 = CMatrix::zeros(n1, n1);
        x1[(0, 1)] = ONE;
        x1[(1, 0)] = ONE;
        linalg::kron(&x1, &CMatrix::identity(n2, n2))
    }
}

/// Result of mapping two subsystems onto one multilevel system.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TwoQubitMapping {
    pub dims: (usize, usize),
    /// Full Hamiltonian in the product basis `|(i-1) N2 + j⟩`.
    #[serde(with = "linalg::serde_cmatrix")]
    pub hamiltonian: CMatrix,
    /// Eigenvalues in ascending order (not shifted).
    pub spectrum: Vec<f64>,
    /// Columns are the eigenvectors matching `spectrum`.
    #[serde(with = "linalg::serde_cmatrix")]
    pub basis_change: CMatrix,
}

impl TwoQubitMapping {
    /// `(i, j)` (1-based) of product label `k` (1-based).
    pub fn product_label(&self, k: usize) -> (usize, usize) {
        let n2 = self.dims.1;
        ((k - 1) / n2 + 1, (k - 1) % n2 + 1)
    }

    /// Multilevel system seen by `drive` (product basis) in the eigenbasis.
    /// Fails on a degenerate spectrum.
    pub fn level_system(&self, drive: &CMatrix, label: &str) -> Result<LevelSystem> {
        let v = &self.basis_change;
        let couplings = v.adjoint() * drive * v;
        LevelSystem::new(label, self.spectrum.clone(), couplings)
    }
}

pub fn map_two_qubits(spec: &TwoQubitSpec) -> Result<TwoQubitMapping> {
    spec.validate()?;
    let (n1, n2) = spec.dims;
    let coupled = spec.coupling_jz != 0.0 || spec.coupling_jx != 0.0;
    if coupled && (n1 != 2 || n2 != 2) {
        return Err(Error::CouplingUnsupported { n1, n2 });
    }
    let (h1, h2) = &spec.local_hamiltonians;
    let mut h = linalg::kron(h1, &CMatrix::identity(n2, n2)) + linalg::kron(&CMatrix::identity(n1, n1), h2);
    if coupled {
        let (sx, sz) = (linalg::sigma_x(), linalg::sigma_z());
        let zz = linalg::kron(&sz, &sz);
        let zx_xz = linalg::kron(&sz, &sx) + linalg::kron(&sx, &sz);
        h += zz * C64::new(spec.coupling_jz, 0.0) + zx_xz * C64::new(spec.coupling_jx, 0.0);
    }
    let eig = HermitianEigen::new(&h);
    let mut order: Vec<usize> = (0..eig.values.len()).collect();
    order.sort_by(|&a, &b| eig.values[a].total_cmp(&eig.values[b]));
    let spectrum = order.iter().map(|&k| eig.values[k]).collect();
    let basis_change = CMatrix::from_fn(h.nrows(), h.ncols(), |i, j| eig.vectors[(i, order[j])]);
    Ok(TwoQubitMapping {
        dims: spec.dims,
        hamiltonian: h,
        spectrum,
        basis_change,
    })
}

/// Product-basis slot `(a, b)`, 0-based, in `SP1 ⊗ SP2` with `SP1 = {V1, 1, 2}`
/// and `SP2 = {V2, 3, .., N}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductState {
    pub first: usize,
    pub second: usize,
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexMap {
    pub n: usize,
    pub product_dimension: usize,
    /// Image of original level `k` (1-based) at position `k - 1`.
    pub image: Vec<ProductState>,
    pub unphysical: Vec<ProductState>,
}

pub fn embed_bipartite_index_map(n: usize) -> Result<IndexMap> {
    if n < 3 {
        return Err(Error::BadDimension {
            n,
            reason: "bipartite embedding needs N >= 3",
        });
    }
    let second_dim = n - 1;
    let slot = |first: usize, second: usize| ProductState {
        first,
        second,
        index: first * second_dim + second,
    };
    let mut image = vec![slot(1, 0), slot(2, 0)];
    image.extend((3..=n).map(|k| slot(0, k - 2)));
    let taken: std::collections::BTreeSet<usize> = image.iter().map(|s| s.index).collect();
    let unphysical = (0..3)
        .flat_map(|a| (0..second_dim).map(move |b| (a, b)))
        .map(|(a, b)| slot(a, b))
        .filter(|s| !taken.contains(&s.index))
        .collect();
    Ok(IndexMap {
        n,
        product_dimension: 3 * second_dim,
        image,
        unphysical,
    })
}
