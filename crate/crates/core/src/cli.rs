//! Scenario-driven command line: `check`, `synth`, `sweep`, `map2q`, `algebra`.
//!
//! Exit codes: 0 success, 1 usage or invalid input, 2 degenerate tones,
//! 3 no convergence, 4 slope check failed.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::algebra::{self, SearchOptions};
use crate::error::{Error, Result};
use crate::model::{self, LevelSystem, Pulse, PulseSequence, T0Choice, TwoQubitMapping, TwoQubitSpec};
use crate::propagate::{self, IntegratorConfig, LeakageReport};
use crate::rng;
use crate::synth::{self, RefineOptions, ScalingProtocol, SynthesisOptions, SynthesisResult};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DEGENERATE: i32 = 2;
pub const EXIT_NO_CONVERGENCE: i32 = 3;
pub const EXIT_SLOPE: i32 = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemSpec {
    LevelSystem(LevelSystem),
    TwoQubit(TwoQubitSpec),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveOverrides {
    /// Amplitude of the qubit pulse (default 1).
    pub amplitude: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisSettings {
    /// Largest accepted leakage amplitude after refinement.
    pub tolerance: f64,
    /// Highest order of the coefficient series (first order plus Newton updates).
    pub max_order: usize,
    pub t0: Option<f64>,
    /// `t0 = m π / ω21`; ignored when `t0` is given.
    pub t0_multiple: Option<u64>,
}

impl Default for SynthesisSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_order: 51,
            t0: None,
            t0_multiple: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSettings {
    pub scales: Vec<u32>,
    pub base_multiple: u64,
    pub uncorrected_band: (f64, f64),
    pub corrected_band: (f64, f64),
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            scales: vec![1, 2, 4, 8],
            base_multiple: 3,
            uncorrected_band: (-2.3, -1.7),
            corrected_band: (-3.3, -2.7),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlSource {
    /// The system's own coupling matrix.
    #[default]
    Couplings,
    /// A seeded random Hermitian matrix.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgebraSettings {
    /// Defaults to ten qubit periods.
    pub total_time: Option<f64>,
    pub control: ControlSource,
    pub rank_tol: f64,
}

impl Default for AlgebraSettings {
    fn default() -> Self {
        Self {
            total_time: None,
            control: ControlSource::Couplings,
            rank_tol: algebra::DEFAULT_RANK_TOL,
        }
    }
}

fn default_seed() -> u64 {
    rng::DEFAULT_SEED
}

fn default_output() -> String {
    "offres".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub system: SystemSpec,
    #[serde(default)]
    pub drive: DriveOverrides,
    #[serde(default)]
    pub synthesis: SynthesisSettings,
    #[serde(default)]
    pub sweep: Option<SweepSettings>,
    #[serde(default)]
    pub algebra: AlgebraSettings,
    /// `N` for the bipartite index map written by `map2q`.
    #[serde(default)]
    pub embed: Option<usize>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: String,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
        s.integrator.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Scenario(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// The multilevel system to drive; two-qubit specs are mapped first.
    pub fn level_system(&self) -> Result<LevelSystem> {
        match &self.system {
            SystemSpec::LevelSystem(s) => Ok(s.clone()),
            SystemSpec::TwoQubit(spec) => {
                let mapping = model::map_two_qubits(spec)?;
                let drive = spec.drive.clone().unwrap_or_else(|| spec.default_drive());
                mapping.level_system(&drive, "two_qubit")
            }
        }
    }

    fn base_amplitude(&self) -> f64 {
        self.drive.amplitude.unwrap_or(1.0)
    }

    pub fn t0(&self, system: &LevelSystem) -> Result<f64> {
        if let Some(t0) = self.synthesis.t0 {
            return Ok(t0);
        }
        if let Some(m) = self.synthesis.t0_multiple {
            return Ok(T0Choice::from_multiple(system, m).t0);
        }
        Ok(model::select_t0(system)?.t0)
    }

    fn synthesis_options(&self) -> SynthesisOptions {
        SynthesisOptions {
            integrator: self.integrator,
            base_amplitude: self.base_amplitude(),
            ..SynthesisOptions::default()
        }
    }

    fn refine_options(&self) -> RefineOptions {
        RefineOptions {
            tolerance: self.synthesis.tolerance,
            max_iterations: self.synthesis.max_order.saturating_sub(1),
            ..RefineOptions::default()
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "offres", version, about = "Leakage-cancelling pulse sequences for multilevel qubits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Scenario JSON file.
    #[arg(long, global = true)]
    pub scenario: Option<PathBuf>,
    /// Output path prefix; overrides the scenario's `output`.
    #[arg(long, global = true)]
    pub out: Option<String>,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Print nothing on stdout.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate the system and report closure and constraint counts.
    Check,
    /// Synthesize, refine and analyse a corrective sequence.
    Synth,
    /// Run the scaling protocol and fit log-log slopes.
    Sweep,
    /// Map two subsystems onto one multilevel system.
    Map2q {
        /// Also write the bipartite index map for N levels.
        #[arg(long)]
        embed: Option<usize>,
    },
    /// Lie closure and alternating-exponential search.
    Algebra {
        /// Objective evaluations per restart.
        #[arg(long, default_value_t = 2000)]
        budget: usize,
        #[arg(long, default_value_t = 20)]
        restarts: usize,
    },
}

struct Ctx {
    scenario: Scenario,
    prefix: String,
    quiet: bool,
}

impl Ctx {
    fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }

    fn path(&self, suffix: &str) -> PathBuf {
        PathBuf::from(format!("{}.{suffix}", self.prefix))
    }

    fn write(&self, suffix: &str, contents: &str) -> Result<PathBuf> {
        let path = self.path(suffix);
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(&path, contents)?;
        Ok(path)
    }

    fn write_json<T: Serialize>(&self, suffix: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Scenario(e.to_string()))?;
        text.push('\n');
        self.write(suffix, &text)
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::DegenerateDenominator { .. } => EXIT_DEGENERATE,
        Error::NoConvergence { .. } | Error::SearchFailed { .. } => EXIT_NO_CONVERGENCE,
        _ => EXIT_USAGE,
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(cli: &Cli) -> Result<i32> {
    let path = cli
        .scenario
        .as_ref()
        .ok_or_else(|| Error::Scenario("--scenario <path> is required".into()))?;
    let mut scenario = Scenario::load(path)?;
    if let Some(seed) = cli.seed {
        scenario.seed = seed;
    }
    let prefix = cli.out.clone().unwrap_or_else(|| scenario.output.clone());
    let ctx = Ctx {
        scenario,
        prefix,
        quiet: cli.quiet,
    };
    match &cli.command {
        Command::Check => cmd_check(&ctx),
        Command::Synth => cmd_synth(&ctx),
        Command::Sweep => cmd_sweep(&ctx),
        Command::Map2q { embed } => cmd_map2q(&ctx, *embed),
        Command::Algebra { budget, restarts } => cmd_algebra(&ctx, *budget, *restarts),
    }
}


fn cmd_check(ctx: &Ctx) -> Result<i32> {
    let system = ctx.scenario.level_system()?;
    let n = system.n();
    let report = model::validate_system(&system, system.qubit_gap());
    ctx.say(format!("system {:?}: N = {n}", system.label()));
    ctx.say(format!("energies {:?}", system.energies()));
    ctx.say(format!("delta_min {:e}", report.delta_min));
    ctx.say("coupling ratios |γ/ω|:");
    for (i, j, r) in &report.ratios {
        ctx.say(format!("  {i} {j} {r:.3e}"));
    }
    ctx.say(format!("strong couplings {:?}", report.strong_couplings));
    ctx.say(format!("resonance collisions {:?}", report.resonance_collisions));
    if report.degenerate_tones.is_empty() {
        ctx.say("degenerate tones none");
    }
    for c in &report.degenerate_tones {
        ctx.say(format!("degenerate tone {} near {} (separation {:e})", c.tone, c.other, c.separation));
    }
    match algebra::lie_closure(&system.h0(), system.couplings(), ctx.scenario.algebra.rank_tol) {
        Ok(c) => ctx.say(format!(
            "closure dimension {} of {} ({}), generations {}",
            c.dimension,
            n * n,
            if c.is_full { "full" } else { "not full" },
            c.generations
        )),
        Err(e) => ctx.say(format!("closure skipped: {e}")),
    }
    match algebra::constraint_count(n) {
        Ok(c) => ctx.say(format!("constraint count {c}")),
        Err(_) => ctx.say("constraint count n/a (no leakage levels)"),
    }
    Ok(if report.has_degenerate_tones() {
        EXIT_DEGENERATE
    } else {
        EXIT_OK
    })
}

/// Contents of `<prefix>.sequence.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceFile {
    pub system: LevelSystem,
    pub t0: f64,
    pub converged: bool,
    /// One block, ready for `evolve_sequence`.
    pub sequence: PulseSequence,
    pub synthesis: SynthesisResult,
}

/// Contents of `<prefix>.effective.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveFile {
    pub rotation_angle: f64,
    pub nominal_angle: f64,
    pub delta: [f64; 4],
    pub deviation_norm: f64,
    pub unitarity_defect: f64,
    pub convention_factor: f64,
    pub report: synth::EffectiveMapReport,
}

fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn leakage_rows(out: &mut String, stage: &str, report: &LeakageReport) {
    for k in 3..=report.n {
        let (a, b) = report.pair(k);
        let pop = (a * a).max(b * b);
        let _ = writeln!(out, "{stage},{k},{},{},{}", fmt_num(a), fmt_num(b), fmt_num(pop));
    }
}

fn cmd_synth(ctx: &Ctx) -> Result<i32> {
    let sc = &ctx.scenario;
    let system = sc.level_system()?;
    let t0 = sc.t0(&system)?;
    let opts = sc.synthesis_options();
    let first = synth::synthesize_sequence_with(&system, t0, &opts)?;
    let base = Pulse::new(sc.base_amplitude(), system.qubit_gap(), 0.0, t0)?;
    let bare = propagate::leakage_of(&propagate::evolve(&system, &base, &sc.integrator)?);

    let (refined, code) = match synth::refine(&system, &first, &sc.refine_options()) {
        Ok(r) => (r, EXIT_OK),
        Err(Error::NoConvergence { best, iterations, residual }) => {
            eprintln!("refinement stopped after {iterations} iterations at leakage amplitude {residual:e}");
            (*best, EXIT_NO_CONVERGENCE)
        }
        Err(e) => return Err(e),
    };

    let mut csv = String::from("stage,k,abs_u1k,abs_u2k,max_population\n");
    leakage_rows(&mut csv, "uncorrected", &bare);
    leakage_rows(&mut csv, "first_order", &first.final_leakage);
    leakage_rows(&mut csv, "refined", &refined.final_leakage);
    ctx.write("leakage.csv", &csv)?;
    ctx.write_json(
        "sequence.json",
        &SequenceFile {
            system: system.clone(),
            t0,
            converged: refined.converged,
            sequence: refined.sequence(1)?,
            synthesis: refined.clone(),
        },
    )?;

    ctx.say(format!("t0 {t0:.6}  pulses per block {}", 1 + refined.corrective_pulses.len()));
    ctx.say(format!(
        "max leakage population: uncorrected {:.3e}, first order {:.3e}, refined {:.3e} ({} iterations)",
        bare.max_leakage_population,
        first.final_leakage.max_leakage_population,
        refined.final_leakage.max_leakage_population,
        refined.iterations
    ));
    if code != EXIT_OK {
        return Ok(code);
    }
    let map = synth::effective_two_level_map(&system, &refined, 1)?;
    ctx.write_json(
        "effective.json",
        &EffectiveFile {
            rotation_angle: map.rotation_angle,
            nominal_angle: map.nominal_angle,
            delta: map.generator_decomposition,
            deviation_norm: map.deviation_norm,
            unitarity_defect: map.unitarity_defect,
            convention_factor: map.convention_factor,
            report: map.clone(),
        },
    )?;
    ctx.say(format!(
        "rotation angle {:.12} (nominal {:.12}), deviation norm {:.3e}",
        map.rotation_angle, map.nominal_angle, map.deviation_norm
    ));
    let [d0, dx, dy, dz] = map.generator_decomposition;
    ctx.say(format!("δ0 {d0:.3e}  δx {dx:.3e}  δy {dy:.3e}  δz {dz:.3e}"));
    Ok(EXIT_OK)
}

fn cmd_sweep(ctx: &Ctx) -> Result<i32> {
    let sc = &ctx.scenario;
    let settings = sc
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Scenario("scenario has no `sweep` section".into()))?;
    if settings.scales.len() < 3 {
        return Err(Error::Scenario(format!(
            "slope fit needs at least 3 scale factors, got {}",
            settings.scales.len()
        )));
    }
    if settings.scales.contains(&0) {
        return Err(Error::Scenario("scale factors must be positive".into()));
    }
    let system = sc.level_system()?;
    let protocol = ScalingProtocol {
        scales: settings.scales.clone(),
        base_multiple: settings.base_multiple,
    };
    let points = synth::scaling_sweep(&system, &protocol, &sc.synthesis_options())?;
    let mut csv = String::from("s,epsilon,uncorrected_amp,corrected_amp\n");
    for p in &points {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            p.s,
            fmt_num(p.epsilon),
            fmt_num(p.uncorrected_amp),
            fmt_num(p.corrected_amp)
        );
    }
    ctx.write("scaling.csv", &csv)?;
    for p in &points {
        ctx.say(format!(
            "s {:>3}  eps {:.4e}  uncorrected {:.4e}  corrected {:.4e}",
            p.s, p.epsilon, p.uncorrected_amp, p.corrected_amp
        ));
    }
    let xs: Vec<f64> = points.iter().map(|p| f64::from(p.s)).collect();
    let unc: Vec<f64> = points.iter().map(|p| p.uncorrected_amp).collect();
    let cor: Vec<f64> = points.iter().map(|p| p.corrected_amp).collect();
    let (Some(su), Some(sc_)) = (synth::loglog_slope(&xs, &unc), synth::loglog_slope(&xs, &cor)) else {
        ctx.say("degenerate fit: some amplitudes vanish");
        return Ok(EXIT_OK);
    };
    let within = |v: f64, (lo, hi): (f64, f64)| v >= lo && v <= hi;
    let ok_u = within(su, settings.uncorrected_band);
    let ok_c = within(sc_, settings.corrected_band);
    ctx.say(format!(
        "slope uncorrected {su:.4} [{}]  corrected {sc_:.4} [{}]",
        if ok_u { "ok" } else { "out of band" },
        if ok_c { "ok" } else { "out of band" }
    ));
    Ok(if ok_u && ok_c { EXIT_OK } else { EXIT_SLOPE })
}

/// Contents of `<prefix>.mapped.json`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MappedFile {
    pub mapping: TwoQubitMapping,
    /// Absent when the spectrum is degenerate.
    pub level_system: Option<LevelSystem>,
    /// `(i, j)` product label of each eigenstate by largest overlap, 1-based.
    pub dominant_labels: Vec<(usize, usize)>,
}

fn cmd_map2q(ctx: &Ctx, embed: Option<usize>) -> Result<i32> {
    let SystemSpec::TwoQubit(spec) = &ctx.scenario.system else {
        return Err(Error::Scenario("map2q needs a `two_qubit` system".into()));
    };
    let mapping = model::map_two_qubits(spec)?;
    let drive = spec.drive.clone().unwrap_or_else(|| spec.default_drive());
    let level_system = match mapping.level_system(&drive, "two_qubit") {
        Ok(s) => Some(s),
        Err(e) => {
            ctx.say(format!("no level system: {e}"));
            None
        }
    };
    let v = &mapping.basis_change;
    let dominant_labels = (0..v.ncols())
        .map(|j| {
            let k = (0..v.nrows())
                .max_by(|&a, &b| v[(a, j)].norm().total_cmp(&v[(b, j)].norm()).then(b.cmp(&a)))
                .unwrap_or(0);
            mapping.product_label(k + 1)
        })
        .collect();
    ctx.say("spectrum:");
    for (k, e) in mapping.spectrum.iter().enumerate() {
        ctx.say(format!("  {:>2} {e:.15e}", k + 1));
    }
    ctx.write_json(
        "mapped.json",
        &MappedFile {
            mapping,
            level_system,
            dominant_labels,
        },
    )?;
    if let Some(n) = embed.or(ctx.scenario.embed) {
        let map = model::embed_bipartite_index_map(n)?;
        ctx.say(format!("embedding N = {n}: product dimension {}", map.product_dimension));
        ctx.write_json("index_map.json", &map)?;
    }
    Ok(EXIT_OK)
}

fn cmd_algebra(ctx: &Ctx, budget: usize, restarts: usize) -> Result<i32> {
    let sc = &ctx.scenario;
    let system = sc.level_system()?;
    let n = system.n();
    let hi = match sc.algebra.control {
        ControlSource::Couplings => system.couplings().clone(),
        ControlSource::Random => rng::random_hermitian(&mut rng::stream(sc.seed, "algebra-control"), n),
    };
    let closure = algebra::lie_closure(&system.h0(), &hi, sc.algebra.rank_tol)?;
    ctx.say("   N  dim(closure)  N^2  full  generations  constraints");
    ctx.say(format!(
        "{n:>4}  {:>12}  {:>3}  {:>4}  {:>11}  {:>11}",
        closure.dimension,
        n * n,
        closure.is_full,
        closure.generations,
        algebra::constraint_count(n).map_or("n/a".to_string(), |c| c.to_string())
    ));
    ctx.write_json("closure.json", &closure)?;
    let total_time = sc
        .algebra
        .total_time
        .unwrap_or(10.0 * std::f64::consts::TAU / system.qubit_gap());
    let opts = SearchOptions {
        budget,
        restarts,
        ..SearchOptions::default()
    };
    let (outcome, code) = match algebra::alternating_search(&system, &hi, total_time, sc.seed, &opts) {
        Ok(o) => (o, EXIT_OK),
        Err(Error::SearchFailed { outcome, .. }) => (*outcome, EXIT_NO_CONVERGENCE),
        Err(e) => return Err(e),
    };
    ctx.write_json("schedule.json", &outcome)?;
    ctx.say(format!(
        "alternating search: leakage norm {:.3e} ({}), best restart {}, {} evaluations",
        outcome.leakage_norm,
        if outcome.success { "success" } else { "failed" },
        outcome.best_restart,
        outcome.evaluations
    ));
    Ok(code)
}
