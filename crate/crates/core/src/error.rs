use thiserror::Error;

use crate::synth::SynthesisResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid level system: {0}")]
    InvalidSystem(String),

    #[error("invalid pulse: {0}")]
    InvalidPulse(String),

    #[error("matrix is not Hermitian (max |A - A^H| = {defect:e})")]
    NotHermitian { defect: f64 },

    #[error("no valid t0: {0}")]
    NoValidT0(String),

    #[error("coupling terms require two 2-level subsystems, got dims ({n1}, {n2})")]
    CouplingUnsupported { n1: usize, n2: usize },

    #[error("bad dimension {n}: {reason}")]
    BadDimension { n: usize, reason: &'static str },

    #[error("unitarity lost: defect {defect:e} exceeds tolerance {tolerance:e}")]
    UnitarityLost { defect: f64, tolerance: f64 },

    #[error("dyson order {0} unsupported (orders 1..=3 available)")]
    OrderUnsupported(usize),

    #[error("degenerate denominator: |{label}| = {value:e} below {delta_min:e}")]
    DegenerateDenominator {
        label: String,
        value: f64,
        delta_min: f64,
    },

    #[error("refinement did not converge after {iterations} iterations (max leakage amplitude {residual:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        best: Box<SynthesisResult>,
    },

    #[error("2x2 block is not unitary: defect {defect:e}")]
    BlockNotUnitary { defect: f64 },

    #[error("dimension {0} exceeds the closure cost guard of 16")]
    DimensionOverflow(usize),

    #[error("alternating search failed: best leakage norm {best_leakage:e}")]
    SearchFailed {
        best_leakage: f64,
        outcome: Box<crate::algebra::SearchOutcome>,
    },

    #[error("scenario: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("linear algebra failure: {0}")]
    Numerical(&'static str),
}
