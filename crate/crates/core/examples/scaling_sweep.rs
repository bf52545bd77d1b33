//! Leakage before and after first-order correction as the small parameters
//! shrink together, with fitted log-log slopes.

use offres::linalg::{CMatrix, C64};
use offres::model::LevelSystem;
use offres::synth::{effective_scaling_sweep, loglog_slope, scaling_sweep, RefineOptions, ScalingProtocol, SynthesisOptions};

fn main() -> offres::error::Result<()> {
    let mut g = CMatrix::zeros(3, 3);
    for (i, j, z) in [
        (0, 1, C64::new(0.01, 0.0)),
        (0, 2, C64::from_polar(0.01, 0.7)),
        (1, 2, C64::from_polar(0.01, -1.3)),
    ] {
        g[(i, j)] = z;
        g[(j, i)] = z.conj();
    }
    let system = LevelSystem::new("reference", vec![0.0, 1.0, 10.0], g)?;
    let protocol = ScalingProtocol {
        scales: vec![1, 2, 4, 8],
        base_multiple: 3,
    };
    let opts = SynthesisOptions::default();
    let points = scaling_sweep(&system, &protocol, &opts)?;
    println!("   s  m   epsilon     uncorrected  corrected");
    for p in &points {
        println!(
            "{:>4} {:>2}  {:.4e}  {:.4e}  {:.4e}",
            p.s,
            protocol.multiple_at(p.s),
            p.epsilon,
            p.uncorrected_amp,
            p.corrected_amp
        );
    }
    let s: Vec<f64> = points.iter().map(|p| f64::from(p.s)).collect();
    let slope = |v: Vec<f64>| loglog_slope(&s, &v).map_or("degenerate".into(), |x| format!("{x:.3}"));
    println!("slope uncorrected {}", slope(points.iter().map(|p| p.uncorrected_amp).collect()));
    println!("slope corrected   {}", slope(points.iter().map(|p| p.corrected_amp).collect()));

    let eff = effective_scaling_sweep(&system, &protocol, &opts, &RefineOptions::default())?;
    println!("slope of qubit-block deviation {}", slope(eff.iter().map(|p| p.deviation_norm).collect()));
    Ok(())
}
