mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use offres::cli::{Scenario, SequenceFile, SweepSettings, SystemSpec, EXIT_DEGENERATE, EXIT_NO_CONVERGENCE, EXIT_OK, EXIT_USAGE};
use offres::propagate::{evolve_sequence, leakage_of};
use tempfile::TempDir;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.json"))
}

fn offres(dir: &Path, scenario: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_offres"))
        .args(args)
        .arg("--scenario")
        .arg(scenario)
        .arg("--out")
        .arg(dir.join("run"))
        .arg("--quiet")
        .output()
        .unwrap()
}

fn write_scenario(dir: &Path, s: &Scenario) -> PathBuf {
    let path = dir.join("scenario.json");
    fs::write(&path, serde_json::to_string_pretty(s).unwrap()).unwrap();
    path
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn check_reports_degeneracy_through_the_exit_code() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&offres(dir.path(), &scenario("reference"), &["check"])), EXIT_OK);
    assert_eq!(code(&offres(dir.path(), &scenario("degenerate"), &["check"])), EXIT_DEGENERATE);
    assert_eq!(code(&offres(dir.path(), &scenario("degenerate"), &["synth"])), EXIT_DEGENERATE);
}

#[test]
fn synth_writes_a_replayable_sequence() {
    let dir = TempDir::new().unwrap();
    let o = offres(dir.path(), &scenario("reference"), &["synth"]);
    assert_eq!(code(&o), EXIT_OK, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("run.leakage.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("stage,k,abs_u1k,abs_u2k,max_population"));
    assert_eq!(csv.lines().count(), 4);
    let file: SequenceFile = serde_json::from_str(&fs::read_to_string(dir.path().join("run.sequence.json")).unwrap()).unwrap();
    assert!(file.converged);
    let u = evolve_sequence(&file.system, &file.sequence, &file.synthesis.integrator).unwrap();
    assert!(leakage_of(&u).max_amplitude() < 1e-10);
    let effective: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run.effective.json")).unwrap()).unwrap();
    assert!(effective["deviation_norm"].as_f64().unwrap() < 1e-2);
}

#[test]
fn six_levels_need_nine_pulses() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&offres(dir.path(), &scenario("six_level"), &["synth"])), EXIT_OK);
    let file: SequenceFile = serde_json::from_str(&fs::read_to_string(dir.path().join("run.sequence.json")).unwrap()).unwrap();
    assert_eq!(file.sequence.segments().len(), 9);
}

#[test]
fn sweep_writes_csv_and_fits() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&offres(dir.path(), &scenario("reference"), &["sweep"])), EXIT_OK);
    let csv = fs::read_to_string(dir.path().join("run.scaling.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("s,epsilon,uncorrected_amp,corrected_amp"));
    let s: Vec<u32> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(s, vec![1, 2, 4, 8]);
}

#[test]
fn sweep_needs_three_scales() {
    let dir = TempDir::new().unwrap();
    let mut s = Scenario::load(&scenario("reference")).unwrap();
    s.sweep = Some(SweepSettings {
        scales: vec![2],
        ..SweepSettings::default()
    });
    let path = write_scenario(dir.path(), &s);
    assert_eq!(code(&offres(dir.path(), &path, &["sweep"])), EXIT_USAGE);
}

#[test]
fn sweep_without_leakage_is_a_degenerate_fit() {
    let dir = TempDir::new().unwrap();
    let s = Scenario {
        sweep: Some(SweepSettings::default()),
        ..Scenario::from_json(&format!(
            r#"{{"system": {{"level_system": {}}}}}"#,
            serde_json::to_string(&common::pure_two_level()).unwrap()
        ))
        .unwrap()
    };
    let path = write_scenario(dir.path(), &s);
    let o = Command::new(env!("CARGO_BIN_EXE_offres"))
        .args(["sweep", "--scenario"])
        .arg(&path)
        .arg("--out")
        .arg(dir.path().join("run"))
        .output()
        .unwrap();
    assert_eq!(code(&o), EXIT_OK);
    assert!(String::from_utf8_lossy(&o.stdout).contains("degenerate fit"));
}

#[test]
fn bad_scenarios_are_usage_errors() {
    let dir = TempDir::new().unwrap();
    let broken = dir.path().join("broken.json");
    fs::write(&broken, "{\"system\": ").unwrap();
    let o = offres(dir.path(), &broken, &["check"]);
    assert_eq!(code(&o), EXIT_USAGE);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));

    let unknown = dir.path().join("unknown.json");
    let text = fs::read_to_string(scenario("reference")).unwrap().replacen('{', "{\"colour\": 1,", 1);
    fs::write(&unknown, text).unwrap();
    assert_eq!(code(&offres(dir.path(), &unknown, &["check"])), EXIT_USAGE);

    assert_eq!(code(&offres(dir.path(), &dir.path().join("missing.json"), &["check"])), EXIT_USAGE);
    assert_eq!(code(&offres(dir.path(), &scenario("reference"), &["map2q"])), EXIT_USAGE);
    let o = Command::new(env!("CARGO_BIN_EXE_offres")).arg("frobnicate").output().unwrap();
    assert_eq!(code(&o), EXIT_USAGE);
}

#[test]
fn map2q_writes_mapping_and_index_map() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&offres(dir.path(), &scenario("pc_qubits"), &["map2q"])), EXIT_OK);
    let mapped: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run.mapped.json")).unwrap()).unwrap();
    assert_eq!(mapped["mapping"]["spectrum"].as_array().unwrap().len(), 4);
    let index: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run.index_map.json")).unwrap()).unwrap();
    assert_eq!(index["product_dimension"], 6);
}

#[test]
fn algebra_reports_search_failure() {
    let dir = TempDir::new().unwrap();
    let o = offres(dir.path(), &scenario("algebra"), &["algebra", "--budget", "10", "--restarts", "1"]);
    assert_eq!(code(&o), EXIT_NO_CONVERGENCE);
    let closure: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run.closure.json")).unwrap()).unwrap();
    assert_eq!(closure["is_full"], true);
}

#[test]
fn scenarios_round_trip() {
    for name in ["reference", "two_level", "four_level", "six_level", "degenerate", "pc_qubits", "algebra"] {
        let s = Scenario::load(&scenario(name)).unwrap();
        let back = Scenario::from_json(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(s, back, "{name}");
        if name == "pc_qubits" {
            assert!(matches!(s.system, SystemSpec::TwoQubit(_)));
        }
    }
}
