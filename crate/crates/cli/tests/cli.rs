use std::fs;
use std::process::{Command, Output};

fn artirig(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_artirig")).args(args).output().expect("binary runs")
}

const SCENARIO: &str = "\
primitive = pipe
length = 200
radius = 15
joints = 0.5
frames = 5
curve.0 = 0:0 4:40
noise = 0.2
";

#[test]
fn no_arguments_is_a_usage_error() {
    assert_eq!(artirig(&[]).status.code(), Some(1));
    assert_eq!(artirig(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn help_succeeds() {
    let out = artirig(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("pipeline"));
}

#[test]
fn bad_override_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(artirig(&["track", d, "-o", d, "--set", "no_equals"]).status.code(), Some(1));
    assert_eq!(artirig(&["track", d, "-o", d, "--set", "gamma_def=-2"]).status.code(), Some(1));
    assert_eq!(artirig(&["track", d, "-o", d, "--set", "unknown=1"]).status.code(), Some(1));
}

#[test]
fn missing_dataset_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nothing");
    let out = artirig(&["track", missing.to_str().unwrap(), "-o", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn synth_then_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("pipe.scenario");
    fs::write(&scenario, SCENARIO).unwrap();
    let data = dir.path().join("data");
    let out = artirig(&["synth", scenario.to_str().unwrap(), "-o", data.to_str().unwrap(), "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(data.join("frames").join("frame_004.ply").exists());

    let result = dir.path().join("result");
    let out = artirig(&[
        "pipeline",
        data.to_str().unwrap(),
        "-o",
        result.to_str().unwrap(),
        "--no-sweep",
        "--samples",
        "150",
        "--sequential",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(result.join("rig.txt").exists());
    let manifest = fs::read_to_string(result.join("pipeline.manifest")).unwrap();
    assert!(manifest.contains("samples = 150"));
    assert!(manifest.contains("parallel = false"));

    // the manifest reproduces the run as a config file
    let again = dir.path().join("again");
    let out = artirig(&[
        "pipeline",
        data.to_str().unwrap(),
        "-o",
        again.to_str().unwrap(),
        "--config",
        result.join("pipeline.manifest").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read(result.join("rig.txt")).unwrap(), fs::read(again.join("rig.txt")).unwrap());
}
