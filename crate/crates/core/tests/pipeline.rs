use std::fs;
use std::path::Path;

use proptest::prelude::*;

use artirig::pipeline::{
    cmd_fit, cmd_pipeline, cmd_rig, cmd_segment, cmd_synth, cmd_track, ExitKind, Manifest, PipelineConfig,
    PipelineError, CONFIG_KEYS,
};

const RIGID: &str = "\
primitive = pipe
length = 200
radius = 15
joints = 0.5
frames = 6
translate.z = 0:0 5:25
translate.x = 0:0 5:10
noise = 0.2
seed = 1
";

fn synth_rigid(dir: &Path) -> std::path::PathBuf {
    let scenario = dir.join("rigid.scenario");
    fs::write(&scenario, RIGID).unwrap();
    let data = dir.join("data");
    cmd_synth(&scenario, &data, None).unwrap();
    data
}

fn quick_config() -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.set("samples", "120").unwrap();
    cfg.sweep_gamma.clear();
    cfg
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_values_survive_a_manifest(
        gamma in 1e-4f64..10.0,
        thresh in 0.01f64..2.0,
        samples in 2usize..5000,
        seed in any::<u64>(),
        parallel in any::<bool>(),
    ) {
        let mut cfg = PipelineConfig::default();
        cfg.set("gamma_def", &gamma.to_string()).unwrap();
        cfg.set("lambda_thresh", &thresh.to_string()).unwrap();
        cfg.set("samples", &samples.to_string()).unwrap();
        cfg.set("seed", &seed.to_string()).unwrap();
        cfg.set("parallel", &parallel.to_string()).unwrap();
        prop_assert_eq!(cfg.get("gamma_def").unwrap().parse::<f64>().unwrap(), gamma);
        prop_assert_eq!(cfg.seed(), seed);
        let mut m = Manifest::new("test", &cfg);
        m.inputs.push(("a.obj".into(), "00".into()));
        let mut back = PipelineConfig::default();
        back.apply_text(&m.to_text()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}

#[test]
fn every_key_has_a_value() {
    let cfg = PipelineConfig::default();
    for key in CONFIG_KEYS {
        assert!(cfg.get(key).is_some(), "{key}");
    }
    assert!(cfg.get("nope").is_none());
}

#[test]
fn bad_values_are_rejected() {
    let mut cfg = PipelineConfig::default();
    assert!(cfg.set("gamma_def", "0").is_err());
    assert!(cfg.set("gamma_def", "nan").is_err());
    assert!(cfg.set("samples", "1").is_err());
    assert!(cfg.set("parallel", "maybe").is_err());
    assert!(cfg.set("dt_mode", "sometimes").is_err());
    assert_eq!(cfg, PipelineConfig::default());
}

#[test]
fn synth_writes_a_loadable_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_rigid(dir.path());
    assert!(data.join("template.obj").exists());
    assert!(data.join("camera.json").exists());
    assert!(data.join("synth.manifest").exists());
    let ds = artirig::synth::Dataset::load(&data).unwrap();
    assert_eq!(ds.frames.len(), 6);
}

#[test]
fn rigid_motion_gives_one_part_one_bone_and_exact_fit() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_rigid(dir.path());
    let cfg = quick_config();

    let tracked = dir.path().join("track");
    let traj = cmd_track(&data, &cfg, &tracked).unwrap();
    assert_eq!(traj.n_frames(), 6);

    let seg = dir.path().join("seg");
    let r = cmd_segment(&tracked.join("trajectories.bin"), &data.join("template.obj"), &cfg, &[0.5, 0.9], &seg)
        .unwrap();
    assert_eq!(r.segmentation.k, 1);
    assert_eq!(r.k_by_threshold.len(), 2);

    let rig = dir.path().join("rig");
    let s = cmd_rig(&data.join("template.obj"), &seg.join("segmentation.txt"), &cfg, &rig).unwrap();
    assert_eq!(s.motion_joints, 0);
    assert!(s.joints >= 1);

    let fit = dir.path().join("fit");
    let f = cmd_fit(&rig.join("rig.txt"), &rig.join("template.obj"), &cfg, &fit).unwrap();
    assert!(f.result.error < 1e-6, "self fit error {}", f.result.error);
    assert!(fit.join("pose.txt").exists());
    assert!(f.to_text().contains("error_mm"));
}

#[test]
fn pipeline_without_sweep_writes_a_rig() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_rigid(dir.path());
    let out = dir.path().join("out");
    let r = cmd_pipeline(&data, &quick_config(), &out, false).unwrap();
    assert!(r.table.is_none());
    assert_eq!(r.segmentation.k, 1);
    assert!(out.join("rig.txt").exists());
    assert!(out.join("pipeline.manifest").exists());
}

#[test]
fn missing_inputs_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_rigid(dir.path());
    fs::remove_file(data.join("camera.json")).unwrap();
    let err = cmd_track(&data, &quick_config(), &dir.path().join("t")).unwrap_err();
    assert_eq!(err.kind(), ExitKind::Data, "{err}");
    assert_eq!(err.exit_code(), 2);

    let err = cmd_fit(&dir.path().join("none.txt"), &data.join("template.obj"), &quick_config(), dir.path())
        .unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn exit_codes() {
    assert_eq!(PipelineError::Usage("x".into()).exit_code(), 1);
    assert_eq!(PipelineError::Config { line: 1, message: "x".into() }.exit_code(), 1);
    assert_eq!(PipelineError::Data("x".into()).exit_code(), 2);
    let solve = artirig::tracking::TrackingError::SolveFailed(artirig::linalg::LinalgError::NoConvergence { size: 3 });
    assert_eq!(PipelineError::from(solve).exit_code(), 3);
}

#[test]
fn execution_policy_does_not_change_the_rig() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_rigid(dir.path());
    let (seq, par) = (dir.path().join("seq"), dir.path().join("par"));
    cmd_pipeline(&data, &quick_config().with_exec(artirig::Exec::Sequential), &seq, false).unwrap();
    cmd_pipeline(&data, &quick_config().with_exec(artirig::Exec::Parallel), &par, false).unwrap();
    for f in ["rig.txt", "segmentation.txt", "skeleton.txt"] {
        assert_eq!(fs::read(seq.join(f)).unwrap(), fs::read(par.join(f)).unwrap(), "{f}");
    }
}
