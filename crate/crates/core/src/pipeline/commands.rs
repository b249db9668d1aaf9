use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::info;

use super::{run_sweep, Manifest, PipelineConfig, PipelineError, SweepTable};
use crate::mesh::{load_mesh, save_mesh, PlyData};
use crate::pose::{fit_pose, FitResult, Pose};
use crate::rigging::{infer_rig, JointKind, Rig, RigReport};
use crate::segment::{
    affinity, compute_dt, sample_vertices, segment_embedded, spectral_embedding, Segmentation,
};
use crate::skeleton::{skeletonize, CurveSkeleton};
use crate::synth::{Dataset, Scenario};
use crate::tracking::{track_sequence, TrajectorySet};
use crate::{Mesh, Vec3};

const TEMPLATE: &str = "template.obj";
const TRAJECTORIES: &str = "trajectories.bin";
const SEGMENTATION: &str = "segmentation.txt";
const SKELETON: &str = "skeleton.txt";
const RIG: &str = "rig.txt";
const POSE: &str = "pose.txt";
const FIT_REPORT: &str = "fit.txt";
const TABLE_TEXT: &str = "table.txt";
const TABLE_CSV: &str = "table.csv";

/// Vertex positions of an OBJ/PLY mesh or a PLY point cloud.
pub fn load_points(path: impl AsRef<Path>) -> Result<Vec<Vec3>, PipelineError> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("ply")) {
        Ok(PlyData::parse(&fs::read(path)?)?.positions)
    } else {
        Ok(load_mesh(path)?.positions().to_vec())
    }
}

/// Renders a scenario into a dataset directory. `seed` overrides the
/// scenario's noise seed.
pub fn cmd_synth(scenario: &Path, out: &Path, seed: Option<u64>) -> Result<Dataset, PipelineError> {
    let mut sc = Scenario::load(scenario)?;
    if let Some(s) = seed {
        sc.seed = s;
    }
    let (_, ds) = sc.generate();
    ds.save(out)?;
    let mut cfg = PipelineConfig::default();
    cfg.segment.seed = sc.seed;
    let mut m = Manifest::new("synth", &cfg);
    m.add_input(scenario)?;
    m.add_output(out)?;
    m.save(out)?;
    info!("wrote {} frames to {}", ds.frames.len(), out.display());
    Ok(ds)
}

fn track(ds: &Dataset, cfg: &PipelineConfig, gamma: f64) -> Result<TrajectorySet, PipelineError> {
    let mut tc = cfg.tracker.clone();
    tc.gamma_def = gamma;
    info!("tracking {} frames with gamma_def {gamma}", ds.frames.len());
    Ok(track_sequence(&ds.template, &ds.frames, &ds.camera, &tc)?)
}

/// Tracks the dataset's template through its frames.
pub fn cmd_track(dataset: &Path, cfg: &PipelineConfig, out: &Path) -> Result<TrajectorySet, PipelineError> {
    let ds = Dataset::load(dataset)?;
    let traj = track(&ds, cfg, cfg.gamma_def())?;
    fs::create_dir_all(out)?;
    traj.save(out.join(TRAJECTORIES))?;
    let mut m = Manifest::new("track", cfg);
    m.add_input(dataset)?;
    m.add_output(out.join(TRAJECTORIES))?;
    m.save(out)?;
    Ok(traj)
}

#[derive(Debug, Clone)]
pub struct SegmentReport {
    pub segmentation: Segmentation,
    pub dt: usize,
    /// `(λ_thresh, k)` for every requested threshold.
    pub k_by_threshold: Vec<(f64, usize)>,
}

/// Segments tracked trajectories; `extra_thresholds` report the part count
/// each threshold would give on the same affinity.
pub fn cmd_segment(
    trajectories: &Path,
    mesh: &Path,
    cfg: &PipelineConfig,
    extra_thresholds: &[f64],
    out: &Path,
) -> Result<SegmentReport, PipelineError> {
    let traj = TrajectorySet::load(trajectories)?;
    let template = load_mesh(mesh)?;
    if traj.n_vertices() != template.n_vertices() {
        return Err(PipelineError::Data(format!(
            "trajectories cover {} vertices, mesh has {}",
            traj.n_vertices(),
            template.n_vertices()
        )));
    }
    let dt = compute_dt(&traj, cfg.segment.dt_mode);
    let samples = sample_vertices(template.n_vertices(), cfg.segment.samples, cfg.seed());
    let a = affinity(&traj, &samples, cfg.segment.lambda, dt, cfg.segment.exec);
    let embedding = spectral_embedding(&a.matrix)?;
    let segmentation = segment_embedded(&template, &embedding, &samples, cfg.segment.lambda_thresh, cfg.seed())?;
    let k_by_threshold = extra_thresholds
        .iter()
        .map(|&t| (t, embedding.eigenvalues.iter().filter(|&&l| l < t).count().max(1)))
        .collect();
    fs::create_dir_all(out)?;
    segmentation.save(out.join(SEGMENTATION))?;
    let mut m = Manifest::new("segment", cfg);
    m.add_input(trajectories)?;
    m.add_input(mesh)?;
    m.add_output(out.join(SEGMENTATION))?;
    m.save(out)?;
    info!("k = {} (dt = {dt})", segmentation.k);
    Ok(SegmentReport { segmentation, dt, k_by_threshold })
}

#[derive(Debug, Clone)]
pub struct RigSummary {
    pub joints: usize,
    pub motion_joints: usize,
    pub virtual_joints: usize,
    pub refinement_rounds: usize,
}

impl RigSummary {
    fn of(report: &RigReport) -> Self {
        let count = |k| report.rig.joints.iter().filter(|j| j.kind == k).count();
        Self {
            joints: report.rig.joints.len(),
            motion_joints: count(JointKind::Motion),
            virtual_joints: count(JointKind::Virtual),
            refinement_rounds: report.refinement_rounds,
        }
    }
}

/// Writes template, skeleton and rig into `out`.
fn write_rig_artifacts(
    template: &Mesh,
    skeleton: &CurveSkeleton,
    report: &RigReport,
    out: &Path,
) -> Result<(), PipelineError> {
    fs::create_dir_all(out)?;
    save_mesh(template, out.join(TEMPLATE))?;
    skeleton.save(out.join(SKELETON))?;
    report.rig.save(out.join(RIG), TEMPLATE)?;
    Ok(())
}

/// Skeletonizes the mesh and rigs it from a segmentation.
pub fn cmd_rig(mesh: &Path, segmentation: &Path, cfg: &PipelineConfig, out: &Path) -> Result<RigSummary, PipelineError> {
    let template = load_mesh(mesh)?;
    let seg = Segmentation::load(segmentation)?;
    let skeleton = skeletonize(&template, &cfg.contraction)?;
    let report = infer_rig(&template, &seg, &skeleton, cfg.exec)?;
    write_rig_artifacts(&template, &skeleton, &report, out)?;
    let mut m = Manifest::new("rig", cfg);
    m.add_input(mesh)?;
    m.add_input(segmentation)?;
    for f in [TEMPLATE, SKELETON, RIG] {
        m.add_output(out.join(f))?;
    }
    m.save(out)?;
    Ok(RigSummary::of(&report))
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub result: FitResult,
}

impl FitReport {
    /// Accepted-step objectives followed by the final error.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (i, v) in self.result.accepted.iter().enumerate() {
            let _ = writeln!(s, "step {i} mean_squared {v}");
        }
        let _ = writeln!(s, "outer_iterations {}", self.result.outer_iterations);
        let _ = writeln!(s, "error_mm {}", self.result.error);
        s
    }
}

/// Fits a rig to a target mesh or point cloud, starting from rest.
pub fn cmd_fit(rig: &Path, target: &Path, cfg: &PipelineConfig, out: &Path) -> Result<FitReport, PipelineError> {
    let rig_data = Rig::load(rig)?;
    let points = load_points(target)?;
    if points.is_empty() {
        return Err(PipelineError::Data(format!("{} has no points", target.display())));
    }
    let result = fit_pose(&rig_data, &points, &Pose::rest(&rig_data), &cfg.fit);
    let report = FitReport { result };
    fs::create_dir_all(out)?;
    report.result.pose.save(out.join(POSE))?;
    fs::write(out.join(FIT_REPORT), report.to_text())?;
    let mut m = Manifest::new("fit", cfg);
    m.add_input(rig)?;
    m.add_input(target)?;
    m.add_output(out.join(POSE))?;
    m.add_output(out.join(FIT_REPORT))?;
    m.save(out)?;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub segmentation: Segmentation,
    pub rig: RigSummary,
    pub table: Option<SweepTable>,
}

fn trajectory_file(gamma: f64) -> String {
    format!("trajectories_g{gamma}.bin")
}

/// Tracking, segmentation, skeleton and rig for the configured parameters,
/// then the sweep table over ground-truth target poses when the dataset
/// has ground truth. With `resume`, trajectory files already in `out` are
/// reused.
pub fn cmd_pipeline(dataset: &Path, cfg: &PipelineConfig, out: &Path, resume: bool) -> Result<PipelineReport, PipelineError> {
    let ds = Dataset::load(dataset)?;
    fs::create_dir_all(out)?;

    let mut gammas = vec![cfg.gamma_def()];
    for &g in &cfg.sweep_gamma {
        if !gammas.iter().any(|x| x.to_bits() == g.to_bits()) {
            gammas.push(g);
        }
    }
    let has_truth = !ds.truth.joints.is_empty() && !cfg.sweep_gamma.is_empty() && !cfg.sweep_thresh.is_empty();
    if !has_truth {
        gammas.truncate(1);
    }
    let tracked = cfg.exec.map_slice(&gammas, |&g| {
        let path = out.join(trajectory_file(g));
        if resume && path.exists() {
            info!("reusing {}", path.display());
            return TrajectorySet::load(&path).map_err(PipelineError::from);
        }
        track(&ds, cfg, g)
    });
    let mut trajectories = Vec::with_capacity(gammas.len());
    for (g, t) in gammas.iter().zip(tracked) {
        let t = t?;
        t.save(out.join(trajectory_file(*g)))?;
        trajectories.push((*g, t));
    }

    let skeleton = skeletonize(&ds.template, &cfg.contraction)?;
    let main = &trajectories[0].1;
    let dt = compute_dt(main, cfg.segment.dt_mode);
    let samples = sample_vertices(ds.template.n_vertices(), cfg.segment.samples, cfg.seed());
    let a = affinity(main, &samples, cfg.segment.lambda, dt, cfg.segment.exec);
    let embedding = spectral_embedding(&a.matrix)?;
    let segmentation = segment_embedded(&ds.template, &embedding, &samples, cfg.segment.lambda_thresh, cfg.seed())?;
    segmentation.save(out.join(SEGMENTATION))?;
    let report = infer_rig(&ds.template, &segmentation, &skeleton, cfg.exec)?;
    write_rig_artifacts(&ds.template, &skeleton, &report, out)?;
    info!("rig: {} joints, k = {}", report.rig.joints.len(), segmentation.k);

    let table = if has_truth {
        let sweep: Vec<(f64, TrajectorySet)> = cfg
            .sweep_gamma
            .iter()
            .map(|g| trajectories.iter().find(|(x, _)| x.to_bits() == g.to_bits()).expect("tracked").clone())
            .collect();
        let table = run_sweep(&ds.template, &skeleton, &sweep, &ds.truth, cfg)?;
        fs::write(out.join(TABLE_TEXT), table.to_text())?;
        fs::write(out.join(TABLE_CSV), table.to_csv()?)?;
        Some(table)
    } else {
        None
    };

    let mut m = Manifest::new("pipeline", cfg);
    m.add_input(dataset)?;
    let mut outputs: Vec<String> = gammas.iter().map(|&g| trajectory_file(g)).collect();
    outputs.extend([SEGMENTATION, TEMPLATE, SKELETON, RIG].map(String::from));
    if table.is_some() {
        outputs.extend([TABLE_TEXT, TABLE_CSV].map(String::from));
    }
    for f in outputs {
        m.add_output(out.join(f))?;
    }
    m.save(out)?;
    Ok(PipelineReport { segmentation, rig: RigSummary::of(&report), table })
}
