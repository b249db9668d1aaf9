use std::fmt::Write as _;

use super::{PipelineConfig, PipelineError};
use crate::pose::{fit_pose, Pose};
use crate::rigging::infer_rig;
use crate::segment::{affinity, compute_dt, sample_vertices, segment_embedded, spectral_embedding};
use crate::skeleton::CurveSkeleton;
use crate::synth::{GroundTruth, Truth};
use crate::tracking::TrajectorySet;
use crate::{Mesh, Vec3};

/// Tracking weights of the sweep table.
pub const TABLE_GAMMAS: [f64; 5] = [0.001, 0.005, 0.01, 0.05, 0.1];
/// Eigenvalue thresholds of the sweep table.
pub const TABLE_THRESHOLDS: [f64; 8] = [0.40, 0.50, 0.60, 0.70, 0.80, 0.90, 0.95, 0.98];

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub k: usize,
    pub motion_joints: usize,
    /// Alignment error per target pose, mm.
    pub errors: Vec<f64>,
}

impl CellResult {
    pub fn mean(&self) -> f64 {
        self.errors.iter().sum::<f64>() / self.errors.len().max(1) as f64
    }

    pub fn max(&self) -> f64 {
        self.errors.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub gamma: f64,
    pub thresh: f64,
    pub outcome: Result<CellResult, String>,
}

/// Rigging quality over the `(γ_def, λ_thresh)` grid, rows by γ_def.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub gammas: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub target_frames: Vec<usize>,
    pub cells: Vec<SweepCell>,
}

/// `count` frames spread evenly over `1..n_frames`, the last one included.
pub fn target_frames(n_frames: usize, count: usize) -> Vec<usize> {
    if n_frames < 2 {
        return Vec::new();
    }
    let mut out: Vec<usize> =
        (1..=count).map(|i| ((i * (n_frames - 1)) as f64 / count as f64).round() as usize).filter(|&t| t > 0).collect();
    out.dedup();
    out
}

/// Runs segmentation, rigging and re-fitting for every grid cell.
/// `trajectories` holds one tracked sequence per γ_def row.
pub fn run_sweep(
    template: &Mesh,
    skeleton: &CurveSkeleton,
    trajectories: &[(f64, TrajectorySet)],
    truth: &Truth,
    cfg: &PipelineConfig,
) -> Result<SweepTable, PipelineError> {
    let gt = GroundTruth::from_truth(template.clone(), truth)?;
    let frames = target_frames(truth.angles.len(), cfg.targets);
    let targets: Vec<Vec<Vec3>> =
        frames.iter().map(|&t| gt.pose_positions(&truth.angles[t], &truth.translations[t])).collect();
    let samples = sample_vertices(template.n_vertices(), cfg.segment.samples, cfg.seed());

    let rows: Vec<Vec<SweepCell>> = cfg.exec.map_slice(trajectories, |(gamma, traj)| {
        let fail = |msg: String| {
            cfg.sweep_thresh
                .iter()
                .map(|&thresh| SweepCell { gamma: *gamma, thresh, outcome: Err(msg.clone()) })
                .collect::<Vec<_>>()
        };
        let dt = compute_dt(traj, cfg.segment.dt_mode);
        let a = affinity(traj, &samples, cfg.segment.lambda, dt, cfg.segment.exec);
        let embedding = match spectral_embedding(&a.matrix) {
            Ok(e) => e,
            Err(e) => return fail(e.to_string()),
        };
        cfg.sweep_thresh
            .iter()
            .map(|&thresh| {
                let outcome = (|| -> Result<CellResult, PipelineError> {
                    let start = std::time::Instant::now();
                    let seg = segment_embedded(template, &embedding, &samples, thresh, cfg.seed())?;
                    let rig = infer_rig(template, &seg, skeleton, cfg.segment.exec)?.rig;
                    let rigged = start.elapsed();
                    let errors = targets
                        .iter()
                        .map(|target| fit_pose(&rig, target, &Pose::rest(&rig), &cfg.fit).error)
                        .collect();
                    log::debug!(
                        "sweep cell gamma_def {gamma}, lambda_thresh {thresh}: k = {}, rig {:.1?}, fits {:.1?}",
                        seg.k,
                        rigged,
                        start.elapsed() - rigged
                    );
                    Ok(CellResult { k: seg.k, motion_joints: rig.motion_joints().len(), errors })
                })();
                SweepCell { gamma: *gamma, thresh, outcome: outcome.map_err(|e| e.to_string()) }
            })
            .collect()
    });
    Ok(SweepTable {
        gammas: trajectories.iter().map(|(g, _)| *g).collect(),
        thresholds: cfg.sweep_thresh.clone(),
        target_frames: frames,
        cells: rows.into_iter().flatten().collect(),
    })
}

impl SweepTable {
    pub fn cell(&self, gamma_row: usize, thresh_col: usize) -> &SweepCell {
        &self.cells[gamma_row * self.thresholds.len() + thresh_col]
    }

    /// Aligned text grid of mean alignment errors.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "mean alignment error (mm) over {} target poses (frames {:?})\n",
            self.target_frames.len(),
            self.target_frames
        );
        let _ = write!(s, "{:<24}", "gamma_def \\ lambda_thresh");
        for t in &self.thresholds {
            let _ = write!(s, "{t:>8.2}");
        }
        s.push('\n');
        for (r, g) in self.gammas.iter().enumerate() {
            let _ = write!(s, "{g:<24}");
            for c in 0..self.thresholds.len() {
                match &self.cell(r, c).outcome {
                    Ok(res) => {
                        let _ = write!(s, "{:>8.2}", res.mean());
                    }
                    Err(_) => {
                        let _ = write!(s, "{:>8}", "fail");
                    }
                }
            }
            s.push('\n');
        }
        s
    }

    /// One row per cell.
    pub fn to_csv(&self) -> Result<String, PipelineError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| PipelineError::Data(format!("csv: {e}"));
        w.write_record(["gamma_def", "lambda_thresh", "k", "motion_joints", "mean_error_mm", "max_error_mm", "status"])
            .map_err(csv_err)?;
        for c in &self.cells {
            let row = match &c.outcome {
                Ok(r) => [
                    c.gamma.to_string(),
                    c.thresh.to_string(),
                    r.k.to_string(),
                    r.motion_joints.to_string(),
                    format!("{:.6}", r.mean()),
                    format!("{:.6}", r.max()),
                    "ok".into(),
                ],
                Err(e) => [c.gamma.to_string(), c.thresh.to_string(), String::new(), String::new(), String::new(), String::new(), e.clone()],
            };
            w.write_record(&row).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| PipelineError::Data(format!("csv: {e}")))?;
        String::from_utf8(bytes).map_err(|e| PipelineError::Data(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_frames_spread() {
        assert_eq!(target_frames(61, 4), vec![15, 30, 45, 60]);
        assert_eq!(target_frames(3, 4), vec![1, 2]);
        assert!(target_frames(1, 4).is_empty());
    }
}
