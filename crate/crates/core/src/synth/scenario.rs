//! Declarative scenario files and on-disk datasets.
//!
//! A scenario is `key = value` text, one entry per line, `#` comments:
//!
//! ```text
//! primitive = pipe          # pipe | star | lamp
//! length = 300
//! radius = 20
//! joints = 0.5              # pipe joint fractions
//! frames = 60
//! curve.0 = 0:0 59:60       # joint 0 keyframes, frame:degrees
//! translate.z = 0:0 59:30   # global translation keyframes, frame:mm
//! noise = 0.5
//! seed = 0
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{add_noise, animate, default_camera, make_primitive, render_depth, Animation, Curve, GroundTruth};
use super::{PrimitiveKind, PrimitiveSpec, TrueJoint, DISCONTINUITY_THRESHOLD};
use crate::camera::CameraError;
use crate::mesh::{load_mesh, save_mesh, MeshError};
use crate::tracking::{load_pixels, write_pixels, Frame, PointCloud, TrackingError};
use crate::{Camera, Exec, Mesh, Vec3};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Camera(#[from] CameraError),
    #[error(transparent)]
    Tracking(#[from] TrackingError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub spec: PrimitiveSpec,
    pub animation: Animation,
    pub n_frames: usize,
    /// Standard deviation of the depth noise along normals, mm.
    pub noise: f64,
    pub seed: u64,
    pub camera_distance: f64,
    pub jump_threshold: f64,
}

impl Scenario {
    pub fn new(spec: PrimitiveSpec, animation: Animation, n_frames: usize) -> Self {
        Self {
            spec,
            animation,
            n_frames,
            noise: 0.0,
            seed: 0,
            camera_distance: 600.0,
            jump_threshold: DISCONTINUITY_THRESHOLD,
        }
    }

    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut kind = None;
        let (mut length, mut radius, mut arm_length, mut arms) = (300.0, 20.0, 100.0, 3usize);
        let mut joints = Vec::new();
        let mut segments = [120.0, 120.0, 100.0];
        let mut around = 16usize;
        let mut spacing = 7.5;
        let mut n_frames = None;
        let mut anim = Animation::default();
        let mut sc = Scenario::new(PrimitiveSpec::pipe(1.0, 1.0, &[]), Animation::default(), 0);

        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: String| ScenarioError::Line { line, message };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| err(format!("expected key = value, got {content:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let num = |v: &str| v.parse::<f64>().map_err(|_| err(format!("bad number {v:?} for {key}")));
            let int = |v: &str| v.parse::<usize>().map_err(|_| err(format!("bad integer {v:?} for {key}")));
            let list = |v: &str| -> Result<Vec<f64>, ScenarioError> {
                v.split([',', ' ']).filter(|s| !s.is_empty()).map(num).collect()
            };
            let curve = |v: &str| -> Result<Curve, ScenarioError> {
                let mut keys = Vec::new();
                for tok in v.split_whitespace() {
                    let (f, x) = tok.split_once(':').ok_or_else(|| err(format!("keyframe {tok:?} is not frame:value")))?;
                    keys.push((num(f)?, num(x)?));
                }
                if keys.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(err("keyframes must have increasing frames".into()));
                }
                Ok(Curve { keys })
            };
            match key {
                "primitive" => kind = Some(value.to_string()),
                "length" => length = num(value)?,
                "radius" => radius = num(value)?,
                "arm_length" => arm_length = num(value)?,
                "arms" => arms = int(value)?,
                "joints" => joints = list(value)?,
                "segments" => {
                    let v = list(value)?;
                    segments = v.try_into().map_err(|_| err("segments needs 3 lengths".into()))?;
                }
                "around" => around = int(value)?,
                "spacing" => spacing = num(value)?,
                "frames" => n_frames = Some(int(value)?),
                "noise" => sc.noise = num(value)?,
                "seed" => sc.seed = value.parse().map_err(|_| err(format!("bad seed {value:?}")))?,
                "camera_distance" => sc.camera_distance = num(value)?,
                "jump_threshold" => sc.jump_threshold = num(value)?,
                k if k.starts_with("curve.") => {
                    let j = int(&k["curve.".len()..])?;
                    if anim.joints.len() <= j {
                        anim.joints.resize(j + 1, Curve::default());
                    }
                    anim.joints[j] = curve(value)?;
                }
                k if k.starts_with("translate.") => {
                    let axis = match &k["translate.".len()..] {
                        "x" => 0,
                        "y" => 1,
                        "z" => 2,
                        other => return Err(err(format!("unknown translation axis {other:?}"))),
                    };
                    anim.translation[axis] = curve(value)?;
                }
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }
        let kind = match kind.as_deref() {
            Some("pipe") => {
                if joints.iter().any(|&f| !(f > 0.0 && f < 1.0)) || joints.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(ScenarioError::Invalid("joint fractions must be sorted and inside (0, 1)".into()));
                }
                PrimitiveKind::Pipe { length, radius, joint_fractions: joints }
            }
            Some("star") => PrimitiveKind::Star { arms, arm_length, radius },
            Some("lamp") => PrimitiveKind::Lamp { segment_lengths: segments, radius },
            Some(other) => return Err(ScenarioError::Invalid(format!("unknown primitive {other:?}"))),
            None => return Err(ScenarioError::Invalid("missing primitive".into())),
        };
        let n_frames = n_frames.ok_or_else(|| ScenarioError::Invalid("missing frames".into()))?;
        if n_frames == 0 {
            return Err(ScenarioError::Invalid("frames must be at least 1".into()));
        }
        if !(sc.noise >= 0.0) {
            return Err(ScenarioError::Invalid("noise must be nonnegative".into()));
        }
        sc.spec = PrimitiveSpec { kind, around, spacing };
        sc.animation = anim;
        sc.n_frames = n_frames;
        Ok(sc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Ground truth plus the rendered, noisy observation sequence.
    pub fn generate(&self) -> (GroundTruth, Dataset) {
        let gt = make_primitive(&self.spec);
        let camera = default_camera(&gt.mesh, self.camera_distance);
        let meshes = animate(&gt, &self.animation, self.n_frames);
        let frames = Exec::default().map_range(meshes.len(), |t| {
            let r = render_depth(&meshes[t], &camera, self.jump_threshold);
            let noise_seed = self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(t as u64);
            Frame { cloud: add_noise(&r.cloud, self.noise, noise_seed), discontinuities: r.discontinuities }
        });
        let truth = Truth {
            labels: gt.labels.clone(),
            n_parts: gt.n_parts,
            joints: gt.joints.clone(),
            angles: (0..self.n_frames).map(|t| self.animation.angles(t)).collect(),
            translations: (0..self.n_frames).map(|t| self.animation.offset(t)).collect(),
            radius: gt.radius,
        };
        let template = gt.mesh.clone();
        (gt, Dataset { template, camera, frames, truth })
    }
}

/// Ground-truth record stored next to a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub labels: Vec<usize>,
    pub n_parts: usize,
    pub joints: Vec<TrueJoint>,
    /// Joint angles in degrees, per frame.
    pub angles: Vec<Vec<f64>>,
    pub translations: Vec<Vec3>,
    /// Part thickness, bounds the blend band around joints.
    #[serde(default)]
    pub radius: f64,
}

/// Template, camera and observation frames, optionally with ground truth.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub template: Mesh,
    pub camera: Camera,
    pub frames: Vec<Frame>,
    pub truth: Truth,
}

impl Dataset {
    /// Writes `template.obj`, `camera.json`, `truth.json` and
    /// `frames/frame_NNN.{ply,disc}`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(), ScenarioError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir.join("frames"))?;
        save_mesh(&self.template, dir.join("template.obj"))?;
        self.camera.save(dir.join("camera.json"))?;
        fs::write(dir.join("truth.json"), serde_json::to_string_pretty(&self.truth)?)?;
        for (t, f) in self.frames.iter().enumerate() {
            f.cloud.save(dir.join("frames").join(format!("frame_{t:03}.ply")))?;
            fs::write(dir.join("frames").join(format!("frame_{t:03}.disc")), write_pixels(&f.discontinuities))?;
        }
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let dir = dir.as_ref();
        let template = load_mesh(dir.join("template.obj"))?;
        let camera = Camera::load(dir.join("camera.json"))?;
        let truth_path = dir.join("truth.json");
        let truth = if truth_path.exists() {
            serde_json::from_str(&fs::read_to_string(truth_path)?)?
        } else {
            Truth {
                labels: Vec::new(),
                n_parts: 0,
                joints: Vec::new(),
                angles: Vec::new(),
                translations: Vec::new(),
                radius: 0.0,
            }
        };
        let mut names: Vec<String> = fs::read_dir(dir.join("frames"))?
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().into_string().ok())
            .filter(|n| n.ends_with(".ply"))
            .collect();
        names.sort();
        if names.is_empty() {
            return Err(ScenarioError::Dataset(format!("{} has no frames", dir.display())));
        }
        let mut frames = Vec::with_capacity(names.len());
        for name in names {
            let cloud = PointCloud::load(dir.join("frames").join(&name))?;
            let disc_path = dir.join("frames").join(name.replace(".ply", ".disc"));
            let discontinuities = if disc_path.exists() { load_pixels(disc_path)? } else { Vec::new() };
            frames.push(Frame { cloud, discontinuities });
        }
        Ok(Self { template, camera, frames, truth })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pipe_scenario() {
        let sc = Scenario::parse(
            "primitive = pipe\nlength = 300\nradius = 20\njoints = 0.75\nframes = 10\ncurve.0 = 0:0 9:45\nnoise = 0.5\n",
        )
        .unwrap();
        assert_eq!(sc.n_frames, 10);
        assert_eq!(sc.animation.angles(9), vec![45.0]);
        assert!(matches!(sc.spec.kind, PrimitiveKind::Pipe { ref joint_fractions, .. } if joint_fractions == &[0.75]));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = Scenario::parse("primitive = pipe\nframes = ten\n").unwrap_err();
        assert!(matches!(err, ScenarioError::Line { line: 2, .. }));
        assert!(matches!(Scenario::parse("primitive = pipe\nframes = 0\n"), Err(ScenarioError::Invalid(_))));
    }
}
