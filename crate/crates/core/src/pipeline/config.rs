use std::fmt::Write as _;
use std::path::Path;

use super::PipelineError;
use crate::pose::FitConfig;
use crate::segment::SegmentConfig;
use crate::skeleton::ContractionConfig;
use crate::tracking::TrackerConfig;
use crate::Exec;

/// Every key accepted in a config file, in serialization order.
pub const CONFIG_KEYS: &[&str] = &[
    "gamma_def",
    "lambda_affinity",
    "lambda_thresh",
    "samples",
    "seed",
    "dt_mode",
    "max_normal_angle",
    "max_corr_dist",
    "tracker_iterations",
    "depth_test",
    "depth_tolerance",
    "rim_max_cos",
    "omega_l",
    "omega_l_growth",
    "omega_h",
    "contraction_iterations",
    "fit_iterations",
    "fit_inner_iterations",
    "sweep_gamma",
    "sweep_thresh",
    "targets",
    "parallel",
];

/// All stage parameters of one run. The seed drives vertex sampling and
/// k-means; nothing else is random.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub tracker: TrackerConfig,
    pub segment: SegmentConfig,
    pub contraction: ContractionConfig,
    pub fit: FitConfig,
    /// γ_def values of the sweep table; empty disables the sweep.
    pub sweep_gamma: Vec<f64>,
    pub sweep_thresh: Vec<f64>,
    /// Ground-truth target poses per sweep cell.
    pub targets: usize,
    pub exec: Exec,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            tracker: TrackerConfig::default(),
            segment: SegmentConfig::default(),
            contraction: ContractionConfig::default(),
            fit: FitConfig::default(),
            sweep_gamma: super::TABLE_GAMMAS.to_vec(),
            sweep_thresh: super::TABLE_THRESHOLDS.to_vec(),
            targets: 4,
            exec: Exec::default(),
        }
    }
}

fn list(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

fn positive(key: &str, v: f64) -> Result<f64, String> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("{key} must be positive and finite, got {v}"))
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64, String> {
    value.parse::<f64>().map_err(|_| format!("{key}: expected a number, got {value:?}"))
}

fn parse_usize(key: &str, value: &str) -> Result<usize, String> {
    value.parse::<usize>().map_err(|_| format!("{key}: expected a non-negative integer, got {value:?}"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, String> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(format!("{key}: expected true or false, got {value:?}")),
    }
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, String> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse_f64(key, v.trim()).and_then(|x| positive(key, x))).collect()
}

impl PipelineConfig {
    pub fn gamma_def(&self) -> f64 {
        self.tracker.gamma_def
    }

    pub fn seed(&self) -> u64 {
        self.segment.seed
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.set_exec(exec);
        self
    }

    pub fn set_exec(&mut self, exec: Exec) {
        self.exec = exec;
        self.tracker.exec = exec;
        self.segment.exec = exec;
    }

    /// Sets one parameter from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let value = value.trim();
        match key {
            "gamma_def" => self.tracker.gamma_def = positive(key, parse_f64(key, value)?)?,
            "lambda_affinity" => self.segment.lambda = positive(key, parse_f64(key, value)?)?,
            "lambda_thresh" => self.segment.lambda_thresh = positive(key, parse_f64(key, value)?)?,
            "samples" => {
                let n = parse_usize(key, value)?;
                if n < 2 {
                    return Err("samples must be at least 2".into());
                }
                self.segment.samples = n;
            }
            "seed" => self.segment.seed = value.parse().map_err(|_| format!("seed: bad integer {value:?}"))?,
            "dt_mode" => self.segment.dt_mode = value.parse().map_err(|e| format!("dt_mode: {e}"))?,
            "max_normal_angle" => self.tracker.max_normal_angle = positive(key, parse_f64(key, value)?)?,
            "max_corr_dist" => self.tracker.max_corr_dist = positive(key, parse_f64(key, value)?)?,
            "tracker_iterations" => self.tracker.outer_iterations = parse_usize(key, value)?.max(1),
            "depth_test" => self.tracker.depth_test = parse_bool(key, value)?,
            "depth_tolerance" => self.tracker.depth_tolerance = positive(key, parse_f64(key, value)?)?,
            "rim_max_cos" => self.tracker.rim_max_cos = parse_f64(key, value)?.clamp(0.0, 1.0),
            "omega_l" => self.contraction.omega_l = positive(key, parse_f64(key, value)?)?,
            "omega_l_growth" => self.contraction.omega_l_growth = positive(key, parse_f64(key, value)?)?,
            "omega_h" => self.contraction.omega_h = positive(key, parse_f64(key, value)?)?,
            "contraction_iterations" => self.contraction.max_iterations = parse_usize(key, value)?.max(1),
            "fit_iterations" => self.fit.max_outer_iterations = parse_usize(key, value)?.max(1),
            "fit_inner_iterations" => self.fit.inner_iterations = parse_usize(key, value)?.max(1),
            "sweep_gamma" => self.sweep_gamma = parse_list(key, value)?,
            "sweep_thresh" => self.sweep_thresh = parse_list(key, value)?,
            "targets" => self.targets = parse_usize(key, value)?.max(1),
            "parallel" => {
                let exec = if parse_bool(key, value)? { Exec::Parallel } else { Exec::Sequential };
                self.set_exec(exec);
            }
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "gamma_def" => self.tracker.gamma_def.to_string(),
            "lambda_affinity" => self.segment.lambda.to_string(),
            "lambda_thresh" => self.segment.lambda_thresh.to_string(),
            "samples" => self.segment.samples.to_string(),
            "seed" => self.segment.seed.to_string(),
            "dt_mode" => self.segment.dt_mode.to_string(),
            "max_normal_angle" => self.tracker.max_normal_angle.to_string(),
            "max_corr_dist" => self.tracker.max_corr_dist.to_string(),
            "tracker_iterations" => self.tracker.outer_iterations.to_string(),
            "depth_test" => self.tracker.depth_test.to_string(),
            "depth_tolerance" => self.tracker.depth_tolerance.to_string(),
            "rim_max_cos" => self.tracker.rim_max_cos.to_string(),
            "omega_l" => self.contraction.omega_l.to_string(),
            "omega_l_growth" => self.contraction.omega_l_growth.to_string(),
            "omega_h" => self.contraction.omega_h.to_string(),
            "contraction_iterations" => self.contraction.max_iterations.to_string(),
            "fit_iterations" => self.fit.max_outer_iterations.to_string(),
            "fit_inner_iterations" => self.fit.inner_iterations.to_string(),
            "sweep_gamma" => list(&self.sweep_gamma),
            "sweep_thresh" => list(&self.sweep_thresh),
            "targets" => self.targets.to_string(),
            "parallel" => (self.exec == Exec::Parallel).to_string(),
            _ => return None,
        })
    }

    /// Applies `key = value` lines on top of `self`. Blank lines and `#`
    /// comments are skipped, as are the `command`, `input …` and `output …`
    /// entries of a run manifest, so a manifest doubles as a config file.
    pub fn apply_text(&mut self, text: &str) -> Result<(), PipelineError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| PipelineError::Config { line: i + 1, message: format!("expected key = value, got {line:?}") })?;
            let key = key.trim();
            if key == "command" || key.starts_with("input ") || key.starts_with("output ") {
                continue;
            }
            self.set(key, value).map_err(|message| PipelineError::Config { line: i + 1, message })?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let mut cfg = Self::default();
        cfg.apply_text(&std::fs::read_to_string(path)?)?;
        Ok(cfg)
    }

    /// Canonical `key = value` form of every parameter.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for key in CONFIG_KEYS {
            let _ = writeln!(s, "{key} = {}", self.get(key).expect("known key"));
        }
        s
    }
}
