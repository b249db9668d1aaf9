use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use artirig::pipeline::{
    cmd_fit, cmd_pipeline, cmd_rig, cmd_segment, cmd_synth, cmd_track, PipelineConfig, PipelineError,
};

/// Rigged articulated models from a template mesh and a depth sequence.
#[derive(Debug, Parser)]
#[command(name = "artirig", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    params: Params,
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Args)]
struct Params {
    /// key = value config file; a run manifest works too.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    gamma_def: Option<f64>,
    #[arg(long, global = true)]
    lambda_thresh: Option<f64>,
    #[arg(long, global = true)]
    lambda_affinity: Option<f64>,
    #[arg(long, global = true)]
    samples: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// normalized, raw or fixed:<n>
    #[arg(long, global = true)]
    dt_mode: Option<String>,
    /// Run every stage on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    /// Any config key, as key=value (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a scenario file into a dataset directory.
    Synth {
        scenario: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Track the template through a dataset's frames.
    Track {
        dataset: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Segment tracked trajectories into rigid parts.
    Segment {
        trajectories: PathBuf,
        #[arg(long)]
        mesh: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Also report k for these comma-separated thresholds.
        #[arg(long, value_delimiter = ',')]
        sweep_thresh: Vec<f64>,
    },
    /// Build a rig from a mesh and its segmentation.
    Rig {
        mesh: PathBuf,
        segmentation: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Fit a rig to a target mesh or point cloud.
    Fit {
        rig: PathBuf,
        target: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Run every stage and the parameter sweep table.
    Pipeline {
        dataset: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Reuse trajectory files already present in the output directory.
        #[arg(long)]
        resume: bool,
        /// Skip the sweep table.
        #[arg(long)]
        no_sweep: bool,
    },
}

fn usage(msg: impl Into<String>) -> PipelineError {
    PipelineError::Usage(msg.into())
}

fn resolve_config(p: &Params) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = match &p.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    let mut set = |key: &str, value: String| cfg.set(key, &value).map_err(usage);
    if let Some(v) = p.gamma_def {
        set("gamma_def", v.to_string())?;
    }
    if let Some(v) = p.lambda_thresh {
        set("lambda_thresh", v.to_string())?;
    }
    if let Some(v) = p.lambda_affinity {
        set("lambda_affinity", v.to_string())?;
    }
    if let Some(v) = p.samples {
        set("samples", v.to_string())?;
    }
    if let Some(v) = p.seed {
        set("seed", v.to_string())?;
    }
    if let Some(v) = &p.dt_mode {
        set("dt_mode", v.clone())?;
    }
    if p.sequential {
        set("parallel", "false".into())?;
    }
    for kv in &p.overrides {
        let (k, v) = kv.split_once('=').ok_or_else(|| usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        set(k.trim(), v.trim().to_string())?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let mut cfg = resolve_config(&cli.params)?;
    match cli.command {
        Command::Synth { scenario, out } => {
            let ds = cmd_synth(&scenario, &out, cli.params.seed)?;
            println!("{} frames, {} template vertices -> {}", ds.frames.len(), ds.template.n_vertices(), out.display());
        }
        Command::Track { dataset, out } => {
            let traj = cmd_track(&dataset, &cfg, &out)?;
            println!("tracked {} frames of {} vertices -> {}", traj.n_frames(), traj.n_vertices(), out.display());
        }
        Command::Segment { trajectories, mesh, out, sweep_thresh } => {
            let r = cmd_segment(&trajectories, &mesh, &cfg, &sweep_thresh, &out)?;
            println!("k = {} (dt = {})", r.segmentation.k, r.dt);
            for (t, k) in r.k_by_threshold {
                println!("lambda_thresh {t}: k = {k}");
            }
        }
        Command::Rig { mesh, segmentation, out } => {
            let s = cmd_rig(&mesh, &segmentation, &cfg, &out)?;
            println!(
                "{} joints ({} motion, {} virtual), refinement rounds {}",
                s.joints, s.motion_joints, s.virtual_joints, s.refinement_rounds
            );
        }
        Command::Fit { rig, target, out } => {
            let r = cmd_fit(&rig, &target, &cfg, &out)?;
            print!("{}", r.to_text());
        }
        Command::Pipeline { dataset, out, resume, no_sweep } => {
            if no_sweep {
                cfg.sweep_gamma.clear();
            }
            let r = cmd_pipeline(&dataset, &cfg, &out, resume)?;
            println!(
                "k = {}, {} joints ({} motion), rig -> {}",
                r.segmentation.k,
                r.rig.joints,
                r.rig.motion_joints,
                out.join("rig.txt").display()
            );
            if let Some(t) = r.table {
                print!("{}", t.to_text());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
