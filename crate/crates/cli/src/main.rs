use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use facemap::geometry::{Pose, Vec3};
use facemap::kinematics::{forward_kinematics, inverse_kinematics, IkOptions, JointVector};
use facemap::scenario::{
    load_scenario_file, run_scenario_with, write_frame, write_outputs, ConfigError, RunSummary,
    ScenarioConfig, ScenarioError,
};

#[derive(Parser)]
#[command(
    name = "facemap",
    version,
    about = "Robot-carried face projection mapping simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Frame {
    Flange,
    Projector,
    Camera,
}

#[derive(Subcommand)]
enum Command {
    /// Run an episode and write metrics.csv, run.json and optional frames.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        no_predictor: bool,
        #[arg(long)]
        dump_frames: bool,
    },
    /// Parse and validate a scenario file.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Forward kinematics for six joint angles (rad).
    Fk {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "projector")]
        frame: Frame,
        #[arg(num_args = 6, allow_negative_numbers = true, required = true)]
        q: Vec<f64>,
    },
    /// Inverse kinematics for a target `x y z rx ry rz` (meters, rotation
    /// vector in rad), seeded at the home posture unless `--seed-q` is given.
    Ik {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "projector")]
        frame: Frame,
        #[arg(long, num_args = 6, allow_negative_numbers = true)]
        seed_q: Option<Vec<f64>>,
        #[arg(num_args = 6, allow_negative_numbers = true, required = true)]
        target: Vec<f64>,
    },
}

fn load(path: Option<&Path>) -> Result<ScenarioConfig> {
    match path {
        Some(p) => load_scenario_file(p).with_context(|| format!("config {}", p.display())),
        None => Ok(ScenarioConfig::default()),
    }
}

fn tool(cfg: &ScenarioConfig, frame: Frame) -> Pose {
    let t = cfg.tool.offsets();
    match frame {
        Frame::Flange => Pose::identity(),
        Frame::Projector => t.projector_mount,
        Frame::Camera => t.camera_mount,
    }
}

fn joints(v: &[f64]) -> JointVector {
    JointVector([v[0], v[1], v[2], v[3], v[4], v[5]])
}

fn print_pose(p: &Pose) {
    let t = p.translation;
    let r = p.rotation_vector();
    println!("position: {:.9} {:.9} {:.9}", t.x, t.y, t.z);
    println!("rotation_vector: {:.9} {:.9} {:.9}", r.x, r.y, r.z);
}

fn run(
    config: &Path,
    out: &Path,
    seed: Option<u64>,
    duration: Option<f64>,
    no_predictor: bool,
    dump_frames: bool,
) -> Result<()> {
    let mut cfg = load(Some(config))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(d) = duration {
        cfg.duration = d;
    }
    cfg.predictor_on &= !no_predictor;
    cfg.output.dump_frames |= dump_frames;
    cfg.validate().context("overridden config")?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let log = run_scenario_with(&cfg, |tick, frame| write_frame(out, tick, frame))?;
    write_outputs(&log, &[], &cfg, out)?;
    let s = RunSummary::new(&log, &cfg);
    let show = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.3}"));
    println!(
        "{} ticks, on-face mean {} mm, p95 {} mm, alignment mean {} deg, valid {:.1}%",
        s.rows,
        show(s.onface_mean_mm),
        show(s.onface_p95_mm),
        show(s.alignment_mean_deg),
        100.0 * s.detection_valid_fraction
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            out,
            seed,
            duration,
            no_predictor,
            dump_frames,
        } => run(&config, &out, seed, duration, no_predictor, dump_frames),
        Command::Validate { config } => load(Some(&config)).map(|_| println!("ok")),
        Command::Fk { config, frame, q } => load(config.as_deref()).map(|cfg| {
            print_pose(&forward_kinematics(
                &cfg.dh,
                &joints(&q),
                &tool(&cfg, frame),
            ));
        }),
        Command::Ik {
            config,
            frame,
            seed_q,
            target,
        } => load(config.as_deref()).and_then(|cfg| {
            let goal = Pose::from_rotation_vector(
                Vec3::new(target[3], target[4], target[5]),
                Vec3::new(target[0], target[1], target[2]),
            );
            let seed = seed_q.as_deref().map_or(cfg.home, joints);
            let sol = inverse_kinematics(
                &cfg.dh,
                &goal,
                &seed,
                &tool(&cfg, frame),
                &IkOptions::default(),
            )?;
            let q: Vec<String> = sol.q.0.iter().map(|v| format!("{v:.9}")).collect();
            println!("q: {}", q.join(" "));
            println!("iterations: {}", sol.iterations);
            println!(
                "residual: {:.3e} m {:.3e} rad",
                sol.position_residual, sol.orientation_residual
            );
            Ok(())
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let config_error = e.downcast_ref::<ConfigError>().is_some()
                || matches!(
                    e.downcast_ref::<ScenarioError>(),
                    Some(ScenarioError::Config(_))
                );
            if config_error {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
