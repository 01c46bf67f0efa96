use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use wirestereo::pipeline::{
    cmd_evaluate_curves, cmd_evaluate_episodes, cmd_reconstruct, cmd_relax, cmd_synth, ReconstructConfig,
    RelaxConfig, StereoRig, SynthConfig, DEFAULT_SEGMENTS, DEFAULT_TIP_ANGLE_RAD,
};
use wirestereo::rod::{DEFAULT_SEGMENT_LENGTH_MM, DEFAULT_STIFFNESS};
use wirestereo::stereo::DEFAULT_SAMPLES;

/// Two-view guidewire reconstruction with synthetic test data.
///
/// Lengths are in mm, angles in radians, image coordinates in px.
#[derive(Parser)]
#[command(name = "wirestereo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a rod-model wire, the default stereo rig and noisy annotations.
    Synth(SynthArgs),
    /// Reconstruct a 3D curve from two calibrated annotated views.
    Reconstruct(ReconstructArgs),
    /// Print curve or episode metrics as CSV on standard output.
    Evaluate(EvaluateArgs),
    /// Relax a seeded rod, optionally with a pinned tip.
    Relax(RelaxArgs),
}

#[derive(Args)]
struct WireArgs {
    /// Random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of rigid segments.
    #[arg(long, default_value_t = DEFAULT_SEGMENTS)]
    segments: usize,
    /// Segment length, mm.
    #[arg(long, default_value_t = DEFAULT_SEGMENT_LENGTH_MM)]
    segment_length: f64,
    /// Bending stiffness.
    #[arg(long, default_value_t = DEFAULT_STIFFNESS)]
    stiffness: f64,
    /// Total rest-curvature budget, rad.
    #[arg(long, default_value_t = DEFAULT_TIP_ANGLE_RAD)]
    tip_angle: f64,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Gaussian annotation noise standard deviation, px.
    #[arg(long, default_value_t = 0.0)]
    noise_px: f64,
    #[command(flatten)]
    wire: WireArgs,
}

#[derive(Args)]
struct ReconstructArgs {
    #[arg(long)]
    camera_a: PathBuf,
    #[arg(long)]
    camera_b: PathBuf,
    /// One or more annotation files; frames are grouped by their index.
    #[arg(long, num_args = 1.., required = true)]
    annotations: Vec<PathBuf>,
    /// Report file.
    #[arg(long)]
    out: PathBuf,
    /// Number of matched samples along view A.
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Predicted curve or reconstruction report.
    #[arg(long, requires = "truth", conflicts_with = "episodes")]
    pred: Option<PathBuf>,
    /// Ground-truth curve or reconstruction report.
    #[arg(long, requires = "pred")]
    truth: Option<PathBuf>,
    /// Navigation episodes.
    #[arg(long)]
    episodes: Option<PathBuf>,
}

#[derive(Args)]
struct RelaxArgs {
    /// Curve file for the relaxed centerline.
    #[arg(long)]
    out: PathBuf,
    /// Pinned tip position as x,y,z in mm.
    #[arg(long, value_delimiter = ',', value_name = "X,Y,Z", allow_hyphen_values = true)]
    tip: Option<Vec<f64>>,
    #[command(flatten)]
    wire: WireArgs,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => {
            let config = SynthConfig {
                out_dir: a.out,
                seed: a.wire.seed,
                noise_px: a.noise_px,
                segments: a.wire.segments,
                segment_length: a.wire.segment_length,
                stiffness: a.wire.stiffness,
                tip_angle: a.wire.tip_angle,
                rig: StereoRig::default(),
            };
            for path in cmd_synth(&config)? {
                println!("{}", path.display());
            }
        }
        Command::Reconstruct(a) => {
            let config = ReconstructConfig {
                camera_a: a.camera_a,
                camera_b: a.camera_b,
                annotations: a.annotations,
                out: a.out,
                samples: a.samples,
            };
            for r in cmd_reconstruct(&config)? {
                println!(
                    "frame {} accepted={} mean_reproj_px={}",
                    r.frame,
                    r.accepted,
                    wirestereo::schema::format_g9(r.mean_reproj_px)
                );
            }
        }
        Command::Evaluate(a) => {
            let csv = match (a.pred, a.truth, a.episodes) {
                (Some(pred), Some(truth), None) => cmd_evaluate_curves(&pred, &truth)?,
                (None, None, Some(episodes)) => cmd_evaluate_episodes(&episodes)?,
                _ => bail!("give either --pred and --truth, or --episodes"),
            };
            print!("{csv}");
        }
        Command::Relax(a) => {
            let tip = a
                .tip
                .map(|v| match v.as_slice() {
                    &[x, y, z] => Ok([x, y, z]),
                    _ => bail!("--tip needs three comma-separated numbers"),
                })
                .transpose()?;
            let config = RelaxConfig {
                out: a.out,
                seed: a.wire.seed,
                segments: a.wire.segments,
                segment_length: a.wire.segment_length,
                stiffness: a.wire.stiffness,
                tip_angle: a.wire.tip_angle,
                tip,
            };
            let s = cmd_relax(&config).context("relax failed")?;
            let f = wirestereo::schema::format_g9;
            println!(
                "energy={} iterations={} tip={},{},{}",
                f(s.energy),
                s.iterations,
                f(s.tip[0]),
                f(s.tip[1]),
                f(s.tip[2])
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
