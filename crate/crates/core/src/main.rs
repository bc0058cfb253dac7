use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use s2seg::cli::{self, RunConfig};
use s2seg::{Error, Result};

#[derive(Parser)]
#[command(name = "s2seg", version, about = "Spherical semantic segmentation of LiDAR scans")]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    bw: Option<usize>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override a config key by dotted path, e.g. `--set optim.lr=0.01`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,
    #[arg(long, global = true)]
    cloud: Option<PathBuf>,
    #[arg(long, global = true)]
    labels: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Generate labeled synthetic scans into `data.root`.
    Synth,
    /// Project one cloud; write the scan record and PGM previews.
    Project,
    Train,
    /// Label one cloud with a checkpoint; write labels and PLY.
    Infer,
    /// Cell and point metrics over a split.
    Eval,
    /// mIoU against roll, pitch and yaw rotations.
    RotateBench,
    /// Per-stage latency.
    Bench,
}

fn config(args: &Args) -> Result<RunConfig> {
    let base = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let mut sets = args.set.clone();
    let mut flag = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            sets.push(format!("{k}={v}"));
        }
    };
    let quoted = |p: &Option<PathBuf>| p.as_ref().map(|p| format!("{:?}", p.display().to_string()));
    flag("seed", args.seed.map(|s| s.to_string()));
    flag("bw", args.bw.map(|b| b.to_string()));
    flag("paths.out", quoted(&args.out));
    flag("paths.checkpoint", quoted(&args.checkpoint));
    flag("paths.cloud", quoted(&args.cloud));
    flag("paths.labels", quoted(&args.labels));
    base.with_overrides(&sets)
}

fn json<T: serde::Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| Error::InvalidConfig(e.to_string()))
}

fn run(args: &Args) -> Result<()> {
    let cfg = config(args)?;
    match args.command {
        Command::Synth => {
            let ds = cli::cmd_synth(&cfg)?;
            println!("wrote {} scans to {}", ds.items.len(), ds.root.display());
        }
        Command::Project => {
            let scan = cli::cmd_project(&cfg)?;
            let hit = scan.mask().iter().filter(|&&m| m > 0.0).count();
            println!("{} of {} cells occupied", hit, scan.mask().len());
        }
        Command::Train => println!("{}", json(&cli::cmd_train(&cfg)?)?),
        Command::Infer => {
            let labels = cli::cmd_infer(&cfg)?;
            println!("labelled {} points", labels.len());
        }
        Command::Eval => println!("{}", json(&cli::cmd_eval(&cfg)?)?),
        Command::RotateBench => {
            for r in cli::cmd_rotate_bench(&cfg)? {
                println!("{} {} {:.4}", r.axis, r.angle_deg, r.point_miou);
            }
        }
        Command::Bench => println!("{}", json(&cli::cmd_bench(&cfg)?)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {}: {msg}", e.kind());
            ExitCode::FAILURE
        }
    }
}
