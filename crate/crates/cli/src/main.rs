//! `tilesplat` command-line front end.
//!
//! Exit codes: 0 success, 1 `compare` found differing images, 2 usage,
//! input or format error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tilesplat::{Backend, PrecisionMode};

#[derive(Parser)]
#[command(name = "tilesplat", version, about = "CPU Gaussian splatting renderer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a scene to a PPM and write a `.stats` sidecar next to it.
    Render(RenderArgs),
    /// Compare two PPM images.
    Compare {
        a: PathBuf,
        b: PathBuf,
    },
    /// Gaussian loading statistics per group size.
    Stats {
        #[command(flatten)]
        input: InputArgs,
        /// Group sizes to report, from {1, 2, 4}.
        #[arg(long, value_delimiter = ',', default_value = "1,2,4", value_parser = parse_group)]
        groups: Vec<u32>,
        #[arg(long, value_enum, default_value_t = Format::Kv)]
        format: Format,
    },
    /// Time every backend and group size and print operation counts.
    Bench {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..))]
        repetitions: u32,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4", value_parser = parse_group)]
        groups: Vec<u32>,
        #[arg(long, value_enum, default_value_t = Precision::Fp32)]
        precision: Precision,
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long, value_enum, default_value_t = Format::Kv)]
        format: Format,
    },
    /// Write a synthetic scene and, optionally, a matching camera.
    GenScene(GenArgs),
}

#[derive(Args)]
struct InputArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    camera: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = BackendArg::Tensor)]
    backend: BackendArg,
    #[arg(long, value_enum, default_value_t = Precision::Fp32)]
    precision: Precision,
    #[arg(long, default_value_t = 2, value_parser = parse_group)]
    group: u32,
    /// Rasterizer threads; 0 uses all cores. Output does not depend on it.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    count: usize,
    /// Half-width of the cube the means are drawn from.
    #[arg(long, default_value_t = 1.0)]
    extent: f32,
    #[arg(long, default_value_t = 0.02)]
    scale_min: f32,
    #[arg(long, default_value_t = 0.06)]
    scale_max: f32,
    #[arg(long)]
    out: PathBuf,
    /// Also write the canonical camera for this scene.
    #[arg(long)]
    camera: Option<PathBuf>,
    #[arg(long, default_value_t = 256)]
    width: u32,
    #[arg(long, default_value_t = 256)]
    height: u32,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Scalar,
    Tensor,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Scalar => Backend::Scalar,
            BackendArg::Tensor => Backend::Tensor,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Precision {
    Fp32,
    Fp16,
}

impl From<Precision> for PrecisionMode {
    fn from(p: Precision) -> Self {
        match p {
            Precision::Fp32 => PrecisionMode::Fp32,
            Precision::Fp16 => PrecisionMode::Fp16,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    /// `key=value` lines.
    Kv,
    /// One JSON object per line.
    Jsonl,
}

fn parse_group(s: &str) -> Result<u32, String> {
    match s.trim().parse::<u32>() {
        Ok(g @ (1 | 2 | 4)) => Ok(g),
        _ => Err(format!("unsupported group size `{s}` (expected 1, 2 or 4)")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Render(args) => commands::render(&args),
        Command::Compare { a, b } => commands::compare(&a, &b),
        Command::Stats { input, groups, format } => commands::stats(&input, &groups, format),
        Command::Bench {
            input,
            repetitions,
            groups,
            precision,
            workers,
            format,
        } => commands::bench(&input, repetitions, &groups, precision.into(), workers, format),
        Command::GenScene(args) => commands::gen_scene(&args),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
