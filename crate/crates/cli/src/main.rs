mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use canvas_core::harness::StudyKind;
use clap::{Args, Parser, Subcommand};

use crate::config::{read_overrides, resolve, FlagOverrides};

const CSV_HELP: &str = "\
Output files start with '#' lines carrying the tool version, config_sha256 and seed.
Numbers are written with 17 significant digits.

CSV columns:
  det-time, det-space, canvas, tdr, sdr:  table,parameter,param,error,method,provenance,mc_stderr
  total:                                  h,model,tdr,sdr,sdr_stderr,total
  sample-path:                            step,tau,x,fem,exact
  noise-dump:                             slab,mode,increment (plus the binary noise.bin)

Each study also writes <study>_summary.json and <study>_manifest.json.";

#[derive(Parser)]
#[command(name = "canvas-lab", version, about = "Canvas-noise finite element laboratory", after_help = CSV_HELP)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML file of configuration keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, env = "CANVAS_LAB_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,
    #[arg(long, global = true)]
    samples: Option<usize>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    mu: Option<f64>,
    #[arg(long, global = true)]
    degree: Option<usize>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// One noise realization: FEM snapshots next to the exact canvas solution.
    SamplePath {
        /// Elements of the mesh; defaults to the largest of elements_sweep.
        #[arg(long)]
        elements: Option<usize>,
        /// Intervals of the evaluation grid.
        #[arg(long, default_value_t = 64)]
        points: usize,
        /// Keep every n-th time step (the last is always kept).
        #[arg(long, default_value_t = 1)]
        every: usize,
    },
    /// Run convergence studies.
    Study {
        #[arg(value_parser = parse_study)]
        names: Vec<StudyKind>,
        #[arg(long = "study", value_parser = parse_study)]
        extra: Vec<StudyKind>,
    },
    /// Write the sampled increments of one noise realization.
    NoiseDump,
}

fn parse_study(s: &str) -> Result<StudyKind, String> {
    s.parse().map_err(|e: canvas_core::Error| e.to_string())
}

fn run(cli: Cli) -> Result<()> {
    let c = &cli.common;
    if let Some(n) = c.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot start worker pool")?;
    }
    let file = c.config.as_deref().map(read_overrides).transpose()?;
    let flags = FlagOverrides {
        seed: c.seed,
        samples: c.samples,
        mu: c.mu,
        degree: c.degree,
    };
    match cli.command {
        Command::SamplePath { elements, points, every } => {
            let cfg = resolve(None, file.as_ref(), &flags)?;
            let elements = elements
                .or_else(|| cfg.elements_sweep.iter().copied().max())
                .context("no element count: pass --elements or set elements_sweep")?;
            let opts = commands::PathOptions { elements, intervals: points, every };
            commands::sample_path(&cfg, opts, &c.out_dir)
        }
        Command::Study { mut names, extra } => {
            names.extend(extra);
            if names.is_empty() {
                anyhow::bail!("no study given; valid studies: {}", StudyKind::valid_names());
            }
            for kind in names {
                let cfg = resolve(Some(kind), file.as_ref(), &flags)?;
                commands::study(kind, &cfg, &c.out_dir).with_context(|| format!("study {kind} failed"))?;
            }
            Ok(())
        }
        Command::NoiseDump => {
            let cfg = resolve(None, file.as_ref(), &flags)?;
            commands::noise_dump(&cfg, &c.out_dir)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
