use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lungdet::config::PipelineConfig;
use lungdet::pipeline::{cmd_bench, cmd_eval, cmd_infer, cmd_preprocess};
use lungdet::selftest::{format_table, run_selftest, Perturb};

/// Lung-nodule slice detection: preprocessing, inference, evaluation.
#[derive(Parser)]
#[command(name = "lungdet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML pipeline configuration; flags override its values.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Seed for generated weights.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct WeightsArgs {
    /// NTAR1 weights archive.
    #[arg(long, conflicts_with = "seed_weights")]
    weights: Option<PathBuf>,
    /// Generate deterministic weights from the seed instead of loading them.
    #[arg(long)]
    seed_weights: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Window and slice CT volumes into PGM images plus COCO annotations.
    Preprocess {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scans_dir: Option<PathBuf>,
        #[arg(long)]
        annotations: Option<PathBuf>,
        #[arg(long, allow_negative_numbers = true)]
        window_lo: Option<i32>,
        #[arg(long, allow_negative_numbers = true)]
        window_hi: Option<i32>,
    },
    /// Run the detector on every preprocessed slice.
    Infer {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        weights: WeightsArgs,
    },
    /// Score detections against ground truth.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Ground-truth COCO dataset (default: <output>/instances.json).
        #[arg(long)]
        gt: Option<PathBuf>,
        /// COCO results file (default: <output>/results.json).
        #[arg(long)]
        results: Option<PathBuf>,
        /// Upper bounds of the small and medium area bins, in px².
        #[arg(long, num_args = 2, value_names = ["SMALL", "MEDIUM"])]
        area_cuts: Option<Vec<f64>>,
    },
    /// Time single-slice inference and count parameters.
    Bench {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        weights: WeightsArgs,
        #[arg(long, default_value_t = 5)]
        runs: usize,
        /// Side of the synthetic input when no manifest is available.
        #[arg(long)]
        img_size: Option<usize>,
    },
    /// Run the built-in oracle suites.
    Selftest {
        /// Corrupt one kernel to check that its suite fails.
        #[arg(long, hide = true)]
        perturb: Option<Perturb>,
    },
}

fn load(common: &Common) -> lungdet::Result<PipelineConfig> {
    let mut cfg = match &common.config {
        Some(p) => PipelineConfig::read(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(o) = &common.output_dir {
        cfg.paths.output_dir = Some(o.clone());
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn apply_weights(cfg: &mut PipelineConfig, w: &WeightsArgs) {
    if let Some(p) = &w.weights {
        cfg.paths.weights = Some(p.clone());
    }
}

fn run(cli: Cli) -> lungdet::Result<bool> {
    match cli.command {
        Command::Preprocess { common, scans_dir, annotations, window_lo, window_hi } => {
            let mut cfg = load(&common)?;
            cfg.paths.scans_dir = scans_dir.or(cfg.paths.scans_dir);
            cfg.paths.annotations = annotations.or(cfg.paths.annotations);
            cfg.window.lo = window_lo.unwrap_or(cfg.window.lo);
            cfg.window.hi = window_hi.unwrap_or(cfg.window.hi);
            let s = cmd_preprocess(&cfg)?;
            println!("scans {}  slices {}  annotations {}", s.scans, s.slices, s.annotations);
        }
        Command::Infer { common, weights } => {
            let mut cfg = load(&common)?;
            apply_weights(&mut cfg, &weights);
            let s = cmd_infer(&cfg, weights.seed_weights)?;
            println!("images {}  detections {}", s.images, s.detections);
        }
        Command::Eval { common, gt, results, area_cuts } => {
            let mut cfg = load(&common)?;
            if let Some(c) = area_cuts {
                cfg.eval.area_cuts = c;
            }
            let (_, report) = cmd_eval(&cfg, gt.as_deref(), results.as_deref())?;
            print!("{report}");
        }
        Command::Bench { common, weights, runs, img_size } => {
            let mut cfg = load(&common)?;
            apply_weights(&mut cfg, &weights);
            if let Some(s) = img_size {
                cfg.swin.img_size = s;
            }
            let r = cmd_bench(&cfg, weights.seed_weights, runs)?;
            println!(
                "side {}  runs {}  median {:.1} ms  min {:.1} ms  parameters {}",
                r.side, r.runs, r.median_ms, r.min_ms, r.param_count
            );
        }
        Command::Selftest { perturb } => {
            let results = run_selftest(perturb);
            print!("{}", format_table(&results));
            return Ok(results.iter().all(|r| r.passed()));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
