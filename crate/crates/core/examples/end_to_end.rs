//! Preprocess the synthetic fixture, run seeded inference, and evaluate,
//! exactly as the `preprocess`, `infer` and `eval` subcommands do.
//!
//! cargo run --release --example end_to_end -- /tmp/lungdet-run

use std::path::PathBuf;

use lungdet::config::PipelineConfig;
use lungdet::pipeline::{cmd_eval, cmd_infer, cmd_preprocess};
use lungdet::synthetic::{fixture_specs, write_fixture};

fn main() -> lungdet::Result<()> {
    let root: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "lungdet-run".into()).into();
    let fixture = write_fixture(&root, &fixture_specs(), 0)?;

    let mut cfg = PipelineConfig { seed: 7, ..PipelineConfig::default() };
    cfg.paths.scans_dir = Some(fixture.scans_dir);
    cfg.paths.annotations = Some(fixture.annotations);
    cfg.paths.output_dir = Some(root.join("out"));

    let p = cmd_preprocess(&cfg)?;
    println!("preprocess: scans {}  slices {}  annotations {}", p.scans, p.slices, p.annotations);
    let i = cmd_infer(&cfg, true)?;
    println!("infer: images {}  detections {}", i.images, i.detections);
    let (_, report) = cmd_eval(&cfg, None, None)?;
    print!("{report}");
    Ok(())
}
