//! Generate seeded detector weights, write them as an NTAR1 archive, and
//! check that reading and rewriting reproduces the file byte for byte.
//!
//! cargo run --release --example weights_archive -- model.ntar 7

use lungdet::detect::{model_param_specs, DetectorConfig};
use lungdet::swin::SwinConfig;
use lungdet::weights::{seeded_weights, Weights};

fn main() -> lungdet::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| "model.ntar".into());
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);

    let specs = model_param_specs(&SwinConfig::default(), &DetectorConfig::default());
    let weights = seeded_weights(&specs, seed);
    weights.write(path.as_ref())?;
    let bytes = std::fs::read(&path)?;
    let back = Weights::read(path.as_ref())?;
    assert_eq!(back.to_bytes()?, bytes);
    println!("{path}: {} tensors, {} parameters, {} bytes", back.len(), back.param_count(), bytes.len());
    for (name, t) in back.iter().take(4) {
        println!("  {name} {:?}", t.shape());
    }
    Ok(())
}
