//! Run the seeded Swin-T backbone and feature pyramid on a 512×512 slice
//! and print the stage and pyramid shapes with timings.

use std::time::Instant;

use lungdet::detect::{model_param_specs, DetectorConfig};
use lungdet::fpn::build_pyramid;
use lungdet::swin::{image_from_gray, swin_forward, SwinConfig};
use lungdet::weights::seeded_weights;

fn main() -> lungdet::Result<()> {
    let swin = SwinConfig::default();
    let det = DetectorConfig::default();
    let weights = seeded_weights(&model_param_specs(&swin, &det), 0);
    println!("{} tensors, {} parameters", weights.len(), weights.param_count());

    let side = swin.img_size;
    let pixels: Vec<u16> = (0..side * side).map(|i| ((i * 7) % 4096) as u16).collect();
    let image = image_from_gray(&pixels, side, side, swin.in_channels)?;

    let t = Instant::now();
    let stages = swin_forward(&image, &weights, &swin)?;
    println!("backbone {:.2?}", t.elapsed());
    for (i, s) in stages.levels.iter().enumerate() {
        println!("  stage {}: {:?}", i + 1, s.shape());
    }
    let t = Instant::now();
    let pyramid = build_pyramid(&stages, &weights)?;
    println!("pyramid {:.2?}", t.elapsed());
    for (i, p) in pyramid.levels.iter().enumerate() {
        println!("  P{}: {:?}", i + 2, p.shape());
    }
    Ok(())
}
