//! Detect nodules on one synthetic slice with seeded (untrained) weights.
//! The boxes are meaningless without training; this shows the data flow
//! and the output format.

use std::time::Instant;

use lungdet::detect::{detect, model_param_specs, DetectorConfig};
use lungdet::json::to_canonical_string;
use lungdet::preprocess::HuWindow;
use lungdet::swin::{image_from_gray, SwinConfig};
use lungdet::synthetic::{fixture_specs, render_volume};
use lungdet::weights::seeded_weights;

fn main() -> lungdet::Result<()> {
    let spec = &fixture_specs()[0];
    let volume = render_volume(spec, 0)?;
    let z = spec.nodules[0].center_voxel[2] as usize;
    let window = HuWindow::default();
    let pixels: Vec<u16> = volume.slice(z).iter().map(|&v| window.quantize(v as i32)).collect();
    let [nx, ny, _] = volume.meta.dims;

    let swin = SwinConfig::default();
    let det = DetectorConfig::default();
    let weights = seeded_weights(&model_param_specs(&swin, &det), 42);
    let image = image_from_gray(&pixels, nx, ny, swin.in_channels)?;
    let t = Instant::now();
    let dets = detect(&image, &weights, &swin, &det)?;
    println!("{} detections in {:.2?}", dets.len(), t.elapsed());
    let top: Vec<_> = dets.iter().take(5).map(|d| d.to_coco(1)).collect();
    print!("{}", to_canonical_string(&top)?);
    Ok(())
}
