//! Slice the synthetic scans: select nodule-bearing slices, window them,
//! and print the resulting COCO boxes.

use lungdet::preprocess::{export_coco, preprocess_volume, HuWindow, SliceLabel, SliceRecord, SliceRule};
use lungdet::synthetic::{annotations_for, fixture_specs, render_volume};

fn main() -> lungdet::Result<()> {
    let mut records = Vec::new();
    let mut labels = Vec::new();
    for (i, spec) in fixture_specs().iter().enumerate() {
        let volume = render_volume(spec, i as u64)?;
        let annotations = annotations_for(spec);
        for s in preprocess_volume(&volume, &spec.series_uid, &annotations, &HuWindow::default(), &SliceRule::default())? {
            records.push(SliceRecord {
                series_uid: spec.series_uid.clone(),
                z_index: s.image.z_index,
                width: s.image.width,
                height: s.image.height,
            });
            for bbox in s.boxes {
                labels.push(SliceLabel { series_uid: spec.series_uid.clone(), z_index: s.image.z_index, bbox });
            }
        }
    }
    let coco = export_coco(&records, &labels)?;
    println!("{} slices, {} boxes", coco.images.len(), coco.annotations.len());
    for a in &coco.annotations {
        let im = &coco.images[a.image_id as usize - 1];
        println!("{:<40} bbox {:?} area {:.2}", im.file_name, a.bbox, a.area);
    }
    Ok(())
}
