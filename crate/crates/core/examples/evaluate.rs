//! Score a small hand-made detection set and print the report table and
//! the area histogram.

use lungdet::eval::{area_histogram, evaluate_instances, format_report, histogram_csv, EvalConfig, ImageInstances};

fn main() -> lungdet::Result<()> {
    let image = |id: u64, gts: Vec<[f64; 4]>, dets: Vec<([f64; 4], f64)>| ImageInstances {
        image_id: id,
        gt_areas: gts.iter().map(|g| g[2] * g[3]).collect(),
        gts,
        dets,
    };
    let images = vec![
        image(
            1,
            vec![[10.0, 10.0, 8.0, 8.0], [40.0, 40.0, 20.0, 18.0]],
            vec![([10.0, 11.0, 8.0, 8.0], 0.95), ([41.0, 40.0, 19.0, 18.0], 0.7), ([0.0, 0.0, 5.0, 5.0], 0.6)],
        ),
        image(2, vec![[30.0, 20.0, 12.0, 12.0]], vec![([28.0, 22.0, 12.0, 12.0], 0.4)]),
        image(3, vec![[5.0, 5.0, 30.0, 30.0]], vec![]),
    ];
    let cfg = EvalConfig::default();
    let result = evaluate_instances(&images, &cfg)?;
    print!("{}", format_report(&result));

    let areas: Vec<f64> = images.iter().flat_map(|i| i.gt_areas.clone()).collect();
    print!("{}", histogram_csv(&area_histogram(&areas, 100.0)?)?);
    Ok(())
}
