//! The end-to-end commands: preprocess scans into slices, run the detector,
//! score results, and time inference. Each writes canonical files under the
//! configured output directory.

use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::{PipelineConfig, Stage};
use crate::ct_io::{parse_annotations_csv, read_volume};
use crate::detect::{detect, model_param_specs};
use crate::error::{Error, Result};
use crate::eval::{area_histogram, collect_instances, evaluate_instances, format_report, histogram_csv, EvalResult};
use crate::json::to_canonical_string;
use crate::preprocess::{
    detections_from_json, detections_to_json, export_coco, parse_manifest, preprocess_volume, read_pgm,
    slice_file_name, write_manifest, write_slice_pgm, CocoDataset, CocoDetection, ManifestEntry, SliceLabel,
    SliceRecord, MAX_12BIT,
};
use crate::swin::image_from_gray;
use crate::weights::{seeded_weights, Weights};
use crate::Tensor;

pub const INSTANCES_FILE: &str = "instances.json";
pub const MANIFEST_FILE: &str = "manifest.csv";
pub const RESULTS_FILE: &str = "results.json";
pub const EVAL_FILE: &str = "eval.json";
pub const REPORT_FILE: &str = "report.txt";
pub const HISTOGRAM_FILE: &str = "area_histogram.csv";

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::from(e).in_file(path))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))
}

/// `.mhd` headers directly inside `dir`, sorted by file name.
pub fn list_volumes(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::from(e).in_file(dir))? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("mhd")) && path.is_file() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PreprocessSummary {
    pub scans: usize,
    pub failed: usize,
    pub slices: usize,
    pub annotations: usize,
}

/// Window and slice every volume, writing `images/*.pgm`, the COCO
/// dataset and the manifest. Volumes that fail to load are logged and
/// skipped; the command still errors afterwards if any did.
pub fn cmd_preprocess(cfg: &PipelineConfig) -> Result<PreprocessSummary> {
    cfg.validate(Stage::Preprocess)?;
    let scans_dir = cfg.paths.scans_dir.as_deref().expect("validated");
    let ann_path = cfg.paths.annotations.as_deref().expect("validated");
    let out = cfg.output_dir()?;
    let volumes = list_volumes(scans_dir)?;
    if volumes.is_empty() {
        return Err(Error::NoVolumes(scans_dir.to_path_buf()));
    }
    let annotations = parse_annotations_csv(&read_text(ann_path)?).map_err(|e| e.in_file(ann_path))?;
    std::fs::create_dir_all(out.join("images"))?;

    let mut records = Vec::new();
    let mut labels = Vec::new();
    let mut failed = 0;
    for path in &volumes {
        let uid = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let volume = match read_volume(path) {
            Ok(v) => v,
            Err(e) => {
                log::error!("{e}");
                failed += 1;
                continue;
            }
        };
        for s in preprocess_volume(&volume, &uid, &annotations, &cfg.window, &cfg.slices)? {
            write_slice_pgm(&s.image, &out.join(slice_file_name(&uid, s.image.z_index)))?;
            records.push(SliceRecord {
                series_uid: uid.clone(),
                z_index: s.image.z_index,
                width: s.image.width,
                height: s.image.height,
            });
            labels.extend(s.boxes.into_iter().map(|bbox| SliceLabel {
                series_uid: uid.clone(),
                z_index: s.image.z_index,
                bbox,
            }));
        }
    }
    records.sort();
    let dataset = export_coco(&records, &labels)?;
    write(&out.join(INSTANCES_FILE), dataset.to_json()?)?;
    let manifest: Vec<ManifestEntry> = records
        .iter()
        .map(|r| ManifestEntry {
            series_uid: r.series_uid.clone(),
            z_index: r.z_index,
            file_name: slice_file_name(&r.series_uid, r.z_index),
        })
        .collect();
    write(&out.join(MANIFEST_FILE), write_manifest(&manifest)?)?;
    let summary = PreprocessSummary {
        scans: volumes.len() - failed,
        failed,
        slices: dataset.images.len(),
        annotations: dataset.annotations.len(),
    };
    if failed > 0 {
        return Err(Error::VolumesFailed { failed, total: volumes.len() });
    }
    Ok(summary)
}

/// Weights from the configured archive, or generated from `cfg.seed`.
pub fn load_weights(cfg: &PipelineConfig, seeded: bool) -> Result<Weights> {
    let specs = model_param_specs(&cfg.swin, &cfg.detector);
    let w = if seeded {
        seeded_weights(&specs, cfg.seed)
    } else {
        let path = cfg
            .paths
            .weights
            .as_deref()
            .ok_or_else(|| Error::Config("paths.weights is not set".into()))?;
        Weights::read(path)?
    };
    w.check(&specs)?;
    Ok(w)
}

/// A 12-bit slice file as backbone input.
pub fn load_slice_tensor(path: &Path, channels: usize) -> Result<Tensor> {
    let img = read_pgm(path)?;
    if img.maxval > MAX_12BIT {
        return Err(Error::Image(format!("{}: maxval {} exceeds 12 bits", path.display(), img.maxval)).in_file(path));
    }
    image_from_gray(&img.pixels, img.width, img.height, channels)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InferSummary {
    pub images: usize,
    pub detections: usize,
}

/// Detect on every manifest image and write the results file.
pub fn cmd_infer(cfg: &PipelineConfig, seeded: bool) -> Result<InferSummary> {
    cfg.validate(Stage::Infer { seeded })?;
    let out = cfg.output_dir()?;
    let weights = load_weights(cfg, seeded)?;
    let dataset = CocoDataset::from_json(&read_text(&out.join(INSTANCES_FILE))?)
        .map_err(|e| e.in_file(out.join(INSTANCES_FILE)))?;
    let ids = dataset.image_by_file();
    let manifest = parse_manifest(&read_text(&out.join(MANIFEST_FILE))?)?;
    let mut results: Vec<CocoDetection> = Vec::new();
    for entry in &manifest {
        let image = ids.get(entry.file_name.as_str()).ok_or_else(|| {
            Error::Consistency(format!("{} is in the manifest but not in {INSTANCES_FILE}", entry.file_name))
        })?;
        let x = load_slice_tensor(&out.join(&entry.file_name), cfg.swin.in_channels)?;
        let dets = detect(&x, &weights, &cfg.swin, &cfg.detector)?;
        log::info!("{}: {} detections", entry.file_name, dets.len());
        results.extend(dets.iter().map(|d| d.to_coco(image.id)));
    }
    // stable: within an image the detector order (score descending) is kept
    results.sort_by_key(|d| d.image_id);
    write(&out.join(RESULTS_FILE), detections_to_json(&results)?)?;
    Ok(InferSummary { images: manifest.len(), detections: results.len() })
}

/// Score `results` against `gt`, writing the JSON result, the text report
/// and the area histogram next to the results. Paths default to the files
/// in the output directory.
pub fn cmd_eval(cfg: &PipelineConfig, gt: Option<&Path>, results: Option<&Path>) -> Result<(EvalResult, String)> {
    let out = cfg.paths.output_dir.clone();
    let resolve = |given: Option<&Path>, name: &str| -> Result<PathBuf> {
        match (given, &out) {
            (Some(p), _) => Ok(p.to_path_buf()),
            (None, Some(o)) => Ok(o.join(name)),
            (None, None) => Err(Error::Config(format!(
                "cannot locate {name}: set paths.output_dir or pass the file explicitly"
            ))),
        }
    };
    let gt_path = resolve(gt, INSTANCES_FILE)?;
    let res_path = resolve(results, RESULTS_FILE)?;
    let out_dir = match out {
        Some(o) => o,
        None => res_path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .map_or_else(|| PathBuf::from("."), Path::to_path_buf),
    };
    let mut checked = cfg.clone();
    checked.paths.output_dir = Some(out_dir.clone());
    checked.validate(Stage::Eval)?;

    let dataset = CocoDataset::from_json(&read_text(&gt_path)?).map_err(|e| e.in_file(&gt_path))?;
    let dets = detections_from_json(&read_text(&res_path)?).map_err(|e| e.in_file(&res_path))?;
    let instances = collect_instances(&dataset, &dets).map_err(|e| e.in_file(&res_path))?;
    let result = evaluate_instances(&instances, &cfg.eval)?;
    let report = format_report(&result);
    write(&out_dir.join(EVAL_FILE), to_canonical_string(&result)?)?;
    write(&out_dir.join(REPORT_FILE), &report)?;
    let areas: Vec<f64> = dataset.annotations.iter().map(|a| a.area).collect();
    write(
        &out_dir.join(HISTOGRAM_FILE),
        histogram_csv(&area_histogram(&areas, cfg.eval.histogram_bin_width)?)?,
    )?;
    Ok((result, report))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub side: usize,
    pub runs: usize,
    pub median_ms: f64,
    pub min_ms: f64,
    pub param_count: usize,
}

/// Median wall-clock time of `runs` (at least 5) detector passes on one
/// slice: the first manifest image when available, otherwise a synthetic
/// ramp of `swin.img_size`.
pub fn cmd_bench(cfg: &PipelineConfig, seeded: bool, runs: usize) -> Result<BenchReport> {
    cfg.validate(Stage::Bench { seeded })?;
    let weights = load_weights(cfg, seeded)?;
    let image = bench_image(cfg)?;
    let runs = runs.max(5);
    let mut times = Vec::with_capacity(runs);
    for _ in 0..runs {
        let t = Instant::now();
        detect(&image, &weights, &cfg.swin, &cfg.detector)?;
        times.push(t.elapsed().as_secs_f64() * 1e3);
    }
    times.sort_by(f64::total_cmp);
    Ok(BenchReport {
        side: image.shape()[2],
        runs,
        median_ms: times[runs / 2],
        min_ms: times[0],
        param_count: weights.param_count(),
    })
}

fn bench_image(cfg: &PipelineConfig) -> Result<Tensor> {
    if let Ok(out) = cfg.output_dir() {
        if let Ok(text) = std::fs::read_to_string(out.join(MANIFEST_FILE)) {
            if let Some(first) = parse_manifest(&text)?.first() {
                return load_slice_tensor(&out.join(&first.file_name), cfg.swin.in_channels);
            }
        }
    }
    let s = cfg.swin.img_size;
    let pixels: Vec<u16> = (0..s * s).map(|i| ((i % s + i / s) * MAX_12BIT as usize / (2 * s)) as u16).collect();
    image_from_gray(&pixels, s, s, cfg.swin.in_channels)
}
