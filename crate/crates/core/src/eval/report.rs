//! Text table and CSV renderings of evaluation output.

use std::fmt::Write as _;

use super::{EvalResult, BIN_NAMES};
use crate::error::{Error, Result};

/// IoU thresholds shown individually in the table.
pub const REPORT_THRESHOLDS: [f64; 3] = [0.50, 0.75, 0.95];

fn cell(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:>8.3}"),
        None => format!("{:>8}", "-"),
    }
}

/// AP and AR at 0.50 / 0.75 / 0.95 and averaged over all thresholds, one
/// column per area bin.
pub fn format_report(r: &EvalResult) -> String {
    let mut s = String::new();
    let _ = write!(s, "{:<8}{:<12}", "metric", "IoU");
    for name in BIN_NAMES {
        let _ = write!(s, "{name:>8}");
    }
    s.push('\n');
    let lo = r.iou_thresholds.first().copied().unwrap_or(0.0);
    let hi = r.iou_thresholds.last().copied().unwrap_or(0.0);
    for metric in ["AP", "AR"] {
        for &t in &REPORT_THRESHOLDS {
            let Some(k) = r.iou_thresholds.iter().position(|&x| (x - t).abs() < 1e-9) else {
                continue;
            };
            let _ = write!(s, "{metric:<8}{t:<12.2}");
            for name in BIN_NAMES {
                let b = r.bin(name);
                let v = if metric == "AP" { b.ap[k] } else { b.recall[k] };
                s.push_str(&cell(v));
            }
            s.push('\n');
        }
        let _ = write!(s, "{metric:<8}{:<12}", format!("{lo:.2}:{hi:.2}"));
        for name in BIN_NAMES {
            let b = r.bin(name);
            s.push_str(&cell(if metric == "AP" { b.map } else { b.mar }));
        }
        s.push('\n');
    }
    let _ = writeln!(s, "mAP {}  mAR {}", cell(r.map).trim(), cell(r.mar).trim());
    if let Some([a, b]) = r.area_cuts {
        let _ = writeln!(s, "area bins (px²): small ≤ {a}, medium ≤ {b}, large > {b}");
    }
    s
}

/// `bucket_start,count` rows with a header.
pub fn histogram_csv(hist: &[(f64, usize)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["bucket_start", "count"])?;
    for (start, count) in hist {
        w.write_record([start.to_string(), count.to_string()])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;

    #[test]
    fn report_layout() {
        let ims = [ImageInstances {
            image_id: 1,
            gts: vec![[0.0, 0.0, 4.0, 4.0]],
            gt_areas: vec![16.0],
            dets: vec![([0.0, 0.0, 4.0, 4.0], 0.9)],
        }];
        let r = evaluate_instances(&ims, &EvalConfig::default()).unwrap();
        let text = format_report(&r);
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].contains("small") && lines[0].ends_with("all"));
        assert!(lines[1].starts_with("AP      0.50"));
        assert!(lines[1].ends_with("1.000"));
        assert_eq!(lines.len(), 11);
    }

    #[test]
    fn csv_rows() {
        let s = histogram_csv(&[(0.0, 2), (25.0, 0)]).unwrap();
        assert_eq!(s, "bucket_start,count\n0,2\n25,0\n");
    }
}
