//! LUNA16-style nodule annotation CSV (`seriesuid,coordX,coordY,coordZ,diameter_mm`).

use crate::error::{Error, Result};

/// A ground-truth nodule in world coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct NoduleAnnotation {
    pub series_uid: String,
    /// Nodule center `(x, y, z)` in mm.
    pub world: [f64; 3],
    pub diameter_mm: f64,
}

const COLUMNS: [&str; 5] = ["seriesuid", "coordX", "coordY", "coordZ", "diameter_mm"];

/// Parse an annotations CSV. Columns are located by header name, so extra
/// columns and reordering are tolerated.
pub fn parse_annotations_csv(text: &str) -> Result<Vec<NoduleAnnotation>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::CsvHeader(e.to_string()))?
        .clone();
    let mut idx = [0usize; 5];
    for (slot, name) in idx.iter_mut().zip(COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::CsvHeader(format!("missing column `{name}`")))?;
    }

    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::CsvRow {
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(idx[i]).unwrap_or("");
        let num = |i: usize| -> Result<f64> {
            let raw = field(i);
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::CsvRow {
                    line,
                    msg: format!("`{}` is not a number: {raw:?}", COLUMNS[i]),
                })
        };
        let series_uid = field(0).to_string();
        if series_uid.is_empty() {
            return Err(Error::CsvRow {
                line,
                msg: "empty seriesuid".into(),
            });
        }
        let world = [num(1)?, num(2)?, num(3)?];
        let diameter_mm = num(4)?;
        if diameter_mm <= 0.0 {
            return Err(Error::CsvRow {
                line,
                msg: format!("diameter_mm must be positive, got {diameter_mm}"),
            });
        }
        out.push(NoduleAnnotation {
            series_uid,
            world,
            diameter_mm,
        });
    }
    Ok(out)
}

/// Render annotations in the same CSV layout.
pub fn write_annotations_csv(annotations: &[NoduleAnnotation]) -> String {
    let mut s = COLUMNS.join(",");
    s.push('\n');
    for a in annotations {
        s.push_str(&format!(
            "{},{:?},{:?},{:?},{:?}\n",
            a.series_uid, a.world[0], a.world[1], a.world[2], a.diameter_mm
        ));
    }
    s
}
