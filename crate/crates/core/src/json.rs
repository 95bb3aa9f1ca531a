//! Byte-stable JSON output: object keys sorted, every float printed with
//! exactly six decimals, no insignificant whitespace.

use std::io;

use serde::Serialize;
use serde_json::ser::Formatter;

use crate::error::Result;

struct FixedPrecision;

impl FixedPrecision {
    fn write_fixed<W: ?Sized + io::Write>(writer: &mut W, value: f64) -> io::Result<()> {
        let s = format!("{value:.6}");
        // -0.000000 and 0.000000 are the same number; emit one spelling.
        let s = if s.trim_start_matches('-').trim_start_matches(['0', '.']).is_empty() {
            "0.000000"
        } else {
            s.as_str()
        };
        writer.write_all(s.as_bytes())
    }
}

impl Formatter for FixedPrecision {
    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        Self::write_fixed(writer, value as f64)
    }

    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        Self::write_fixed(writer, value)
    }
}

/// Serialize `value` canonically, followed by a newline.
pub fn to_canonical_string<T: Serialize>(value: &T) -> Result<String> {
    // Going through `Value` sorts object keys (BTreeMap-backed map).
    let tree = serde_json::to_value(value)?;
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedPrecision);
    tree.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// Round to the value canonical output would print, so that a
/// serialize → parse cycle reproduces it exactly.
pub fn round6(x: f64) -> f64 {
    let r: f64 = format!("{x:.6}").parse().expect("formatted float parses");
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Serialize;

    #[derive(Serialize)]
    struct Sample {
        zeta: f64,
        alpha: u32,
        mid: Vec<f64>,
    }

    #[test]
    fn sorted_keys_and_fixed_decimals() {
        let s = to_canonical_string(&Sample {
            zeta: 0.5,
            alpha: 3,
            mid: vec![1.0, -1e-9, 2.0 / 3.0],
        })
        .unwrap();
        assert_eq!(s, "{\"alpha\":3,\"mid\":[1.000000,0.000000,0.666667],\"zeta\":0.500000}\n");
    }

    #[test]
    fn round6_is_a_fixed_point_of_printing() {
        for x in [0.1, 1.0 / 3.0, 123.4567891, -7.25e-7, 1e6 + 0.1234565] {
            let r = round6(x);
            let printed: f64 = format!("{r:.6}").parse().unwrap();
            assert_eq!(printed.to_bits(), r.to_bits());
        }
    }
}
