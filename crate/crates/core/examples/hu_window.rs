//! Lung windowing: map Hounsfield units onto 12 bits and store a slice as
//! a 16-bit binary PGM.

use lungdet::preprocess::{decode_pgm, encode_pgm, HuWindow, MAX_12BIT};

fn main() -> lungdet::Result<()> {
    let window = HuWindow::default();
    for hu in [-3000, -1000, -820, -300, 0, 40, 400, 3000] {
        let q = window.quantize(hu);
        println!("{hu:>6} HU -> {q:>4}  (back to {:>8.2} HU)", window.dequantize(q));
    }

    // A 64×64 ramp from air to bone.
    let (w, h) = (64, 64);
    let pixels: Vec<u16> = (0..w * h)
        .map(|i| window.quantize(-1100 + (i % w) as i32 * 25))
        .collect();
    let bytes = encode_pgm(w, h, &pixels)?;
    let back = decode_pgm(&bytes)?;
    assert_eq!(back.pixels, pixels);
    assert_eq!(back.maxval, MAX_12BIT);
    println!("PGM: {} bytes, header {:?}", bytes.len(), std::str::from_utf8(&bytes[..15]).unwrap_or("?"));
    Ok(())
}
