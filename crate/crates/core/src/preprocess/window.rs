//! Hounsfield-unit windowing and 12-bit quantization.

/// Largest 12-bit sample value.
pub const MAX_12BIT: u16 = 4095;

/// An inclusive HU interval mapped linearly onto `0..=4095`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct HuWindow {
    pub lo: i32,
    pub hi: i32,
}

impl Default for HuWindow {
    /// Lung window, −1000 (air) to +400 HU.
    fn default() -> Self {
        HuWindow { lo: -1000, hi: 400 }
    }
}

impl HuWindow {
    pub fn is_valid(&self) -> bool {
        self.lo < self.hi
    }

    /// `round_half_up((clamp(hu, lo, hi) − lo) / (hi − lo) · 4095)`, computed
    /// in exact integer arithmetic.
    pub fn quantize(&self, hu: i32) -> u16 {
        debug_assert!(self.is_valid());
        let span = (self.hi - self.lo) as i64;
        let offset = (hu.clamp(self.lo, self.hi) - self.lo) as i64;
        let num = offset * MAX_12BIT as i64;
        ((2 * num + span) / (2 * span)) as u16
    }

    /// HU value at the center of quantization level `q`.
    pub fn dequantize(&self, q: u16) -> f64 {
        self.lo as f64 + q as f64 * (self.hi - self.lo) as f64 / MAX_12BIT as f64
    }
}

/// Quantize with the default −1000…+400 HU window.
pub fn window_and_quantize(hu: i32) -> u16 {
    HuWindow::default().quantize(hu)
}
