//! Probability quantization: 2-byte fixed-point scores in the −log10 domain.
//!
//! A probability `p` is stored as `min(⌊−10³·log10(p)⌋, 29999)` — millibels
//! of improbability, capped so the value fits comfortably in 2 bytes.
//! Decoding is `10^(−q/10³)`, so the floor step loses at most 0.001 in the
//! log10 domain and ranking by quantized value (ascending) matches ranking
//! by probability (descending) up to quantization ties.

use thiserror::Error;

/// Quantizer settings: scores are `min(⌊−10^c1·log10(p)⌋, c2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuantParams {
    /// Scale exponent.
    pub c1: u32,
    /// Cap; must fit in 2 bytes.
    pub c2: u16,
}

impl Default for QuantParams {
    fn default() -> Self {
        QuantParams { c1: 3, c2: 29_999 }
    }
}

/// Most negative representable log10 score under the default quantizer:
/// `−c2 / 10^c1`. Used as the score floor for entries whose true
/// probability is zero or unrepresentable (e.g. the `<s>` tag).
pub const LOG10_FLOOR: f64 = -29.999;

#[derive(Debug, Error, PartialEq)]
pub enum QuantError {
    #[error("probability {0} outside (0, 1]")]
    BadProbability(f64),
    #[error("log10 score {0} must be ≤ 0 and finite")]
    BadScore(f64),
    #[error("quantized value {value} exceeds cap {cap}")]
    OutOfRange { value: u32, cap: u16 },
}

impl QuantParams {
    fn scale(&self) -> f64 {
        10f64.powi(self.c1 as i32)
    }

    /// The log10 score that decodes from the cap value.
    pub fn score_floor(&self) -> f64 {
        -(self.c2 as f64) / self.scale()
    }

    /// Quantizes a probability in (0, 1].
    pub fn quantize(&self, p: f64) -> Result<u16, QuantError> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(QuantError::BadProbability(p));
        }
        Ok(self.quantize_log10(p.log10()).expect("log10 of (0,1] is ≤ 0"))
    }

    /// Quantizes a probability given directly as a log10 score ≤ 0. This is
    /// the path the serializer uses — model scores are already logs, and
    /// skipping the `10^x` round trip avoids needless rounding.
    pub fn quantize_log10(&self, score: f64) -> Result<u16, QuantError> {
        if score > 0.0 || score.is_nan() {
            return Err(QuantError::BadScore(score));
        }
        // The epsilon absorbs float-representation noise at integer
        // boundaries: −10³·log10(10⁻³) can land a hair below 3000 and must
        // still floor to 3000, not 2999.
        let raw = (-self.scale() * score + 1e-6).floor();
        Ok((raw as u32).min(self.c2 as u32) as u16)
    }

    /// Decodes a quantized value back to a probability.
    pub fn dequantize(&self, q: u16) -> Result<f64, QuantError> {
        if q > self.c2 {
            return Err(QuantError::OutOfRange { value: q as u32, cap: self.c2 });
        }
        Ok(10f64.powf(-(q as f64) / self.scale()))
    }

    /// Decodes a quantized value to its log10 score.
    pub fn dequantize_log10(&self, q: u16) -> Result<f64, QuantError> {
        if q > self.c2 {
            return Err(QuantError::OutOfRange { value: q as u32, cap: self.c2 });
        }
        Ok(-(q as f64) / self.scale())
    }
}
