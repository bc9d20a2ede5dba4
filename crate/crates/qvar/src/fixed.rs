//! Unsigned fixed-point register codes.

use crate::error::{QvarError, Result};
use serde::{Deserialize, Serialize};

/// Codes c in [0, 2^(int+frac)) representing c * 2^-frac.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedPointCode {
    pub frac_bits: usize,
    pub int_bits: usize,
}

impl FixedPointCode {
    pub fn new(frac_bits: usize, int_bits: usize) -> Result<Self> {
        if frac_bits + int_bits == 0 || frac_bits + int_bits > 52 {
            return Err(QvarError::InvalidParam(format!(
                "fixed-point width {} out of range",
                frac_bits + int_bits
            )));
        }
        Ok(Self { frac_bits, int_bits })
    }

    /// Smallest code able to hold `max_value` with `frac_bits` fractional bits.
    pub fn covering(frac_bits: usize, max_value: f64) -> Result<Self> {
        let mut int_bits = 0;
        while (1u64 << int_bits) as f64 - 2f64.powi(-(frac_bits as i32)) < max_value {
            int_bits += 1;
            if int_bits > 40 {
                return Err(QvarError::InvalidParam(format!("value {max_value} too large")));
            }
        }
        Self::new(frac_bits, int_bits)
    }

    pub fn width(&self) -> usize {
        self.frac_bits + self.int_bits
    }

    pub fn step(&self) -> f64 {
        2f64.powi(-(self.frac_bits as i32))
    }

    pub fn max_code(&self) -> u64 {
        (1u64 << self.width()) - 1
    }

    pub fn range_max(&self) -> f64 {
        self.decode(self.max_code())
    }

    /// Round-to-nearest (ties away from zero); rejects values outside the range.
    pub fn quantize(&self, x: f64) -> Result<u64> {
        if !x.is_finite() || x < -0.5 * self.step() || x > self.range_max() + 0.5 * self.step() {
            return Err(QvarError::FixedPointOverflow { value: x, range_max: self.range_max() });
        }
        let c = (x / self.step()).round().max(0.0) as u64;
        Ok(c.min(self.max_code()))
    }

    /// Round-to-nearest with saturation at both ends.
    pub fn quantize_saturating(&self, x: f64) -> u64 {
        let c = (x / self.step()).round();
        if !(c > 0.0) {
            0
        } else {
            (c as u64).min(self.max_code())
        }
    }

    pub fn decode(&self, code: u64) -> f64 {
        code as f64 * self.step()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantization_error_is_half_step() {
        let c = FixedPointCode::new(6, 3).unwrap();
        for i in 0..500 {
            let x = i as f64 * 0.0137;
            let q = c.quantize(x).unwrap();
            assert!((c.decode(q) - x).abs() <= 0.5 * c.step() + 1e-15);
        }
        assert_eq!(c.range_max(), 8.0 - 1.0 / 64.0);
        assert!(c.quantize(8.5).is_err());
    }

    #[test]
    fn covering_picks_minimal_integer_bits() {
        assert_eq!(FixedPointCode::covering(4, 0.5).unwrap().int_bits, 0);
        assert_eq!(FixedPointCode::covering(4, 1.0).unwrap().int_bits, 1);
        assert_eq!(FixedPointCode::covering(4, 4.0).unwrap().int_bits, 3);
    }

    #[test]
    fn saturating_clamps() {
        let c = FixedPointCode::new(3, 0).unwrap();
        assert_eq!(c.quantize_saturating(1.0), 7);
        assert_eq!(c.quantize_saturating(-0.2), 0);
        assert_eq!(c.quantize_saturating(0.5), 4);
    }
}
