//! Software IEEE-754 binary16.
//!
//! Conversions from binary32 round to nearest, ties to even. Subnormals are
//! kept, and every NaN collapses onto one canonical quiet NaN.

use std::cmp::Ordering;
use std::fmt;

/// An IEEE-754 binary16 value stored as its raw bit pattern.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Half(u16);

impl Half {
    pub const ZERO: Half = Half(0x0000);
    pub const NEG_ZERO: Half = Half(0x8000);
    pub const ONE: Half = Half(0x3c00);
    /// 65504, the largest finite magnitude.
    pub const MAX: Half = Half(0x7bff);
    pub const MIN_POSITIVE_SUBNORMAL: Half = Half(0x0001);
    pub const MIN_POSITIVE_NORMAL: Half = Half(0x0400);
    pub const INFINITY: Half = Half(0x7c00);
    pub const NEG_INFINITY: Half = Half(0xfc00);
    /// The canonical quiet NaN every NaN input maps to.
    pub const NAN: Half = Half(0x7e00);

    const SIGN_MASK: u16 = 0x8000;
    const EXP_MASK: u16 = 0x7c00;
    const MAN_MASK: u16 = 0x03ff;

    #[inline]
    pub const fn from_bits(bits: u16) -> Half {
        Half(bits)
    }

    #[inline]
    pub const fn to_bits(self) -> u16 {
        self.0
    }

    /// Nearest binary16 value to `x` (round to nearest, ties to even).
    pub fn from_f32(x: f32) -> Half {
        let bits = x.to_bits();
        let sign = ((bits >> 16) & 0x8000) as u16;
        let biased = ((bits >> 23) & 0xff) as i32;
        let man = bits & 0x007f_ffff;

        if biased == 0xff {
            return if man != 0 {
                Half::NAN
            } else {
                Half(sign | Self::EXP_MASK)
            };
        }

        let exp = biased - 127;
        if exp > 15 {
            return Half(sign | Self::EXP_MASK);
        }

        if exp >= -14 {
            // Normal range. A carry out of the significand bumps the exponent,
            // and a carry out of exponent 30 lands exactly on infinity.
            let kept = (man >> 13) as u16;
            let rest = man & 0x1fff;
            let round_up = rest > 0x1000 || (rest == 0x1000 && kept & 1 == 1);
            let half_exp = ((exp + 15) as u16) << 10;
            return Half(sign | (half_exp + kept + round_up as u16));
        }

        // Below 2^-25 everything rounds to zero; f32 subnormals land here too.
        if exp < -25 {
            return Half(sign);
        }

        // Subnormal result: count units of 2^-24.
        let full = man | 0x0080_0000;
        let shift = (-exp - 1) as u32;
        let kept = full >> shift;
        let rest = full & ((1 << shift) - 1);
        let halfway = 1 << (shift - 1);
        let round_up = rest > halfway || (rest == halfway && kept & 1 == 1);
        Half(sign | (kept as u16 + round_up as u16))
    }

    /// Exact widening to binary32.
    pub fn to_f32(self) -> f32 {
        let sign = ((self.0 & Self::SIGN_MASK) as u32) << 16;
        let exp = ((self.0 & Self::EXP_MASK) >> 10) as u32;
        let man = (self.0 & Self::MAN_MASK) as u32;
        match exp {
            0 => {
                // Subnormal or zero; man * 2^-24 is exact in binary32.
                let magnitude = man as f32 * f32::from_bits(0x3380_0000);
                f32::from_bits(sign | magnitude.to_bits())
            }
            0x1f if man != 0 => f32::NAN,
            0x1f => f32::from_bits(sign | 0x7f80_0000),
            _ => f32::from_bits(sign | ((exp + 127 - 15) << 23) | (man << 13)),
        }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        f64::from(self.to_f32())
    }

    pub fn is_nan(self) -> bool {
        self.0 & Self::EXP_MASK == Self::EXP_MASK && self.0 & Self::MAN_MASK != 0
    }

    pub fn is_infinite(self) -> bool {
        self.0 & !Self::SIGN_MASK == Self::EXP_MASK
    }

    pub fn is_finite(self) -> bool {
        self.0 & Self::EXP_MASK != Self::EXP_MASK
    }

    /// True for ±infinity and NaN, the states a saturated half-precision
    /// accumulation ends up in.
    #[inline]
    pub fn is_overflowed(self) -> bool {
        !self.is_finite()
    }

    pub fn is_zero(self) -> bool {
        self.0 & !Self::SIGN_MASK == 0
    }

    pub fn is_sign_negative(self) -> bool {
        self.0 & Self::SIGN_MASK != 0
    }
}

impl From<Half> for f32 {
    fn from(h: Half) -> f32 {
        h.to_f32()
    }
}

impl PartialOrd for Half {
    fn partial_cmp(&self, other: &Half) -> Option<Ordering> {
        self.to_f32().partial_cmp(&other.to_f32())
    }
}

impl fmt::Debug for Half {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Half({:?} = {:#06x})", self.to_f32(), self.0)
    }
}

impl fmt::Display for Half {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.to_f32(), f)
    }
}

/// Rounds `x` to binary16 and widens it back.
#[inline]
pub fn round_trip(x: f32) -> f32 {
    Half::from_f32(x).to_f32()
}

/// Half-precision conversion that remembers whether any value it produced
/// saturated (overflow) or silently flushed a nonzero input to zero
/// (underflow).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HalfMonitor {
    pub overflow: bool,
    pub underflow: bool,
}

impl HalfMonitor {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn convert(&mut self, x: f32) -> Half {
        let h = Half::from_f32(x);
        if h.is_overflowed() {
            self.overflow = true;
        } else if h.is_zero() && x != 0.0 {
            self.underflow = true;
        }
        h
    }

    pub fn merge(&mut self, other: HalfMonitor) {
        self.overflow |= other.overflow;
        self.underflow |= other.underflow;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn representable_values_are_exact() {
        assert_eq!(Half::from_f32(1.0), Half::ONE);
        assert_eq!(Half::from_f32(65504.0), Half::MAX);
        assert_eq!(Half::from_f32(-2.0).to_bits(), 0xc000);
        assert_eq!(Half::from_f32(0.0), Half::ZERO);
        assert_eq!(Half::from_f32(-0.0), Half::NEG_ZERO);
    }

    #[test]
    fn point_one_rounds_to_nearest() {
        assert_eq!(Half::from_f32(0.1).to_f64(), 0.099_975_585_937_5);
    }

    #[test]
    fn overflow_boundary_ties_to_infinity() {
        assert_eq!(Half::from_f32(65519.996), Half::MAX);
        assert_eq!(Half::from_f32(65520.0), Half::INFINITY);
        assert_eq!(Half::from_f32(-65520.0), Half::NEG_INFINITY);
        assert_eq!(Half::from_f32(1.0e9), Half::INFINITY);
    }

    #[test]
    fn subnormals_survive() {
        let tiny = Half::MIN_POSITIVE_SUBNORMAL.to_f32();
        assert_eq!(tiny, 5.960_464_5e-8);
        assert_eq!(tiny, 2.0f32.powi(-24));
        assert_eq!(Half::from_f32(tiny), Half::MIN_POSITIVE_SUBNORMAL);
        // Exactly half the smallest subnormal ties to even (zero).
        assert_eq!(Half::from_f32(2.0f32.powi(-25)), Half::ZERO);
        assert_eq!(
            Half::from_f32(2.0f32.powi(-25) * 1.5),
            Half::MIN_POSITIVE_SUBNORMAL
        );
        // Largest subnormal rounding up carries into the smallest normal.
        let just_below = Half::MIN_POSITIVE_NORMAL.to_f32() * (1.0 - 2.0f32.powi(-14));
        assert_eq!(Half::from_f32(just_below), Half::MIN_POSITIVE_NORMAL);
    }

    #[test]
    fn nan_is_canonical() {
        assert_eq!(Half::from_f32(f32::NAN), Half::NAN);
        assert_eq!(Half::from_f32(-f32::NAN), Half::NAN);
        assert_eq!(Half::from_f32(f32::from_bits(0x7f80_0001)), Half::NAN);
        assert!(Half::NAN.to_f32().is_nan());
    }

    #[test]
    fn overflow_predicate() {
        assert!(Half::INFINITY.is_overflowed());
        assert!(Half::NEG_INFINITY.is_overflowed());
        assert!(Half::NAN.is_overflowed());
        assert!(!Half::MAX.is_overflowed());
        assert!(Half::from_f32(70000.0).is_overflowed());
    }

    #[test]
    fn monitor_flags() {
        let mut mon = HalfMonitor::new();
        mon.convert(1.0);
        mon.convert(0.0);
        assert_eq!(mon, HalfMonitor::default());
        mon.convert(1.0e-9);
        assert!(mon.underflow && !mon.overflow);
        mon.convert(1.0e6);
        assert!(mon.overflow);
    }

    #[test]
    fn every_finite_pattern_round_trips() {
        for bits in 0..=u16::MAX {
            let h = Half::from_bits(bits);
            if h.is_finite() {
                assert_eq!(Half::from_f32(h.to_f32()), h, "{bits:#06x}");
            }
        }
    }
}
