//! Scalar abstraction for the floating-point kernels.
//!
//! Distance fields, mixing weights and inpainting arrival times are all
//! generic over [`Scalar`] so the same code runs in `f32` or `f64`. The
//! pipeline itself is pinned to `f64` through the [`crate::Real`] alias;
//! every documented tolerance assumes that instantiation.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar used by the raster math.
///
/// `round` is inherited from [`Float`] and rounds half away from zero,
/// which is the single rounding rule used everywhere rasters are
/// quantized back to 8-bit channels.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossless conversion from `f64` intermediate computations.
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to any Scalar")
    }

    /// Channel value scaled into the scalar domain.
    fn from_channel(v: u8) -> Self {
        Self::from_f64_lossy(f64::from(v))
    }

    /// Round half away from zero, clamp to the 8-bit channel range.
    fn to_channel(self) -> u8 {
        let r = self.round();
        if r <= Self::zero() {
            0
        } else if r >= Self::from_f64_lossy(255.0) {
            255
        } else {
            r.to_u8().expect("rounded value in 0..=255")
        }
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Round half away from zero to the nearest integer offset.
///
/// `f64::round` already implements this convention; the helper exists so
/// call sites state intent rather than rely on a stdlib detail.
pub fn round_half_away(v: f64) -> i64 {
    v.round() as i64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(round_half_away(0.5), 1);
        assert_eq!(round_half_away(-0.5), -1);
        assert_eq!(round_half_away(2.4), 2);
        assert_eq!(round_half_away(-2.5), -3);
        assert_eq!(round_half_away(0.0), 0);
    }

    #[test]
    fn channel_quantization_clamps_both_rails() {
        assert_eq!(270.0f64.to_channel(), 255);
        assert_eq!((-3.2f64).to_channel(), 0);
        assert_eq!(127.5f64.to_channel(), 128);
        assert_eq!(127.4f32.to_channel(), 127);
    }
}
