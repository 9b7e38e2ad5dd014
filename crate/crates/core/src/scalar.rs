//! Scalar abstraction shared by the scoring code.
//!
//! Coverage and sufficiency scores are ratios of small counts, so they can be
//! computed exactly with [`num_rational::Ratio`] or approximately with `f32`
//! / `f64`. Distribution statistics in the monitor need transcendental
//! functions and are restricted to the floating point [`Real`] subset.

use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::{Float, FromPrimitive, Num};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Numeric type a score can be computed in.
pub trait Scalar: Num + Clone + PartialOrd + Debug + Send + Sync + 'static {
    /// `num / den`, with `den > 0`.
    fn ratio(num: usize, den: usize) -> Self;

    fn half() -> Self {
        Self::ratio(1, 2)
    }

    fn to_f64_lossy(&self) -> f64;

    /// Half-up rounding to `places` decimals, for display only.
    fn round_half_up(&self, places: u32) -> f64;
}

fn round_float_half_up(x: f64, places: u32) -> f64 {
    let scale = 10f64.powi(places as i32);
    // Absorb representation error so 0.125 rounds like the decimal it came from.
    let scaled = x * scale;
    let nudged = scaled + scaled.abs() * 4.0 * f64::EPSILON;
    (nudged + 0.5).floor() / scale
}

impl Scalar for f64 {
    fn ratio(num: usize, den: usize) -> Self {
        num as f64 / den as f64
    }

    fn to_f64_lossy(&self) -> f64 {
        *self
    }

    fn round_half_up(&self, places: u32) -> f64 {
        round_float_half_up(*self, places)
    }
}

impl Scalar for f32 {
    fn ratio(num: usize, den: usize) -> Self {
        num as f32 / den as f32
    }

    fn to_f64_lossy(&self) -> f64 {
        // Go through the shortest decimal so 0.83f32 displays as 0.83.
        format!("{self}").parse().unwrap_or(*self as f64)
    }

    fn round_half_up(&self, places: u32) -> f64 {
        round_float_half_up(self.to_f64_lossy(), places)
    }
}

impl Scalar for Ratio<i64> {
    fn ratio(num: usize, den: usize) -> Self {
        Ratio::new(num as i64, den as i64)
    }

    fn to_f64_lossy(&self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }

    fn round_half_up(&self, places: u32) -> f64 {
        let scale = 10i64.pow(places);
        let scaled = self * Ratio::from_integer(scale);
        let rounded = (scaled + Ratio::new(1, 2)).floor();
        *rounded.numer() as f64 / scale as f64
    }
}

/// Floating point scalars usable for distribution statistics.
pub trait Real: Scalar + Float + FromPrimitive + Serialize + DeserializeOwned {}

impl Real for f32 {}
impl Real for f64 {}
