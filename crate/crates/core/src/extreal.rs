//! Reals extended with −∞.
//!
//! `ExtReal` is the value type of the information state: an entry is −∞
//! exactly when no history consistent with the observations reaches the
//! corresponding hypothesis. The carrier is an `f64` that is never NaN and
//! never +∞, which makes the order total.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;

use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq, Default)]
pub struct ExtReal(f64);

impl ExtReal {
    pub const NEG_INFINITY: ExtReal = ExtReal(f64::NEG_INFINITY);
    pub const ZERO: ExtReal = ExtReal(0.0);

    /// Rejects NaN and +∞.
    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() || value == f64::INFINITY {
            return Err(Error::InvalidArgument(format!(
                "extended real must be finite or -inf, got {value}"
            )));
        }
        Ok(ExtReal(value))
    }

    /// Wraps a finite value. Panics on NaN or +∞.
    pub fn finite(value: f64) -> Self {
        assert!(value.is_finite(), "ExtReal::finite called with {value}");
        ExtReal(value)
    }

    /// Wraps a raw kernel output; anything that is not a finite number
    /// collapses to −∞.
    pub(crate) fn from_kernel(value: f64) -> Self {
        if value.is_finite() {
            ExtReal(value)
        } else {
            ExtReal::NEG_INFINITY
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }

    #[inline]
    pub fn is_neg_infinity(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    pub fn max(self, other: ExtReal) -> ExtReal {
        if self >= other {
            self
        } else {
            other
        }
    }

    /// Max over an iterator; −∞ for an empty one.
    pub fn max_of<I: IntoIterator<Item = ExtReal>>(iter: I) -> ExtReal {
        iter.into_iter().fold(ExtReal::NEG_INFINITY, ExtReal::max)
    }
}

impl Eq for ExtReal {}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtReal {
    fn cmp(&self, other: &Self) -> Ordering {
        // NaN is excluded by construction.
        self.0.partial_cmp(&other.0).unwrap_or(Ordering::Equal)
    }
}

/// Shift by a finite amount; −∞ absorbs.
impl Add<f64> for ExtReal {
    type Output = ExtReal;

    fn add(self, rhs: f64) -> ExtReal {
        debug_assert!(rhs.is_finite());
        if self.is_neg_infinity() {
            self
        } else {
            ExtReal(self.0 + rhs)
        }
    }
}

impl From<ExtReal> for f64 {
    fn from(value: ExtReal) -> f64 {
        value.0
    }
}

impl fmt::Debug for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_neg_infinity() {
            write!(f, "-inf")
        } else {
            write!(f, "{:?}", self.0)
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_neg_infinity() {
            write!(f, "-inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nan_and_pos_inf() {
        assert!(ExtReal::new(f64::NAN).is_err());
        assert!(ExtReal::new(f64::INFINITY).is_err());
        assert!(ExtReal::new(f64::NEG_INFINITY).unwrap().is_neg_infinity());
    }

    #[test]
    fn neg_infinity_absorbs_shift() {
        assert!((ExtReal::NEG_INFINITY + 5.0).is_neg_infinity());
        assert_eq!(ExtReal::finite(1.0) + 2.0, ExtReal::finite(3.0));
    }

    #[test]
    fn max_of_empty_is_neg_infinity() {
        assert!(ExtReal::max_of(std::iter::empty()).is_neg_infinity());
        let m = ExtReal::max_of([ExtReal::NEG_INFINITY, ExtReal::finite(-2.0)]);
        assert_eq!(m.value(), -2.0);
    }
}
