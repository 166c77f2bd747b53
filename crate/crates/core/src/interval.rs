//! Real intervals with per-endpoint inclusivity.
//!
//! Tree splits induce half-open regions (`x <= t` goes left, `x > t` goes
//! right) and perturbation sets are open, so a plain closed interval would
//! over-approximate at every boundary. Each endpoint therefore carries its own
//! inclusivity flag. Infinite endpoints are always exclusive.

use core::fmt;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
    lo_closed: bool,
    hi_closed: bool,
}

impl Interval {
    /// The canonical empty interval. Every operation that produces an empty
    /// result returns exactly this value, so empties compare equal.
    pub const EMPTY: Interval = Interval {
        lo: f64::INFINITY,
        hi: f64::NEG_INFINITY,
        lo_closed: false,
        hi_closed: false,
    };

    /// `(-inf, +inf)`.
    pub const UNBOUNDED: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
        lo_closed: false,
        hi_closed: false,
    };

    /// Builds an interval, normalising infinite endpoints to exclusive and any
    /// empty result to [`Interval::EMPTY`].
    ///
    /// # Panics
    ///
    /// Panics if either endpoint is NaN.
    pub fn new(lo: f64, lo_closed: bool, hi: f64, hi_closed: bool) -> Self {
        assert!(!lo.is_nan() && !hi.is_nan(), "interval endpoint is NaN");
        let iv = Interval {
            lo,
            hi,
            lo_closed: lo_closed && lo.is_finite(),
            hi_closed: hi_closed && hi.is_finite(),
        };
        if iv.is_empty() {
            Interval::EMPTY
        } else {
            iv
        }
    }

    pub fn closed(lo: f64, hi: f64) -> Self {
        Self::new(lo, true, hi, true)
    }

    pub fn open(lo: f64, hi: f64) -> Self {
        Self::new(lo, false, hi, false)
    }

    pub fn point(v: f64) -> Self {
        Self::new(v, true, v, true)
    }

    /// `(-inf, t]`, the left side of a split on threshold `t`.
    pub fn at_most(t: f64) -> Self {
        Self::new(f64::NEG_INFINITY, false, t, true)
    }

    /// `(t, +inf)`, the right side of a split on threshold `t`.
    pub fn greater_than(t: f64) -> Self {
        Self::new(t, false, f64::INFINITY, false)
    }

    #[inline]
    pub fn lo(&self) -> f64 {
        self.lo
    }

    #[inline]
    pub fn hi(&self) -> f64 {
        self.hi
    }

    #[inline]
    pub fn lo_closed(&self) -> bool {
        self.lo_closed
    }

    #[inline]
    pub fn hi_closed(&self) -> bool {
        self.hi_closed
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        !(self.lo < self.hi || (self.lo == self.hi && self.lo_closed && self.hi_closed))
    }

    /// Returns the value if the interval holds exactly one point.
    pub fn as_point(&self) -> Option<f64> {
        (self.lo == self.hi && self.lo_closed && self.hi_closed).then_some(self.lo)
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn width(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.hi - self.lo
        }
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        (x > self.lo || (x == self.lo && self.lo_closed)) && (x < self.hi || (x == self.hi && self.hi_closed))
    }

    /// Exact intersection. An endpoint of the result is inclusive only if it
    /// is inclusive in every operand that defines it.
    pub fn meet(&self, other: &Interval) -> Interval {
        let (lo, lo_closed) = if self.lo > other.lo {
            (self.lo, self.lo_closed)
        } else if other.lo > self.lo {
            (other.lo, other.lo_closed)
        } else {
            (self.lo, self.lo_closed && other.lo_closed)
        };
        let (hi, hi_closed) = if self.hi < other.hi {
            (self.hi, self.hi_closed)
        } else if other.hi < self.hi {
            (other.hi, other.hi_closed)
        } else {
            (self.hi, self.hi_closed && other.hi_closed)
        };
        Interval::new(lo, lo_closed, hi, hi_closed)
    }

    /// Smallest interval containing both operands. Empty operands are
    /// identities.
    pub fn hull(&self, other: &Interval) -> Interval {
        if self.is_empty() {
            return *other;
        }
        if other.is_empty() {
            return *self;
        }
        let (lo, lo_closed) = if self.lo < other.lo {
            (self.lo, self.lo_closed)
        } else if other.lo < self.lo {
            (other.lo, other.lo_closed)
        } else {
            (self.lo, self.lo_closed || other.lo_closed)
        };
        let (hi, hi_closed) = if self.hi > other.hi {
            (self.hi, self.hi_closed)
        } else if other.hi > self.hi {
            (other.hi, other.hi_closed)
        } else {
            (self.hi, self.hi_closed || other.hi_closed)
        };
        Interval::new(lo, lo_closed, hi, hi_closed)
    }

    pub fn intersects(&self, other: &Interval) -> bool {
        !self.meet(other).is_empty()
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        if self.is_empty() {
            return true;
        }
        let lo_ok = other.lo < self.lo || (other.lo == self.lo && (other.lo_closed || !self.lo_closed));
        let hi_ok = other.hi > self.hi || (other.hi == self.hi && (other.hi_closed || !self.hi_closed));
        lo_ok && hi_ok
    }

    /// Minkowski sum. An endpoint of the sum is attained only if both summed
    /// endpoints are attained.
    pub fn add(&self, other: &Interval) -> Interval {
        if self.is_empty() || other.is_empty() {
            return Interval::EMPTY;
        }
        Interval::new(
            self.lo + other.lo,
            self.lo_closed && other.lo_closed,
            self.hi + other.hi,
            self.hi_closed && other.hi_closed,
        )
    }

    /// Translation by a constant.
    pub fn shift(&self, by: f64) -> Interval {
        if self.is_empty() {
            return Interval::EMPTY;
        }
        Interval::new(self.lo + by, self.lo_closed, self.hi + by, self.hi_closed)
    }

    /// Division of both endpoints by a positive constant.
    pub fn div(&self, divisor: f64) -> Interval {
        debug_assert!(divisor > 0.0);
        if self.is_empty() {
            return Interval::EMPTY;
        }
        Interval::new(self.lo / divisor, self.lo_closed, self.hi / divisor, self.hi_closed)
    }

    /// A member of the interval: the midpoint when both ends are finite,
    /// otherwise the finite endpoint (or zero when unbounded on both sides),
    /// stepped inward by one ulp off exclusive endpoints.
    pub fn interior_point(&self) -> Option<f64> {
        if self.is_empty() {
            return None;
        }
        let mut c = match (self.lo.is_finite(), self.hi.is_finite()) {
            (true, true) => self.lo / 2.0 + self.hi / 2.0,
            (true, false) => self.lo,
            (false, true) => self.hi,
            (false, false) => 0.0,
        };
        if c <= self.lo && !self.contains(c) {
            c = self.lo.next_up();
        }
        if c >= self.hi && !self.contains(c) {
            c = self.hi.next_down();
        }
        debug_assert!(self.contains(c));
        Some(c)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("{}");
        }
        let open = if self.lo_closed { '[' } else { '(' };
        let close = if self.hi_closed { ']' } else { ')' };
        write!(f, "{open}{:?}, {:?}{close}", self.lo, self.hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn meet_respects_inclusivity() {
        assert_eq!(
            Interval::closed(0.0, 2.0).meet(&Interval::closed(1.0, 3.0)),
            Interval::closed(1.0, 2.0)
        );
        let half_open = Interval::new(1.0, false, 2.0, true);
        assert!(Interval::closed(0.0, 1.0).meet(&half_open).is_empty());
        assert_eq!(Interval::closed(0.0, 1.0).meet(&half_open), Interval::EMPTY);
    }

    #[test]
    fn infinite_endpoints_are_exclusive() {
        let iv = Interval::new(f64::NEG_INFINITY, true, 3.0, true);
        assert!(!iv.lo_closed());
        assert!(iv.contains(3.0));
        assert!(!iv.contains(f64::NEG_INFINITY));
    }

    #[test]
    fn hull_treats_empty_as_identity() {
        let b = Interval::closed(2.0, 3.0);
        assert_eq!(Interval::EMPTY.hull(&b), b);
        assert_eq!(Interval::closed(0.0, 1.0).hull(&b), Interval::closed(0.0, 3.0));
    }

    #[test]
    fn contains_boundaries() {
        assert!(Interval::closed(0.0, 1.0).contains(1.0));
        assert!(!Interval::new(0.0, false, 1.0, true).contains(0.0));
        assert!(Interval::new(0.0, false, 1.0, true).contains(1.0));
    }

    #[test]
    fn interior_point_nudges_off_open_ends() {
        assert_eq!(Interval::new(2.0, false, 3.0, true).interior_point(), Some(2.5));
        assert_eq!(Interval::point(1.0).interior_point(), Some(1.0));
        let tight = Interval::open(1.0, 1.0f64.next_up().next_up());
        assert_eq!(tight.interior_point(), Some(1.0f64.next_up()));
        assert_eq!(Interval::at_most(0.0).interior_point(), Some(0.0));
        assert_eq!(Interval::greater_than(0.0).interior_point(), Some(0.0f64.next_up()));
        assert_eq!(Interval::UNBOUNDED.interior_point(), Some(0.0));
        assert_eq!(Interval::EMPTY.interior_point(), None);
    }

    fn arb_interval() -> impl Strategy<Value = Interval> {
        (-8i32..8, 0i32..6, any::<bool>(), any::<bool>(), 0u8..10).prop_map(|(lo, w, lc, hc, inf)| {
            let lo = if inf == 0 { f64::NEG_INFINITY } else { lo as f64 * 0.5 };
            let hi = if inf == 1 {
                f64::INFINITY
            } else {
                (lo.max(-8.0)) + w as f64 * 0.5
            };
            Interval::new(lo, lc, hi, hc)
        })
    }

    proptest! {
        #[test]
        fn meet_is_exact(a in arb_interval(), b in arb_interval(), x in -10i32..10) {
            let x = x as f64 * 0.25;
            prop_assert_eq!(a.meet(&b).contains(x), a.contains(x) && b.contains(x));
        }

        #[test]
        fn hull_is_an_upper_bound(a in arb_interval(), b in arb_interval()) {
            let h = a.hull(&b);
            prop_assert!(a.is_subset_of(&h));
            prop_assert!(b.is_subset_of(&h));
        }

        #[test]
        fn add_contains_pointwise_sums(a in arb_interval(), b in arb_interval(),
                                       x in -10i32..10, y in -10i32..10) {
            let (x, y) = (x as f64 * 0.25, y as f64 * 0.25);
            if a.contains(x) && b.contains(y) {
                prop_assert!(a.add(&b).contains(x + y));
            }
        }

        #[test]
        fn interior_point_is_member(a in arb_interval()) {
            match a.interior_point() {
                Some(c) => prop_assert!(a.contains(c)),
                None => prop_assert!(a.is_empty()),
            }
        }
    }
}
