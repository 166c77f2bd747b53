//! Hyperrectangles: the abstract domain shared by inputs and outputs.
//!
//! Abstraction of a finite point set is [`HyperRect::from_points`];
//! concretization is exposed only as the membership predicate
//! [`HyperRect::contains`] plus corner extraction for closed boxes.

use alloc::vec::Vec;
use core::fmt;

use crate::error::{check_dim, Error};
use crate::interval::Interval;

#[derive(Clone, Debug, PartialEq)]
pub struct HyperRect {
    dims: Vec<Interval>,
}

impl HyperRect {
    pub fn new(dims: Vec<Interval>) -> Self {
        HyperRect { dims }
    }

    /// The whole space of dimension `n`.
    pub fn unbounded(n: usize) -> Self {
        HyperRect {
            dims: alloc::vec![Interval::UNBOUNDED; n],
        }
    }

    /// Closed box `[lo_i, hi_i]` per dimension.
    pub fn closed(lo: &[f64], hi: &[f64]) -> Result<Self, Error> {
        check_dim(lo.len(), hi.len())?;
        Ok(HyperRect {
            dims: lo.iter().zip(hi).map(|(&l, &h)| Interval::closed(l, h)).collect(),
        })
    }

    /// Degenerate box holding one point.
    pub fn point(x: &[f64]) -> Self {
        HyperRect {
            dims: x.iter().map(|&v| Interval::point(v)).collect(),
        }
    }

    /// Smallest closed box containing every point.
    pub fn from_points<P: AsRef<[f64]>>(points: &[P]) -> Result<Self, Error> {
        let (first, rest) = points.split_first().ok_or(Error::NoPoints)?;
        let first = first.as_ref();
        let mut lo = first.to_vec();
        let mut hi = first.to_vec();
        for p in rest {
            let p = p.as_ref();
            check_dim(lo.len(), p.len())?;
            for (i, &v) in p.iter().enumerate() {
                if v < lo[i] {
                    lo[i] = v;
                }
                if v > hi[i] {
                    hi[i] = v;
                }
            }
        }
        HyperRect::closed(&lo, &hi)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    #[inline]
    pub fn intervals(&self) -> &[Interval] {
        &self.dims
    }

    #[inline]
    pub fn interval(&self, i: usize) -> &Interval {
        &self.dims[i]
    }

    pub fn into_intervals(self) -> Vec<Interval> {
        self.dims
    }

    pub fn is_empty(&self) -> bool {
        self.dims.iter().any(Interval::is_empty)
    }

    /// The point held by a singleton box.
    pub fn as_point(&self) -> Option<Vec<f64>> {
        self.dims.iter().map(Interval::as_point).collect()
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool, Error> {
        check_dim(self.dim(), x.len())?;
        Ok(self.contains_unchecked(x))
    }

    #[inline]
    pub(crate) fn contains_unchecked(&self, x: &[f64]) -> bool {
        self.dims.iter().zip(x).all(|(iv, &v)| iv.contains(v))
    }

    /// Exact intersection.
    pub fn meet(&self, other: &HyperRect) -> Result<HyperRect, Error> {
        check_dim(self.dim(), other.dim())?;
        Ok(HyperRect {
            dims: self.dims.iter().zip(&other.dims).map(|(a, b)| a.meet(b)).collect(),
        })
    }

    /// Component-wise hull; empty boxes are identities.
    pub fn join(&self, other: &HyperRect) -> Result<HyperRect, Error> {
        check_dim(self.dim(), other.dim())?;
        if self.is_empty() {
            return Ok(other.clone());
        }
        if other.is_empty() {
            return Ok(self.clone());
        }
        Ok(HyperRect {
            dims: self.dims.iter().zip(&other.dims).map(|(a, b)| a.hull(b)).collect(),
        })
    }

    pub fn is_subset_of(&self, other: &HyperRect) -> Result<bool, Error> {
        check_dim(self.dim(), other.dim())?;
        if self.is_empty() {
            return Ok(true);
        }
        Ok(self.dims.iter().zip(&other.dims).all(|(a, b)| a.is_subset_of(b)))
    }

    /// All `2^n` corners of a non-empty box with finite bounds. Corners on
    /// exclusive endpoints are included; they are limit points, not members.
    pub fn corners(&self) -> Option<Vec<Vec<f64>>> {
        if self.is_empty() || !self.dims.iter().all(Interval::is_bounded) {
            return None;
        }
        let n = self.dim();
        let mut out = Vec::with_capacity(1 << n);
        for mask in 0u64..(1u64 << n) {
            out.push(
                self.dims
                    .iter()
                    .enumerate()
                    .map(|(i, iv)| if mask >> i & 1 == 0 { iv.lo() } else { iv.hi() })
                    .collect(),
            );
        }
        Some(out)
    }

    /// A member point; see [`Interval::interior_point`].
    pub fn interior_point(&self) -> Option<Vec<f64>> {
        self.dims.iter().map(Interval::interior_point).collect()
    }

    pub(crate) fn set(&mut self, i: usize, iv: Interval) {
        self.dims[i] = iv;
    }
}

impl From<Vec<Interval>> for HyperRect {
    fn from(dims: Vec<Interval>) -> Self {
        HyperRect { dims }
    }
}

impl fmt::Display for HyperRect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, iv) in self.dims.iter().enumerate() {
            if i > 0 {
                f.write_str(" x ")?;
            }
            write!(f, "{iv}")?;
        }
        f.write_str(")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn from_points_singleton_and_hull() {
        let b = HyperRect::from_points(&[[1.0, 2.0]]).unwrap();
        assert_eq!(b, HyperRect::new(vec![Interval::point(1.0), Interval::point(2.0)]));
        let b = HyperRect::from_points(&[[0.0, 0.0], [1.0, 2.0]]).unwrap();
        assert_eq!(b, HyperRect::closed(&[0.0, 0.0], &[1.0, 2.0]).unwrap());
        let none: [[f64; 2]; 0] = [];
        assert_eq!(HyperRect::from_points(&none), Err(Error::NoPoints));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let a = HyperRect::unbounded(2);
        let b = HyperRect::unbounded(3);
        assert_eq!(a.meet(&b), Err(Error::DimensionMismatch { expected: 2, found: 3 }));
        assert!(a.join(&b).is_err());
        assert!(a.contains(&[0.0]).is_err());
    }

    #[test]
    fn join_with_empty_is_identity() {
        let b = HyperRect::closed(&[2.0], &[3.0]).unwrap();
        let empty = HyperRect::new(vec![Interval::EMPTY]);
        assert_eq!(empty.join(&b).unwrap(), b);
        assert_eq!(
            HyperRect::closed(&[0.0], &[1.0]).unwrap().join(&b).unwrap(),
            HyperRect::closed(&[0.0], &[3.0]).unwrap()
        );
    }

    #[test]
    fn box_contains_its_midpoint() {
        let b = HyperRect::new(vec![Interval::new(0.0, false, 1.0, true), Interval::closed(-3.0, 7.0)]);
        let mid = b.interior_point().unwrap();
        assert_eq!(mid, vec![0.5, 2.0]);
        assert!(b.contains(&mid).unwrap());
    }

    #[test]
    fn corners_reabstract_to_same_box() {
        let b = HyperRect::closed(&[0.0, -1.0, 4.0], &[1.0, 2.0, 4.0]).unwrap();
        let corners = b.corners().unwrap();
        assert_eq!(corners.len(), 8);
        assert_eq!(HyperRect::from_points(&corners).unwrap(), b);
    }
}
