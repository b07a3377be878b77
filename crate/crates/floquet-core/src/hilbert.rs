//! Projective order-ratio machinery on the standard cone: the bounds
//! m(u/v), M(u/v), the oscillation and the Hilbert projective distance.
//!
//! For the standard cone both bounds reduce to coordinate-ratio extrema over
//! the support of v, with explicit absence when the defining set of scalars
//! is empty. Absent bounds are reported as `None`, never as infinities.

use crate::error::{CoreError, Result};
use crate::ordered::ConeVector;

/// m(u/v) = sup{a: a v <= u} and M(u/v) = inf{a: u <= a v}, when they exist.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatioBounds {
    lower: Option<f64>,
    upper: Option<f64>,
}

impl RatioBounds {
    pub fn lower(&self) -> Option<f64> {
        self.lower
    }

    pub fn upper(&self) -> Option<f64> {
        self.upper
    }

    /// M - m, when both bounds exist.
    pub fn oscillation(&self) -> Option<f64> {
        match (self.lower, self.upper) {
            (Some(m), Some(mm)) => Some(mm - m),
            _ => None,
        }
    }

    /// Comparability: a positive lower bound together with a finite upper one.
    pub fn comparable(&self) -> bool {
        matches!((self.lower, self.upper), (Some(m), Some(_)) if m > 0.0)
    }
}

/// Coordinate-ratio evaluation of the order bounds of u over v.
///
/// v must be a nonzero cone vector; u may be any nonzero vector. A bound is
/// absent exactly when its defining scalar set is empty, which on the
/// standard cone happens only through the zero coordinates of v.
pub fn ratio_bounds(u: &ConeVector, v: &ConeVector) -> Result<RatioBounds> {
    if u.dim() != v.dim() {
        return Err(CoreError::DimensionMismatch {
            expected: v.dim(),
            got: u.dim(),
        });
    }
    if v.is_zero() {
        return Err(CoreError::ZeroVector);
    }
    if !v.in_cone() {
        return Err(CoreError::NotComparable);
    }
    if u.is_zero() {
        return Err(CoreError::ZeroVector);
    }

    let mut lower = f64::INFINITY;
    let mut upper = f64::NEG_INFINITY;
    let mut lower_ok = true;
    let mut upper_ok = true;
    for (&ui, &vi) in u.as_slice().iter().zip(v.as_slice()) {
        if vi > 0.0 {
            let r = ui / vi;
            lower = lower.min(r);
            upper = upper.max(r);
        } else {
            // a*0 <= u_i needs u_i >= 0; u_i <= a*0 needs u_i <= 0.
            if ui < 0.0 {
                lower_ok = false;
            }
            if ui > 0.0 {
                upper_ok = false;
            }
        }
    }
    Ok(RatioBounds {
        lower: lower_ok.then_some(lower),
        upper: upper_ok.then_some(upper),
    })
}

/// osc(u/v) = M(u/v) - m(u/v).
pub fn oscillation(u: &ConeVector, v: &ConeVector) -> Result<f64> {
    let rb = ratio_bounds(u, v)?;
    match (rb.lower, rb.upper) {
        (Some(m), Some(mm)) => Ok(mm - m),
        (None, _) => Err(CoreError::AbsentBound { side: "lower" }),
        (_, None) => Err(CoreError::AbsentBound { side: "upper" }),
    }
}

/// Hilbert projective distance d(u,v) = ln(M(u/v)/m(u/v)) for comparable u, v.
pub fn proj_distance(u: &ConeVector, v: &ConeVector) -> Result<f64> {
    let rb = ratio_bounds(u, v)?;
    if !rb.comparable() {
        return Err(CoreError::NotComparable);
    }
    let m = rb.lower.unwrap();
    let mm = rb.upper.unwrap();
    Ok((mm / m).ln())
}

/// u ~ v: each bounds the other up to positive scalars.
pub fn comparable(u: &ConeVector, v: &ConeVector) -> bool {
    matches!(ratio_bounds(u, v), Ok(rb) if rb.comparable())
}
