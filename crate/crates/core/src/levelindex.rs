//! Radii in (0, 1] that may be far below the smallest positive `f64`.
//!
//! A radius r is stored through x = -ln r in level-index form: x = psi(s) with
//! psi(s) = s on [0, 1) and psi(s) = exp(psi(s - 1)) for s >= 1.  This keeps
//! r = exp(-exp(exp(3000))) representable, and exposes x, ln x and ln ln x
//! directly whenever they fit in an `f64`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

/// psi(s): the generalized exponential used by level-index arithmetic.
pub fn psi(s: f64) -> f64 {
    if s < 1.0 {
        s
    } else {
        psi(s - 1.0).exp()
    }
}

/// Inverse of [`psi`] on [0, inf].
pub fn psi_inv(x: f64) -> f64 {
    if x < 1.0 {
        x.max(0.0)
    } else if x.is_infinite() {
        f64::INFINITY
    } else {
        1.0 + psi_inv(x.ln())
    }
}

/// psi_inv(exp(l)) without forming exp(l).
fn psi_inv_exp(l: f64) -> f64 {
    if l < 0.0 {
        l.exp()
    } else {
        1.0 + psi_inv(l)
    }
}

/// Largest value kept in a tier before moving to the next logarithm.
const TIER_LIMIT: f64 = 1e300;

/// A radius in (0, 1].
///
/// Stored as the first of x = -ln r, y = ln x, w = ln y that fits below
/// `TIER_LIMIT`, so ordinary and moderately deep radii keep full precision.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Radius {
    tier: u8,
    v: f64,
}

impl Radius {
    pub const ONE: Radius = Radius { tier: 0, v: 0.0 };

    /// Ordinary radius, clamped to (0, 1].
    pub fn new(r: f64) -> Radius {
        assert!(r > 0.0, "radius must be positive, got {r}");
        Radius::from_neg_log((-r.ln()).max(0.0))
    }

    /// Radius with -ln r = x.
    pub fn from_neg_log(x: f64) -> Radius {
        let x = x.max(0.0);
        if x < TIER_LIMIT {
            Radius { tier: 0, v: x }
        } else {
            Radius::from_neg_loglog(x.ln())
        }
    }

    /// Radius with ln(-ln r) = y.
    pub fn from_neg_loglog(y: f64) -> Radius {
        if y < 690.0 {
            Radius::from_neg_log(y.exp())
        } else if y < TIER_LIMIT {
            Radius { tier: 1, v: y }
        } else {
            Radius::from_neg_logloglog(y.ln())
        }
    }

    /// Radius with ln ln(-ln r) = w.
    pub fn from_neg_logloglog(w: f64) -> Radius {
        if w < 690.0 {
            Radius::from_neg_loglog(w.exp())
        } else {
            Radius { tier: 2, v: w }
        }
    }

    /// Radius at level-index coordinate s (x = psi(s)).
    pub fn from_level(s: f64) -> Radius {
        let s = s.max(0.0);
        if s < 3.0 {
            Radius::from_neg_log(psi(s))
        } else if s < 4.0 {
            Radius::from_neg_loglog(psi(s - 1.0))
        } else {
            Radius::from_neg_logloglog(psi(s - 2.0))
        }
    }

    /// Level-index coordinate; increases as the radius shrinks.
    pub fn level(self) -> f64 {
        match self.tier {
            0 => psi_inv(self.v),
            1 => psi_inv_exp(self.v),
            _ => 1.0 + psi_inv_exp(self.v),
        }
    }

    /// r itself; 0 once it underflows.
    pub fn value(self) -> f64 {
        (-self.neg_log()).exp()
    }

    /// x = -ln r (may be +inf).
    pub fn neg_log(self) -> f64 {
        match self.tier {
            0 => self.v,
            _ => f64::INFINITY,
        }
    }

    /// y = ln x (may be -inf or +inf).
    pub fn neg_loglog(self) -> f64 {
        match self.tier {
            0 => self.v.ln(),
            1 => self.v,
            _ => f64::INFINITY,
        }
    }

    /// w = ln y; NaN when x < 1.
    pub fn neg_logloglog(self) -> f64 {
        match self.tier {
            0 => self.v.ln().ln(),
            1 => self.v.ln(),
            _ => self.v,
        }
    }

    /// ln(1 + x), finite unless the radius is in the deepest tier.
    pub fn ln_one_plus_neg_log(self) -> f64 {
        match self.tier {
            0 => self.v.ln_1p(),
            _ => {
                let y = self.neg_loglog();
                y + (-y).exp().ln_1p()
            }
        }
    }

    /// The radius q * r for q in (0, 1].
    pub fn scaled(self, q: f64) -> Radius {
        assert!(q > 0.0 && q <= 1.0, "scale factor must lie in (0, 1], got {q}");
        self.deeper_by(-q.ln())
    }

    /// The radius exp(-d) * r for d >= 0.
    pub fn deeper_by(self, d: f64) -> Radius {
        match self.tier {
            0 => Radius::from_neg_log(self.v + d),
            // d / x is far below the precision of y or w
            _ => self,
        }
    }

    /// ln(self / other) = x_other - x_self; +inf once the gap is not resolvable.
    pub fn log_ratio(self, other: Radius) -> f64 {
        if self.tier == 0 && other.tier == 0 {
            other.v - self.v
        } else if self == other {
            0.0
        } else if other < self {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Point at fraction t between `self` (t = 0) and `other` (t = 1), in level-index.
    pub fn lerp(self, other: Radius, t: f64) -> Radius {
        if self.tier == other.tier && self.tier > 0 {
            return Radius { tier: self.tier, v: self.v + t * (other.v - self.v) };
        }
        let (a, b) = (self.level(), other.level());
        Radius::from_level(a + t * (b - a))
    }
}

impl PartialOrd for Radius {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match other.tier.cmp(&self.tier) {
            Ordering::Equal => other.v.partial_cmp(&self.v),
            o => Some(o),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psi_round_trip() {
        for &x in &[0.0, 0.3, 1.0, 2.5, 17.0, 1e10, 1e300] {
            let back = psi(psi_inv(x));
            assert!((back - x).abs() <= 1e-12 * x.max(1.0), "{x} -> {back}");
        }
    }

    #[test]
    fn ordinary_radii_round_trip() {
        for &r in &[1.0, 0.5, 0.0586, 1e-5, 1e-200] {
            let v = Radius::new(r).value();
            assert!((v - r).abs() <= 1e-12 * r, "{r} -> {v}");
        }
    }

    #[test]
    fn level_coordinate_round_trip() {
        for &s in &[0.0, 0.5, 1.7, 2.9, 3.5, 4.2, 5.8, 6.5] {
            let back = Radius::from_level(s).level();
            assert!((back - s).abs() < 1e-9, "{s} -> {back}");
        }
        let a = Radius::new(0.5);
        let b = Radius::from_neg_logloglog(3.0);
        let m = a.lerp(b, 0.5);
        assert!(m < a && b < m);
    }

    #[test]
    fn deep_coordinates_agree() {
        let r = Radius::from_neg_logloglog(12.0);
        assert!((r.neg_logloglog() - 12.0).abs() < 1e-9);
        assert!((r.neg_loglog() - 12f64.exp()).abs() < 1e-8 * 12f64.exp());
        assert_eq!(r.value(), 0.0);
        assert!(r.neg_log().is_infinite());
        let q = Radius::from_neg_loglog(3.0);
        assert!((q.neg_log() - 3f64.exp()).abs() < 1e-12 * 3f64.exp());
    }

    #[test]
    fn ordering_follows_radius() {
        assert!(Radius::new(0.1) < Radius::new(0.2));
        assert!(Radius::from_neg_logloglog(10.0) < Radius::new(1e-300));
    }

    #[test]
    fn scaling_matches_plain_arithmetic() {
        let r = Radius::new(0.3).scaled(0.125);
        assert!((r.value() - 0.0375).abs() < 1e-15);
        let mid = Radius::from_neg_loglog(20.0);
        assert!((mid.log_ratio(mid.scaled(0.125)) - 8f64.ln()).abs() < 1e-6);
        let deeper = Radius::from_neg_logloglog(20.0).scaled(0.125);
        assert!((deeper.neg_logloglog() - 20.0).abs() < 1e-12);
        let huge = Radius::from_neg_logloglog(800.0);
        assert!(huge < deeper && huge.neg_loglog().is_infinite());
    }

    #[test]
    fn log_one_plus_x_large() {
        let r = Radius::from_neg_loglog(100.0);
        assert!((r.ln_one_plus_neg_log() - 100.0).abs() < 1e-12);
    }
}
