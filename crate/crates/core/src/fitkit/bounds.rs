//! Smooth maps between bounded external parameters and unbounded internal
//! ones. Two-sided bounds use x = lo + (hi − lo)(sin u + 1)/2; one-sided
//! bounds use the square-root map x = lo − 1 + √(u² + 1) (mirrored for upper).

use super::Parameter;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transform {
    Free,
    Lower(f64),
    Upper(f64),
    Both(f64, f64),
}

// Keeps a start exactly on a bound off the stationary point of the map.
const BOUND_NUDGE: f64 = 1e-3;

impl Transform {
    pub fn of(p: &Parameter) -> Self {
        match (p.lower, p.upper) {
            (None, None) => Transform::Free,
            (Some(lo), None) => Transform::Lower(lo),
            (None, Some(hi)) => Transform::Upper(hi),
            (Some(lo), Some(hi)) => Transform::Both(lo, hi),
        }
    }

    pub fn to_external(self, u: f64) -> f64 {
        match self {
            Transform::Free => u,
            Transform::Lower(lo) => lo - 1.0 + (u * u + 1.0).sqrt(),
            Transform::Upper(hi) => hi + 1.0 - (u * u + 1.0).sqrt(),
            Transform::Both(lo, hi) => lo + 0.5 * (hi - lo) * (u.sin() + 1.0),
        }
    }

    pub fn to_internal(self, x: f64) -> f64 {
        match self {
            Transform::Free => x,
            Transform::Lower(lo) => {
                let a = x - lo + 1.0;
                (a * a - 1.0).max(0.0).sqrt().max(BOUND_NUDGE)
            }
            Transform::Upper(hi) => {
                let a = hi - x + 1.0;
                (a * a - 1.0).max(0.0).sqrt().max(BOUND_NUDGE)
            }
            Transform::Both(lo, hi) => {
                let s = (2.0 * (x - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0);
                s.asin().clamp(-std::f64::consts::FRAC_PI_2 + BOUND_NUDGE, std::f64::consts::FRAC_PI_2 - BOUND_NUDGE)
            }
        }
    }

    pub fn derivative(self, u: f64) -> f64 {
        match self {
            Transform::Free => 1.0,
            Transform::Lower(_) => u / (u * u + 1.0).sqrt(),
            Transform::Upper(_) => -u / (u * u + 1.0).sqrt(),
            Transform::Both(lo, hi) => 0.5 * (hi - lo) * u.cos(),
        }
    }

    pub fn lower(self) -> f64 {
        match self {
            Transform::Lower(lo) | Transform::Both(lo, _) => lo,
            _ => f64::NEG_INFINITY,
        }
    }

    pub fn upper(self) -> f64 {
        match self {
            Transform::Upper(hi) | Transform::Both(_, hi) => hi,
            _ => f64::INFINITY,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_inside_bounds(frac in 0.01f64..0.99, lo in -10.0f64..10.0, width in 0.1f64..100.0) {
            let hi = lo + width;
            let x = lo + frac * width;
            for t in [Transform::Free, Transform::Lower(lo), Transform::Upper(hi), Transform::Both(lo, hi)] {
                let back = t.to_external(t.to_internal(x));
                prop_assert!((back - x).abs() < 1e-9 * width.max(x.abs()), "{:?}", t);
            }
        }

        #[test]
        fn external_stays_in_bounds(u in -1e3f64..1e3) {
            let t = Transform::Both(-1.0, 2.0);
            let x = t.to_external(u);
            prop_assert!((-1.0..=2.0).contains(&x));
            prop_assert!(Transform::Lower(3.0).to_external(u) >= 3.0);
            prop_assert!(Transform::Upper(3.0).to_external(u) <= 3.0);
        }

        #[test]
        fn derivative_matches_difference(u in -3.0f64..3.0) {
            for t in [Transform::Lower(0.5), Transform::Upper(0.5), Transform::Both(-2.0, 5.0)] {
                let h = 1e-6;
                let fd = (t.to_external(u + h) - t.to_external(u - h)) / (2.0 * h);
                prop_assert!((fd - t.derivative(u)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn starts_on_bounds_are_nudged() {
        let t = Transform::Lower(0.0);
        assert!(t.derivative(t.to_internal(0.0)) > 0.0);
        let t = Transform::Both(0.0, 1.0);
        assert!(t.derivative(t.to_internal(1.0)).abs() > 0.0);
    }
}
