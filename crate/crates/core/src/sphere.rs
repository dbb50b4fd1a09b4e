//! Points of the Riemann sphere in two affine charts, and the chordal metric.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub type Cx = Complex64;

/// Charts switch once the standard representative exceeds this modulus.
pub const CHART_SWITCH: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Chart {
    /// `value` represents the point `z = value`.
    Standard,
    /// `value` represents the point `z = 1 / value` (zero is infinity).
    Reciprocal,
}

/// A point of the Riemann sphere stored with a representative of modulus at most 2.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpherePoint {
    pub chart: Chart,
    pub value: Cx,
}

impl SpherePoint {
    pub const INFINITY: SpherePoint = SpherePoint {
        chart: Chart::Reciprocal,
        value: Cx::new(0.0, 0.0),
    };

    pub fn finite(z: Cx) -> Self {
        if z.norm() > CHART_SWITCH {
            SpherePoint {
                chart: Chart::Reciprocal,
                value: z.inv(),
            }
        } else {
            SpherePoint {
                chart: Chart::Standard,
                value: z,
            }
        }
    }

    pub fn real(x: f64) -> Self {
        Self::finite(Cx::new(x, 0.0))
    }

    /// The point `[z0 : z1]`, i.e. `z0 / z1`. Returns `None` when both vanish.
    pub fn from_homogeneous(z0: Cx, z1: Cx) -> Option<Self> {
        let (a, b) = (z0.norm(), z1.norm());
        if !(a.is_finite() && b.is_finite()) || (a == 0.0 && b == 0.0) {
            return None;
        }
        if a <= CHART_SWITCH * b {
            Some(SpherePoint {
                chart: Chart::Standard,
                value: z0 / z1,
            })
        } else {
            Some(SpherePoint {
                chart: Chart::Reciprocal,
                value: z1 / z0,
            })
        }
    }

    /// Homogeneous coordinates `[z0 : z1]` with `max(|z0|, |z1|) = 1` up to a factor 2.
    pub fn homogeneous(&self) -> (Cx, Cx) {
        match self.chart {
            Chart::Standard => (self.value, Cx::new(1.0, 0.0)),
            Chart::Reciprocal => (Cx::new(1.0, 0.0), self.value),
        }
    }

    pub fn is_infinity(&self) -> bool {
        self.chart == Chart::Reciprocal && self.value == Cx::new(0.0, 0.0)
    }

    /// The affine value, or `None` at infinity.
    pub fn to_finite(&self) -> Option<Cx> {
        match self.chart {
            Chart::Standard => Some(self.value),
            Chart::Reciprocal if self.value == Cx::new(0.0, 0.0) => None,
            Chart::Reciprocal => Some(self.value.inv()),
        }
    }

    /// The same point represented in the given chart (may be unbounded or infinite).
    pub fn in_chart(&self, chart: Chart) -> Cx {
        if chart == self.chart {
            self.value
        } else {
            self.value.inv()
        }
    }

    /// The antipodal-free inversion `z -> 1/z`.
    pub fn reciprocal(&self) -> Self {
        let (z0, z1) = self.homogeneous();
        Self::from_homogeneous(z1, z0).expect("nonzero homogeneous pair")
    }

    pub fn chordal(&self, other: &SpherePoint) -> f64 {
        let (a0, a1) = self.homogeneous();
        let (b0, b1) = other.homogeneous();
        let num = (a0 * b1 - a1 * b0).norm();
        let den = (a0.norm_sqr() + a1.norm_sqr()).sqrt() * (b0.norm_sqr() + b1.norm_sqr()).sqrt();
        (num / den).min(1.0)
    }
}

impl From<Cx> for SpherePoint {
    fn from(z: Cx) -> Self {
        SpherePoint::finite(z)
    }
}

impl std::fmt::Display for SpherePoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.to_finite() {
            None => write!(f, "inf"),
            Some(z) => write!(f, "{}{:+}i", z.re, z.im),
        }
    }
}

/// Chordal distance `|z-w| / sqrt((1+|z|^2)(1+|w|^2))` between finite points.
pub fn chordal(z: Cx, w: Cx) -> f64 {
    SpherePoint::finite(z).chordal(&SpherePoint::finite(w))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_switch_keeps_representatives_bounded() {
        let p = SpherePoint::finite(Cx::new(3.0, 4.0));
        assert_eq!(p.chart, Chart::Reciprocal);
        assert!(p.value.norm() <= 2.0);
        assert!((p.to_finite().unwrap() - Cx::new(3.0, 4.0)).norm() < 1e-14);
        let q = SpherePoint::finite(Cx::new(2.0, 0.0));
        assert_eq!(q.chart, Chart::Standard);
    }

    #[test]
    fn chordal_matches_closed_form() {
        let (z, w) = (Cx::new(0.3, -1.2), Cx::new(5.0, 2.0));
        let direct = (z - w).norm() / ((1.0 + z.norm_sqr()) * (1.0 + w.norm_sqr())).sqrt();
        assert!((chordal(z, w) - direct).abs() < 1e-15);
        let inf = SpherePoint::INFINITY;
        let expect = 1.0 / (1.0 + w.norm_sqr()).sqrt();
        assert!((inf.chordal(&SpherePoint::finite(w)) - expect).abs() < 1e-15);
        assert_eq!(inf.chordal(&inf), 0.0);
    }

    #[test]
    fn reciprocal_swaps_zero_and_infinity() {
        assert!(SpherePoint::finite(Cx::new(0.0, 0.0)).reciprocal().is_infinity());
        assert_eq!(SpherePoint::INFINITY.reciprocal().to_finite(), Some(Cx::new(0.0, 0.0)));
    }
}
